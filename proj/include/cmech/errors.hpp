#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmech {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed arguments: dimension mismatches, non-finite entries, bad ranges.
struct InvalidInput : Error {
  using Error::Error;
};

// A matrix expected to be positive semidefinite has an eigenvalue below the
// tolerated negativity allowance.
struct NotPsd : Error {
  using Error::Error;
};

// Covariance matrix failed the SPD factorization.
struct SingularCovariance : Error {
  using Error::Error;
};

// The claimed common mechanism is not answerable from the target.
struct NotCommon : Error {
  using Error::Error;
};

// A query matrix is not answerable from the given common mechanism.
struct NotAnswerable : Error {
  using Error::Error;
};

// An internal algebraic identity failed beyond tolerance; indicates a bug or
// severely ill-conditioned input.
struct InternalInconsistency : Error {
  using Error::Error;
};

// File ingestion failure; carries the 1-based line number.
struct ParseError : Error {
  ParseError(std::size_t line_number, const std::string& what)
      : Error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};

}  // namespace cmech
