#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cmech/matrix.hpp"
#include "cmech/mechanism.hpp"

namespace cmech {

// Categorical record domain. Cell ordering is fixed mixed-radix with the
// last attribute varying fastest, so query matrices are reproducible across
// runs and implementations.
struct Domain {
  std::vector<std::string> names;
  std::vector<std::size_t> cards;

  static Domain of(std::vector<std::size_t> cards);

  std::size_t attributes() const { return cards.size(); }
  std::size_t size() const;
  std::size_t cell_index(const std::vector<std::size_t>& values) const;
  std::vector<std::size_t> cell_values(std::size_t index) const;

  void validate() const;
};

// 0/1 marginal query matrix: one row per marginal cell per subset, stacked
// in subset order then mixed-radix cell order. Entry 1 iff the domain cell
// projects onto that marginal cell.
Matrix marginal_matrix(const Domain& domain,
                       const std::vector<std::vector<std::size_t>>& subsets);

// Partition of the age range [0, 103) into half-open integer buckets.
struct Bucketization {
  std::string name;
  std::vector<std::pair<int, int>> ranges;  // [lo, hi)

  static Bucketization total();
  static Bucketization age4();
  static Bucketization age9();
  static Bucketization age23();

  std::size_t buckets() const { return ranges.size(); }
  void validate() const;
};

inline constexpr int kAgeValues = 103;
inline constexpr int kGenderValues = 2;

// Gender-by-age-bucket query matrix over the 2 x 103 gender-age domain:
// row (g, k) sums the ages of bucket k for gender g.
Matrix bucketization_matrix(const Bucketization& b);

// CSV histogram ingestion. Accepts either `cell_index,count` rows or
// attribute-tuple rows `attr0,...,attrK,count` (header required). Missing
// cells default to zero; duplicate cells are summed. Malformed rows raise
// ParseError with the 1-based line number.
DataVector ingest_histogram(std::istream& in, const Domain& domain);
DataVector ingest_histogram_file(const std::string& path, const Domain& domain);
void export_histogram(std::ostream& out, const DataVector& x);

// Block-total distribution for synthetic corpora.
struct SizeDistribution {
  enum class Type { LogUniform, Bimodal, Fixed };
  Type type = Type::LogUniform;
  // LogUniform: totals in [min_total, max_total].
  double min_total = 10.0;
  double max_total = 10000.0;
  // Bimodal: sparse/dense totals with P(dense) = p_high.
  double low_total = 10.0;
  double high_total = 10000.0;
  double p_high = 0.5;
  // Fixed: every block has this total.
  double fixed_total = 1000.0;

  void validate() const;
  double expected_total() const;
};

// Deterministic synthetic corpus: block totals follow the configured
// distribution, cells are multinomial (uniform probabilities) within a block.
std::vector<DataVector> synth_blocks(const Domain& domain,
                                     std::size_t num_blocks,
                                     const SizeDistribution& dist,
                                     std::uint64_t seed);

}  // namespace cmech
