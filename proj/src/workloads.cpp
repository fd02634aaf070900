#include "cmech/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmech/errors.hpp"
#include "cmech/rng.hpp"

namespace cmech {

Domain Domain::of(std::vector<std::size_t> cards) {
  Domain d;
  d.cards = std::move(cards);
  d.names.reserve(d.cards.size());
  for (std::size_t i = 0; i < d.cards.size(); ++i)
    d.names.push_back("attr" + std::to_string(i));
  d.validate();
  return d;
}

void Domain::validate() const {
  if (cards.empty()) throw InvalidInput("domain needs at least one attribute");
  if (names.size() != cards.size()) {
    throw InvalidInput("domain names/cardinalities length mismatch");
  }
  for (std::size_t c : cards) {
    if (c < 1) throw InvalidInput("attribute cardinalities must be at least 1");
  }
}

std::size_t Domain::size() const {
  std::size_t n = 1;
  for (std::size_t c : cards) n *= c;
  return n;
}

std::size_t Domain::cell_index(const std::vector<std::size_t>& values) const {
  if (values.size() != cards.size()) {
    throw InvalidInput("cell_index: wrong number of attribute values");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    if (values[i] >= cards[i]) throw InvalidInput("cell_index: value out of range");
    idx = idx * cards[i] + values[i];
  }
  return idx;
}

std::vector<std::size_t> Domain::cell_values(std::size_t index) const {
  std::vector<std::size_t> values(cards.size());
  for (std::size_t i = cards.size(); i-- > 0;) {
    values[i] = index % cards[i];
    index /= cards[i];
  }
  return values;
}

Matrix marginal_matrix(const Domain& domain,
                       const std::vector<std::vector<std::size_t>>& subsets) {
  domain.validate();
  const std::size_t d = domain.size();
  std::size_t total_rows = 0;
  for (const auto& subset : subsets) {
    std::size_t cells = 1;
    for (std::size_t attr : subset) {
      if (attr >= domain.attributes()) {
        throw InvalidInput("marginal_matrix: unknown attribute index");
      }
      cells *= domain.cards[attr];
    }
    total_rows += cells;
  }

  Matrix m(total_rows, d);
  std::size_t row0 = 0;
  for (const auto& subset : subsets) {
    std::size_t cells = 1;
    for (std::size_t attr : subset) cells *= domain.cards[attr];
    for (std::size_t cell = 0; cell < d; ++cell) {
      const auto values = domain.cell_values(cell);
      // Mixed-radix index of this cell's projection onto the subset.
      std::size_t marginal_cell = 0;
      for (std::size_t attr : subset)
        marginal_cell = marginal_cell * domain.cards[attr] + values[attr];
      m(row0 + marginal_cell, cell) = 1.0;
    }
    row0 += cells;
  }
  return m;
}

namespace {

Bucketization make_bucketization(std::string name, std::vector<int> bounds) {
  Bucketization b;
  b.name = std::move(name);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i)
    b.ranges.emplace_back(bounds[i], bounds[i + 1]);
  b.validate();
  return b;
}

}  // namespace

Bucketization Bucketization::total() {
  return make_bucketization("Total", {0, 103});
}

Bucketization Bucketization::age4() {
  return make_bucketization("Age4", {0, 18, 45, 65, 103});
}

Bucketization Bucketization::age9() {
  return make_bucketization("Age9", {0, 5, 18, 25, 35, 45, 55, 65, 75, 103});
}

Bucketization Bucketization::age23() {
  return make_bucketization(
      "Age23", {0,  5,  10, 15, 18, 20, 21, 22, 25, 30, 35, 40,
                45, 50, 55, 60, 62, 65, 67, 70, 75, 80, 85, 103});
}

void Bucketization::validate() const {
  if (ranges.empty()) throw InvalidInput("bucketization has no buckets");
  int expected = 0;
  for (const auto& [lo, hi] : ranges) {
    if (lo != expected || hi <= lo) {
      throw InvalidInput("bucketization ranges must be contiguous and increasing");
    }
    expected = hi;
  }
  if (expected != kAgeValues) {
    throw InvalidInput("bucketization must cover ages [0, 103)");
  }
}

Matrix bucketization_matrix(const Bucketization& b) {
  b.validate();
  const std::size_t nb = b.buckets();
  Matrix m(kGenderValues * nb, kGenderValues * kAgeValues);
  for (int g = 0; g < kGenderValues; ++g) {
    for (std::size_t k = 0; k < nb; ++k) {
      const std::size_t row = static_cast<std::size_t>(g) * nb + k;
      for (int age = b.ranges[k].first; age < b.ranges[k].second; ++age) {
        m(row, static_cast<std::size_t>(g) * kAgeValues +
                   static_cast<std::size_t>(age)) = 1.0;
      }
    }
  }
  return m;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos
                         ? std::string{}
                         : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::int64_t parse_integer(const std::string& s, std::size_t line_number,
                           const char* what) {
  try {
    std::size_t consumed = 0;
    const long long v = std::stoll(s, &consumed);
    if (consumed != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line_number, std::string("malformed ") + what + " '" + s + "'");
  }
}

}  // namespace

DataVector ingest_histogram(std::istream& in, const Domain& domain) {
  domain.validate();
  const std::size_t d = domain.size();
  std::vector<std::int64_t> counts(d, 0);

  std::string line;
  std::size_t line_number = 0;
  if (!std::getline(in, line)) {
    throw ParseError(1, "missing header row");
  }
  ++line_number;
  const auto header = split_csv_line(line);
  const bool index_mode = header.size() == 2 && header[0] == "cell_index";
  const std::size_t expected_fields =
      index_mode ? 2 : domain.attributes() + 1;
  if (!index_mode && header.size() != expected_fields) {
    throw ParseError(1, "header must be cell_index,count or one column per attribute plus count");
  }

  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != expected_fields) {
      throw ParseError(line_number, "wrong number of fields");
    }
    const std::int64_t count =
        parse_integer(fields.back(), line_number, "count");
    if (count < 0) throw ParseError(line_number, "negative count");

    std::size_t cell;
    if (index_mode) {
      const std::int64_t idx = parse_integer(fields[0], line_number, "cell index");
      if (idx < 0 || static_cast<std::size_t>(idx) >= d) {
        throw ParseError(line_number, "cell index out of range");
      }
      cell = static_cast<std::size_t>(idx);
    } else {
      std::vector<std::size_t> values(domain.attributes());
      for (std::size_t i = 0; i < domain.attributes(); ++i) {
        const std::int64_t v = parse_integer(fields[i], line_number, "attribute value");
        if (v < 0 || static_cast<std::size_t>(v) >= domain.cards[i]) {
          throw ParseError(line_number, "attribute value out of range");
        }
        values[i] = static_cast<std::size_t>(v);
      }
      cell = domain.cell_index(values);
    }
    counts[cell] += count;
  }
  return DataVector(std::move(counts));
}

DataVector ingest_histogram_file(const std::string& path, const Domain& domain) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open histogram file: " + path);
  return ingest_histogram(in, domain);
}

void export_histogram(std::ostream& out, const DataVector& x) {
  out << "cell_index,count\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.counts[i] != 0) out << i << ',' << x.counts[i] << '\n';
  }
}

void SizeDistribution::validate() const {
  switch (type) {
    case Type::LogUniform:
      if (!(min_total > 0.0 && max_total >= min_total)) {
        throw InvalidInput("loguniform totals need 0 < min <= max");
      }
      break;
    case Type::Bimodal:
      if (!(low_total >= 0.0 && high_total >= low_total) || p_high < 0.0 ||
          p_high > 1.0) {
        throw InvalidInput("bimodal totals need 0 <= low <= high and p_high in [0,1]");
      }
      break;
    case Type::Fixed:
      if (fixed_total < 0.0) throw InvalidInput("fixed total must be nonnegative");
      break;
  }
}

double SizeDistribution::expected_total() const {
  switch (type) {
    case Type::LogUniform:
      if (max_total == min_total) return min_total;
      return (max_total - min_total) / std::log(max_total / min_total);
    case Type::Bimodal:
      return (1.0 - p_high) * low_total + p_high * high_total;
    case Type::Fixed:
      return fixed_total;
  }
  return 0.0;
}

std::vector<DataVector> synth_blocks(const Domain& domain,
                                     std::size_t num_blocks,
                                     const SizeDistribution& dist,
                                     std::uint64_t seed) {
  domain.validate();
  dist.validate();
  const std::size_t d = domain.size();
  std::vector<DataVector> blocks;
  blocks.reserve(num_blocks);
  for (std::size_t block = 0; block < num_blocks; ++block) {
    Rng rng = Rng::keyed(seed, block);
    double total_real = 0.0;
    switch (dist.type) {
      case SizeDistribution::Type::LogUniform: {
        const double u = rng.next_double();
        total_real = dist.min_total *
                     std::pow(dist.max_total / dist.min_total, u);
        break;
      }
      case SizeDistribution::Type::Bimodal:
        total_real = rng.next_double() <= dist.p_high ? dist.high_total
                                                      : dist.low_total;
        break;
      case SizeDistribution::Type::Fixed:
        total_real = dist.fixed_total;
        break;
    }
    const auto total = static_cast<std::int64_t>(std::llround(total_real));
    std::vector<std::int64_t> counts(d, 0);
    for (std::int64_t r = 0; r < total; ++r) {
      const std::size_t cell = static_cast<std::size_t>(
          rng.next_double() * static_cast<double>(d));
      counts[std::min(cell, d - 1)] += 1;
    }
    blocks.emplace_back(std::move(counts));
  }
  return blocks;
}

}  // namespace cmech
