#include "mvq/distortion.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "mvq/channel.hpp"
#include "mvq/error.hpp"
#include "parallel.hpp"

namespace mvq {

namespace {

void check_shapes(std::span<const double> sub, const Codebook& codebook, std::span<const double> mu) {
  if (sub.size() != static_cast<std::size_t>(codebook.dim())) {
    throw DimensionError("sub-vector length does not match codebook dimension");
  }
  if (mu.size() != static_cast<std::size_t>(codebook.bits())) {
    throw DimensionError("flip probability row must have B entries");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double diff = a[t] - b[t];
    d2 += diff * diff;
  }
  return d2;
}

}  // namespace

double expected_distortion(std::span<const double> sub, const Codebook& codebook,
                           std::span<const double> mu) {
  check_shapes(sub, codebook, mu);
  for (double m : mu) {
    if (!(m >= 0.0 && m <= 0.5)) throw RangeError("bit-flip probability outside [0, 0.5]");
  }
  const auto sent = static_cast<std::uint32_t>(quantize(sub, codebook).index);
  thread_local std::vector<double> logp;
  logp.resize(codebook.size());
  bsc_log_transition_row(sent, mu, logp);
  double total = 0.0;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    if (logp[k] <= kLogFloor) continue;
    total += std::exp(logp[k]) * squared_distance(codebook.codeword(k), sub);
  }
  return total;
}

std::vector<double> distortion_grad_mu(std::span<const double> sub, const Codebook& codebook,
                                       std::span<const double> mu) {
  check_shapes(sub, codebook, mu);
  for (double m : mu) {
    if (!(m > 0.0 && m <= 0.5)) throw RangeError("gradient requires flip probabilities in (0, 0.5]");
  }
  const auto b = mu.size();
  const auto sent = static_cast<std::uint32_t>(quantize(sub, codebook).index);
  std::vector<double> logp(codebook.size());
  bsc_log_transition_row(sent, mu, logp);
  std::vector<double> flip_w(b), stay_w(b);
  for (std::size_t j = 0; j < b; ++j) {
    flip_w[j] = 1.0 / mu[j];
    stay_w[j] = -1.0 / (1.0 - mu[j]);
  }
  std::vector<double> grad(b, 0.0);
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const double w = std::exp(logp[k]) * squared_distance(codebook.codeword(k), sub);
    const auto diff = static_cast<std::uint32_t>(k) ^ sent;
    for (std::size_t j = 0; j < b; ++j) {
      const bool flipped = (diff >> (b - 1 - j)) & 1U;
      grad[j] += w * (flipped ? flip_w[j] : stay_w[j]);
    }
  }
  return grad;
}

DistortionTable::DistortionTable(int codebooks, int positions, std::vector<double> values,
                                 std::size_t dataset_size)
    : codebooks_(codebooks),
      positions_(positions),
      values_(std::move(values)),
      dataset_size_(dataset_size) {
  if (codebooks_ <= 0 || positions_ <= 0) throw RangeError("table shape must be positive");
  if (values_.size() != static_cast<std::size_t>(codebooks_) * static_cast<std::size_t>(positions_)) {
    throw DimensionError("table needs V*N values");
  }
  for (double x : values_) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw RangeError("table entries must be finite and >= 0");
  }
}

double DistortionTable::total(const Assignment& assignment) const {
  if (assignment.size() != static_cast<std::size_t>(positions_)) {
    throw DimensionError("assignment length must equal N");
  }
  double sum = 0.0;
  for (int i = 0; i < positions_; ++i) sum += (*this)(assignment[static_cast<std::size_t>(i)], i);
  return sum;
}

DistortionTable build_table(const FeatureSet& dataset, const CodebookBank& bank, unsigned threads) {
  if (dataset.empty()) throw RangeError("cannot build a distortion table from an empty dataset");
  if (dataset.dim() != static_cast<std::size_t>(bank.feature_dim())) {
    throw DimensionError("dataset dimension " + std::to_string(dataset.dim()) +
                         " does not match bank N*D = " + std::to_string(bank.feature_dim()));
  }
  const std::size_t cells = static_cast<std::size_t>(bank.V) * static_cast<std::size_t>(bank.N);
  const auto d = static_cast<std::size_t>(bank.D);
  std::vector<double> values(cells, 0.0);

  detail::parallel_for(cells, threads, [&](std::size_t cell) {
    const int v = static_cast<int>(cell / static_cast<std::size_t>(bank.N)) + 1;
    const int i = static_cast<int>(cell % static_cast<std::size_t>(bank.N));
    const auto& cb = bank.codebook(v);
    const auto mu = bank.profile(v).row(i);
    double sum = 0.0;
    for (std::size_t n = 0; n < dataset.size(); ++n) {
      sum += expected_distortion(dataset[n].subspan(static_cast<std::size_t>(i) * d, d), cb, mu);
    }
    values[cell] = sum / static_cast<double>(dataset.size());
  });
  return {bank.V, bank.N, std::move(values), dataset.size()};
}

void write_table_csv(const DistortionTable& table, std::ostream& out) {
  out << "v,i,value\n";
  out << std::setprecision(17);
  for (int v = 1; v <= table.codebooks(); ++v) {
    for (int i = 0; i < table.positions(); ++i) out << v << ',' << i << ',' << table(v, i) << '\n';
  }
}

void write_table_file(const DistortionTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write table file " + path);
  write_table_csv(table, out);
}

DistortionTable read_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("table: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "v,i,value") throw FormatError("table: header must be \"v,i,value\"");
  std::map<std::pair<int, int>, double> cells;
  int max_v = 0;
  int max_i = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    int v = 0;
    int i = 0;
    double value = 0.0;
    char c1 = 0;
    char c2 = 0;
    if (!(row >> v >> c1 >> i >> c2 >> value) || c1 != ',' || c2 != ',') {
      throw FormatError("table: malformed row at line " + std::to_string(lineno));
    }
    if (v < 1 || i < 0) throw FormatError("table: index out of range at line " + std::to_string(lineno));
    if (!cells.emplace(std::make_pair(v, i), value).second) {
      throw FormatError("table: duplicate cell at line " + std::to_string(lineno));
    }
    max_v = std::max(max_v, v);
    max_i = std::max(max_i, i);
  }
  const int positions = max_i + 1;
  if (cells.empty() || cells.size() != static_cast<std::size_t>(max_v) * static_cast<std::size_t>(positions)) {
    throw FormatError("table: cells do not form a complete V x N grid");
  }
  std::vector<double> values;
  values.reserve(cells.size());
  for (const auto& [key, value] : cells) values.push_back(value);
  try {
    return {max_v, positions, std::move(values)};
  } catch (const Error& e) {
    throw FormatError(std::string("table: ") + e.what());
  }
}

DistortionTable read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open table file " + path);
  return read_table_csv(in);
}

}  // namespace mvq
