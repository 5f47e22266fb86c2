#include "mvq/vq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvq/error.hpp"

namespace mvq {

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Codebook::Codebook(int dim, int bits, std::vector<double> flat)
    : dim_(dim), bits_(bits), data_(std::move(flat)) {
  if (dim_ <= 0) throw RangeError("codebook dimension must be positive");
  if (bits_ <= 0 || bits_ > 24) throw RangeError("codebook bits must lie in [1, 24]");
  if (data_.size() != size() * static_cast<std::size_t>(dim_)) {
    throw DimensionError("codebook needs " + std::to_string(size()) + " codewords of length " +
                         std::to_string(dim_) + ", got " + std::to_string(data_.size()) +
                         " values");
  }
  if (!all_finite(data_)) throw RangeError("codebook entries must be finite");
}

BitFlipProfile::BitFlipProfile(int positions, int bits, std::vector<double> mu, double mu_min)
    : positions_(positions), bits_(bits), mu_(std::move(mu)), mu_min_(mu_min) {
  if (positions_ <= 0 || bits_ <= 0) throw RangeError("profile shape must be positive");
  if (!(mu_min_ > 0.0 && mu_min_ < 0.5)) throw RangeError("mu_min must lie in (0, 0.5)");
  if (mu_.size() != static_cast<std::size_t>(positions_) * static_cast<std::size_t>(bits_)) {
    throw DimensionError("profile needs " + std::to_string(positions_) + "x" +
                         std::to_string(bits_) + " entries, got " + std::to_string(mu_.size()));
  }
  for (double m : mu_) {
    if (!(m >= mu_min_ && m <= 0.5)) {
      throw RangeError("profile entry " + std::to_string(m) + " outside [mu_min, 0.5]");
    }
  }
}

void BitFlipProfile::assign_clipped(std::span<const double> mu) {
  if (mu.size() != mu_.size()) throw DimensionError("profile size mismatch");
  std::transform(mu.begin(), mu.end(), mu_.begin(),
                 [this](double m) { return std::clamp(m, mu_min_, 0.5); });
}

void CodebookBank::validate() const {
  if (D <= 0 || B <= 0 || N <= 0 || V <= 0) throw FormatError("bank: D, B, N, V must be positive");
  const auto v = static_cast<std::size_t>(V);
  if (mu_min.size() != v) throw FormatError("bank: mu_min must have V entries");
  if (lambda.size() != v) throw FormatError("bank: lambda must have V entries");
  if (codebooks.size() != v) throw FormatError("bank: expected V codebooks");
  if (profiles.size() != v) throw FormatError("bank: expected V profiles");
  for (std::size_t k = 1; k < v; ++k) {
    if (!(mu_min[k] > mu_min[k - 1])) throw FormatError("bank: mu_min must be strictly increasing");
    if (!(lambda[k] > lambda[k - 1])) throw FormatError("bank: lambda must be strictly increasing");
  }
  for (std::size_t k = 0; k < v; ++k) {
    const auto& cb = codebooks[k];
    if (cb.dim() != D || cb.bits() != B) {
      throw FormatError("bank: codebook " + std::to_string(k + 1) + " does not match (D, B)");
    }
    const auto& pr = profiles[k];
    if (pr.positions() != N || pr.bits() != B) {
      throw FormatError("bank: profile " + std::to_string(k + 1) + " does not match (N, B)");
    }
    if (pr.mu_min() != mu_min[k]) {
      throw FormatError("bank: profile " + std::to_string(k + 1) + " mu_min disagrees with list");
    }
  }
}

FeatureSet::FeatureSet(std::size_t dim, std::vector<double> flat)
    : dim_(dim), data_(std::move(flat)) {
  if (dim_ == 0) throw RangeError("feature dimension must be positive");
  if (data_.size() % dim_ != 0) throw DimensionError("feature data is not a whole number of rows");
}

void FeatureSet::push_back(std::span<const double> row) {
  if (dim_ == 0) dim_ = row.size();
  if (row.size() != dim_ || dim_ == 0) throw DimensionError("feature row length mismatch");
  data_.insert(data_.end(), row.begin(), row.end());
}

std::vector<std::vector<double>> split(std::span<const double> features, int dim) {
  if (dim <= 0) throw RangeError("sub-vector dimension must be positive");
  const auto d = static_cast<std::size_t>(dim);
  if (features.size() % d != 0) {
    throw DimensionError("feature length " + std::to_string(features.size()) +
                         " is not divisible by " + std::to_string(dim));
  }
  std::vector<std::vector<double>> out;
  out.reserve(features.size() / d);
  for (std::size_t off = 0; off < features.size(); off += d) {
    out.emplace_back(features.begin() + static_cast<std::ptrdiff_t>(off),
                     features.begin() + static_cast<std::ptrdiff_t>(off + d));
  }
  return out;
}

Quantized quantize(std::span<const double> sub, const Codebook& codebook) {
  if (sub.size() != static_cast<std::size_t>(codebook.dim())) {
    throw DimensionError("sub-vector length " + std::to_string(sub.size()) +
                         " does not match codebook dimension " + std::to_string(codebook.dim()));
  }
  Quantized best{0, INFINITY};
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const auto c = codebook.codeword(k);
    double d2 = 0.0;
    for (std::size_t t = 0; t < sub.size(); ++t) {
      const double diff = sub[t] - c[t];
      d2 += diff * diff;
    }
    if (d2 < best.distance2) best = {k, d2};
  }
  return best;
}

Bits index_to_bits(std::uint32_t index, int bits) {
  if (bits <= 0 || bits > 31) throw RangeError("bit width must lie in [1, 31]");
  if (index >= (std::uint32_t{1} << bits)) {
    throw RangeError("index " + std::to_string(index) + " does not fit in " +
                     std::to_string(bits) + " bits");
  }
  Bits out(static_cast<std::size_t>(bits));
  for (int j = 0; j < bits; ++j) out[static_cast<std::size_t>(j)] = (index >> (bits - 1 - j)) & 1U;
  return out;
}

std::uint32_t bits_to_index(std::span<const std::uint8_t> bits) {
  if (bits.empty() || bits.size() > 31) throw DimensionError("bit string length must lie in [1, 31]");
  std::uint32_t index = 0;
  for (auto b : bits) {
    if (b > 1) throw RangeError("bit values must be 0 or 1");
    index = (index << 1) | b;
  }
  return index;
}

std::vector<double> reconstruct(std::span<const Bits> bits_per_sub, const Assignment& assignment,
                                const CodebookBank& bank) {
  const auto n = static_cast<std::size_t>(bank.N);
  if (bits_per_sub.size() != n) throw DimensionError("expected one bit string per sub-vector");
  if (assignment.size() != n) throw DimensionError("assignment length must equal N");
  std::vector<double> out;
  out.reserve(n * static_cast<std::size_t>(bank.D));
  for (std::size_t i = 0; i < n; ++i) {
    const int v = assignment[i];
    if (v < 1 || v > bank.V) throw RangeError("codebook index " + std::to_string(v) + " out of range");
    if (bits_per_sub[i].size() != static_cast<std::size_t>(bank.B)) {
      throw DimensionError("bit string " + std::to_string(i) + " must have B bits");
    }
    const auto c = bank.codebook(v).codeword(bits_to_index(bits_per_sub[i]));
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

Encoded encode(std::span<const double> features, const Assignment& assignment,
               const CodebookBank& bank) {
  if (features.size() != static_cast<std::size_t>(bank.feature_dim())) {
    throw DimensionError("feature length " + std::to_string(features.size()) +
                         " does not match bank N*D = " + std::to_string(bank.feature_dim()));
  }
  if (assignment.size() != static_cast<std::size_t>(bank.N)) {
    throw DimensionError("assignment length must equal N");
  }
  const auto d = static_cast<std::size_t>(bank.D);
  Encoded enc;
  enc.indices.reserve(static_cast<std::size_t>(bank.N));
  enc.quantized.reserve(features.size());
  for (std::size_t i = 0; i < static_cast<std::size_t>(bank.N); ++i) {
    const int v = assignment[i];
    if (v < 1 || v > bank.V) throw RangeError("codebook index " + std::to_string(v) + " out of range");
    const auto& cb = bank.codebook(v);
    const auto q = quantize(features.subspan(i * d, d), cb);
    enc.indices.push_back(static_cast<std::uint32_t>(q.index));
    const auto c = cb.codeword(q.index);
    enc.quantized.insert(enc.quantized.end(), c.begin(), c.end());
  }
  return enc;
}

}  // namespace mvq
