#pragma once

// Product vector quantization over a bank of channel-matched codebooks.
//
// A feature vector of length N*D is split into N sub-vectors of length D.
// Each sub-vector is quantized against a 2^B-entry codebook and the winning
// index is transmitted as a fixed-width, big-endian B-bit string.  A bank
// holds V such codebooks; codebook v (1-based) is paired with an N x B
// profile of per-bit flip probabilities it was trained to tolerate.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mvq {

using Bits = std::vector<std::uint8_t>;

// Codebook indices are 1-based throughout (1 = most reliable profile).
using Assignment = std::vector<int>;

class Codebook {
 public:
  Codebook() = default;
  // `flat` holds 2^bits codewords of length `dim`, row-major.
  Codebook(int dim, int bits, std::vector<double> flat);

  int dim() const { return dim_; }
  int bits() const { return bits_; }
  std::size_t size() const { return std::size_t{1} << bits_; }

  std::span<const double> codeword(std::size_t k) const {
    return {data_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<double> codeword(std::size_t k) {
    return {data_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  int dim_ = 0;
  int bits_ = 0;
  std::vector<double> data_;
};

// N x B matrix of bit-flip probabilities with a lower clip.
class BitFlipProfile {
 public:
  BitFlipProfile() = default;
  BitFlipProfile(int positions, int bits, std::vector<double> mu, double mu_min);

  int positions() const { return positions_; }
  int bits() const { return bits_; }
  double mu_min() const { return mu_min_; }

  double operator()(int i, int j) const { return mu_[index(i, j)]; }
  std::span<const double> row(int i) const {
    return {mu_.data() + static_cast<std::size_t>(i) * bits_, static_cast<std::size_t>(bits_)};
  }
  const std::vector<double>& data() const { return mu_; }

  // Replaces the matrix, clipping every entry into [mu_min, 0.5].
  void assign_clipped(std::span<const double> mu);

  friend bool operator==(const BitFlipProfile&, const BitFlipProfile&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * bits_ + static_cast<std::size_t>(j);
  }

  int positions_ = 0;
  int bits_ = 0;
  std::vector<double> mu_;
  double mu_min_ = 0.0;
};

struct CodebookBank {
  int D = 0;
  int B = 0;
  int N = 0;
  int V = 0;
  std::vector<double> mu_min;
  std::vector<double> lambda;
  std::vector<Codebook> codebooks;
  std::vector<BitFlipProfile> profiles;

  // Codebook and profile for 1-based index v.
  const Codebook& codebook(int v) const { return codebooks.at(static_cast<std::size_t>(v - 1)); }
  const BitFlipProfile& profile(int v) const { return profiles.at(static_cast<std::size_t>(v - 1)); }
  double mu(int v, int i, int j) const { return profile(v)(i, j); }

  int feature_dim() const { return N * D; }
  int total_bits() const { return N * B; }

  // Throws FormatError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const CodebookBank&, const CodebookBank&) = default;
};

// Row-major collection of equally sized feature vectors.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::size_t dim, std::vector<double> flat);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return size() == 0; }
  std::span<const double> operator[](std::size_t n) const { return {data_.data() + n * dim_, dim_}; }
  const std::vector<double>& data() const { return data_; }

  void push_back(std::span<const double> row);

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

std::vector<std::vector<double>> split(std::span<const double> features, int dim);

struct Quantized {
  std::size_t index = 0;
  double distance2 = 0.0;  // squared Euclidean distance to the chosen codeword
};

// Nearest codeword; ties go to the smallest index.
Quantized quantize(std::span<const double> sub, const Codebook& codebook);

Bits index_to_bits(std::uint32_t index, int bits);
std::uint32_t bits_to_index(std::span<const std::uint8_t> bits);

// Codeword concatenation for received bit strings under an assignment.
std::vector<double> reconstruct(std::span<const Bits> bits_per_sub, const Assignment& assignment,
                                const CodebookBank& bank);

// Quantized feature z_q (noiseless reconstruction) and its index list.
struct Encoded {
  std::vector<std::uint32_t> indices;
  std::vector<double> quantized;
};
Encoded encode(std::span<const double> features, const Assignment& assignment,
               const CodebookBank& bank);

// JSON persistence, schema version 1.
CodebookBank read_bank(std::istream& in);
CodebookBank read_bank_file(const std::string& path);
void write_bank(const CodebookBank& bank, std::ostream& out);
void write_bank_file(const CodebookBank& bank, const std::string& path);

}  // namespace mvq
