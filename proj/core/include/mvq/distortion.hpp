#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvq/vq.hpp"

namespace mvq {

// Expected squared error between a sub-vector and its reconstruction after
// the nearest codeword index crosses B parallel BSCs with flip
// probabilities `mu`.  Exact sum over all 2^B received indices.
double expected_distortion(std::span<const double> sub, const Codebook& codebook,
                           std::span<const double> mu);

// Analytic d(expected_distortion)/d(mu_j); every mu_j must lie in (0, 0.5].
std::vector<double> distortion_grad_mu(std::span<const double> sub, const Codebook& codebook,
                                       std::span<const double> mu);

// V x N table of dataset-averaged expected distortions.
class DistortionTable {
 public:
  DistortionTable() = default;
  DistortionTable(int codebooks, int positions, std::vector<double> values,
                  std::size_t dataset_size = 0);

  int codebooks() const { return codebooks_; }
  int positions() const { return positions_; }
  std::size_t dataset_size() const { return dataset_size_; }

  // v is 1-based, i is 0-based.
  double operator()(int v, int i) const {
    return values_[static_cast<std::size_t>(v - 1) * static_cast<std::size_t>(positions_) +
                   static_cast<std::size_t>(i)];
  }
  const std::vector<double>& values() const { return values_; }

  double total(const Assignment& assignment) const;

  friend bool operator==(const DistortionTable& a, const DistortionTable& b) {
    return a.codebooks_ == b.codebooks_ && a.positions_ == b.positions_ && a.values_ == b.values_;
  }

 private:
  int codebooks_ = 0;
  int positions_ = 0;
  std::vector<double> values_;
  std::size_t dataset_size_ = 0;
};

// threads == 0 picks std::thread::hardware_concurrency().
DistortionTable build_table(const FeatureSet& dataset, const CodebookBank& bank,
                            unsigned threads = 0);

// CSV with header "v,i,value", v 1-based, i 0-based, 17 significant digits.
void write_table_csv(const DistortionTable& table, std::ostream& out);
void write_table_file(const DistortionTable& table, const std::string& path);
DistortionTable read_table_csv(std::istream& in);
DistortionTable read_table_file(const std::string& path);

}  // namespace mvq
