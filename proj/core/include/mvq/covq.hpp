#pragma once

// Channel-optimized Lloyd training of a multi-codebook bank.
//
// One codebook is shared by all N sub-vector positions; position i sees its
// own row of flip probabilities.  The objective of a codebook is the mean,
// over feature vectors, of the summed expected distortion of its N
// sub-vectors under nearest-codeword encoding.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mvq/vq.hpp"

namespace mvq {

// (1/NB) sum mu ln mu over an N x B matrix; entries must lie in (0, 1).
double regularizer(std::span<const double> mu);
// Element-wise derivative (ln mu + 1) / (NB).
std::vector<double> regularizer_grad(std::span<const double> mu);

// Per-position cell statistics of a nearest-codeword partition.
struct CellStats {
  int positions = 0;
  int dim = 0;
  std::size_t cells = 0;
  std::size_t vectors = 0;       // feature vectors accumulated
  std::vector<double> count;     // positions x cells
  std::vector<double> sum;       // positions x cells x dim
  std::vector<double> sum_sq;    // positions x cells, sum of squared norms
};

// Encodes every sub-vector of `data` with `codebook` (positions = dim / D).
CellStats cell_stats(const FeatureSet& data, const Codebook& codebook, unsigned threads = 0);

// Objective of `codebook` when the partition is `stats`; `mu` is N x bits.
double lloyd_objective(const CellStats& stats, const Codebook& codebook, std::span<const double> mu);
// Objective with the partition induced by `codebook` itself.
double lloyd_objective(const FeatureSet& data, const Codebook& codebook, std::span<const double> mu,
                       unsigned threads = 0);

// Channel-weighted centroids for a fixed partition.  Codewords whose weight
// vanishes are kept as they are.
Codebook centroid_update(const CellStats& stats, const Codebook& codebook, std::span<const double> mu);

struct LloydStep {
  Codebook codebook;
  double before = 0.0;  // objective of the input codebook
  double after = 0.0;   // objective of the returned codebook
  int halvings = 0;     // backtracking steps taken (-1: no improving step found)
  int reseeded = 0;     // dead codewords moved onto poorly served sub-vectors
};

// One encoder + centroid iteration.  The centroid move is halved toward the
// input codebook until the re-encoded objective does not increase, so
// `after <= before` always holds.
LloydStep lloyd_step(const Codebook& codebook, std::span<const double> mu, const FeatureSet& data,
                     unsigned threads = 0);

// Mean expected distortion plus lambda * regularizer for a profile.
double profile_objective(const Codebook& codebook, std::span<const double> mu, const FeatureSet& data,
                         double lambda, unsigned threads = 0);

struct RefineResult {
  BitFlipProfile profile;
  std::vector<double> trace;  // objective before the first and after every accepted step
};

// Projected gradient descent on profile_objective with entries clipped to
// [mu_min, 0.5].  A step that would raise the objective is halved.
RefineResult refine_profile(const Codebook& codebook, const BitFlipProfile& profile,
                            const FeatureSet& data, double lambda, double step_size, int iters,
                            unsigned threads = 0);

// Log-spaced per-bit ramp over [mu_min, min(4 mu_min, 0.5)); the MSB of
// every position gets the smallest values.
BitFlipProfile ramp_profile(int positions, int bits, double mu_min, std::uint64_t seed);

enum class InitMode { splitting, random_sample };
enum class ProfileMode { fixed, refined };

InitMode parse_init_mode(const std::string& name);
ProfileMode parse_profile_mode(const std::string& name);

struct TrainConfig {
  int V = 5;
  int D = 4;
  int B = 9;
  int N = 128;
  std::vector<double> mu_min_list{0.0005, 0.001, 0.0045, 0.02, 0.05};
  std::vector<double> lambda_list{0.125, 0.25, 0.5, 1.0, 2.0};
  int max_iters = 30;
  double convergence_tol = 1e-5;
  InitMode init = InitMode::splitting;
  ProfileMode profile_mode = ProfileMode::fixed;
  double refine_step = 1e-4;
  int refine_iters = 10;
  std::uint64_t master_seed = 1;
  unsigned threads = 0;

  void validate() const;
};

struct TrainLogEntry {
  int stage = 0;  // 1-based codebook index
  int iteration = 0;
  double objective = 0.0;
};

struct TrainResult {
  CodebookBank bank;
  std::vector<TrainLogEntry> log;
};

TrainResult train_sequential(const FeatureSet& data, const TrainConfig& config);

void write_train_log_csv(const std::vector<TrainLogEntry>& log, std::ostream& out);

}  // namespace mvq
