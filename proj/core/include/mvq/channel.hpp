#pragma once

// Bit-level channel models: parallel binary symmetric channels, the
// Gumbel-Softmax relaxation of BSC index corruption, the erfc-based QAM
// bit-error approximation with its numerical inverse, and a Gray-mapped
// square QAM modem used for Monte Carlo checks.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvq/rng.hpp"
#include "mvq/vq.hpp"

namespace mvq {

struct ChannelState {
  std::complex<double> h{1.0, 0.0};
  double sigma2 = 1.0;

  ChannelState() = default;
  ChannelState(std::complex<double> gain, double noise_power);

  double gamma() const { return std::norm(h) / sigma2; }
};

enum class ChannelModel { awgn, rayleigh };

ChannelModel parse_channel_model(const std::string& name);
const char* to_string(ChannelModel model);

// awgn: h = 1.  rayleigh: h ~ CN(0, 1).
ChannelState draw_channel(ChannelModel model, double sigma2, Rng& rng);
ChannelState draw_channel(ChannelModel model, double sigma2, std::uint64_t seed);

// Throws RangeError unless m is even and 2 <= m <= m_max.
void check_mod_order(int m, int m_max = 30);

// ---- parallel BSC ----------------------------------------------------------

double bsc_transition_prob(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received,
                           std::span<const double> mu);

// log P(received index | sent index) for big-endian B-bit indices, B = mu.size().
double bsc_log_transition(std::uint32_t sent, std::uint32_t received, std::span<const double> mu);

// Fills `out` (size 2^B) with log P(k | sent) for every k.  Zero
// probabilities are floored at kLogFloor.
void bsc_log_transition_row(std::uint32_t sent, std::span<const double> mu, std::span<double> out);

inline constexpr double kLogFloor = -745.0;

Bits bsc_sample(std::span<const std::uint8_t> sent, std::span<const double> mu, Rng& rng);
Bits bsc_sample(std::span<const std::uint8_t> sent, std::span<const double> mu, std::uint64_t seed);

// ---- Gumbel-Softmax relaxation --------------------------------------------

struct GumbelConfig {
  double tau = 0.5;
  double anneal_factor = 0.997004495503373;  // exp(-0.003)
  int anneal_period = 100;

  // Temperature after `iteration` training iterations.
  double tau_at(long iteration) const;
  void validate() const;
};

struct SoftReconstruction {
  std::vector<double> weights;  // 2^B simplex
  std::vector<double> vector;   // sum_k weights[k] * c_k
};

SoftReconstruction gumbel_soft_reconstruct(std::uint32_t sent, const Codebook& codebook,
                                           std::span<const double> mu, double tau, Rng& rng);
SoftReconstruction gumbel_soft_reconstruct(std::uint32_t sent, const Codebook& codebook,
                                           std::span<const double> mu, double tau,
                                           std::uint64_t seed);

// ---- QAM bit-error approximation ------------------------------------------

// Average bit-error probability of Gray-mapped square 2^m-QAM at symbol
// power p and gain-to-noise ratio gamma.  Not clamped: exceeds 0.5 near p = 0
// for m >= 4, which keeps the function strictly decreasing.
double ber_approx(double p, int m, double gamma);

// Unique p >= 0 with ber_approx(p, m, gamma) == target, by bisection.
double ber_inverse(double target, int m, double gamma);

// ---- Gray-mapped square QAM modem -----------------------------------------

// Unit average energy constellation point for m bits (first m/2 bits on I,
// remaining m/2 on Q, reflected Gray code per axis), scaled by sqrt(p).
std::complex<double> qam_modulate(std::span<const std::uint8_t> bits, int m, double p);

// Equalizes by h, removes sqrt(p) and writes the Gray demapping of the
// nearest constellation point into `out` (size m).
void qam_detect(std::complex<double> y, const ChannelState& state, int m, double p,
                std::span<std::uint8_t> out);
Bits qam_detect(std::complex<double> y, const ChannelState& state, int m, double p);

}  // namespace mvq
