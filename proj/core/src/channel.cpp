#include "mvq/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mvq/error.hpp"

namespace mvq {

ChannelState::ChannelState(std::complex<double> gain, double noise_power)
    : h(gain), sigma2(noise_power) {
  if (!(sigma2 > 0.0)) throw RangeError("noise power must be positive");
}

ChannelModel parse_channel_model(const std::string& name) {
  if (name == "awgn") return ChannelModel::awgn;
  if (name == "rayleigh") return ChannelModel::rayleigh;
  throw RangeError("unknown channel model '" + name + "' (expected awgn or rayleigh)");
}

const char* to_string(ChannelModel model) {
  return model == ChannelModel::awgn ? "awgn" : "rayleigh";
}

ChannelState draw_channel(ChannelModel model, double sigma2, Rng& rng) {
  if (model == ChannelModel::awgn) return {{1.0, 0.0}, sigma2};
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {{re, im}, sigma2};
}

ChannelState draw_channel(ChannelModel model, double sigma2, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return draw_channel(model, sigma2, rng);
}

void check_mod_order(int m, int m_max) {
  if (m < 2 || m % 2 != 0 || m > m_max) {
    throw RangeError("modulation order " + std::to_string(m) + " must be even and within [2, " +
                     std::to_string(m_max) + "]");
  }
}

// ---- parallel BSC ----------------------------------------------------------

namespace {

void check_mu(std::span<const double> mu) {
  for (double m : mu) {
    if (!(m >= 0.0 && m <= 0.5)) throw RangeError("bit-flip probability outside [0, 0.5]");
  }
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kLogFloor; }

}  // namespace

double bsc_transition_prob(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received,
                           std::span<const double> mu) {
  if (sent.size() != received.size() || sent.size() != mu.size()) {
    throw DimensionError("bit strings and flip probabilities must share length B");
  }
  check_mu(mu);
  double p = 1.0;
  for (std::size_t j = 0; j < mu.size(); ++j) p *= (sent[j] != received[j]) ? mu[j] : 1.0 - mu[j];
  return p;
}

double bsc_log_transition(std::uint32_t sent, std::uint32_t received, std::span<const double> mu) {
  const auto b = static_cast<int>(mu.size());
  const std::uint32_t diff = sent ^ received;
  double lp = 0.0;
  for (int j = 0; j < b; ++j) {
    const bool flipped = (diff >> (b - 1 - j)) & 1U;
    lp += flipped ? safe_log(mu[static_cast<std::size_t>(j)])
                  : safe_log(1.0 - mu[static_cast<std::size_t>(j)]);
  }
  return std::max(lp, kLogFloor);
}

void bsc_log_transition_row(std::uint32_t sent, std::span<const double> mu, std::span<double> out) {
  const auto b = mu.size();
  if (out.size() != (std::size_t{1} << b)) throw DimensionError("output row must have 2^B entries");
  // Build log P(diff) for every flip pattern by doubling, then permute by XOR.
  thread_local std::vector<double> by_diff;
  by_diff.assign(out.size(), 0.0);
  std::size_t filled = 1;
  for (std::size_t j = b; j-- > 0;) {
    // Bit j (big-endian position) carries weight 2^(b-1-j).
    const double stay = safe_log(1.0 - mu[j]);
    const double flip = safe_log(mu[j]);
    for (std::size_t k = 0; k < filled; ++k) {
      by_diff[k + filled] = by_diff[k] + flip;
      by_diff[k] += stay;
    }
    filled *= 2;
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::max(by_diff[k ^ sent], kLogFloor);
  }
}

Bits bsc_sample(std::span<const std::uint8_t> sent, std::span<const double> mu, Rng& rng) {
  if (sent.size() != mu.size()) throw DimensionError("bit string and flip probabilities differ in length");
  check_mu(mu);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Bits out(sent.begin(), sent.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (u(rng) < mu[j]) out[j] ^= 1U;
  }
  return out;
}

Bits bsc_sample(std::span<const std::uint8_t> sent, std::span<const double> mu, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return bsc_sample(sent, mu, rng);
}

// ---- Gumbel-Softmax --------------------------------------------------------

double GumbelConfig::tau_at(long iteration) const {
  return tau * std::pow(anneal_factor, static_cast<double>(iteration / anneal_period));
}

void GumbelConfig::validate() const {
  if (!(tau > 0.0)) throw RangeError("tau must be positive");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) throw RangeError("anneal factor must lie in (0, 1]");
  if (anneal_period <= 0) throw RangeError("anneal period must be positive");
}

SoftReconstruction gumbel_soft_reconstruct(std::uint32_t sent, const Codebook& codebook,
                                           std::span<const double> mu, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw RangeError("tau must be positive");
  if (mu.size() != static_cast<std::size_t>(codebook.bits())) {
    throw DimensionError("flip probabilities must have B entries");
  }
  if (sent >= codebook.size()) throw RangeError("sent index out of range");
  check_mu(mu);

  const std::size_t k_count = codebook.size();
  std::vector<double> logits(k_count);
  bsc_log_transition_row(sent, mu, logits);

  std::uniform_real_distribution<double> u(0.0, 1.0);
  double top = -std::numeric_limits<double>::infinity();
  for (auto& l : logits) {
    double r = u(rng);
    while (r <= 0.0) r = u(rng);
    l = (l - std::log(-std::log(r))) / tau;
    top = std::max(top, l);
  }
  SoftReconstruction out;
  out.weights.resize(k_count);
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    out.weights[k] = std::exp(logits[k] - top);
    total += out.weights[k];
  }
  out.vector.assign(static_cast<std::size_t>(codebook.dim()), 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    out.weights[k] /= total;
    const auto c = codebook.codeword(k);
    for (std::size_t t = 0; t < c.size(); ++t) out.vector[t] += out.weights[k] * c[t];
  }
  return out;
}

SoftReconstruction gumbel_soft_reconstruct(std::uint32_t sent, const Codebook& codebook,
                                           std::span<const double> mu, double tau,
                                           std::uint64_t seed) {
  auto rng = make_rng(seed);
  return gumbel_soft_reconstruct(sent, codebook, mu, tau, rng);
}

// ---- QAM bit-error approximation ------------------------------------------

namespace {

// ber_approx with p*gamma folded into a single SNR argument.
double ber_of_snr(double snr, int m) {
  const double side = std::ldexp(1.0, m / 2);  // sqrt(2^m)
  const double norm = side * (m / 2.0);        // sqrt(2^m) * log2(sqrt(2^m))
  const double x = std::sqrt(3.0 * snr / (2.0 * (std::ldexp(1.0, m) - 1.0)));
  return (side - 1.0) / norm * std::erfc(x) + (side - 2.0) / norm * std::erfc(3.0 * x);
}

}  // namespace

double ber_approx(double p, int m, double gamma) {
  check_mod_order(m);
  if (!(p >= 0.0)) throw RangeError("power must be non-negative");
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  return ber_of_snr(p * gamma, m);
}

double ber_inverse(double target, int m, double gamma) {
  check_mod_order(m);
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  if (!(target > 0.0)) throw RangeError("target BER must be positive");
  const double ceiling = ber_of_snr(0.0, m);
  if (target > ceiling) {
    throw RangeError("target BER " + std::to_string(target) + " exceeds the zero-power BER " +
                     std::to_string(ceiling) + " of " + std::to_string(m) + "-bit QAM");
  }
  if (target == ceiling) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  while (ber_of_snr(hi, m) >= target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw RangeError("target BER is not reachable at finite power");
  }
  // Bisect to the resolution of doubles; this also meets a 1e-8 relative
  // round trip in BER at the deepest tails.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (ber_of_snr(mid, m) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi) / gamma;
}

}  // namespace mvq
