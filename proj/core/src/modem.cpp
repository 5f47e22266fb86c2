#include <algorithm>
#include <cmath>
#include <string>

#include "mvq/channel.hpp"
#include "mvq/error.hpp"

namespace mvq {

namespace {

// Amplitude scale giving unit average energy for square 2^m-QAM with odd
// integer levels on each axis.
double axis_scale(int m) { return std::sqrt(3.0 / (2.0 * (std::ldexp(1.0, m) - 1.0))); }

double axis_level(std::span<const std::uint8_t> bits, int levels) {
  unsigned gray = 0;
  for (auto b : bits) gray = (gray << 1) | (b & 1U);
  unsigned idx = gray;
  for (unsigned shift = gray >> 1; shift != 0; shift >>= 1) idx ^= shift;
  return 2.0 * idx - (levels - 1);
}

void axis_demap(double a, int levels, int half, std::span<std::uint8_t> out) {
  long idx = std::lround((a + (levels - 1)) / 2.0);
  idx = std::clamp(idx, 0L, static_cast<long>(levels - 1));
  const auto u = static_cast<unsigned>(idx);
  const unsigned gray = u ^ (u >> 1);
  for (int j = 0; j < half; ++j) out[static_cast<std::size_t>(j)] = (gray >> (half - 1 - j)) & 1U;
}

}  // namespace

std::complex<double> qam_modulate(std::span<const std::uint8_t> bits, int m, double p) {
  check_mod_order(m);
  if (bits.size() != static_cast<std::size_t>(m)) {
    throw DimensionError("QAM symbol needs " + std::to_string(m) + " bits, got " +
                         std::to_string(bits.size()));
  }
  if (!(p >= 0.0)) throw RangeError("symbol power must be non-negative");
  const int half = m / 2;
  const int levels = 1 << half;
  const double s = axis_scale(m) * std::sqrt(p);
  const auto h = static_cast<std::size_t>(half);
  return {s * axis_level(bits.first(h), levels), s * axis_level(bits.subspan(h), levels)};
}

void qam_detect(std::complex<double> y, const ChannelState& state, int m, double p,
                std::span<std::uint8_t> out) {
  check_mod_order(m);
  if (out.size() != static_cast<std::size_t>(m)) throw DimensionError("output must have m bits");
  const int half = m / 2;
  const int levels = 1 << half;
  const double s = axis_scale(m) * std::sqrt(p);
  const std::complex<double> z = (s > 0.0) ? y / (state.h * s) : std::complex<double>{};
  const auto h = static_cast<std::size_t>(half);
  axis_demap(z.real(), levels, half, out.first(h));
  axis_demap(z.imag(), levels, half, out.subspan(h));
}

Bits qam_detect(std::complex<double> y, const ChannelState& state, int m, double p) {
  Bits out(static_cast<std::size_t>(m));
  qam_detect(y, state, m, p, out);
  return out;
}

}  // namespace mvq
