#include <cmath>

#include "mvq/error.hpp"
#include "mvq/linksim.hpp"

namespace mvq {

double snr_db(double p_tot, double mean_gamma, int n, int b) {
  if (!(p_tot > 0.0) || !(mean_gamma > 0.0) || n <= 0 || b <= 0) {
    throw RangeError("snr_db needs positive power, gamma, N and B");
  }
  return 10.0 * std::log10(p_tot * mean_gamma / (static_cast<double>(n) * b));
}

double compression_ratio(double bits, double c, double h, double w) {
  if (!(bits > 0.0) || !(c > 0.0) || !(h > 0.0) || !(w > 0.0)) {
    throw RangeError("compression ratio needs positive bits and image shape");
  }
  return bits / (c * h * w * 8.0);
}

double psnr(double max_value, double mse) {
  if (!(max_value > 0.0) || !(mse > 0.0)) throw RangeError("PSNR needs positive MAX and MSE");
  return 10.0 * std::log10((max_value * max_value) / (mse * mse));
}

}  // namespace mvq
