#include <algorithm>
#include <cmath>
#include <string>

#include "mvq/allocator.hpp"
#include "mvq/error.hpp"
#include "parallel.hpp"

namespace mvq {

std::size_t LookupTable::index_of(double snr_db) const {
  const std::size_t cells = std::size_t{1} << bits;
  const double clipped = std::clamp(snr_db, snr_lo_db, snr_hi_db);
  const double pos = (clipped - snr_lo_db) / (snr_hi_db - snr_lo_db) * static_cast<double>(cells);
  const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
  return std::min(k, cells - 1);
}

double LookupTable::cell_center_db(std::size_t index) const {
  const auto cells = static_cast<double>(std::size_t{1} << bits);
  return snr_lo_db + (static_cast<double>(index) + 0.5) * (snr_hi_db - snr_lo_db) / cells;
}

double instantaneous_snr_db(double p_tot, double gamma, int n, int b) {
  if (!(p_tot > 0.0) || !(gamma > 0.0)) throw RangeError("SNR needs positive power and gamma");
  return 10.0 * std::log10(p_tot * gamma / (static_cast<double>(n) * b));
}

double gamma_for_snr_db(double snr_db, double p_tot, int n, int b) {
  if (!(p_tot > 0.0)) throw RangeError("total power must be positive");
  return static_cast<double>(n) * b * std::pow(10.0, snr_db / 10.0) / p_tot;
}

std::pair<double, double> feasible_snr_range(const Allocator& allocator, const LinkBudget& budget) {
  const auto& bank = allocator.bank();
  budget.validate(bank.N, bank.B);
  const ModMatrix orders(bank.N, bank.B, budget.rate);
  const double nb = static_cast<double>(bank.N) * bank.B;
  auto snr_for = [&](int v) {
    const double need = allocator.temp_power_total(Assignment(static_cast<std::size_t>(bank.N), v), orders, 1.0);
    if (!(need > 0.0)) throw RangeError("profile " + std::to_string(v) + " needs no power; SNR range undefined");
    return 10.0 * std::log10(need / nb);
  };
  const double lo = snr_for(bank.V);
  const double hi = snr_for(1);
  if (!(hi > lo)) throw RangeError("degenerate SNR range: all-1 assignment is not costlier than all-V");
  return {lo, hi};
}

LookupTable build_lut(const Allocator& allocator, const LinkBudget& budget, double snr_lo_db,
                      double snr_hi_db, int bits, Method method, unsigned threads) {
  if (!(snr_lo_db < snr_hi_db)) throw RangeError("LUT range needs snr_lo_db < snr_hi_db");
  if (bits < 1 || bits > 20) throw RangeError("LUT resolution must be 1..20 bits");
  if (method == Method::lut) throw RangeError("a LUT must be built from jcamp, jcap or baseline");
  const auto& bank = allocator.bank();
  budget.validate(bank.N, bank.B);

  LookupTable lut;
  lut.snr_lo_db = snr_lo_db;
  lut.snr_hi_db = snr_hi_db;
  lut.bits = bits;
  lut.method = method;
  lut.p_tot = budget.p_tot;
  lut.n = bank.N;
  lut.b = bank.B;
  lut.entries.resize(std::size_t{1} << bits);
  detail::parallel_for(lut.entries.size(), threads, [&](std::size_t k) {
    const double gamma = gamma_for_snr_db(lut.cell_center_db(k), budget.p_tot, bank.N, bank.B);
    lut.entries[k] = allocator.plan(method, gamma, budget);
  });
  return lut;
}

TransmissionPlan lut_plan(const LookupTable& lut, double gamma, double p_tot) {
  if (lut.entries.size() != (std::size_t{1} << lut.bits)) throw FormatError("LUT is incomplete");
  auto plan = lut.entries[lut.index_of(instantaneous_snr_db(p_tot, gamma, lut.n, lut.b))];
  const double scale = p_tot / lut.p_tot;
  for (auto& s : plan.symbols) s.p *= scale;
  return plan;
}

TransmissionPlan lut_plan(const LookupTable& lut, double gamma) { return lut_plan(lut, gamma, lut.p_tot); }

}  // namespace mvq
