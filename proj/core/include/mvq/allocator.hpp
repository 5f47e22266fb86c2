#pragma once

// Inference-stage optimizers that pick, per sub-vector, which codebook to
// use and, per transmitted symbol, a QAM order and a power such that the
// physical bit-error rate matches the flip probabilities the chosen
// codebooks were trained for.
//
// All powers follow the convention p(mu; m, gamma) = ber_inverse(mu, m, 1) / gamma,
// so the bank-dependent inversions are computed once (PowerModel) and
// rescaled for every channel realization.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvq/distortion.hpp"
#include "mvq/vq.hpp"

namespace mvq {

struct LinkBudget {
  double p_tot = 0.0;
  int rate = 4;   // average bits per symbol R
  int m_max = 6;  // largest allowed QAM order (bits)

  int symbol_count(int n, int b) const { return n * b / rate; }
  // Throws RangeError when the budget is inconsistent with an N x B bit layout.
  void validate(int n, int b) const;
};

enum class Method { jcamp, jcap, baseline, lut };

Method parse_method(const std::string& name);
const char* to_string(Method method);

struct BitCoord {
  int i = 0;  // sub-vector position
  int j = 0;  // bit position inside the B-bit index (0 = MSB)

  friend bool operator==(const BitCoord&, const BitCoord&) = default;
  friend auto operator<=>(const BitCoord&, const BitCoord&) = default;
};

struct PlanSymbol {
  int m = 2;
  double p = 0.0;
  double mu_bar = 0.0;  // target BER of the symbol
  std::vector<BitCoord> group;

  friend bool operator==(const PlanSymbol&, const PlanSymbol&) = default;
};

struct TransmissionPlan {
  Assignment assignment;
  std::vector<PlanSymbol> symbols;
  bool scaled = false;  // power was scaled down because the plan was infeasible

  double total_power() const;
  double mean_codebook_index() const;

  friend bool operator==(const TransmissionPlan&, const TransmissionPlan&) = default;
};

// Temporary per-bit modulation orders (N x B).
class ModMatrix {
 public:
  ModMatrix() = default;
  ModMatrix(int positions, int bits, int fill);

  int positions() const { return positions_; }
  int bits() const { return bits_; }
  int& operator()(int i, int j) { return m_[index(i, j)]; }
  int operator()(int i, int j) const { return m_[index(i, j)]; }
  const std::vector<int>& data() const { return m_; }

  // Number of bits currently at order m.
  std::size_t count(int m) const;
  double mean() const;

  friend bool operator==(const ModMatrix&, const ModMatrix&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(bits_) + static_cast<std::size_t>(j);
  }

  int positions_ = 0;
  int bits_ = 0;
  std::vector<int> m_;
};

// Per-bit temporary power ber_inverse(mu, m, gamma) / m.
double temp_power(double mu, int m, double gamma);

// Cached unit-gain symbol powers ber_inverse(mu^(v)_{i,j}, m, 1) for every
// bank entry and every even order up to m_max.
class PowerModel {
 public:
  PowerModel(const CodebookBank& bank, int m_max);

  int m_max() const { return m_max_; }
  // Symbol power at gain-to-noise ratio 1; divide by gamma for other channels.
  double unit_power(int v, int i, int j, int m) const {
    return unit_[((static_cast<std::size_t>(v - 1) * static_cast<std::size_t>(n_) +
                   static_cast<std::size_t>(i)) *
                      static_cast<std::size_t>(b_) +
                  static_cast<std::size_t>(j)) *
                     static_cast<std::size_t>(orders_) +
                 static_cast<std::size_t>(m / 2 - 1)];
  }

 private:
  int n_ = 0;
  int b_ = 0;
  int m_max_ = 0;
  int orders_ = 0;
  std::vector<double> unit_;
};

class Allocator {
 public:
  // m_max bounds the orders any later budget may request.
  Allocator(const CodebookBank& bank, const DistortionTable& table, int m_max = 6);

  const CodebookBank& bank() const { return *bank_; }
  const DistortionTable& table() const { return *table_; }
  const PowerModel& power_model() const { return power_; }

  TransmissionPlan jcamp(double gamma, const LinkBudget& budget) const;
  TransmissionPlan jcap(double gamma, const LinkBudget& budget) const;
  TransmissionPlan baseline(double gamma, const LinkBudget& budget) const;
  // Dispatches jcamp, jcap or baseline.
  TransmissionPlan plan(Method method, double gamma, const LinkBudget& budget) const;

  // Greedy downgrade choice: argmax over {i : v_i > 1} of distortion drop per
  // unit of extra temporary power.  Throws RangeError without candidates.
  int p1_select(const Assignment& assignment, const ModMatrix& orders, double gamma) const;

  // Modulation swaps that lower the total temporary power at fixed assignment.
  ModMatrix p2_swap(ModMatrix orders, const Assignment& assignment, double gamma, int m_max) const;

  // Sum over all bits of the per-bit temporary power.
  double temp_power_total(const Assignment& assignment, const ModMatrix& orders, double gamma) const;

  // Groups bits into symbols, sets BER-matched powers and spreads the
  // remaining budget evenly.
  TransmissionPlan post_process(const Assignment& assignment, const ModMatrix& orders, double gamma,
                                const LinkBudget& budget) const;

  // Per-bit power increments/decrements for moving one order up/down.
  double power_increment(int v, int i, int j, int m, double gamma) const;
  double power_decrement(int v, int i, int j, int m, double gamma) const;

 private:
  double unit_temp(int v, int i, int j, int m) const { return power_.unit_power(v, i, j, m) / m; }
  double ratio(const Assignment& assignment, const ModMatrix& orders, int i) const;
  TransmissionPlan scaled_fallback(const Assignment& assignment, const ModMatrix& orders, double gamma,
                                   const LinkBudget& budget) const;
  void check_budget(const LinkBudget& budget) const;

  const CodebookBank* bank_;
  const DistortionTable* table_;
  PowerModel power_;
};

// Convenience wrappers that build an Allocator per call.
TransmissionPlan jcamp(const DistortionTable& table, const CodebookBank& bank, double gamma,
                       const LinkBudget& budget);
TransmissionPlan jcap(const DistortionTable& table, const CodebookBank& bank, double gamma,
                      const LinkBudget& budget);
TransmissionPlan codebook_selection_baseline(const DistortionTable& table, const CodebookBank& bank,
                                             double gamma, const LinkBudget& budget);

// ---- lookup table ----------------------------------------------------------

struct LookupTable {
  double snr_lo_db = 0.0;
  double snr_hi_db = 0.0;
  int bits = 8;
  Method method = Method::jcamp;
  double p_tot = 0.0;  // budget the stored powers refer to
  int n = 0;
  int b = 0;
  std::vector<TransmissionPlan> entries;

  std::size_t index_of(double snr_db) const;
  double cell_center_db(std::size_t index) const;
};

// Instantaneous SNR 10 log10(p_tot * gamma / (N B)).
double instantaneous_snr_db(double p_tot, double gamma, int n, int b);
double gamma_for_snr_db(double snr_db, double p_tot, int n, int b);

// SNR range whose ends make the all-V and all-1 assignments exactly
// feasible at the fixed order budget.rate.
std::pair<double, double> feasible_snr_range(const Allocator& allocator, const LinkBudget& budget);

LookupTable build_lut(const Allocator& allocator, const LinkBudget& budget, double snr_lo_db,
                      double snr_hi_db, int bits, Method method, unsigned threads = 0);
// Clips the instantaneous SNR into the table range and returns that cell's
// plan with powers rescaled to p_tot.
TransmissionPlan lut_plan(const LookupTable& lut, double gamma, double p_tot);
TransmissionPlan lut_plan(const LookupTable& lut, double gamma);

// ---- persistence -----------------------------------------------------------

std::string plan_to_json(const TransmissionPlan& plan, int indent = -1);
TransmissionPlan plan_from_json(const std::string& text);
void write_lut(const LookupTable& lut, std::ostream& out);
void write_lut_file(const LookupTable& lut, const std::string& path);
LookupTable read_lut(std::istream& in);
LookupTable read_lut_file(const std::string& path);

}  // namespace mvq
