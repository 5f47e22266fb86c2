#include "mvq/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mvq/channel.hpp"
#include "mvq/error.hpp"

namespace mvq {

void LinkBudget::validate(int n, int b) const {
  if (!(p_tot > 0.0) || !std::isfinite(p_tot)) throw RangeError("total power must be positive and finite");
  if (rate < 2 || rate % 2 != 0) throw RangeError("rate must be an even number >= 2");
  if ((n * b) % rate != 0) {
    throw RangeError("N*B = " + std::to_string(n * b) + " is not divisible by rate " +
                     std::to_string(rate));
  }
  if (m_max < rate || m_max % 2 != 0) throw RangeError("m_max must be even and >= rate");
}

Method parse_method(const std::string& name) {
  if (name == "jcamp") return Method::jcamp;
  if (name == "jcap") return Method::jcap;
  if (name == "baseline") return Method::baseline;
  if (name == "lut") return Method::lut;
  throw RangeError("unknown method '" + name + "' (expected jcamp, jcap, baseline or lut)");
}

const char* to_string(Method method) {
  switch (method) {
    case Method::jcamp: return "jcamp";
    case Method::jcap: return "jcap";
    case Method::baseline: return "baseline";
    case Method::lut: return "lut";
  }
  return "?";
}

double TransmissionPlan::total_power() const {
  double sum = 0.0;
  for (const auto& s : symbols) sum += s.p;
  return sum;
}

double TransmissionPlan::mean_codebook_index() const {
  if (assignment.empty()) return 0.0;
  return std::accumulate(assignment.begin(), assignment.end(), 0.0) /
         static_cast<double>(assignment.size());
}

ModMatrix::ModMatrix(int positions, int bits, int fill)
    : positions_(positions),
      bits_(bits),
      m_(static_cast<std::size_t>(positions) * static_cast<std::size_t>(bits), fill) {}

std::size_t ModMatrix::count(int m) const {
  return static_cast<std::size_t>(std::count(m_.begin(), m_.end(), m));
}

double ModMatrix::mean() const {
  if (m_.empty()) return 0.0;
  return std::accumulate(m_.begin(), m_.end(), 0.0) / static_cast<double>(m_.size());
}

double temp_power(double mu, int m, double gamma) {
  if (!(mu > 0.0 && mu <= 0.5)) throw RangeError("flip probability must lie in (0, 0.5]");
  return ber_inverse(mu, m, gamma) / m;
}

PowerModel::PowerModel(const CodebookBank& bank, int m_max)
    : n_(bank.N), b_(bank.B), m_max_(m_max), orders_(m_max / 2) {
  check_mod_order(m_max);
  unit_.resize(static_cast<std::size_t>(bank.V) * static_cast<std::size_t>(n_) *
               static_cast<std::size_t>(b_) * static_cast<std::size_t>(orders_));
  std::size_t k = 0;
  for (int v = 1; v <= bank.V; ++v) {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < b_; ++j) {
        const double mu = bank.mu(v, i, j);
        for (int m = 2; m <= m_max_; m += 2) unit_[k++] = ber_inverse(mu, m, 1.0);
      }
    }
  }
}

Allocator::Allocator(const CodebookBank& bank, const DistortionTable& table, int m_max)
    : bank_(&bank), table_(&table), power_(bank, m_max) {
  if (table.codebooks() != bank.V || table.positions() != bank.N) {
    throw DimensionError("distortion table is " + std::to_string(table.codebooks()) + "x" +
                         std::to_string(table.positions()) + " but the bank needs " +
                         std::to_string(bank.V) + "x" + std::to_string(bank.N));
  }
}

void Allocator::check_budget(const LinkBudget& budget) const {
  budget.validate(bank_->N, bank_->B);
  if (budget.m_max > power_.m_max()) {
    throw RangeError("budget m_max exceeds the orders prepared by this allocator");
  }
}

double Allocator::temp_power_total(const Assignment& assignment, const ModMatrix& orders,
                                   double gamma) const {
  double sum = 0.0;
  for (int i = 0; i < bank_->N; ++i) {
    const int v = assignment[static_cast<std::size_t>(i)];
    for (int j = 0; j < bank_->B; ++j) sum += unit_temp(v, i, j, orders(i, j));
  }
  return sum / gamma;
}

double Allocator::ratio(const Assignment& assignment, const ModMatrix& orders, int i) const {
  const int v = assignment[static_cast<std::size_t>(i)];
  const double gain = (*table_)(v, i) - (*table_)(v - 1, i);
  double cost = 0.0;
  for (int j = 0; j < bank_->B; ++j) {
    const int m = orders(i, j);
    cost += unit_temp(v - 1, i, j, m) - unit_temp(v, i, j, m);
  }
  if (cost != 0.0) return gain / cost;
  if (gain > 0.0) return std::numeric_limits<double>::infinity();
  if (gain < 0.0) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

int Allocator::p1_select(const Assignment& assignment, const ModMatrix& orders, double gamma) const {
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  int best = -1;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < bank_->N; ++i) {
    if (assignment[static_cast<std::size_t>(i)] <= 1) continue;
    // The common 1/gamma factor of the denominator does not change the argmax.
    const double r = ratio(assignment, orders, i);
    if (best < 0 || r > best_ratio) {
      best = i;
      best_ratio = r;
    }
  }
  if (best < 0) throw RangeError("no sub-vector can be moved to a lower codebook index");
  return best;
}

double Allocator::power_increment(int v, int i, int j, int m, double gamma) const {
  return (unit_temp(v, i, j, m + 2) - unit_temp(v, i, j, m)) / gamma;
}

double Allocator::power_decrement(int v, int i, int j, int m, double gamma) const {
  return (unit_temp(v, i, j, m) - unit_temp(v, i, j, m - 2)) / gamma;
}

ModMatrix Allocator::p2_swap(ModMatrix orders, const Assignment& assignment, double gamma,
                             int m_max) const {
  if (m_max > power_.m_max()) throw RangeError("m_max exceeds the orders prepared by this allocator");
  struct Candidate {
    BitCoord at;
    double delta;
  };
  std::vector<Candidate> up;
  std::vector<Candidate> down;
  std::vector<std::uint8_t> taken;
  for (int m = 4; m <= m_max - 2; m += 2) {
    for (;;) {
      up.clear();
      for (int i = 0; i < bank_->N; ++i) {
        const int v = assignment[static_cast<std::size_t>(i)];
        for (int j = 0; j < bank_->B; ++j) {
          if (orders(i, j) == m) up.push_back({{i, j}, power_increment(v, i, j, m, gamma)});
        }
      }
      const auto need_up = static_cast<std::size_t>(m + 2);
      const auto need_down = static_cast<std::size_t>(m - 2);
      if (up.size() < need_up + need_down) break;

      // Raise set: the (m+2) cheapest increments, ties by coordinate.
      std::stable_sort(up.begin(), up.end(),
                       [](const Candidate& a, const Candidate& b) { return a.delta < b.delta; });
      taken.assign(up.size(), 0);
      double raise_cost = 0.0;
      for (std::size_t k = 0; k < need_up; ++k) {
        raise_cost += up[k].delta;
        taken[k] = 1;
      }
      // Lower set: the (m-2) largest decrements among the rest.
      down.clear();
      for (std::size_t k = need_up; k < up.size(); ++k) {
        const auto at = up[k].at;
        const int v = assignment[static_cast<std::size_t>(at.i)];
        down.push_back({at, power_decrement(v, at.i, at.j, m, gamma)});
      }
      std::stable_sort(down.begin(), down.end(), [](const Candidate& a, const Candidate& b) {
        if (a.delta != b.delta) return a.delta > b.delta;
        return a.at < b.at;
      });
      double lower_saving = 0.0;
      for (std::size_t k = 0; k < need_down; ++k) lower_saving += down[k].delta;

      if (!(raise_cost < lower_saving)) break;
      for (std::size_t k = 0; k < need_up; ++k) orders(up[k].at.i, up[k].at.j) = m + 2;
      for (std::size_t k = 0; k < need_down; ++k) orders(down[k].at.i, down[k].at.j) = m - 2;
    }
  }
  return orders;
}

TransmissionPlan Allocator::post_process(const Assignment& assignment, const ModMatrix& orders,
                                         double gamma, const LinkBudget& budget) const {
  check_budget(budget);
  const int n = bank_->N;
  const int b = bank_->B;
  if (assignment.size() != static_cast<std::size_t>(n)) throw DimensionError("assignment length must equal N");
  if (orders.positions() != n || orders.bits() != b) throw DimensionError("order matrix must be N x B");
  for (int v : assignment) {
    if (v < 1 || v > bank_->V) throw RangeError("codebook index out of range");
  }

  // Rank every bit by its target flip probability; ties by coordinate.
  std::vector<BitCoord> ranked;
  ranked.reserve(static_cast<std::size_t>(n * b));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < b; ++j) ranked.push_back({i, j});
  }
  auto mu_of = [&](const BitCoord& c) {
    return bank_->mu(assignment[static_cast<std::size_t>(c.i)], c.i, c.j);
  };
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](const BitCoord& a, const BitCoord& c) { return mu_of(a) < mu_of(c); });

  // Per-order queues of ranks, each in ascending rank order.
  const int max_order = *std::max_element(orders.data().begin(), orders.data().end());
  std::vector<std::vector<std::size_t>> by_order(static_cast<std::size_t>(max_order + 1));
  for (std::size_t u = 0; u < ranked.size(); ++u) {
    const int m = orders(ranked[u].i, ranked[u].j);
    check_mod_order(m, budget.m_max);
    by_order[static_cast<std::size_t>(m)].push_back(u);
  }
  std::vector<std::size_t> cursor(by_order.size(), 0);
  std::vector<std::uint8_t> assigned(ranked.size(), 0);

  TransmissionPlan plan;
  plan.assignment = assignment;
  std::size_t first = 0;
  for (;;) {
    while (first < ranked.size() && assigned[first]) ++first;
    if (first == ranked.size()) break;
    const int m = orders(ranked[first].i, ranked[first].j);
    auto& queue = by_order[static_cast<std::size_t>(m)];
    auto& pos = cursor[static_cast<std::size_t>(m)];
    if (queue.size() - pos < static_cast<std::size_t>(m)) {
      throw Error("post-processing: " + std::to_string(queue.size() - pos) +
                  " bits left at order " + std::to_string(m) + " cannot fill a symbol");
    }
    PlanSymbol sym;
    sym.m = m;
    double mu_sum = 0.0;
    for (int k = 0; k < m; ++k, ++pos) {
      const std::size_t u = queue[pos];
      assigned[u] = 1;
      sym.group.push_back(ranked[u]);
      mu_sum += mu_of(ranked[u]);
    }
    sym.mu_bar = mu_sum / m;
    sym.p = ber_inverse(sym.mu_bar, m, gamma);
    plan.symbols.push_back(std::move(sym));
  }

  const auto t = static_cast<std::size_t>(budget.symbol_count(n, b));
  if (plan.symbols.size() != t) {
    throw Error("post-processing produced " + std::to_string(plan.symbols.size()) +
                " symbols, expected " + std::to_string(t));
  }
  const double raw = plan.total_power();
  const double shift = (budget.p_tot - raw) / static_cast<double>(t);
  const bool negative = std::any_of(plan.symbols.begin(), plan.symbols.end(),
                                    [&](const PlanSymbol& s) { return s.p + shift < 0.0; });
  if (!negative) {
    for (auto& s : plan.symbols) s.p += shift;
    return plan;
  }
  // The even shift would drive some power negative: scale instead.
  plan.scaled = true;
  for (auto& s : plan.symbols) s.p *= budget.p_tot / raw;
  return plan;
}

TransmissionPlan Allocator::scaled_fallback(const Assignment& assignment, const ModMatrix& orders,
                                            double gamma, const LinkBudget& budget) const {
  auto plan = post_process(assignment, orders, gamma, budget);
  // post_process spread P_tot - sum(p) evenly; undo it and scale down instead.
  double raw = 0.0;
  for (const auto& s : plan.symbols) raw += ber_inverse(s.mu_bar, s.m, gamma);
  const auto t = static_cast<double>(plan.symbols.size());
  for (auto& s : plan.symbols) {
    const double matched = ber_inverse(s.mu_bar, s.m, gamma);
    s.p = raw > 0.0 ? matched * budget.p_tot / raw : budget.p_tot / t;
  }
  plan.scaled = true;
  return plan;
}

TransmissionPlan Allocator::jcamp(double gamma, const LinkBudget& budget) const {
  check_budget(budget);
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  const int n = bank_->N;
  Assignment v(static_cast<std::size_t>(n), bank_->V);
  ModMatrix orders(n, bank_->B, budget.rate);
  if (temp_power_total(v, orders, gamma) > budget.p_tot) return scaled_fallback(v, orders, gamma, budget);

  ModMatrix buffer = orders;
  int last = -1;
  bool exhausted = false;
  while (!exhausted && temp_power_total(v, orders, gamma) <= budget.p_tot) {
    // (P1) downgrade codebook indices until the temporary power overflows.
    while (temp_power_total(v, orders, gamma) <= budget.p_tot) {
      buffer = orders;
      if (std::all_of(v.begin(), v.end(), [](int x) { return x <= 1; })) {
        exhausted = true;
        break;
      }
      last = p1_select(v, orders, gamma);
      --v[static_cast<std::size_t>(last)];
    }
    if (exhausted) break;
    // (P2) trade modulation orders to buy power back for the overflowing v.
    orders = p2_swap(buffer, v, gamma, budget.m_max);
  }
  if (!exhausted) {
    ++v[static_cast<std::size_t>(last)];
    orders = buffer;
  }
  return post_process(v, orders, gamma, budget);
}

TransmissionPlan Allocator::jcap(double gamma, const LinkBudget& budget) const {
  check_budget(budget);
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  const int n = bank_->N;
  Assignment v(static_cast<std::size_t>(n), bank_->V);
  const ModMatrix orders(n, bank_->B, budget.rate);
  if (temp_power_total(v, orders, gamma) > budget.p_tot) return scaled_fallback(v, orders, gamma, budget);

  int last = -1;
  bool exhausted = false;
  while (temp_power_total(v, orders, gamma) <= budget.p_tot) {
    if (std::all_of(v.begin(), v.end(), [](int x) { return x <= 1; })) {
      exhausted = true;
      break;
    }
    last = p1_select(v, orders, gamma);
    --v[static_cast<std::size_t>(last)];
  }
  if (!exhausted) ++v[static_cast<std::size_t>(last)];
  return post_process(v, orders, gamma, budget);
}

TransmissionPlan Allocator::baseline(double gamma, const LinkBudget& budget) const {
  check_budget(budget);
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  const int n = bank_->N;
  const ModMatrix orders(n, bank_->B, budget.rate);
  for (int v = 1; v <= bank_->V; ++v) {
    Assignment uniform(static_cast<std::size_t>(n), v);
    if (temp_power_total(uniform, orders, gamma) <= budget.p_tot) {
      return post_process(uniform, orders, gamma, budget);
    }
  }
  return scaled_fallback(Assignment(static_cast<std::size_t>(n), bank_->V), orders, gamma, budget);
}

TransmissionPlan Allocator::plan(Method method, double gamma, const LinkBudget& budget) const {
  switch (method) {
    case Method::jcamp: return jcamp(gamma, budget);
    case Method::jcap: return jcap(gamma, budget);
    case Method::baseline: return baseline(gamma, budget);
    case Method::lut: break;
  }
  throw RangeError("lookup-table plans come from lut_plan(), not Allocator::plan()");
}

TransmissionPlan jcamp(const DistortionTable& table, const CodebookBank& bank, double gamma,
                       const LinkBudget& budget) {
  return Allocator(bank, table, budget.m_max).jcamp(gamma, budget);
}

TransmissionPlan jcap(const DistortionTable& table, const CodebookBank& bank, double gamma,
                      const LinkBudget& budget) {
  return Allocator(bank, table, budget.m_max).jcap(gamma, budget);
}

TransmissionPlan codebook_selection_baseline(const DistortionTable& table, const CodebookBank& bank,
                                             double gamma, const LinkBudget& budget) {
  return Allocator(bank, table, budget.m_max).baseline(gamma, budget);
}

}  // namespace mvq
