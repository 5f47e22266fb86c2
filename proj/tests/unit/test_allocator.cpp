#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mvq/allocator.hpp"
#include "mvq/channel.hpp"
#include "mvq/error.hpp"
#include "test_support.hpp"

using namespace mvq;

namespace {

CodebookBank flat_bank(int n, int b, const std::vector<std::vector<double>>& mu, const std::vector<double>& mu_min) {
  CodebookBank bank;
  bank.D = 1;
  bank.B = b;
  bank.N = n;
  bank.V = static_cast<int>(mu.size());
  bank.mu_min = mu_min;
  for (int v = 0; v < bank.V; ++v) {
    bank.lambda.push_back(v + 1.0);
    std::vector<double> cw(std::size_t{1} << b);
    for (std::size_t k = 0; k < cw.size(); ++k) cw[k] = static_cast<double>(k);
    bank.codebooks.emplace_back(1, b, cw);
    bank.profiles.emplace_back(n, b, mu[static_cast<std::size_t>(v)], mu_min[static_cast<std::size_t>(v)]);
  }
  return bank;
}

// Sum over bits of ber_inverse(mu, m) / m for a uniform order m.
double fixed_order_power(const CodebookBank& bank, const Assignment& v, int m, double gamma) {
  double total = 0.0;
  for (int i = 0; i < bank.N; ++i) {
    for (int j = 0; j < bank.B; ++j) total += ber_inverse(bank.mu(v[static_cast<std::size_t>(i)], i, j), m, gamma) / m;
  }
  return total;
}

struct Instance {
  CodebookBank bank;
  DistortionTable table;
};

Instance random_instance(std::mt19937_64& rng, int d, int b, int n, int v) {
  static const std::vector<double> floors{0.0005, 0.001, 0.0045, 0.02, 0.05};
  std::vector<double> mu_min(floors.begin(), floors.begin() + v);
  auto bank = test::random_bank(d, b, n, mu_min, rng);
  FeatureSet data(static_cast<std::size_t>(n * d), test::random_vector(static_cast<std::size_t>(n * d * 20), rng));
  auto table = build_table(data, bank, 1);
  return {std::move(bank), std::move(table)};
}

void check_plan_invariants(const TransmissionPlan& plan, const CodebookBank& bank, const LinkBudget& budget) {
  const int t = budget.symbol_count(bank.N, bank.B);
  REQUIRE(plan.assignment.size() == static_cast<std::size_t>(bank.N));
  CHECK(plan.symbols.size() == static_cast<std::size_t>(t));
  int bits = 0;
  std::set<BitCoord> seen;
  std::map<int, int> per_order;
  for (const auto& s : plan.symbols) {
    CHECK(s.group.size() == static_cast<std::size_t>(s.m));
    CHECK(s.m % 2 == 0);
    CHECK(s.m <= budget.m_max);
    bits += s.m;
    per_order[s.m] += s.m;
    for (const auto& c : s.group) CHECK(seen.insert(c).second);
    if (!plan.scaled) CHECK(s.p >= 0.0);
  }
  CHECK(bits == bank.N * bank.B);
  CHECK(seen.size() == static_cast<std::size_t>(bank.N * bank.B));
  for (const auto& [m, count] : per_order) CHECK(count % m == 0);
  CHECK(std::abs(plan.total_power() - budget.p_tot) <= 1e-9 * budget.p_tot);
  CHECK(static_cast<double>(bits) / t == budget.rate);
}

}  // namespace

TEST_CASE("link budget validation") {
  CHECK_NOTHROW((LinkBudget{1.0, 4, 6}).validate(128, 9));
  CHECK(LinkBudget{1.0, 4, 6}.symbol_count(128, 9) == 288);
  CHECK_THROWS_AS((LinkBudget{0.0, 4, 6}).validate(128, 9), RangeError);
  CHECK_THROWS_AS((LinkBudget{1.0, 3, 6}).validate(128, 9), RangeError);
  CHECK_THROWS_AS((LinkBudget{1.0, 4, 6}).validate(3, 3), RangeError);
  CHECK_THROWS_AS((LinkBudget{1.0, 4, 2}).validate(128, 9), RangeError);
  CHECK(parse_method("jcap") == Method::jcap);
  CHECK_THROWS_AS(parse_method("greedy"), RangeError);
}

TEST_CASE("temporary power spot values") {
  CHECK(temp_power(0.5, 2, 1.0) == 0.0);
  CHECK(temp_power(0.0786496, 2, 1.0) == doctest::Approx(1.0).epsilon(1e-5));
  double prev = 0.0;
  for (double mu = 0.25; mu > 1e-12; mu /= 2.0) {
    const double p = temp_power(mu, 4, 1.0);
    CHECK(p > prev);
    prev = p;
  }
  CHECK_THROWS_AS(temp_power(0.0, 2, 1.0), RangeError);
}

TEST_CASE("power model caches unit-gain inversions") {
  std::mt19937_64 rng(1);
  const auto inst = random_instance(rng, 2, 3, 4, 3);
  const PowerModel pm(inst.bank, 6);
  for (int v = 1; v <= 3; ++v) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int m : {2, 4, 6}) CHECK(pm.unit_power(v, i, j, m) == ber_inverse(inst.bank.mu(v, i, j), m, 1.0));
      }
    }
  }
}

TEST_CASE("p1_select with a single candidate") {
  const auto bank = flat_bank(3, 2, {std::vector<double>(6, 0.01), std::vector<double>(6, 0.05)}, {0.005, 0.02});
  const DistortionTable table(2, 3, {1, 1, 1, 2, 2, 2});
  const Allocator alloc(bank, table, 2);
  const ModMatrix orders(3, 2, 2);
  CHECK(alloc.p1_select(Assignment{1, 2, 1}, orders, 1.0) == 1);
  CHECK_THROWS_AS(alloc.p1_select(Assignment{1, 1, 1}, orders, 1.0), RangeError);
}

TEST_CASE("p1_select prefers the larger distortion drop at equal power cost") {
  const auto bank = flat_bank(3, 2, {std::vector<double>(6, 0.01), std::vector<double>(6, 0.05)}, {0.005, 0.02});
  const DistortionTable table(2, 3, {1, 1, 1, 2, 5, 3});
  const Allocator alloc(bank, table, 2);
  CHECK(alloc.p1_select(Assignment{2, 2, 2}, ModMatrix(3, 2, 2), 1.0) == 1);
  // Equal ratios resolve to the smallest position.
  const DistortionTable tied(2, 3, {1, 1, 1, 4, 4, 4});
  CHECK(Allocator(bank, tied, 2).p1_select(Assignment{2, 2, 2}, ModMatrix(3, 2, 2), 1.0) == 0);
}

TEST_CASE("p1_select agrees with brute-force ratio evaluation") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = random_instance(rng, 1, 2, 3, 2);
    const Allocator alloc(inst.bank, inst.table, 4);
    std::uniform_int_distribution<int> pick(1, 2);
    Assignment v{pick(rng), pick(rng), 2};
    ModMatrix orders(3, 2, 2);
    orders(0, 1) = 4;
    orders(2, 0) = 4;
    const double gamma = 0.7;
    int best = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int vi = v[static_cast<std::size_t>(i)];
      if (vi <= 1) continue;
      double cost = 0.0;
      for (int j = 0; j < 2; ++j) {
        const int m = orders(i, j);
        cost += (ber_inverse(inst.bank.mu(vi - 1, i, j), m, gamma) - ber_inverse(inst.bank.mu(vi, i, j), m, gamma)) / m;
      }
      const double r = (inst.table(vi, i) - inst.table(vi - 1, i)) / cost;
      if (best < 0 || r > best_ratio) {
        best = i;
        best_ratio = r;
      }
    }
    CHECK(alloc.p1_select(v, orders, gamma) == best);
  }
}

TEST_CASE("p2_swap leaves a single-order budget untouched") {
  std::mt19937_64 rng(3);
  const auto inst = random_instance(rng, 1, 4, 4, 2);
  const Allocator alloc(inst.bank, inst.table, 4);
  const ModMatrix orders(4, 4, 4);
  CHECK(alloc.p2_swap(orders, Assignment{1, 2, 1, 2}, 1.0, 4) == orders);
}

TEST_CASE("p2_swap with identical flip probabilities is one closed-form comparison") {
  for (double mu : {0.3, 0.01, 1e-4}) {
    const auto bank = flat_bank(2, 4, {std::vector<double>(8, mu)}, {mu / 2});
    const DistortionTable table(1, 2, {1, 1});
    const Allocator alloc(bank, table, 6);
    const double up = ber_inverse(mu, 6, 1.0) / 6 - ber_inverse(mu, 4, 1.0) / 4;
    const double down = ber_inverse(mu, 4, 1.0) / 4 - ber_inverse(mu, 2, 1.0) / 2;
    const bool swap = 6 * up < 2 * down;
    const auto out = alloc.p2_swap(ModMatrix(2, 4, 4), Assignment{1, 1}, 1.0, 6);
    CHECK((out.count(6) == 6) == swap);
    CHECK((out.count(4) == 8) == !swap);
  }
}

TEST_CASE("p2_swap applies once on a skewed instance and lowers temporary power") {
  // Bits (0,0) and (1,0) are nearly error free; the other six are noisy.
  std::vector<double> mu{1e-9, 0.3, 0.3, 0.3, 1e-9, 0.3, 0.3, 0.3};
  const auto bank = flat_bank(2, 4, {mu}, {1e-10});
  const DistortionTable table(1, 2, {1, 1});
  const Allocator alloc(bank, table, 6);
  const ModMatrix before(2, 4, 4);
  const auto after = alloc.p2_swap(before, Assignment{1, 1}, 1.0, 6);
  CHECK(after(0, 0) == 2);
  CHECK(after(1, 0) == 2);
  CHECK(after.count(6) == 6);
  CHECK(after.count(4) == 0);

  auto total = [&](const ModMatrix& m) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 4; ++j) s += ber_inverse(mu[static_cast<std::size_t>(4 * i + j)], m(i, j), 1.0) / m(i, j);
    }
    return s;
  };
  CHECK(total(after) < total(before));
  CHECK(alloc.temp_power_total(Assignment{1, 1}, after, 1.0) == doctest::Approx(total(after)).epsilon(1e-12));
}

TEST_CASE("post-processing groups bits by sorted flip probability") {
  const auto bank = flat_bank(1, 4, {{0.1, 0.01, 0.02, 0.09}}, {0.005});
  const DistortionTable table(1, 1, {1});
  const Allocator alloc(bank, table, 2);
  const LinkBudget budget{3.0, 2, 2};
  const auto plan = alloc.post_process(Assignment{1}, ModMatrix(1, 4, 2), 1.0, budget);
  REQUIRE(plan.symbols.size() == 2);
  CHECK(plan.symbols[0].group == (std::vector<BitCoord>{{0, 1}, {0, 2}}));
  CHECK(plan.symbols[0].mu_bar == doctest::Approx(0.015).epsilon(1e-15));
  CHECK(plan.symbols[1].group == (std::vector<BitCoord>{{0, 3}, {0, 0}}));
  CHECK(plan.symbols[1].mu_bar == doctest::Approx(0.095).epsilon(1e-15));
  const double shift = (3.0 - ber_inverse(0.015, 2, 1.0) - ber_inverse(0.095, 2, 1.0)) / 2.0;
  CHECK(plan.symbols[0].p == doctest::Approx(ber_inverse(0.015, 2, 1.0) + shift).epsilon(1e-14));
  CHECK(plan.total_power() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_FALSE(plan.scaled);
}

TEST_CASE("post-processing with identical flip probabilities splits power evenly") {
  const auto bank = flat_bank(4, 3, {std::vector<double>(12, 0.02)}, {0.01});
  const DistortionTable table(1, 4, {1, 1, 1, 1});
  const Allocator alloc(bank, table, 6);
  const LinkBudget budget{30.0, 4, 6};
  const auto plan = alloc.post_process(Assignment{1, 1, 1, 1}, ModMatrix(4, 3, 4), 0.8, budget);
  REQUIRE(plan.symbols.size() == 3);
  for (const auto& s : plan.symbols) CHECK(s.p == plan.symbols[0].p);
  CHECK(plan.total_power() == 30.0);
}

TEST_CASE("post-processing rejects order matrices that cannot fill symbols") {
  const auto bank = flat_bank(1, 4, {{0.1, 0.01, 0.02, 0.09}}, {0.005});
  const DistortionTable table(1, 1, {1});
  const Allocator alloc(bank, table, 6);
  ModMatrix orders(1, 4, 4);
  orders(0, 0) = 2;
  CHECK_THROWS_AS(alloc.post_process(Assignment{1}, orders, 1.0, LinkBudget{1.0, 4, 6}), Error);
}

TEST_CASE("unconstrained and starved budgets") {
  std::mt19937_64 rng(4);
  const auto inst = random_instance(rng, 2, 3, 4, 3);
  const Allocator alloc(inst.bank, inst.table, 6);
  for (Method m : {Method::jcamp, Method::jcap, Method::baseline}) {
    const LinkBudget rich{1e9, 2, 6};
    const auto top = alloc.plan(m, 1.0, rich);
    CHECK(top.assignment == Assignment(4, 1));
    CHECK_FALSE(top.scaled);
    check_plan_invariants(top, inst.bank, rich);

    const LinkBudget poor{1e-6, 2, 6};
    const auto bottom = alloc.plan(m, 1.0, poor);
    CHECK(bottom.assignment == Assignment(4, 3));
    CHECK(bottom.scaled);
    CHECK(bottom.total_power() == doctest::Approx(1e-6).epsilon(1e-12));
    for (const auto& s : bottom.symbols) CHECK(s.p >= 0.0);
  }
  CHECK_THROWS_AS(alloc.plan(Method::lut, 1.0, LinkBudget{1.0, 2, 6}), RangeError);
}

TEST_CASE("jcap on a two-position instance matches exhaustive search") {
  const auto bank = flat_bank(2, 1, {{0.001, 0.002}, {0.05, 0.1}}, {0.0005, 0.04});
  const DistortionTable table(2, 2, {0.2, 0.1, 1.0, 0.5});
  const Allocator alloc(bank, table, 2);
  for (double p_tot : {0.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 12.0}) {
    const LinkBudget budget{p_tot, 2, 2};
    double best = INFINITY;
    for (int a = 1; a <= 2; ++a) {
      for (int b = 1; b <= 2; ++b) {
        const Assignment v{a, b};
        if (fixed_order_power(bank, v, 2, 1.0) <= p_tot) best = std::min(best, table.total(v));
      }
    }
    const auto plan = alloc.jcap(1.0, budget);
    if (std::isfinite(best)) {
      CHECK_FALSE(plan.scaled);
      CHECK(table.total(plan.assignment) == best);
    } else {
      CHECK(plan.scaled);
    }
  }
}

TEST_CASE("jcamp follows a scripted trace of the greedy on a fixed-order instance") {
  // R = 2 and m_max = 4: no modulation swap is possible, so the trace is
  // the P1 greedy alone.
  std::vector<std::vector<double>> mu{{0.001, 0.002, 0.0015, 0.003, 0.001, 0.004, 0.002, 0.002},
                                      {0.01, 0.02, 0.015, 0.03, 0.012, 0.04, 0.025, 0.02},
                                      {0.1, 0.2, 0.15, 0.3, 0.12, 0.25, 0.2, 0.22}};
  const auto bank = flat_bank(4, 2, mu, {0.0005, 0.005, 0.05});
  const DistortionTable table(3, 4, {0.1, 0.2, 0.15, 0.05, 0.4, 0.5, 0.3, 0.2, 1.0, 0.9, 1.2, 0.6});
  const Allocator alloc(bank, table, 4);
  const double gamma = 1.3;

  for (double p_tot : {2.0, 5.0, 8.0, 11.0, 15.0, 20.0}) {
    const LinkBudget budget{p_tot, 2, 4};
    Assignment v(4, 3);
    std::vector<double> objective{table.total(v)};
    int last = -1;
    bool exhausted = false;
    const bool infeasible = fixed_order_power(bank, v, 2, gamma) > p_tot;
    while (!infeasible && fixed_order_power(bank, v, 2, gamma) <= p_tot) {
      if (std::all_of(v.begin(), v.end(), [](int x) { return x == 1; })) {
        exhausted = true;
        break;
      }
      int best = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < 4; ++i) {
        const int vi = v[static_cast<std::size_t>(i)];
        if (vi == 1) continue;
        double cost = 0.0;
        for (int j = 0; j < 2; ++j) cost += ber_inverse(bank.mu(vi - 1, i, j), 2, gamma) - ber_inverse(bank.mu(vi, i, j), 2, gamma);
        const double r = (table(vi, i) - table(vi - 1, i)) / (cost / 2);
        if (best < 0 || r > best_ratio) {
          best = i;
          best_ratio = r;
        }
      }
      --v[static_cast<std::size_t>(best)];
      last = best;
      objective.push_back(table.total(v));
    }
    if (!infeasible && !exhausted) ++v[static_cast<std::size_t>(last)];
    for (std::size_t k = 1; k < objective.size(); ++k) CHECK(objective[k] <= objective[k - 1]);

    const auto plan = alloc.jcamp(gamma, budget);
    CHECK(plan.assignment == v);
    CHECK(plan.scaled == infeasible);
    CHECK(alloc.jcap(gamma, budget).assignment == v);
    check_plan_invariants(plan, bank, budget);
    if (!infeasible) CHECK(fixed_order_power(bank, plan.assignment, 2, gamma) <= p_tot);

    // The greedy answer can never beat the feasible optimum.
    double best = INFINITY;
    for (int a = 0; a < 81; ++a) {
      const Assignment w{1 + a % 3, 1 + a / 3 % 3, 1 + a / 9 % 3, 1 + a / 27};
      if (fixed_order_power(bank, w, 2, gamma) <= p_tot) best = std::min(best, table.total(w));
    }
    if (!infeasible) CHECK(table.total(plan.assignment) >= best);
  }
}

TEST_CASE("plan invariants hold on random allocator runs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> snr(-5.0, 20.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng, 2, 4, 6, 3);
    const Allocator alloc(inst.bank, inst.table, 6);
    for (int rate : {2, 4}) {
      const LinkBudget budget{6 * 4 * std::pow(10.0, snr(rng) / 10.0), rate, 6};
      const double gamma = std::exp(snr(rng) / 10.0);
      for (Method m : {Method::jcamp, Method::jcap, Method::baseline}) {
        const auto plan = alloc.plan(m, gamma, budget);
        check_plan_invariants(plan, inst.bank, budget);
        CHECK(plan == alloc.plan(m, gamma, budget));
        if (m != Method::jcamp) {
          for (const auto& s : plan.symbols) CHECK(s.m == rate);
        }
      }
    }
  }
}

TEST_CASE("method ordering on random instances with adaptive modulation") {
  std::mt19937_64 rng(6);
  int jcamp_le_jcap = 0;
  int jcap_le_base = 0;
  const int trials = 60;
  for (int trial = 0; trial < trials; ++trial) {
    const auto inst = random_instance(rng, 2, 4, 8, 5);
    const Allocator alloc(inst.bank, inst.table, 6);
    const LinkBudget budget{8 * 4 * std::pow(10.0, (trial % 12) / 1.5 / 10.0 + 0.2), 4, 6};
    const double a = inst.table.total(alloc.jcamp(1.0, budget).assignment);
    const double c = inst.table.total(alloc.jcap(1.0, budget).assignment);
    const double b = inst.table.total(alloc.baseline(1.0, budget).assignment);
    jcamp_le_jcap += a <= c + 1e-12 ? 1 : 0;
    jcap_le_base += c <= b + 1e-12 ? 1 : 0;
  }
  MESSAGE("jcamp <= jcap in " << jcamp_le_jcap << "/" << trials << ", jcap <= baseline in " << jcap_le_base << "/"
                              << trials);
  CHECK(jcamp_le_jcap >= trials * 9 / 10);
  CHECK(jcap_le_base >= trials * 9 / 10);
}

TEST_CASE("lookup table grid and clipping") {
  LookupTable lut;
  lut.snr_lo_db = 0.77;
  lut.snr_hi_db = 11.01;
  lut.bits = 8;
  CHECK(lut.index_of(-100.0) == 0);
  CHECK(lut.index_of(0.77) == 0);
  CHECK(lut.index_of(11.01) == 255);
  CHECK(lut.index_of(100.0) == 255);
  CHECK(lut.cell_center_db(0) == doctest::Approx(0.77 + 0.02).epsilon(1e-12));
  for (std::size_t k = 0; k < 256; ++k) CHECK(lut.index_of(lut.cell_center_db(k)) == k);
  CHECK(instantaneous_snr_db(1152.0, 1.0, 128, 9) == 0.0);
  CHECK(gamma_for_snr_db(instantaneous_snr_db(50.0, 0.3, 128, 9), 50.0, 128, 9) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("lookup table construction, lookup and persistence") {
  std::mt19937_64 rng(7);
  const auto inst = random_instance(rng, 2, 4, 6, 3);
  const Allocator alloc(inst.bank, inst.table, 6);
  const LinkBudget budget{100.0, 4, 6};
  const auto [lo, hi] = feasible_snr_range(alloc, budget);
  CHECK(lo < hi);
  // At the lower end the all-V assignment is exactly feasible.
  const double g_lo = gamma_for_snr_db(lo, budget.p_tot, 6, 4);
  CHECK(alloc.temp_power_total(Assignment(6, 3), ModMatrix(6, 4, 4), g_lo) ==
        doctest::Approx(budget.p_tot).epsilon(1e-12));

  const auto lut = build_lut(alloc, budget, lo, hi, 6, Method::jcamp, 2);
  REQUIRE(lut.entries.size() == 64);
  CHECK(lut_plan(lut, 1e-9) == lut.entries[0]);
  CHECK(lut_plan(lut, 1e9) == lut.entries[63]);
  const double g = gamma_for_snr_db(lut.cell_center_db(17), budget.p_tot, 6, 4);
  CHECK(lut_plan(lut, g) == alloc.jcamp(g, budget));
  const auto doubled = lut_plan(lut, g / 2.0, 2.0 * budget.p_tot);
  CHECK(doubled.assignment == lut.entries[17].assignment);
  CHECK(doubled.total_power() == doctest::Approx(2.0 * budget.p_tot).epsilon(1e-12));

  std::stringstream io;
  write_lut(lut, io);
  const auto back = read_lut(io);
  CHECK(back.entries == lut.entries);
  CHECK(back.snr_lo_db == lut.snr_lo_db);
  CHECK(back.method == Method::jcamp);

  const auto text = plan_to_json(lut.entries[5], 2);
  CHECK(plan_from_json(text) == lut.entries[5]);
  CHECK_THROWS_AS(plan_from_json("{\"assignment\":[1],\"symbols\":[{\"m\":2,\"p\":1,\"group\":[[0,0]]}]}"), FormatError);
  std::istringstream bad("{\"snr_lo_db\":1}");
  CHECK_THROWS_AS(read_lut(bad), FormatError);
  CHECK_THROWS_AS(build_lut(alloc, budget, 5.0, 1.0, 8, Method::jcamp), RangeError);
}
