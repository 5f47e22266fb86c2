#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>

#include "mvq/error.hpp"
#include "mvq/linksim.hpp"
#include "mvq/rng.hpp"
#include "parallel.hpp"

namespace mvq {

TransmissionPlan make_plan(const LinkSetup& setup, Method method, double gamma, const LinkBudget& budget) {
  if (method == Method::lut) {
    if (setup.lut == nullptr) throw RangeError("method lut needs a lookup table");
    return lut_plan(*setup.lut, gamma, budget.p_tot);
  }
  if (setup.allocator == nullptr) throw RangeError("link setup has no allocator");
  return setup.allocator->plan(method, gamma, budget);
}

LinkRecord transmit(std::span<const double> features, const CodebookBank& bank, const DistortionTable& table,
                    const TransmissionPlan& plan, const ChannelState& state, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(bank.N);
  const auto b = static_cast<std::size_t>(bank.B);
  const auto enc = encode(features, plan.assignment, bank);
  std::vector<Bits> sent(n);
  for (std::size_t i = 0; i < n; ++i) sent[i] = index_to_bits(enc.indices[i], bank.B);
  std::vector<Bits> received = sent;

  LinkRecord rec;
  rec.gamma = state.gamma();
  rec.scaled = plan.scaled;
  rec.mean_codebook_index = plan.mean_codebook_index();
  rec.expected_distortion = table.total(plan.assignment);

  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(state.sigma2 / 2.0));
  Bits tx;
  Bits rx;
  std::size_t covered = 0;
  for (const auto& sym : plan.symbols) {
    tx.resize(static_cast<std::size_t>(sym.m));
    rx.resize(static_cast<std::size_t>(sym.m));
    for (std::size_t k = 0; k < sym.group.size(); ++k) {
      const auto& c = sym.group[k];
      if (c.i < 0 || c.j < 0 || static_cast<std::size_t>(c.i) >= n || static_cast<std::size_t>(c.j) >= b) {
        throw DimensionError("plan refers to a bit outside the N x B layout");
      }
      tx[k] = sent[static_cast<std::size_t>(c.i)][static_cast<std::size_t>(c.j)];
    }
    const std::complex<double> w{noise(rng), noise(rng)};
    const auto y = state.h * qam_modulate(tx, sym.m, sym.p) + w;
    qam_detect(y, state, sym.m, sym.p, rx);
    GroupErrors g{sym.m, sym.mu_bar, tx.size(), 0};
    for (std::size_t k = 0; k < sym.group.size(); ++k) {
      const auto& c = sym.group[k];
      received[static_cast<std::size_t>(c.i)][static_cast<std::size_t>(c.j)] = rx[k];
      g.errors += tx[k] != rx[k] ? 1U : 0U;
    }
    covered += tx.size();
    rec.bits += g.bits;
    rec.bit_errors += g.errors;
    rec.groups.push_back(g);
  }
  if (covered != n * b) throw DimensionError("plan symbols do not cover all N*B bits");

  const auto z_hat = reconstruct(received, plan.assignment, bank);
  for (std::size_t k = 0; k < features.size(); ++k) {
    const double e = features[k] - z_hat[k];
    const double q = features[k] - enc.quantized[k];
    rec.mse += e * e;
    rec.quantization_error += q * q;
  }
  return rec;
}

LinkRecord run_once(std::span<const double> features, const LinkSetup& setup, const LinkBudget& budget,
                    const ChannelState& state, Method method, std::uint64_t seed) {
  if (setup.allocator == nullptr) throw RangeError("link setup has no allocator");
  const auto& bank = setup.allocator->bank();
  if (features.size() != static_cast<std::size_t>(bank.feature_dim())) {
    throw DimensionError("feature length " + std::to_string(features.size()) + " does not match N*D = " +
                         std::to_string(bank.feature_dim()));
  }
  const auto plan = make_plan(setup, method, state.gamma(), budget);
  return transmit(features, bank, setup.allocator->table(), plan, state, seed);
}

void SweepConfig::validate() const {
  if (snr_db_grid.empty()) throw RangeError("sweep grid is empty");
  if (trials_per_point < 1) throw RangeError("trials per point must be at least 1");
  for (double s : snr_db_grid) {
    if (!std::isfinite(s)) throw RangeError("sweep grid entries must be finite");
  }
}

SweepReport sweep(const FeatureSet& data, const CodebookBank& bank, const LinkSetup& setup,
                  const SweepConfig& config) {
  config.validate();
  if (data.empty()) throw RangeError("sweep needs at least one feature vector");
  if (data.dim() != static_cast<std::size_t>(bank.feature_dim())) throw DimensionError("dataset does not match the bank");
  SweepReport report;
  const auto trials = static_cast<std::size_t>(config.trials_per_point);
  for (std::size_t k = 0; k < config.snr_db_grid.size(); ++k) {
    SweepPoint pt;
    pt.snr_db = config.snr_db_grid[k];
    pt.p_tot = static_cast<double>(bank.N) * bank.B * std::pow(10.0, pt.snr_db / 10.0);
    pt.trials = config.trials_per_point;
    const LinkBudget budget{pt.p_tot, config.rate, config.m_max};
    budget.validate(bank.N, bank.B);

    std::vector<LinkRecord> records(trials);
    detail::parallel_for(trials, config.threads, [&](std::size_t t) {
      auto rng = make_rng(trial_seed(config.master_seed, k, t));
      const auto state = draw_channel(config.channel, 1.0, rng);
      std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
      const auto row = pick(rng);
      const std::uint64_t noise_seed = rng();
      records[t] = run_once(data[row], setup, budget, state, config.method, noise_seed);
    });

    double bits = 0.0;
    double errors = 0.0;
    double target = 0.0;
    double f_bits = 0.0;
    double f_errors = 0.0;
    double f_target = 0.0;
    for (const auto& r : records) {
      pt.mean_mse += r.mse;
      pt.mean_quantization_error += r.quantization_error;
      pt.mean_distortion += r.expected_distortion;
      pt.mean_codebook_index += r.mean_codebook_index;
      pt.scaled_fraction += r.scaled ? 1.0 : 0.0;
      double weighted = 0.0;
      for (const auto& g : r.groups) weighted += g.mu_bar * static_cast<double>(g.bits);
      bits += static_cast<double>(r.bits);
      errors += static_cast<double>(r.bit_errors);
      target += weighted;
      if (!r.scaled) {
        ++pt.feasible_trials;
        pt.feasible_mse += r.mse;
        pt.feasible_distortion += r.expected_distortion;
        f_bits += static_cast<double>(r.bits);
        f_errors += static_cast<double>(r.bit_errors);
        f_target += weighted;
      }
    }
    const auto count = static_cast<double>(trials);
    pt.mean_mse /= count;
    pt.mean_quantization_error /= count;
    pt.mean_distortion /= count;
    pt.mean_codebook_index /= count;
    pt.scaled_fraction /= count;
    pt.empirical_ber = errors / bits;
    pt.target_ber = target / bits;
    if (pt.feasible_trials > 0) {
      pt.feasible_mse /= pt.feasible_trials;
      pt.feasible_distortion /= pt.feasible_trials;
      pt.feasible_empirical_ber = f_errors / f_bits;
      pt.feasible_target_ber = f_target / f_bits;
    }
    report.points.push_back(pt);
  }
  return report;
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
  out << "point,metric,value\n";
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < report.points.size(); ++k) {
    const auto& p = report.points[k];
    const std::pair<const char*, double> rows[] = {
        {"snr_db", p.snr_db},
        {"p_tot", p.p_tot},
        {"trials", p.trials},
        {"mean_mse", p.mean_mse},
        {"mean_quantization_error", p.mean_quantization_error},
        {"mean_distortion", p.mean_distortion},
        {"mean_codebook_index", p.mean_codebook_index},
        {"scaled_fraction", p.scaled_fraction},
        {"empirical_ber", p.empirical_ber},
        {"target_ber", p.target_ber},
        {"feasible_trials", p.feasible_trials},
        {"feasible_mse", p.feasible_mse},
        {"feasible_distortion", p.feasible_distortion},
        {"feasible_empirical_ber", p.feasible_empirical_ber},
        {"feasible_target_ber", p.feasible_target_ber},
    };
    for (const auto& [name, value] : rows) out << k << ',' << name << ',' << value << '\n';
  }
  out.precision(old);
}

namespace {

// Bit errors of `symbols` random Gray-QAM symbols at power p over unit noise.
std::size_t qam_errors(int m, double p, std::size_t symbols, std::uint64_t seed) {
  const ChannelState state({1.0, 0.0}, 1.0);
  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
  Bits tx(static_cast<std::size_t>(m));
  Bits rx(static_cast<std::size_t>(m));
  std::size_t errors = 0;
  for (std::size_t s = 0; s < symbols; ++s) {
    std::uint64_t word = rng();
    for (auto& bit : tx) {
      bit = static_cast<std::uint8_t>(word & 1U);
      word >>= 1;
    }
    const std::complex<double> w{noise(rng), noise(rng)};
    qam_detect(qam_modulate(tx, m, p) + w, state, m, p, rx);
    for (std::size_t k = 0; k < tx.size(); ++k) errors += tx[k] != rx[k] ? 1U : 0U;
  }
  return errors;
}

}  // namespace

double simulate_qam_ber(int m, double p, std::size_t bits, std::uint64_t seed) {
  check_mod_order(m);
  if (!(p >= 0.0)) throw RangeError("symbol power must be non-negative");
  if (bits == 0) throw RangeError("bit count must be positive");
  const auto per = static_cast<std::size_t>(m);
  const std::size_t symbols = (bits + per - 1) / per;
  return static_cast<double>(qam_errors(m, p, symbols, seed)) / static_cast<double>(symbols * per);
}

std::vector<BerCheck> verify_ber(const TransmissionPlan& plan, double gamma, std::size_t bits_per_group,
                                 std::uint64_t seed, unsigned threads) {
  if (!(gamma > 0.0)) throw RangeError("gamma must be positive");
  if (bits_per_group == 0) throw RangeError("bits per group must be positive");
  std::vector<BerCheck> rows(plan.symbols.size());
  detail::parallel_for(rows.size(), threads, [&](std::size_t t) {
    const auto& sym = plan.symbols[t];
    auto& row = rows[t];
    row.symbol = static_cast<int>(t);
    row.m = sym.m;
    row.p = sym.p;
    row.target = sym.mu_bar;
    row.predicted = ber_approx(sym.p, sym.m, gamma);
    const auto m = static_cast<std::size_t>(sym.m);
    row.bits = (bits_per_group + m - 1) / m * m;
    // Unit noise with the gain folded into the power: |h|^2 p / sigma^2 = gamma p.
    row.errors = qam_errors(sym.m, sym.p * gamma, row.bits / m, worker_seed(seed, t));
  });
  return rows;
}

void write_ber_csv(const std::vector<BerCheck>& rows, std::ostream& out) {
  out << "symbol,m,p,target_ber,predicted_ber,bits,errors,empirical_ber,relative_error\n";
  const auto old = out.precision(10);
  for (const auto& r : rows) {
    const double rel = r.target > 0.0 ? (r.empirical() - r.target) / r.target : 0.0;
    out << r.symbol << ',' << r.m << ',' << r.p << ',' << r.target << ',' << r.predicted << ',' << r.bits << ','
        << r.errors << ',' << r.empirical() << ',' << rel << '\n';
  }
  out.precision(old);
}

}  // namespace mvq
