#include "mvq/covq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <tuple>

#include "mvq/error.hpp"
#include "mvq/rng.hpp"
#include "parallel.hpp"

namespace mvq {

namespace {

void check_mu_matrix(std::span<const double> mu, std::size_t rows, int bits) {
  if (mu.size() != rows * static_cast<std::size_t>(bits)) {
    throw DimensionError("flip probabilities must form a positions x bits matrix");
  }
  for (double m : mu) {
    if (!(m >= 0.0 && m <= 0.5)) throw RangeError("flip probability outside [0, 0.5]");
  }
}

// In-place product-channel smoothing over the index hypercube:
// out(k) = sum_j P(k | j) in(j) for `width` interleaved channels.  If
// `derivative` names a bit, that bit's 2x2 kernel is replaced by its
// derivative with respect to mu.
void mix(std::vector<double>& values, std::size_t width, std::span<const double> mu, int derivative = -1) {
  const auto bits = static_cast<int>(mu.size());
  const std::size_t cells = std::size_t{1} << bits;
  for (int j = 0; j < bits; ++j) {
    const std::size_t w = std::size_t{1} << (bits - 1 - j);
    const double p = mu[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < cells; ++k) {
      if (k & w) continue;
      double* a = values.data() + k * width;
      double* b = values.data() + (k | w) * width;
      for (std::size_t t = 0; t < width; ++t) {
        const double x = a[t];
        const double y = b[t];
        if (j == derivative) {
          a[t] = y - x;
          b[t] = x - y;
        } else {
          a[t] = (1.0 - p) * x + p * y;
          b[t] = p * x + (1.0 - p) * y;
        }
      }
    }
  }
}

// Channel-smoothed statistics of one position packed as [count, sum_sq, sum...].
std::vector<double> packed(const CellStats& stats, int i) {
  const auto width = static_cast<std::size_t>(stats.dim) + 2;
  std::vector<double> out(stats.cells * width);
  const auto base = static_cast<std::size_t>(i) * stats.cells;
  for (std::size_t k = 0; k < stats.cells; ++k) {
    out[k * width] = stats.count[base + k];
    out[k * width + 1] = stats.sum_sq[base + k];
    for (int t = 0; t < stats.dim; ++t) {
      out[k * width + 2 + static_cast<std::size_t>(t)] =
          stats.sum[(base + k) * static_cast<std::size_t>(stats.dim) + static_cast<std::size_t>(t)];
    }
  }
  return out;
}

double packed_objective(const std::vector<double>& acc, const Codebook& codebook) {
  const auto width = static_cast<std::size_t>(codebook.dim()) + 2;
  double total = 0.0;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const auto c = codebook.codeword(k);
    const double* a = acc.data() + k * width;
    double norm = 0.0;
    double dot = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) {
      norm += c[t] * c[t];
      dot += c[t] * a[2 + t];
    }
    total += a[0] * norm - 2.0 * dot + a[1];
  }
  return total;
}

std::span<const double> mu_row(std::span<const double> mu, int i, int bits) {
  return mu.subspan(static_cast<std::size_t>(i) * static_cast<std::size_t>(bits), static_cast<std::size_t>(bits));
}

// Sum over positions of channel-smoothed statistics, added in position order.
std::vector<double> smoothed_total(const CellStats& stats, std::span<const double> mu, int bits,
                                   unsigned threads) {
  const auto width = static_cast<std::size_t>(stats.dim) + 2;
  std::vector<std::vector<double>> per(static_cast<std::size_t>(stats.positions));
  detail::parallel_for(per.size(), threads, [&](std::size_t i) {
    per[i] = packed(stats, static_cast<int>(i));
    mix(per[i], width, mu_row(mu, static_cast<int>(i), bits));
  });
  std::vector<double> acc(stats.cells * width, 0.0);
  for (const auto& p : per) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  return acc;
}

int positions_of(const FeatureSet& data, int dim) {
  if (data.empty()) throw RangeError("training data is empty");
  if (data.dim() % static_cast<std::size_t>(dim) != 0) {
    throw DimensionError("feature length " + std::to_string(data.dim()) +
                         " is not a multiple of the codeword dimension " + std::to_string(dim));
  }
  return static_cast<int>(data.dim() / static_cast<std::size_t>(dim));
}

// Sub-vectors ordered by decreasing squared distance to their codeword.
std::vector<std::pair<std::size_t, int>> worst_served(const FeatureSet& data, const Codebook& codebook,
                                                      std::size_t want) {
  const int positions = positions_of(data, codebook.dim());
  const auto d = static_cast<std::size_t>(codebook.dim());
  struct Item {
    double d2;
    std::size_t n;
    int i;
  };
  std::vector<Item> items;
  items.reserve(data.size() * static_cast<std::size_t>(positions));
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (int i = 0; i < positions; ++i) {
      items.push_back({quantize(data[n].subspan(static_cast<std::size_t>(i) * d, d), codebook).distance2, n, i});
    }
  }
  want = std::min(want, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(want), items.end(),
                    [](const Item& a, const Item& b) {
                      if (a.d2 != b.d2) return a.d2 > b.d2;
                      return std::tie(a.n, a.i) < std::tie(b.n, b.i);
                    });
  std::vector<std::pair<std::size_t, int>> out;
  for (std::size_t k = 0; k < want; ++k) out.emplace_back(items[k].n, items[k].i);
  return out;
}

}  // namespace

double regularizer(std::span<const double> mu) {
  if (mu.empty()) throw DimensionError("regularizer needs at least one entry");
  double sum = 0.0;
  for (double m : mu) {
    if (!(m > 0.0 && m < 1.0)) throw RangeError("regularizer entries must lie in (0, 1)");
    sum += m * std::log(m);
  }
  return sum / static_cast<double>(mu.size());
}

std::vector<double> regularizer_grad(std::span<const double> mu) {
  if (mu.empty()) throw DimensionError("regularizer needs at least one entry");
  std::vector<double> grad(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!(mu[k] > 0.0 && mu[k] < 1.0)) throw RangeError("regularizer entries must lie in (0, 1)");
    grad[k] = (std::log(mu[k]) + 1.0) / static_cast<double>(mu.size());
  }
  return grad;
}

CellStats cell_stats(const FeatureSet& data, const Codebook& codebook, unsigned threads) {
  CellStats stats;
  stats.positions = positions_of(data, codebook.dim());
  stats.dim = codebook.dim();
  stats.cells = codebook.size();
  stats.vectors = data.size();
  const auto d = static_cast<std::size_t>(stats.dim);
  const auto cells = static_cast<std::size_t>(stats.positions) * stats.cells;
  stats.count.assign(cells, 0.0);
  stats.sum_sq.assign(cells, 0.0);
  stats.sum.assign(cells * d, 0.0);
  detail::parallel_for(static_cast<std::size_t>(stats.positions), threads, [&](std::size_t i) {
    for (std::size_t n = 0; n < data.size(); ++n) {
      const auto sub = data[n].subspan(i * d, d);
      const std::size_t cell = i * stats.cells + quantize(sub, codebook).index;
      stats.count[cell] += 1.0;
      double sq = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        stats.sum[cell * d + t] += sub[t];
        sq += sub[t] * sub[t];
      }
      stats.sum_sq[cell] += sq;
    }
  });
  return stats;
}

double lloyd_objective(const CellStats& stats, const Codebook& codebook, std::span<const double> mu) {
  if (codebook.dim() != stats.dim || codebook.size() != stats.cells) {
    throw DimensionError("codebook does not match the cell statistics");
  }
  check_mu_matrix(mu, static_cast<std::size_t>(stats.positions), codebook.bits());
  const auto acc = smoothed_total(stats, mu, codebook.bits(), 1);
  return packed_objective(acc, codebook) / static_cast<double>(stats.vectors);
}

double lloyd_objective(const FeatureSet& data, const Codebook& codebook, std::span<const double> mu,
                       unsigned threads) {
  return lloyd_objective(cell_stats(data, codebook, threads), codebook, mu);
}

Codebook centroid_update(const CellStats& stats, const Codebook& codebook, std::span<const double> mu) {
  if (codebook.dim() != stats.dim || codebook.size() != stats.cells) {
    throw DimensionError("codebook does not match the cell statistics");
  }
  check_mu_matrix(mu, static_cast<std::size_t>(stats.positions), codebook.bits());
  const auto acc = smoothed_total(stats, mu, codebook.bits(), 1);
  const auto width = static_cast<std::size_t>(codebook.dim()) + 2;
  Codebook out = codebook;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    const double weight = acc[k * width];
    if (!(weight > 0.0)) continue;
    auto c = out.codeword(k);
    for (std::size_t t = 0; t < c.size(); ++t) c[t] = acc[k * width + 2 + t] / weight;
  }
  return out;
}

LloydStep lloyd_step(const Codebook& codebook, std::span<const double> mu, const FeatureSet& data,
                     unsigned threads) {
  const auto stats = cell_stats(data, codebook, threads);
  LloydStep step;
  step.before = lloyd_objective(stats, codebook, mu);

  Codebook target = centroid_update(stats, codebook, mu);
  const auto acc = smoothed_total(stats, mu, codebook.bits(), threads);
  const auto width = static_cast<std::size_t>(codebook.dim()) + 2;
  std::vector<std::size_t> dead;
  for (std::size_t k = 0; k < codebook.size(); ++k) {
    if (!(acc[k * width] > 0.0)) dead.push_back(k);
  }
  if (!dead.empty()) {
    const auto d = static_cast<std::size_t>(codebook.dim());
    const auto seeds = worst_served(data, codebook, dead.size());
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const auto sub = data[seeds[k].first].subspan(static_cast<std::size_t>(seeds[k].second) * d, d);
      std::copy(sub.begin(), sub.end(), target.codeword(dead[k]).begin());
    }
    step.reseeded = static_cast<int>(seeds.size());
  }

  std::vector<double> trial(codebook.data().size());
  double t = 1.0;
  for (int h = 0; h <= 30; ++h, t *= 0.5) {
    for (std::size_t k = 0; k < trial.size(); ++k) {
      trial[k] = codebook.data()[k] + t * (target.data()[k] - codebook.data()[k]);
    }
    Codebook candidate(codebook.dim(), codebook.bits(), trial);
    const double after = lloyd_objective(data, candidate, mu, threads);
    if (after <= step.before) {
      step.codebook = std::move(candidate);
      step.after = after;
      step.halvings = h;
      return step;
    }
  }
  step.codebook = codebook;
  step.after = step.before;
  step.halvings = -1;
  step.reseeded = 0;
  return step;
}

double profile_objective(const Codebook& codebook, std::span<const double> mu, const FeatureSet& data,
                         double lambda, unsigned threads) {
  return lloyd_objective(data, codebook, mu, threads) + lambda * regularizer(mu);
}

RefineResult refine_profile(const Codebook& codebook, const BitFlipProfile& profile,
                            const FeatureSet& data, double lambda, double step_size, int iters,
                            unsigned threads) {
  if (!(lambda >= 0.0)) throw RangeError("lambda must be non-negative");
  if (!(step_size > 0.0)) throw RangeError("step size must be positive");
  if (iters < 0) throw RangeError("iteration count must be non-negative");
  if (profile.bits() != codebook.bits()) throw DimensionError("profile and codebook disagree on B");
  const auto stats = cell_stats(data, codebook, threads);
  if (stats.positions != profile.positions()) throw DimensionError("profile and data disagree on N");

  const int bits = codebook.bits();
  const auto width = static_cast<std::size_t>(codebook.dim()) + 2;
  const auto vectors = static_cast<double>(stats.vectors);
  auto objective = [&](std::span<const double> mu) {
    return lloyd_objective(stats, codebook, mu) + lambda * regularizer(mu);
  };
  auto gradient = [&](std::span<const double> mu) {
    std::vector<double> grad = regularizer_grad(mu);
    for (double& g : grad) g *= lambda;
    detail::parallel_for(static_cast<std::size_t>(stats.positions), threads, [&](std::size_t i) {
      const auto base = packed(stats, static_cast<int>(i));
      const auto row = mu_row(mu, static_cast<int>(i), bits);
      for (int j = 0; j < bits; ++j) {
        auto work = base;
        mix(work, width, row, j);
        grad[i * static_cast<std::size_t>(bits) + static_cast<std::size_t>(j)] +=
            packed_objective(work, codebook) / vectors;
      }
    });
    return grad;
  };

  RefineResult result{profile, {}};
  std::vector<double> mu = profile.data();
  double current = objective(mu);
  result.trace.push_back(current);
  double step = step_size;
  std::vector<double> next(mu.size());
  for (int it = 0; it < iters; ++it) {
    const auto grad = gradient(mu);
    bool accepted = false;
    for (int h = 0; h < 60 && !accepted; ++h, step *= 0.5) {
      for (std::size_t k = 0; k < mu.size(); ++k) {
        next[k] = std::clamp(mu[k] - step * grad[k], profile.mu_min(), 0.5);
      }
      if (next == mu) break;
      const double value = objective(next);
      if (value <= current) {
        mu = next;
        current = value;
        accepted = true;
      }
    }
    if (!accepted) break;
    result.trace.push_back(current);
  }
  result.profile.assign_clipped(mu);
  return result;
}

BitFlipProfile ramp_profile(int positions, int bits, double mu_min, std::uint64_t seed) {
  if (positions <= 0 || bits <= 0) throw RangeError("profile shape must be positive");
  if (!(mu_min > 0.0 && mu_min < 0.5)) throw RangeError("mu_min must lie in (0, 0.5)");
  const double ratio = std::min(4.0 * mu_min, 0.5) / mu_min;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mu(static_cast<std::size_t>(positions) * static_cast<std::size_t>(bits));
  for (int i = 0; i < positions; ++i) {
    for (int j = 0; j < bits; ++j) {
      const double x = (j + u(rng)) / bits;
      mu[static_cast<std::size_t>(i) * static_cast<std::size_t>(bits) + static_cast<std::size_t>(j)] =
          std::clamp(mu_min * std::pow(ratio, x), mu_min, 0.5);
    }
  }
  return {positions, bits, std::move(mu), mu_min};
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "splitting") return InitMode::splitting;
  if (name == "random-sample" || name == "random_sample") return InitMode::random_sample;
  throw RangeError("unknown init mode '" + name + "' (expected splitting or random-sample)");
}

ProfileMode parse_profile_mode(const std::string& name) {
  if (name == "fixed") return ProfileMode::fixed;
  if (name == "refined") return ProfileMode::refined;
  throw RangeError("unknown profile mode '" + name + "' (expected fixed or refined)");
}

void TrainConfig::validate() const {
  if (V < 1) throw RangeError("V must be at least 1");
  if (D < 1 || N < 1) throw RangeError("D and N must be positive");
  if (B < 1 || B > 16) throw RangeError("B must lie in [1, 16]");
  if (mu_min_list.size() != static_cast<std::size_t>(V)) throw RangeError("mu_min list needs V entries");
  if (lambda_list.size() != static_cast<std::size_t>(V)) throw RangeError("lambda list needs V entries");
  for (std::size_t k = 0; k < mu_min_list.size(); ++k) {
    if (!(mu_min_list[k] > 0.0 && mu_min_list[k] < 0.5)) throw RangeError("mu_min entries must lie in (0, 0.5)");
    if (k > 0 && !(mu_min_list[k] > mu_min_list[k - 1])) throw RangeError("mu_min list must be strictly increasing");
    if (k > 0 && !(lambda_list[k] > lambda_list[k - 1])) throw RangeError("lambda list must be strictly increasing");
  }
  if (max_iters < 1) throw RangeError("max_iters must be at least 1");
  if (!(convergence_tol > 0.0)) throw RangeError("convergence tolerance must be positive");
  if (profile_mode == ProfileMode::refined && (!(refine_step > 0.0) || refine_iters < 0)) {
    throw RangeError("refinement needs a positive step and non-negative iteration count");
  }
}

namespace {

Codebook split_init(const FeatureSet& data, int dim, int bits, unsigned threads) {
  const int positions = positions_of(data, dim);
  const auto d = static_cast<std::size_t>(dim);
  std::vector<double> mean(d, 0.0);
  std::vector<double> sq(d, 0.0);
  double count = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (int i = 0; i < positions; ++i) {
      const auto sub = data[n].subspan(static_cast<std::size_t>(i) * d, d);
      for (std::size_t t = 0; t < d; ++t) {
        mean[t] += sub[t];
        sq[t] += sub[t] * sub[t];
      }
      count += 1.0;
    }
  }
  std::vector<double> delta(d);
  for (std::size_t t = 0; t < d; ++t) {
    mean[t] /= count;
    const double var = std::max(0.0, sq[t] / count - mean[t] * mean[t]);
    delta[t] = 0.01 * (var > 0.0 ? std::sqrt(var) : 1.0);
  }
  std::vector<double> flat = mean;
  for (int b = 1; b <= bits; ++b) {
    std::vector<double> grown;
    grown.reserve(flat.size() * 2);
    for (std::size_t k = 0; k < flat.size() / d; ++k) {
      for (int sign : {-1, 1}) {
        for (std::size_t t = 0; t < d; ++t) grown.push_back(flat[k * d + t] + sign * delta[t]);
      }
    }
    Codebook cb(dim, b, std::move(grown));
    const std::vector<double> clean(static_cast<std::size_t>(positions) * static_cast<std::size_t>(b), 0.0);
    for (int it = 0; it < 4; ++it) {
      auto step = lloyd_step(cb, clean, data, threads);
      if (step.halvings < 0) break;
      cb = std::move(step.codebook);
    }
    flat = cb.data();
  }
  return {dim, bits, std::move(flat)};
}

Codebook sample_init(const FeatureSet& data, int dim, int bits, std::uint64_t seed) {
  const int positions = positions_of(data, dim);
  const auto d = static_cast<std::size_t>(dim);
  const std::size_t pool = data.size() * static_cast<std::size_t>(positions);
  const std::size_t want = std::size_t{1} << bits;
  if (pool < want) {
    throw RangeError("random-sample init needs at least 2^B = " + std::to_string(want) + " sub-vectors");
  }
  std::vector<std::size_t> order(pool);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> flat;
  flat.reserve(want * d);
  for (std::size_t k = 0; k < want; ++k) {
    const std::size_t n = order[k] / static_cast<std::size_t>(positions);
    const std::size_t i = order[k] % static_cast<std::size_t>(positions);
    const auto sub = data[n].subspan(i * d, d);
    flat.insert(flat.end(), sub.begin(), sub.end());
  }
  return {dim, bits, std::move(flat)};
}

}  // namespace

TrainResult train_sequential(const FeatureSet& data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw RangeError("training data is empty");
  if (data.dim() != static_cast<std::size_t>(config.N) * static_cast<std::size_t>(config.D)) {
    throw DimensionError("feature length " + std::to_string(data.dim()) + " does not match N*D = " +
                         std::to_string(config.N * config.D));
  }
  TrainResult result;
  auto& bank = result.bank;
  bank.D = config.D;
  bank.B = config.B;
  bank.N = config.N;
  bank.V = config.V;
  bank.mu_min = config.mu_min_list;
  bank.lambda = config.lambda_list;

  for (int v = 1; v <= config.V; ++v) {
    Codebook cb;
    if (v == 1) {
      cb = config.init == InitMode::splitting
               ? split_init(data, config.D, config.B, config.threads)
               : sample_init(data, config.D, config.B, mix_seed(config.master_seed));
    } else {
      cb = bank.codebooks.back();
    }
    const auto vi = static_cast<std::size_t>(v - 1);
    auto profile = ramp_profile(config.N, config.B, config.mu_min_list[vi],
                                worker_seed(config.master_seed, static_cast<std::uint64_t>(v)));
    if (config.profile_mode == ProfileMode::refined) {
      profile = refine_profile(cb, profile, data, config.lambda_list[vi], config.refine_step,
                               config.refine_iters, config.threads)
                    .profile;
    }

    double objective = lloyd_objective(data, cb, profile.data(), config.threads);
    result.log.push_back({v, 0, objective});
    for (int it = 1; it <= config.max_iters; ++it) {
      auto step = lloyd_step(cb, profile.data(), data, config.threads);
      result.log.push_back({v, it, step.after});
      if (step.halvings < 0) break;
      cb = std::move(step.codebook);
      const double change = (objective - step.after) / std::max(std::abs(objective), 1e-300);
      objective = step.after;
      if (change < config.convergence_tol) break;
    }

    for (int u = 1; u < v; ++u) {
      const auto ui = static_cast<std::size_t>(u - 1);
      bank.codebooks[ui] = lloyd_step(bank.codebooks[ui], bank.profiles[ui].data(), data, config.threads).codebook;
    }
    bank.codebooks.push_back(std::move(cb));
    bank.profiles.push_back(std::move(profile));
  }
  bank.validate();
  return result;
}

void write_train_log_csv(const std::vector<TrainLogEntry>& log, std::ostream& out) {
  out << "stage,iteration,objective\n";
  const auto old = out.precision(17);
  for (const auto& e : log) out << e.stage << ',' << e.iteration << ',' << e.objective << '\n';
  out.precision(old);
}

}  // namespace mvq
