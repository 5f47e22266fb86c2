#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mvq/covq.hpp"
#include "mvq/distortion.hpp"
#include "mvq/error.hpp"
#include "test_support.hpp"

using namespace mvq;

namespace {

FeatureSet gaussian_data(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  return {dim, test::random_vector(rows * dim, rng)};
}

// Mean over vectors of the summed per-position expected distortion.
double direct_objective(const FeatureSet& data, const Codebook& cb, const std::vector<double>& mu) {
  const auto d = static_cast<std::size_t>(cb.dim());
  const auto b = static_cast<std::size_t>(cb.bits());
  const std::size_t n = data.dim() / d;
  double total = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      total += expected_distortion(data[r].subspan(i * d, d), cb, std::span<const double>(mu).subspan(i * b, b));
    }
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("regularizer values") {
  const double e = std::exp(-1.0);
  CHECK(regularizer(std::vector<double>{e}) == doctest::Approx(-e).epsilon(1e-15));
  CHECK(regularizer(std::vector<double>{0.5, 0.5}) == doctest::Approx(0.5 * std::log(0.5)).epsilon(1e-15));
  CHECK(regularizer(std::vector<double>{0.1, 0.2}) ==
        doctest::Approx((0.1 * std::log(0.1) + 0.2 * std::log(0.2)) / 2).epsilon(1e-15));
  const auto g = regularizer_grad(std::vector<double>{e, 0.3});
  CHECK(std::abs(g[0]) < 1e-15);
  CHECK(g[1] == doctest::Approx((std::log(0.3) + 1) / 2).epsilon(1e-14));
  CHECK(regularizer(std::vector<double>{e}) < regularizer(std::vector<double>{e * 1.01}));
  CHECK(regularizer(std::vector<double>{e}) < regularizer(std::vector<double>{e * 0.99}));
  CHECK_THROWS_AS(regularizer(std::vector<double>{0.0}), RangeError);
}

TEST_CASE("objective equals the summed expected distortion of nearest-codeword encoding") {
  std::mt19937_64 rng(21);
  const auto data = gaussian_data(30, 12, rng);
  const auto cb = test::random_codebook(3, 4, rng);
  const auto mu = test::random_mu(16, rng, 0.001, 0.4);
  CHECK(lloyd_objective(data, cb, mu, 1) == doctest::Approx(direct_objective(data, cb, mu)).epsilon(1e-12));
  CHECK(lloyd_objective(data, cb, mu, 3) == doctest::Approx(lloyd_objective(data, cb, mu, 1)).epsilon(1e-14));
  CHECK_THROWS_AS(lloyd_objective(data, cb, std::vector<double>(12, 0.1)), DimensionError);
}

TEST_CASE("noiseless lloyd step is the classical centroid update") {
  const FeatureSet data(1, {0.0, 1.0, 4.0, 6.0});
  const Codebook cb(1, 1, {0.0, 5.0});
  const auto step = lloyd_step(cb, std::vector<double>{0.0}, data, 1);
  CHECK(step.halvings == 0);
  CHECK(step.codebook == Codebook(1, 1, {0.5, 5.0}));
  CHECK(step.before == doctest::Approx((0 + 1 + 1 + 1) / 4.0));
  CHECK(step.after == doctest::Approx((0.25 + 0.25 + 1 + 1) / 4.0));
}

TEST_CASE("one point per cell is a fixed point with zero objective") {
  const FeatureSet data(2, {0, 0, 1, 1, -1, 2, 3, -2});
  const Codebook cb(2, 2, {0, 0, 1, 1, -1, 2, 3, -2});
  const auto step = lloyd_step(cb, std::vector<double>{0.0, 0.0}, data, 1);
  CHECK(step.codebook == cb);
  CHECK(step.after == 0.0);
}

TEST_CASE("channel-weighted centroids on a one-bit codebook") {
  // Cell 0 holds {0, 2}, cell 1 holds {10}; each index flips with mu.
  const FeatureSet data(1, {0.0, 2.0, 10.0});
  const Codebook cb(1, 1, {1.0, 10.0});
  const double mu = 0.1;
  const auto stats = cell_stats(data, cb, 1);
  const auto out = centroid_update(stats, cb, std::vector<double>{mu});
  CHECK(out.codeword(0)[0] == doctest::Approx(((1 - mu) * 2.0 + mu * 10.0) / ((1 - mu) * 2 + mu * 1)));
  CHECK(out.codeword(1)[0] == doctest::Approx((mu * 2.0 + (1 - mu) * 10.0) / (mu * 2 + (1 - mu) * 1)));
}

TEST_CASE("lloyd steps never raise the objective") {
  std::mt19937_64 rng(22);
  const auto data = gaussian_data(200, 8, rng);
  auto cb = test::random_codebook(2, 4, rng, 3.0);
  const auto mu = test::random_mu(16, rng, 0.01, 0.2);
  double prev = lloyd_objective(data, cb, mu, 1);
  for (int it = 0; it < 15; ++it) {
    const auto step = lloyd_step(cb, mu, data, 1);
    CHECK(step.before == doctest::Approx(prev).epsilon(1e-14));
    CHECK(step.after <= step.before);
    prev = step.after;
    cb = step.codebook;
  }
}

TEST_CASE("dead codewords are reseeded") {
  const FeatureSet data(1, {0.0, 0.1, 5.0, 5.2});
  const Codebook cb(1, 2, {0.0, 5.0, 100.0, 200.0});
  const auto step = lloyd_step(cb, std::vector<double>{0.0, 0.0}, data, 1);
  CHECK(step.reseeded == 2);
  CHECK(step.after < step.before);
}

TEST_CASE("profile refinement limits") {
  std::mt19937_64 rng(23);
  const auto data = gaussian_data(50, 8, rng);
  const auto cb = test::random_codebook(2, 3, rng);
  const BitFlipProfile start(4, 3, test::random_mu(12, rng, 0.01, 0.04), 0.01);

  // Without the regularizer every flip probability falls to the floor.
  const auto low = refine_profile(cb, start, data, 0.0, 1.0, 50, 1);
  for (double m : low.profile.data()) CHECK(m == 0.01);
  // A dominant regularizer pushes every entry to 1/e, clipped at 0.5 from above.
  const auto high = refine_profile(cb, start, data, 1e6, 1e-3, 200, 1);
  for (double m : high.profile.data()) CHECK(m == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
  for (const auto* r : {&low, &high}) {
    for (std::size_t k = 1; k < r->trace.size(); ++k) CHECK(r->trace[k] <= r->trace[k - 1]);
  }
  CHECK_THROWS_AS(refine_profile(cb, start, data, -1.0, 1.0, 1), RangeError);
}

TEST_CASE("refinement follows the averaged analytic gradient") {
  std::mt19937_64 rng(24);
  const auto data = gaussian_data(40, 8, rng);
  const auto cb = test::random_codebook(4, 3, rng);
  const BitFlipProfile start(2, 3, test::random_mu(6, rng, 0.05, 0.3), 0.001);
  const double step = 1e-6;
  const double lambda = 0.5;
  const auto r = refine_profile(cb, start, data, lambda, step, 1, 1);
  REQUIRE(r.trace.size() == 2);

  const auto mu = start.data();
  std::vector<double> grad(6, 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (std::size_t i = 0; i < 2; ++i) {
      const auto g = distortion_grad_mu(data[n].subspan(4 * i, 4), cb, std::span<const double>(mu).subspan(3 * i, 3));
      for (std::size_t j = 0; j < 3; ++j) grad[3 * i + j] += g[j] / static_cast<double>(data.size());
    }
  }
  for (std::size_t k = 0; k < 6; ++k) {
    grad[k] += lambda * (std::log(mu[k]) + 1) / 6;
    const double moved = (mu[k] - r.profile.data()[k]) / step;
    CHECK(moved == doctest::Approx(grad[k]).epsilon(1e-6));
  }
}

TEST_CASE("ramp profile shape") {
  const auto p = ramp_profile(5, 9, 0.001, 7);
  CHECK(p.mu_min() == 0.001);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 9; ++j) {
      CHECK(p(i, j) >= 0.001);
      CHECK(p(i, j) < 0.004);
      if (j > 0) CHECK(p(i, j) > p(i, j - 1));
    }
  }
  CHECK(ramp_profile(5, 9, 0.001, 7) == p);
  CHECK(ramp_profile(2, 3, 0.3, 1)(1, 2) <= 0.5);
}

TEST_CASE("sequential training") {
  std::mt19937_64 rng(25);
  const auto data = gaussian_data(300, 8, rng);
  TrainConfig cfg;
  cfg.V = 3;
  cfg.D = 2;
  cfg.B = 4;
  cfg.N = 4;
  cfg.mu_min_list = {0.001, 0.01, 0.05};
  cfg.lambda_list = {0.1, 0.2, 0.4};
  cfg.max_iters = 10;
  cfg.threads = 1;

  for (auto init : {InitMode::splitting, InitMode::random_sample}) {
    for (auto mode : {ProfileMode::fixed, ProfileMode::refined}) {
      cfg.init = init;
      cfg.profile_mode = mode;
      const auto result = train_sequential(data, cfg);
      CHECK_NOTHROW(result.bank.validate());
      CHECK(result.bank.V == 3);
      for (std::size_t k = 1; k < result.log.size(); ++k) {
        if (result.log[k].stage == result.log[k - 1].stage) CHECK(result.log[k].objective <= result.log[k - 1].objective);
      }
      const auto table = build_table(data, result.bank, 1);
      CHECK(table.total(Assignment(4, 1)) <= table.total(Assignment(4, 3)));

      std::stringstream io;
      write_bank(result.bank, io);
      CHECK(read_bank(io) == result.bank);
      CHECK(train_sequential(data, cfg).bank == result.bank);
    }
  }

  std::ostringstream csv;
  write_train_log_csv({{1, 0, 2.5}}, csv);
  CHECK(csv.str() == "stage,iteration,objective\n1,0,2.5\n");

  cfg.mu_min_list = {0.01, 0.001, 0.05};
  CHECK_THROWS_AS(train_sequential(data, cfg), RangeError);
  cfg.mu_min_list = {0.001, 0.01, 0.05};
  cfg.N = 3;
  CHECK_THROWS_AS(train_sequential(data, cfg), DimensionError);
  CHECK(parse_init_mode("random-sample") == InitMode::random_sample);
  CHECK_THROWS_AS(parse_profile_mode("adaptive"), RangeError);
}

TEST_CASE("single-codebook bank") {
  std::mt19937_64 rng(26);
  const auto data = gaussian_data(100, 4, rng);
  TrainConfig cfg;
  cfg.V = 1;
  cfg.D = 2;
  cfg.B = 3;
  cfg.N = 2;
  cfg.mu_min_list = {0.01};
  cfg.lambda_list = {1.0};
  cfg.threads = 1;
  const auto result = train_sequential(data, cfg);
  CHECK(result.bank.codebooks.size() == 1);
  CHECK(result.log.front().iteration == 0);
}
