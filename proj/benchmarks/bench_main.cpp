#include <benchmark/benchmark.h>

#include <random>

#include "mvq/allocator.hpp"
#include "mvq/channel.hpp"
#include "mvq/covq.hpp"
#include "mvq/distortion.hpp"
#include "mvq/linksim.hpp"

using namespace mvq;

namespace {

const std::vector<double> kMuMin{0.0005, 0.001, 0.0045, 0.02, 0.05};

Codebook random_codebook(int dim, int bits, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> flat((std::size_t{1} << bits) * static_cast<std::size_t>(dim));
  for (double& x : flat) x = g(rng);
  return {dim, bits, std::move(flat)};
}

CodebookBank random_bank(int n, int d, int b) {
  auto rng = make_rng(1);
  CodebookBank bank;
  bank.D = d;
  bank.B = b;
  bank.N = n;
  bank.V = 5;
  bank.mu_min = kMuMin;
  bank.lambda = {0.125, 0.25, 0.5, 1.0, 2.0};
  for (int v = 1; v <= 5; ++v) {
    bank.codebooks.push_back(random_codebook(d, b, rng));
    bank.profiles.push_back(ramp_profile(n, b, kMuMin[static_cast<std::size_t>(v - 1)], v));
  }
  return bank;
}

FeatureSet features(int n, int d, std::size_t count) {
  SynthSpec spec;
  spec.n = n;
  spec.d = d;
  spec.count = count;
  return synthesize(spec).features;
}

void BM_BerInverse(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  double mu = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ber_inverse(mu, m, 1.0));
    mu = mu < 0.2 ? mu * 1.01 : 1e-3;
  }
}
BENCHMARK(BM_BerInverse)->Arg(2)->Arg(4)->Arg(6);

void BM_ExpectedDistortion(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  auto rng = make_rng(2);
  const auto cb = random_codebook(4, b, rng);
  const std::vector<double> x{0.1, -0.3, 0.7, 0.2};
  const std::vector<double> mu(static_cast<std::size_t>(b), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(expected_distortion(x, cb, mu));
}
BENCHMARK(BM_ExpectedDistortion)->Arg(5)->Arg(9);

void BM_BuildTable(benchmark::State& state) {
  const auto bank = random_bank(128, 4, 9);
  const auto data = features(128, 4, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_table(data, bank, 1));
}
BENCHMARK(BM_BuildTable)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Plan(benchmark::State& state) {
  const auto bank = random_bank(128, 4, 9);
  const auto table = build_table(features(128, 4, 20), bank, 1);
  const Allocator alloc(bank, table, 6);
  const LinkBudget budget{128.0 * 9.0 * 4.0, 4, 6};
  const auto method = static_cast<Method>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(alloc.plan(method, 1.0, budget));
}
BENCHMARK(BM_Plan)
    ->Arg(static_cast<int>(Method::jcamp))
    ->Arg(static_cast<int>(Method::jcap))
    ->Arg(static_cast<int>(Method::baseline))
    ->Unit(benchmark::kMillisecond);

void BM_LloydStep(benchmark::State& state) {
  auto rng = make_rng(3);
  const auto cb = random_codebook(4, 9, rng);
  const auto data = features(128, 4, 50);
  const auto profile = ramp_profile(128, 9, 0.001, 4);
  for (auto _ : state) benchmark::DoNotOptimize(lloyd_step(cb, profile.data(), data, 1));
}
BENCHMARK(BM_LloydStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
