#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "mvq/error.hpp"
#include "mvq/linksim.hpp"
#include "mvq/rng.hpp"

namespace mvq {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'V', 'Q', 'F'};

void put_u32(std::ostream& out, std::uint32_t x) {
  const std::array<char, 4> bytes{static_cast<char>(x & 0xFFU), static_cast<char>((x >> 8) & 0xFFU),
                                  static_cast<char>((x >> 16) & 0xFFU), static_cast<char>((x >> 24) & 0xFFU)};
  out.write(bytes.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

double to_float32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

void write_dataset(const Dataset& dataset, std::ostream& out) {
  if (dataset.n <= 0 || dataset.d <= 0) throw RangeError("dataset N and D must be positive");
  const auto dim = static_cast<std::size_t>(dataset.n) * static_cast<std::size_t>(dataset.d);
  if (!dataset.features.empty() && dataset.features.dim() != dim) {
    throw DimensionError("feature length does not match N*D");
  }
  out.write(kMagic.data(), 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(dataset.n));
  put_u32(out, static_cast<std::uint32_t>(dataset.d));
  put_u32(out, static_cast<std::uint32_t>(dataset.features.size()));
  for (double x : dataset.features.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  if (!out) throw FormatError("dataset: write failed");
}

void write_dataset_file(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write dataset file " + path);
  write_dataset(dataset, out);
}

Dataset read_dataset(std::istream& in) {
  std::array<unsigned char, 20> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw FormatError("dataset: truncated header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) throw FormatError("dataset: bad magic (expected MVQF)");
  const auto version = get_u32(header.data() + 4);
  if (version != kDatasetVersion) throw FormatError("dataset: unsupported version " + std::to_string(version));
  Dataset ds;
  ds.n = static_cast<int>(get_u32(header.data() + 8));
  ds.d = static_cast<int>(get_u32(header.data() + 12));
  const std::size_t count = get_u32(header.data() + 16);
  if (ds.n <= 0 || ds.d <= 0) throw FormatError("dataset: N and D must be positive");
  const auto dim = static_cast<std::size_t>(ds.n) * static_cast<std::size_t>(ds.d);
  std::vector<unsigned char> raw(count * dim * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("dataset: truncated body, expected " + std::to_string(count) + " rows of " +
                      std::to_string(dim) + " floats");
  }
  std::vector<double> flat(count * dim);
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const float f = std::bit_cast<float>(get_u32(raw.data() + 4 * k));
    if (!std::isfinite(f)) throw FormatError("dataset: non-finite value at offset " + std::to_string(k));
    flat[k] = f;
  }
  ds.features = FeatureSet(dim, std::move(flat));
  return ds;
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file " + path);
  return read_dataset(in);
}

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "gaussian") return SynthKind::gaussian;
  if (name == "mixture") return SynthKind::mixture;
  throw RangeError("unknown synthetic kind '" + name + "' (expected gaussian or mixture)");
}

Dataset synthesize(const SynthSpec& spec) {
  if (spec.n <= 0 || spec.d <= 0) throw RangeError("synthetic N and D must be positive");
  if (spec.count == 0) throw RangeError("synthetic count must be positive");
  if (!(spec.sigma > 0.0)) throw RangeError("synthetic sigma must be positive");
  if (spec.kind == SynthKind::mixture && (spec.components < 1 || !(spec.spread >= 0.0))) {
    throw RangeError("mixture needs at least one component and a non-negative spread");
  }
  const auto dim = static_cast<std::size_t>(spec.n) * static_cast<std::size_t>(spec.d);
  const auto d = static_cast<std::size_t>(spec.d);
  auto rng = make_rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Mixture centres live in the D-dimensional sub-vector space.
  std::vector<double> centres;
  if (spec.kind == SynthKind::mixture) {
    centres.resize(static_cast<std::size_t>(spec.components) * d);
    for (double& c : centres) c = spec.spread * normal(rng);
  }
  std::uniform_int_distribution<int> pick(0, std::max(0, spec.components - 1));
  std::vector<double> flat(spec.count * dim);
  for (std::size_t row = 0; row < spec.count; ++row) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(spec.n); ++i) {
      const double* centre = nullptr;
      if (spec.kind == SynthKind::mixture) centre = centres.data() + static_cast<std::size_t>(pick(rng)) * d;
      for (std::size_t t = 0; t < d; ++t) {
        const double mean = centre != nullptr ? centre[t] : 0.0;
        flat[row * dim + i * d + t] = to_float32(mean + spec.sigma * normal(rng));
      }
    }
  }
  return {spec.n, spec.d, FeatureSet(dim, std::move(flat))};
}

void check_dataset(const Dataset& dataset, const CodebookBank& bank) {
  if (dataset.n != bank.N || dataset.d != bank.D) {
    throw DimensionError("dataset has N=" + std::to_string(dataset.n) + ", D=" + std::to_string(dataset.d) +
                         " but the bank expects N=" + std::to_string(bank.N) + ", D=" + std::to_string(bank.D));
  }
}

}  // namespace mvq
