#pragma once

// Feature datasets, end-to-end Monte Carlo link simulation, SNR sweeps and
// the flat key=value configuration format used by the command-line tool.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvq/allocator.hpp"
#include "mvq/channel.hpp"
#include "mvq/vq.hpp"

namespace mvq {

// ---- datasets --------------------------------------------------------------

// Binary layout: "MVQF", then u32 version, N, D, count (little-endian),
// followed by count * N * D little-endian float32 values.
inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  int n = 0;
  int d = 0;
  FeatureSet features;
};

void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset_file(const Dataset& dataset, const std::string& path);
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

enum class SynthKind { gaussian, mixture };
SynthKind parse_synth_kind(const std::string& name);

struct SynthSpec {
  SynthKind kind = SynthKind::gaussian;
  int n = 128;
  int d = 4;
  std::size_t count = 1000;
  int components = 4;   // mixture only
  double spread = 2.0;  // standard deviation of mixture centres
  double sigma = 1.0;   // per-coordinate standard deviation around a centre
  std::uint64_t seed = 1;
};

// Values are rounded to float32 so that a written file reads back exactly.
Dataset synthesize(const SynthSpec& spec);

// Throws DimensionError unless the dataset matches the bank's N and D.
void check_dataset(const Dataset& dataset, const CodebookBank& bank);

// ---- single transmission ---------------------------------------------------

struct GroupErrors {
  int m = 0;
  double mu_bar = 0.0;
  std::size_t bits = 0;
  std::size_t errors = 0;
};

struct LinkRecord {
  double gamma = 0.0;
  double mse = 0.0;                  // ||z - z_hat||^2
  double quantization_error = 0.0;   // ||z - z_q||^2
  double expected_distortion = 0.0;  // sum_i table(v_i, i)
  double mean_codebook_index = 0.0;
  bool scaled = false;
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  std::vector<GroupErrors> groups;  // one per plan symbol
};

// Everything a transmitter/receiver pair shares.
struct LinkSetup {
  const Allocator* allocator = nullptr;
  const LookupTable* lut = nullptr;  // required for Method::lut
};

TransmissionPlan make_plan(const LinkSetup& setup, Method method, double gamma, const LinkBudget& budget);

// Sends one feature vector over the link described by `plan`.
LinkRecord transmit(std::span<const double> features, const CodebookBank& bank, const DistortionTable& table,
                    const TransmissionPlan& plan, const ChannelState& state, std::uint64_t seed);

// Plans for `state` with `method`, then transmits.
LinkRecord run_once(std::span<const double> features, const LinkSetup& setup, const LinkBudget& budget,
                    const ChannelState& state, Method method, std::uint64_t seed);

// ---- sweeps ----------------------------------------------------------------

struct SweepConfig {
  std::vector<double> snr_db_grid;
  ChannelModel channel = ChannelModel::rayleigh;
  int trials_per_point = 100;
  Method method = Method::jcamp;
  std::uint64_t master_seed = 1;
  int rate = 4;
  int m_max = 6;
  unsigned threads = 0;

  void validate() const;
};

struct SweepPoint {
  double snr_db = 0.0;
  double p_tot = 0.0;
  int trials = 0;
  double mean_mse = 0.0;
  double mean_quantization_error = 0.0;
  double mean_distortion = 0.0;  // mean of sum_i table(v_i, i)
  double mean_codebook_index = 0.0;
  double scaled_fraction = 0.0;
  double empirical_ber = 0.0;  // over all transmitted bits
  double target_ber = 0.0;     // bit-weighted mean of mu_bar
  // Same averages restricted to trials whose plan was not scaled.
  int feasible_trials = 0;
  double feasible_mse = 0.0;
  double feasible_distortion = 0.0;
  double feasible_empirical_ber = 0.0;
  double feasible_target_ber = 0.0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
};

// Noise power is fixed at 1 and P_tot = N B 10^(snr/10).  Trial t at grid
// point k uses seed trial_seed(master_seed, k, t), so different methods
// see the same channels, feature vectors and noise.
SweepReport sweep(const FeatureSet& data, const CodebookBank& bank, const LinkSetup& setup,
                  const SweepConfig& config);

// CSV with header "point,metric,value".
void write_sweep_csv(const SweepReport& report, std::ostream& out);

// ---- BER verification ------------------------------------------------------

struct BerCheck {
  int symbol = 0;
  int m = 0;
  double p = 0.0;
  double target = 0.0;     // mu_bar of the symbol
  double predicted = 0.0;  // ber_approx at the planned power
  std::size_t bits = 0;
  std::size_t errors = 0;

  double empirical() const { return bits == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(bits); }
};

// Pushes at least `bits_per_group` random bits through every symbol slot of
// `plan` on a channel with gain-to-noise ratio gamma.
std::vector<BerCheck> verify_ber(const TransmissionPlan& plan, double gamma, std::size_t bits_per_group,
                                 std::uint64_t seed, unsigned threads = 0);

// Empirical BER of Gray QAM at power p with gamma = 1.
double simulate_qam_ber(int m, double p, std::size_t bits, std::uint64_t seed);

void write_ber_csv(const std::vector<BerCheck>& rows, std::ostream& out);

// ---- metrics ---------------------------------------------------------------

// 10 log10(p_tot * mean_gamma / (N B)).
double snr_db(double p_tot, double mean_gamma, int n, int b);
// bits / (C H W 8).
double compression_ratio(double bits, double c, double h, double w);
// 10 log10(MAX^2 / MSE^2).
double psnr(double max_value, double mse);

// ---- configuration ---------------------------------------------------------

// Flat "key = value" text; '#' starts a comment.  Later keys override
// earlier ones.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in);
ConfigMap read_config_file(const std::string& path);

double config_double(const ConfigMap& config, const std::string& key, double fallback);
long config_int(const ConfigMap& config, const std::string& key, long fallback);
std::string config_string(const ConfigMap& config, const std::string& key, const std::string& fallback);
std::vector<double> config_list(const ConfigMap& config, const std::string& key,
                                const std::vector<double>& fallback);
// Comma or whitespace separated numbers.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace mvq
