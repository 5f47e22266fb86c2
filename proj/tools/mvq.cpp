#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "mvq/allocator.hpp"
#include "mvq/channel.hpp"
#include "mvq/covq.hpp"
#include "mvq/distortion.hpp"
#include "mvq/error.hpp"
#include "mvq/linksim.hpp"
#include "mvq/vq.hpp"

using namespace mvq;

namespace {

// Options of one subcommand.  A flag given on the command line wins over
// the same key in the --config file, which wins over the built-in default.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "Flat key = value file; flags override its keys");
  }

  template <class T>
  void bind(const std::string& flag, T& var, const std::string& key, const std::string& help) {
    CLI::Option* opt = app_->add_option(flag, var, help + " [config: " + key + "]")->capture_default_str();
    resolvers_.push_back([opt, &var, key](const ConfigMap& cfg) {
      if (opt->count() == 0 && cfg.count(key) != 0) assign(var, cfg, key);
    });
  }

  void resolve() {
    ConfigMap cfg;
    if (!config_path_.empty()) cfg = read_config_file(config_path_);
    for (auto& r : resolvers_) r(cfg);
  }

 private:
  static void assign(double& v, const ConfigMap& c, const std::string& k) { v = config_double(c, k, v); }
  static void assign(int& v, const ConfigMap& c, const std::string& k) { v = static_cast<int>(config_int(c, k, v)); }
  template <class U>
    requires std::is_unsigned_v<U>
  static void assign(U& v, const ConfigMap& c, const std::string& k) {
    const long x = config_int(c, k, static_cast<long>(v));
    if (x < 0) throw FormatError("config: '" + k + "' must be non-negative");
    v = static_cast<U>(x);
  }
  static void assign(std::string& v, const ConfigMap& c, const std::string& k) { v = config_string(c, k, v); }

  CLI::App* app_;
  std::string config_path_;
  std::vector<std::function<void(const ConfigMap&)>> resolvers_;
};

void require(const std::string& value, const std::string& name) {
  if (value.empty()) throw RangeError(name + " is required (flag or config key)");
}

// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  body(out);
  if (!out) throw FormatError("write failed: " + path);
}

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string kind = "gaussian";
  SynthSpec spec;
};

void add_synth(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("synth", "Write a synthetic feature dataset");
  auto args = std::make_shared<SynthArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("-o,--out", args->out, "data", "Dataset file to write");
  opts->bind("--kind", args->kind, "kind", "gaussian or mixture");
  opts->bind("--n", args->spec.n, "n", "Sub-vectors per feature vector");
  opts->bind("--d", args->spec.d, "d", "Sub-vector dimension");
  opts->bind("--count", args->spec.count, "count", "Number of feature vectors");
  opts->bind("--components", args->spec.components, "components", "Mixture components");
  opts->bind("--spread", args->spec.spread, "spread", "Standard deviation of mixture centres");
  opts->bind("--sigma", args->spec.sigma, "sigma", "Per-coordinate standard deviation");
  opts->bind("--seed", args->spec.seed, "seed", "Random seed");
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->out, "--out");
    args->spec.kind = parse_synth_kind(args->kind);
    write_dataset_file(synthesize(args->spec), args->out);
  });
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string mu_min = "0.0005,0.001,0.0045,0.02,0.05";
  std::string lambda = "0.125,0.25,0.5,1,2";
  std::string init = "splitting";
  std::string profile = "fixed";
  TrainConfig cfg;
};

void add_train(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("train", "Train a codebook bank on a dataset");
  auto args = std::make_shared<TrainArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--data", args->data, "data", "Dataset file");
  opts->bind("-o,--out", args->out, "bank", "Bank JSON to write");
  opts->bind("--log", args->log, "train_log", "Training log CSV to write");
  opts->bind("--mu-min", args->mu_min, "mu_min", "Comma separated flip-probability floors, one per codebook");
  opts->bind("--lambda", args->lambda, "lambda", "Comma separated regularizer weights");
  opts->bind("--b", args->cfg.B, "b", "Index bits per sub-vector");
  opts->bind("--max-iters", args->cfg.max_iters, "max_iters", "Lloyd iterations per stage");
  opts->bind("--tol", args->cfg.convergence_tol, "tol", "Relative objective change that ends a stage");
  opts->bind("--init", args->init, "init", "splitting or random-sample");
  opts->bind("--profile", args->profile, "profile", "fixed or refined");
  opts->bind("--refine-step", args->cfg.refine_step, "refine_step", "Profile gradient step");
  opts->bind("--refine-iters", args->cfg.refine_iters, "refine_iters", "Profile gradient iterations");
  opts->bind("--seed", args->cfg.master_seed, "seed", "Master seed");
  opts->bind("--threads", args->cfg.threads, "threads", "Worker threads (0: all cores)");
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->data, "--data");
    require(args->out, "--out");
    const auto ds = read_dataset_file(args->data);
    auto cfg = args->cfg;
    cfg.N = ds.n;
    cfg.D = ds.d;
    cfg.mu_min_list = parse_number_list(args->mu_min);
    cfg.lambda_list = parse_number_list(args->lambda);
    cfg.V = static_cast<int>(cfg.mu_min_list.size());
    cfg.init = parse_init_mode(args->init);
    cfg.profile_mode = parse_profile_mode(args->profile);
    const auto result = train_sequential(ds.features, cfg);
    write_bank_file(result.bank, args->out);
    if (!args->log.empty()) emit(args->log, [&](std::ostream& o) { write_train_log_csv(result.log, o); });
  });
}

// ---- table -----------------------------------------------------------------

struct TableArgs {
  std::string data;
  std::string bank;
  std::string out;
  unsigned threads = 0;
};

void add_table(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("table", "Build the V x N expected-distortion table");
  auto args = std::make_shared<TableArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--data", args->data, "data", "Dataset file");
  opts->bind("--bank", args->bank, "bank", "Bank JSON");
  opts->bind("-o,--out", args->out, "table", "Table CSV to write (default stdout)");
  opts->bind("--threads", args->threads, "threads", "Worker threads (0: all cores)");
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->data, "--data");
    require(args->bank, "--bank");
    const auto bank = read_bank_file(args->bank);
    const auto ds = read_dataset_file(args->data);
    check_dataset(ds, bank);
    const auto table = build_table(ds.features, bank, args->threads);
    emit(args->out, [&](std::ostream& o) { write_table_csv(table, o); });
  });
}

// ---- shared budget options ---------------------------------------------------

struct BudgetArgs {
  double p_tot = kUnset;  // defaults to N B, i.e. 0 dB at unit gain
  int rate = 4;
  int m_max = 6;

  void bind(Options& opts) {
    opts.bind("--p-tot", p_tot, "p_tot", "Total power budget (default N*B)");
    opts.bind("--rate", rate, "rate", "Average bits per symbol");
    opts.bind("--m-max", m_max, "m_max", "Largest QAM order in bits");
  }
  LinkBudget budget(const CodebookBank& bank) const {
    LinkBudget b{std::isnan(p_tot) ? static_cast<double>(bank.N) * bank.B : p_tot, rate, m_max};
    b.validate(bank.N, bank.B);
    return b;
  }
};

// ---- plan ------------------------------------------------------------------

struct PlanArgs {
  std::string bank;
  std::string table;
  std::string lut;
  std::string method = "jcamp";
  std::string out;
  double gamma = kUnset;
  double snr_db = kUnset;
  BudgetArgs budget;
};

void add_plan(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("plan", "Compute a transmission plan for one channel state");
  auto args = std::make_shared<PlanArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--bank", args->bank, "bank", "Bank JSON");
  opts->bind("--table", args->table, "table", "Distortion table CSV");
  opts->bind("--lut", args->lut, "lut", "Lookup table JSON (method lut)");
  opts->bind("--method", args->method, "method", "jcamp, jcap, baseline or lut");
  opts->bind("--gamma", args->gamma, "gamma", "Channel gain-to-noise ratio");
  opts->bind("--snr-db", args->snr_db, "point_snr_db", "Instantaneous SNR in dB (alternative to --gamma)");
  opts->bind("-o,--out", args->out, "plan", "Plan JSON to write (default stdout)");
  args->budget.bind(*opts);
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->bank, "--bank");
    require(args->table, "--table");
    const auto bank = read_bank_file(args->bank);
    const auto table = read_table_file(args->table);
    const auto budget = args->budget.budget(bank);
    if (std::isnan(args->gamma) == std::isnan(args->snr_db)) throw RangeError("give exactly one of --gamma and --snr-db");
    const double gamma =
        std::isnan(args->gamma) ? gamma_for_snr_db(args->snr_db, budget.p_tot, bank.N, bank.B) : args->gamma;
    const Allocator alloc(bank, table, budget.m_max);
    const auto method = parse_method(args->method);
    LookupTable lut;
    if (method == Method::lut) {
      require(args->lut, "--lut");
      lut = read_lut_file(args->lut);
    }
    const auto plan = make_plan(LinkSetup{&alloc, &lut}, method, gamma, budget);
    emit(args->out, [&](std::ostream& o) { o << plan_to_json(plan, 2) << '\n'; });
  });
}

// ---- lut -------------------------------------------------------------------

struct LutArgs {
  std::string bank;
  std::string table;
  std::string method = "jcamp";
  std::string out;
  double lo_db = kUnset;
  double hi_db = kUnset;
  int bits = 8;
  unsigned threads = 0;
  BudgetArgs budget;
};

void add_lut(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("lut", "Precompute plans over a quantized SNR range");
  auto args = std::make_shared<LutArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--bank", args->bank, "bank", "Bank JSON");
  opts->bind("--table", args->table, "table", "Distortion table CSV");
  opts->bind("--method", args->method, "method", "jcamp or jcap");
  opts->bind("--lo-db", args->lo_db, "lo_db", "Lower SNR edge (default: all-V feasibility)");
  opts->bind("--hi-db", args->hi_db, "hi_db", "Upper SNR edge (default: all-1 feasibility)");
  opts->bind("--bits", args->bits, "lut_bits", "Quantizer bits (2^bits cells)");
  opts->bind("--threads", args->threads, "threads", "Worker threads (0: all cores)");
  opts->bind("-o,--out", args->out, "lut", "Lookup table JSON to write (default stdout)");
  args->budget.bind(*opts);
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->bank, "--bank");
    require(args->table, "--table");
    const auto bank = read_bank_file(args->bank);
    const auto table = read_table_file(args->table);
    const auto budget = args->budget.budget(bank);
    const Allocator alloc(bank, table, budget.m_max);
    auto [lo, hi] = feasible_snr_range(alloc, budget);
    if (!std::isnan(args->lo_db)) lo = args->lo_db;
    if (!std::isnan(args->hi_db)) hi = args->hi_db;
    const auto lut = build_lut(alloc, budget, lo, hi, args->bits, parse_method(args->method), args->threads);
    emit(args->out, [&](std::ostream& o) { write_lut(lut, o); });
  });
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string bank;
  std::string table;
  std::string data;
  std::string lut;
  std::string out;
  std::string grid;
  std::string channel = "rayleigh";
  std::string method = "jcamp";
  int trials = 100;
  int rate = 4;
  int m_max = 6;
  int lut_bits = 8;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

void add_sweep(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("sweep", "Monte Carlo SNR sweep; writes CSV plus a JSON sidecar");
  auto args = std::make_shared<SweepArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--bank", args->bank, "bank", "Bank JSON");
  opts->bind("--table", args->table, "table", "Distortion table CSV");
  opts->bind("--data", args->data, "data", "Dataset file");
  opts->bind("--lut", args->lut, "lut", "Lookup table JSON (method lut; built on the fly if absent)");
  opts->bind("--lut-bits", args->lut_bits, "lut_bits", "Quantizer bits when the lookup table is built on the fly");
  opts->bind("-o,--out", args->out, "report", "Report CSV (sidecar: <out>.json)");
  opts->bind("--snr-db", args->grid, "snr_db", "Comma separated average SNR grid in dB");
  opts->bind("--channel", args->channel, "channel", "awgn or rayleigh");
  opts->bind("--method", args->method, "method", "jcamp, jcap, baseline or lut");
  opts->bind("--trials", args->trials, "trials", "Trials per grid point");
  opts->bind("--rate", args->rate, "rate", "Average bits per symbol");
  opts->bind("--m-max", args->m_max, "m_max", "Largest QAM order in bits");
  opts->bind("--seed", args->seed, "seed", "Master seed");
  opts->bind("--threads", args->threads, "threads", "Worker threads (0: all cores)");
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->bank, "--bank");
    require(args->table, "--table");
    require(args->data, "--data");
    require(args->out, "--out");
    require(args->grid, "--snr-db");
    const auto bank = read_bank_file(args->bank);
    const auto table = read_table_file(args->table);
    const auto ds = read_dataset_file(args->data);
    check_dataset(ds, bank);

    SweepConfig sc;
    sc.snr_db_grid = parse_number_list(args->grid);
    sc.channel = parse_channel_model(args->channel);
    sc.trials_per_point = args->trials;
    sc.method = parse_method(args->method);
    sc.master_seed = args->seed;
    sc.rate = args->rate;
    sc.m_max = args->m_max;
    sc.threads = args->threads;

    const Allocator alloc(bank, table, sc.m_max);
    LookupTable lut;
    if (sc.method == Method::lut) {
      if (!args->lut.empty()) {
        lut = read_lut_file(args->lut);
      } else {
        const LinkBudget ref{static_cast<double>(bank.N) * bank.B, sc.rate, sc.m_max};
        const auto [lo, hi] = feasible_snr_range(alloc, ref);
        lut = build_lut(alloc, ref, lo, hi, args->lut_bits, Method::jcamp, sc.threads);
      }
    }
    const auto report = sweep(ds.features, bank, LinkSetup{&alloc, &lut}, sc);
    emit(args->out, [&](std::ostream& o) { write_sweep_csv(report, o); });

    nlohmann::json side{{"bank", args->bank},
                        {"table", args->table},
                        {"data", args->data},
                        {"lut", args->lut},
                        {"lut_bits", args->lut_bits},
                        {"snr_db", sc.snr_db_grid},
                        {"channel", to_string(sc.channel)},
                        {"method", to_string(sc.method)},
                        {"trials", sc.trials_per_point},
                        {"rate", sc.rate},
                        {"m_max", sc.m_max},
                        {"seed", sc.master_seed},
                        {"N", bank.N},
                        {"B", bank.B},
                        {"D", bank.D},
                        {"V", bank.V}};
    emit(args->out + ".json", [&](std::ostream& o) { o << side.dump(2) << '\n'; });
  });
}

// ---- verify-ber --------------------------------------------------------------

struct VerifyArgs {
  std::string plan;
  std::string out;
  double gamma = kUnset;
  double snr_db = kUnset;
  double p_tot = kUnset;
  std::size_t bits = 10'000'000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

void add_verify(CLI::App& root, std::vector<std::function<void()>>& actions) {
  auto* app = root.add_subcommand("verify-ber", "Monte Carlo BER of every symbol group of a plan");
  auto args = std::make_shared<VerifyArgs>();
  auto opts = std::make_shared<Options>(app);
  opts->bind("--plan", args->plan, "plan", "Plan JSON");
  opts->bind("--gamma", args->gamma, "gamma", "Channel gain-to-noise ratio the plan was made for");
  opts->bind("--snr-db", args->snr_db, "point_snr_db", "Instantaneous SNR in dB (alternative to --gamma)");
  opts->bind("--p-tot", args->p_tot, "p_tot", "Budget used with --snr-db (default: plan total power)");
  opts->bind("--bits", args->bits, "bits", "Bits simulated per symbol group");
  opts->bind("--seed", args->seed, "seed", "Random seed");
  opts->bind("--threads", args->threads, "threads", "Worker threads (0: all cores)");
  opts->bind("-o,--out", args->out, "ber_report", "CSV to write (default stdout)");
  actions.push_back([app, args, opts] {
    if (!app->parsed()) return;
    opts->resolve();
    require(args->plan, "--plan");
    std::ifstream in(args->plan);
    if (!in) throw FormatError("cannot open plan file " + args->plan);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto plan = plan_from_json(text);
    if (std::isnan(args->gamma) == std::isnan(args->snr_db)) throw RangeError("give exactly one of --gamma and --snr-db");
    double gamma = args->gamma;
    if (std::isnan(gamma)) {
      int total_bits = 0;
      for (const auto& s : plan.symbols) total_bits += s.m;
      const double p_tot = std::isnan(args->p_tot) ? plan.total_power() : args->p_tot;
      // N B is the bit count, so n = 1 and b = total bits.
      gamma = gamma_for_snr_db(args->snr_db, p_tot, 1, total_bits);
    }
    const auto rows = verify_ber(plan, gamma, args->bits, args->seed, args->threads);
    emit(args->out, [&](std::ostream& o) { write_ber_csv(rows, o); });
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-codebook vector quantization over adaptive QAM links"};
  app.require_subcommand(1);
  std::vector<std::function<void()>> actions;
  add_synth(app, actions);
  add_train(app, actions);
  add_table(app, actions);
  add_plan(app, actions);
  add_lut(app, actions);
  add_sweep(app, actions);
  add_verify(app, actions);
  CLI11_PARSE(app, argc, argv);
  try {
    for (auto& action : actions) action();
  } catch (const std::exception& e) {
    std::cerr << "mvq: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
