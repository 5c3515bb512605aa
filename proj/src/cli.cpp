#include "bpe/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpe/criteria.hpp"
#include "bpe/error.hpp"
#include "bpe/exact.hpp"
#include "bpe/io.hpp"
#include "bpe/mc.hpp"
#include "bpe/process.hpp"

namespace bpe {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitUndetermined = 3;
constexpr int kExitTolerance = 4;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir = "bpe_out";
  bool out_given = false;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> horizon;
  std::optional<double> tolerance;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config is missing \"") + key + "\"");
  return j.at(key).get<T>();
}

Variant variant_from_string(const std::string& s) {
  if (s == "emigration") return Variant::Emigration;
  if (s == "renewal") return Variant::Renewal;
  if (s == "pure") return Variant::Pure;
  if (s == "decomposition") return Variant::Decomposition;
  if (s == "deterministic_ar") return Variant::DeterministicAr;
  throw ConfigError("unknown variant \"" + s + "\"");
}

// Loads a config, or the config embedded in a manifest (whose seed then becomes the default).
json load_config(CommonFlags& flags) {
  if (flags.config_path.empty()) throw ConfigError("--config is required");
  std::ifstream in(flags.config_path);
  if (!in) throw ConfigError("cannot open " + flags.config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("config") && j.contains("config_hash")) {
    if (!flags.seed && j.contains("seed")) flags.seed = j.at("seed").get<std::uint64_t>();
    j = j.at("config");
  }
  if (flags.trials) j["trials"] = *flags.trials;
  if (flags.horizon) j["horizon"] = *flags.horizon;
  if (flags.tolerance) j["tolerance"] = *flags.tolerance;
  if (!flags.seed) flags.seed = get_or<std::uint64_t>(j, "seed", 0);
  j.erase("seed");
  return j;
}

McOptions mc_options(const json& cfg, const CommonFlags& flags, std::uint64_t default_trials) {
  McOptions o;
  o.trials = get_or<std::uint64_t>(cfg, "trials", default_trials);
  o.seed = *flags.seed;
  o.threads = flags.threads;
  o.level = get_or<double>(cfg, "level", 0.95);
  o.survival_threshold = get_or<std::uint64_t>(cfg, "survival_threshold", 1000000);
  return o;
}

std::vector<std::uint64_t> k_grid(const json& cfg) {
  return require<std::vector<std::uint64_t>>(cfg, "k_grid");
}

CriterionParams criterion_params(const json& cfg) {
  CriterionParams p;
  if (!cfg.contains("criteria")) return p;
  const auto& c = cfg.at("criteria");
  p.r = get_or<double>(c, "r", p.r);
  p.epsilon = get_or<double>(c, "epsilon", p.epsilon);
  p.theta = get_or<double>(c, "theta", p.theta);
  p.b = get_or<double>(c, "b", p.b);
  p.max_terms = get_or<std::uint64_t>(c, "max_terms", p.max_terms);
  return p;
}

class Outputs {
 public:
  Outputs(const CommonFlags& flags, std::string command, json config)
      : dir_(flags.out_dir), command_(std::move(command)), config_(std::move(config)), seed_(*flags.seed),
        start_(std::chrono::steady_clock::now()) {}

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
  }

  void finish(const json& extra = json::object()) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto m = make_manifest(command_, config_, seed_, wall);
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write("manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::string command_;
  json config_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
};

int cmd_classify(CommonFlags& flags, std::ostream& out) {
  const json cfg = load_config(flags);
  const auto model = GenerationModel::from_json(require<json>(cfg, "model"));
  const auto k = get_or<std::uint64_t>(cfg, "k", 1);
  const auto report = classify(model, k, criterion_params(cfg), get_or<std::uint64_t>(cfg, "h2_n_max", 64));
  const std::string text = report.to_json().dump(2) + "\n";
  out << text;
  if (flags.out_given) {
    Outputs o(flags, "classify", cfg);
    o.write("report.json", text);
    o.finish();
  }
  return report.all_undetermined() ? kExitUndetermined : kExitOk;
}

int cmd_simulate(CommonFlags& flags, std::ostream& out) {
  const json cfg = load_config(flags);
  ProcessConfig pc{GenerationModel::from_json(require<json>(cfg, "model")), get_or<std::uint64_t>(cfg, "k", 1),
                   variant_from_string(get_or<std::string>(cfg, "variant", "emigration")),
                   get_or<std::uint64_t>(cfg, "k0", 0)};
  pc.validate();
  const auto horizon = get_or<std::uint64_t>(cfg, "horizon", 50);
  const auto opts = mc_options(cfg, flags, 1);
  const auto paths = run_trials(opts.trials, opts.threads,
                                [&](std::uint64_t i) { return simulate(pc, horizon, trial_seed(opts.seed, i)); });
  std::ostringstream csv;
  csv << "trial,n,z,martingale\n";
  std::ostringstream dec;
  dec << "trial,n,z1,z2\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& t = paths[i];
    for (std::size_t n = 0; n < t.states.size(); ++n)
      csv << i << ',' << n << ',' << t.states[n] << ',' << format_double(t.martingale_path[n]) << '\n';
    if (t.decomposition)
      for (std::size_t n = 0; n < t.decomposition->first.size(); ++n)
        dec << i << ',' << n + 1 << ',' << t.decomposition->first[n] << ',' << t.decomposition->second[n] << '\n';
  }
  Outputs o(flags, "simulate", cfg);
  o.write("trajectories.csv", csv.str());
  if (pc.variant == Variant::Decomposition) o.write("decomposition.csv", dec.str());
  o.finish();
  out << "wrote " << paths.size() << " trajectories to " << flags.out_dir << "\n";
  return kExitOk;
}

int cmd_exact(CommonFlags& flags, std::ostream& out) {
  const json cfg = load_config(flags);
  const auto model = GenerationModel::from_json(require<json>(cfg, "model"));
  const auto k = get_or<std::uint64_t>(cfg, "k", 1);
  const auto N = require<std::uint64_t>(cfg, "N");
  std::optional<std::uint64_t> M;
  if (cfg.contains("M")) M = cfg.at("M").get<std::uint64_t>();
  const double tol = get_or<double>(cfg, "tolerance", 1e-9);
  auto result = forward_dp_tau(model, k, N, M, tol).to_json();
  if (get_or<bool>(cfg, "expected_tau", false)) {
    const auto b = expected_tau_bounds(model, k, N, M, tol);
    result["expected_tau"] = {{"lower", b.lower}, {"infinity_flag", b.infinity_flag},
                              {"truncated_upper", b.truncated_upper}};
    if (b.upper) result["expected_tau"]["upper"] = *b.upper;
  }
  const std::string text = result.dump(2) + "\n";
  Outputs o(flags, "exact", cfg);
  o.write("dp.json", text);
  o.finish();
  out << text;
  return kExitOk;
}

int cmd_perpetuity(CommonFlags& flags, std::ostream& out) {
  const json cfg = load_config(flags);
  const auto y = DiscreteLaw::from_json(require<json>(cfg, "emigration"));
  const auto b = perpetuity_bracket(require<std::uint64_t>(cfg, "lambda"), y, get_or<std::uint64_t>(cfg, "k", 1),
                                    get_or<std::uint64_t>(cfg, "depth", 60), get_or<double>(cfg, "tolerance", 1e-6));
  const json result{{"lower", b.lower}, {"upper", b.upper}, {"depth", b.depth}};
  const std::string text = result.dump(2) + "\n";
  Outputs o(flags, "perpetuity", cfg);
  o.write("perpetuity.json", text);
  o.finish();
  out << text;
  return kExitOk;
}

int cmd_experiment(CommonFlags& flags, const std::string& name, std::ostream& out) {
  const json cfg = load_config(flags);
  const auto opts = mc_options(cfg, flags, 10000);
  std::vector<ExperimentRow> rows;
  json extra = json::object();
  if (name == "theorem3") {
    const auto model = GenerationModel::from_json(require<json>(cfg, "model"));
    std::optional<std::uint64_t> N;
    if (cfg.contains("N")) N = cfg.at("N").get<std::uint64_t>();
    rows = theorem3_experiment(model, k_grid(cfg), N, get_or<std::uint64_t>(cfg, "horizon", 60), opts);
  } else if (name == "grincevicius") {
    const auto y = DiscreteLaw::from_json(require<json>(cfg, "emigration"));
    const auto t = grincevicius_experiment(require<double>(cfg, "a"), y, k_grid(cfg),
                                           get_or<std::uint64_t>(cfg, "depth", 60), opts);
    rows = t.rows;
    extra["truncation_tail"] = t.truncation_tail;
    extra["truncation_eta"] = t.eta;
  } else if (name == "proposition1") {
    const auto model = GenerationModel::from_json(require<json>(cfg, "model"));
    const auto t = proposition1_experiment(model, k_grid(cfg), get_or<std::uint64_t>(cfg, "horizon", 100), opts);
    rows = t.rows;
    extra["decreasing_steps"] = t.decreasing_steps;
    extra["nonincreasing"] = t.nonincreasing;
  } else if (name == "kesten-stigum") {
    ProcessConfig pc{GenerationModel::from_json(require<json>(cfg, "model")), get_or<std::uint64_t>(cfg, "k", 1),
                     Variant::Emigration, 0};
    const auto w = estimate_W(pc, get_or<std::uint64_t>(cfg, "n_terminal", 30), opts);
    for (double eps : get_or<std::vector<double>>(cfg, "eps_grid", {0.01}))
      rows.push_back({eps, w.prob_above(eps, opts.level), w.survival.point});
    extra["mean_cauchy_gap"] = w.mean_cauchy_gap;
    extra["max_cauchy_gap"] = w.max_cauchy_gap;
  } else if (name == "decomposition") {
    const auto model = GenerationModel::from_json(require<json>(cfg, "model"));
    const auto n_probe = get_or<std::uint64_t>(cfg, "n_probe", 4);
    const auto t = decomposition_independence_test(model, require<std::uint64_t>(cfg, "k"),
                                                   require<std::uint64_t>(cfg, "k0"), n_probe, opts);
    EstimateCI e;
    e.point = t.chi_square.p_value;
    e.ci_low = e.ci_high = e.point;
    e.trials = t.trials;
    rows.push_back({static_cast<double>(n_probe), e, 0.001});
    extra["chi_square"] = {{"statistic", t.chi_square.statistic}, {"dof", t.chi_square.dof},
                           {"p_value", t.chi_square.p_value}, {"applicable", t.chi_square.applicable}};
    extra["identity_checks"] = t.identity_checks;
    extra["identity_violations"] = t.identity_violations;
    extra["inequality_violations"] = t.inequality_violations;
    extra["exact_start"] = t.exact_start;
  } else {
    throw ConfigError("unknown experiment \"" + name + "\"");
  }
  if (!rows.empty()) extra["reference_value"] = rows.front().reference;
  std::ostringstream csv;
  write_experiment_csv(csv, rows);
  Outputs o(flags, "experiment " + name, cfg);
  o.write("results.csv", csv.str());
  o.finish(extra);
  out << csv.str();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Branching processes with emigration: simulation, exact oracles and criteria"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonFlags flags;
  std::uint64_t seed = 0;
  std::uint64_t trials = 0;
  std::uint64_t horizon = 0;
  double tolerance = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "master seed (64-bit)");
  app.add_option("--config", flags.config_path, "JSON config or manifest");
  app.add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  auto* out_opt = app.add_option("--out", flags.out_dir, "output directory");
  auto* trials_opt = app.add_option("--trials", trials, "Monte Carlo trials");
  auto* horizon_opt = app.add_option("--horizon", horizon, "simulation horizon");
  auto* tol_opt = app.add_option("--tolerance", tolerance, "error tolerance");

  auto* classify_cmd = app.add_subcommand("classify", "analytic verdicts for a model");
  auto* simulate_cmd = app.add_subcommand("simulate", "write trajectories as long-format CSV");
  auto* exact_cmd = app.add_subcommand("exact", "forward recursion for the law of tau");
  auto* perpetuity_cmd = app.add_subcommand("perpetuity", "bracket for the survival probability when xi = lambda");
  auto* experiment_cmd = app.add_subcommand("experiment", "Monte Carlo experiments");
  std::string experiment_name;
  experiment_cmd->add_option("name", experiment_name, "theorem3|grincevicius|proposition1|kesten-stigum|decomposition")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, msg, msg);
    if (code == 0) {
      out << msg.str();
      return kExitOk;
    }
    err << msg.str();
    return kExitConfig;
  }
  if (*seed_opt) flags.seed = seed;
  if (*trials_opt) flags.trials = trials;
  if (*horizon_opt) flags.horizon = horizon;
  if (*tol_opt) flags.tolerance = tolerance;
  flags.out_given = static_cast<bool>(*out_opt);

  try {
    if (*classify_cmd) return cmd_classify(flags, out);
    if (*simulate_cmd) return cmd_simulate(flags, out);
    if (*exact_cmd) return cmd_exact(flags, out);
    if (*perpetuity_cmd) return cmd_perpetuity(flags, out);
    if (*experiment_cmd) return cmd_experiment(flags, experiment_name, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::TruncationTooTight:
      case ErrorCode::DepthTooShallow:
      case ErrorCode::SearchExhausted:
        err << "tolerance failure: " << e.what() << "\n";
        return kExitTolerance;
      default:
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
  }
  return kExitConfig;
}

}  // namespace bpe
