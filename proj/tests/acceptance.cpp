// Acceptance run: one line per criterion, exit status 1 if any criterion fails.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bpe/cli.hpp"
#include "bpe/criteria.hpp"
#include "bpe/exact.hpp"
#include "bpe/mc.hpp"

using namespace bpe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

McOptions options(std::uint64_t trials, std::uint64_t seed) {
  McOptions o;
  o.trials = trials;
  o.seed = seed;
  return o;
}

// 1. exact first-passage DP against MC on random finite models
Outcome dp_vs_mc() {
  std::mt19937_64 gen(20240501);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  auto random_pmf = [&] {
    std::map<std::uint64_t, double> pmf;
    while (pmf.size() < 2)
      for (std::uint64_t v = 0; v <= 4; ++v)
        if (gen() % 2) pmf[v] = w(gen);
    double total = 0.0;
    for (auto& [v, p] : pmf) total += p;
    for (auto& [v, p] : pmf) p /= total;
    return pmf;
  };
  constexpr std::uint64_t kTrials = 100000;
  constexpr std::uint64_t kN = 10;
  int agree = 0;
  int models = 0;
  double worst = 0.0;
  while (models < 20) {
    const auto xi = DiscreteLaw::from_pmf(random_pmf());
    if (!(xi.mean() > 1.0)) continue;
    const auto y = DiscreteLaw::from_pmf(random_pmf());
    const GenerationModel model(xi, y);
    const std::uint64_t k = 1 + gen() % 3;
    const auto dp = forward_dp_tau(model, k, kN);
    const auto pmf = estimate_tau_pmf(ProcessConfig{model, k, Variant::Emigration, 0}, kN - 1,
                                      options(kTrials, 1000 + static_cast<std::uint64_t>(models)));
    bool ok = true;
    std::uint64_t cum = 0;
    for (std::uint64_t n = 2; n <= kN; ++n) {
      cum += pmf.counts[n - 1];
      const double freq = static_cast<double>(cum) / kTrials;
      const double p = dp.prob_tau_lt(n);
      const double se = std::sqrt(p * (1.0 - p) / kTrials);
      const double z = se > 0.0 ? (std::abs(freq - p) - dp.error_bound) / se : 0.0;
      worst = std::max(worst, z);
      if (std::abs(freq - p) > 3.0 * se + dp.error_bound) ok = false;
    }
    agree += ok;
    ++models;
  }
  return {agree >= 18, fmt("%d/20 models within 3 SE, largest deviation %.2f SE", agree, worst)};
}

// 2. survival frequency inside the perpetuity bracket
Outcome perpetuity() {
  const std::vector<std::pair<std::map<std::uint64_t, double>, std::uint64_t>> cases{
      {{{0, 0.5}, {3, 0.5}}, 1},
      {{{0, 0.3}, {1, 0.3}, {4, 0.4}}, 2},
      {{{1, 0.5}, {2, 0.3}, {5, 0.2}}, 3},
  };
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 11;
  for (const auto& [pmf, k] : cases) {
    const auto y = DiscreteLaw::from_pmf(pmf);
    const auto br = perpetuity_bracket(2, y, k, 200);
    const auto q = estimate_qk(ProcessConfig{GenerationModel(DiscreteLaw::constant(2), y), k, Variant::Emigration, 0},
                               200, options(100000, seed++));
    const double surv = 1.0 - q.point;
    const bool ok = surv >= br.lower - 3.0 * q.stderr_ && surv <= br.upper + 3.0 * q.stderr_;
    pass = pass && ok;
    detail += fmt("%s%.4f in [%.4f, %.4f]", detail.empty() ? "" : "; ", surv, br.lower, br.upper);
  }
  return {pass, detail};
}

bool approaches(const std::vector<ExperimentRow>& rows, double target, std::string& detail) {
  bool mono = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += fmt("%sk=%g %.4f", i ? ", " : "", rows[i].param, rows[i].estimate.point);
    if (i && std::abs(rows[i].estimate.point - target) > std::abs(rows[i - 1].estimate.point - target)) mono = false;
  }
  const bool close = std::abs(rows.back().estimate.point - target) <= 0.25 * target;
  detail += mono ? "; approach monotone" : "; approach not monotone";
  return close && mono;
}

// 3. extinction-to-emigration tail ratio
Outcome theorem3() {
  const GenerationModel model(DiscreteLaw::constant(2), DiscreteLaw::pareto(1.0, 1.0));
  const auto rows = theorem3_experiment(model, {64, 128, 256, 512}, std::nullopt, 80, options(10000000, 1));
  std::string detail;
  const bool pass = approaches(rows, rows.front().reference, detail);
  return {pass, fmt("limit %.3g: ", rows.front().reference) + detail};
}

// 4. perpetuity tail ratio
Outcome grincevicius() {
  const auto t = grincevicius_experiment(0.5, DiscreteLaw::pareto(1.0, 1.0), {64, 128, 256, 512}, 60,
                                         options(1000000, 2));
  std::string detail;
  const bool pass = approaches(t.rows, t.rows.front().reference, detail);
  return {pass, fmt("limit %.3g: ", t.rows.front().reference) + detail};
}

// 5. expected lifetime classifier and the series behind each verdict
Outcome example1() {
  CriterionParams params;
  const std::vector<std::uint64_t> marks{10000, 100000, 1000000};
  auto decade_ratio = [&](const DiscreteLaw& y, const Growth& g, double r) {
    const auto s = series_partial_sums(y, g, r, marks);
    return (s[2] - s[1]) / (s[1] - s[0]);
  };

  const auto y_fin = DiscreteLaw::example1(2.0, 2);
  const auto fin = classify_lifetime(GenerationModel(DiscreteLaw::constant(2), y_fin), params);
  bool pass = fin.verdict == Lifetime::Finite;
  double conv_ratio = NAN;
  if (pass) {
    const auto g = Growth::geometric(2.0 + fin.evidence.at("epsilon").get<double>());
    conv_ratio = decade_ratio(y_fin, g, fin.evidence.at("r").get<double>());
    pass = fin.evidence.at("series_method") == "raabe" && conv_ratio < 0.5;
  }

  const auto y_inf = DiscreteLaw::example1(std::log(2.0), 1);
  const auto inf = classify_lifetime(GenerationModel(DiscreteLaw::constant(2), y_inf), params);
  bool pass_inf = inf.verdict == Lifetime::Infinite;
  double div_ratio = NAN;
  if (pass_inf) {
    div_ratio = decade_ratio(y_inf, Growth::geometric_poly(2.0, params.theta), inf.evidence.at("r").get<double>());
    pass_inf = inf.evidence.at("series_method") == "gauss" && div_ratio >= 0.5;
  }
  return {pass && pass_inf,
          fmt("c=2: %s, decade increment ratio %.3g; c=log 2: %s, decade increment ratio %.3g",
              to_string(fin.verdict).c_str(), conv_ratio, to_string(inf.verdict).c_str(), div_ratio)};
}

// 6. {W > eps} against survival, and interval occupancy of W given survival
Outcome kesten_stigum() {
  const GenerationModel model(DiscreteLaw::from_pmf({{0, 0.25}, {2, 0.75}}), DiscreteLaw::constant(1));
  const auto w = estimate_W(ProcessConfig{model, 5, Variant::Emigration, 0}, 30, options(100000, 6));
  const double gap = std::abs(w.prob_above(0.01).point - w.survival.point);
  int tested = 0;
  int empty = 0;
  for (int m = 0; m <= 4; ++m) {
    const double width = std::ldexp(1.0, -m);
    for (int j = 0; (j + 1) * width <= 4.0; ++j) {
      const auto [occ, n] = w.conditional_occupancy(j * width, (j + 1) * width);
      if (n < 100) continue;
      ++tested;
      if (!(occ > 0.0)) ++empty;
    }
  }
  return {gap <= 0.01 && tested > 0 && empty == 0,
          fmt("|P(W>0.01) - P(survive)| = %.4f, %d dyadic intervals tested, %d empty", gap, tested, empty)};
}

// 7. pathwise decomposition identity and independence of the two parts
Outcome decomposition() {
  const GenerationModel model(DiscreteLaw::from_pmf({{0, 0.2}, {1, 0.2}, {2, 0.3}, {3, 0.3}}),
                              DiscreteLaw::from_pmf({{0, 0.5}, {2, 0.5}}));
  const auto t = decomposition_independence_test(model, 2, 4, 3, options(10000, 7));
  return {t.identity_checks > 0 && t.identity_violations == 0 && t.chi_square.applicable && t.chi_square.p_value > 0.001,
          fmt("%llu identity checks, %llu violations, chi-square p = %.4f",
              static_cast<unsigned long long>(t.identity_checks),
              static_cast<unsigned long long>(t.identity_violations), t.chi_square.p_value)};
}

// 8. centered walk tail under the moment bound
Outcome walk_bound() {
  int cells = 0;
  int dominated = 0;
  double tightest = 0.0;
  for (std::uint64_t n : {10u, 50u, 100u, 500u, 1000u}) {
    std::vector<double> ts;
    for (double m : {0.5, 1.0, 2.0, 4.0, 8.0}) ts.push_back(m * std::sqrt(static_cast<double>(n)));
    const auto tail = walk_tail(n, ts, options(100000, 80 + n));
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double bound = vbe_tail_bound(1.0, 1.0, n, ts[i]);
      ++cells;
      if (tail[i] <= bound) ++dominated;
      if (bound > 0.0) tightest = std::max(tightest, tail[i] / bound);
    }
  }
  return {dominated == cells, fmt("%d/%d cells dominated, largest empirical/bound %.3f", dominated, cells, tightest)};
}

// 9. exact replays of both certificate constructions
Outcome certificates() {
  std::mt19937_64 gen(99);
  int ok6 = 0;
  int ok7 = 0;
  for (int i = 0; i < 10; ++i) {
    const double a = std::uniform_real_distribution<double>(1.2, 5.0)(gen);
    const double eps = std::uniform_real_distribution<double>(0.01, a - 1.05)(gen);
    const double delta = std::uniform_real_distribution<double>(0.1, 0.9)(gen);
    const auto c6 = lemma6_construct(a, eps, delta, 1000);
    if (c6.c > 1.0 && c6.horizon >= 1000 && verify_lemma6(c6)) ++ok6;
    const double e1 = std::uniform_real_distribution<double>(0.01, std::min(0.9, a - 1.1))(gen);
    const std::uint64_t N = 2 + gen() % 10;
    const auto c7 = lemma7_epsilon2(a, e1, N);
    if (c7.epsilon2 > 0.0 && verify_lemma7(a, e1, N, c7.epsilon2)) ++ok7;
  }
  return {ok6 == 10 && ok7 == 10, fmt("growth certificates %d/10, positivity certificates %d/10", ok6, ok7)};
}

// 10. manifest reruns across thread counts
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bpe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / fs::path("bpe_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  const std::map<std::string, std::string> configs{
      {"theorem3", R"({"model":{"offspring":{"type":"pmf","values":[1,3],"probs":[0.5,0.5]},
        "emigration":{"type":"pareto","alpha":1.0,"t0":1.0}},"k_grid":[8,16,32],"horizon":60,"trials":20000})"},
      {"grincevicius", R"({"a":0.5,"emigration":{"type":"pareto","alpha":1.0,"t0":1.0},"k_grid":[8,16,32],
        "depth":40,"trials":20000})"},
      {"proposition1", R"({"model":{"offspring":{"type":"pmf","values":[0,2],"probs":[0.25,0.75]},
        "emigration":{"type":"const","value":0}},"k_grid":[1,2,3],"horizon":60,"trials":20000})"},
      {"kesten-stigum", R"({"model":{"offspring":{"type":"pmf","values":[0,2],"probs":[0.25,0.75]},
        "emigration":{"type":"const","value":1}},"k":5,"n_terminal":20,"eps_grid":[0.01,0.1,1.0],"trials":20000})"},
      {"decomposition", R"({"model":{"offspring":{"type":"pmf","values":[0,1,2,3],"probs":[0.2,0.2,0.3,0.3]},
        "emigration":{"type":"pmf","values":[0,2],"probs":[0.5,0.5]}},"k":2,"k0":4,"n_probe":3,"trials":5000})"},
  };
  int identical = 0;
  std::string failed;
  for (const auto& [name, text] : configs) {
    const auto cfg = root / (name + ".json");
    std::ofstream(cfg) << text;
    const auto first = root / (name + "_0");
    bool ok = cli({"experiment", name, "--config", cfg.string(), "--seed", "4242", "--out", first.string()}) == 0;
    const std::string reference = slurp(first / "results.csv");
    ok = ok && !reference.empty();
    for (const char* threads : {"1", "4", "16"}) {
      const auto dir = root / (name + "_t" + threads);
      ok = ok && cli({"experiment", name, "--config", (first / "manifest.json").string(), "--threads", threads, "--out",
                      dir.string()}) == 0;
      ok = ok && slurp(dir / "results.csv") == reference;
    }
    if (ok) ++identical;
    else failed += " " + name;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(configs.size()),
          fmt("%d/%zu experiments byte-identical at 1, 4 and 16 threads", identical, configs.size()) +
              (failed.empty() ? "" : "; differs:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact DP vs Monte Carlo", dp_vs_mc},
      {"perpetuity bracket", perpetuity},
      {"extinction tail ratio trend", theorem3},
      {"perpetuity tail ratio trend", grincevicius},
      {"expected lifetime classifier", example1},
      {"martingale limit identity", kesten_stigum},
      {"decomposition identity", decomposition},
      {"walk tail bound", walk_bound},
      {"certificate replays", certificates},
      {"manifest reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
