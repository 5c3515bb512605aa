#include "bpe/mc.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "bpe/criteria.hpp"
#include "bpe/error.hpp"

namespace bpe {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

ChainOutcome run_chain(const GenerationModel& model, std::uint64_t k, std::uint64_t horizon, Rng& rng) {
  ChainOutcome out;
  std::uint64_t z = k;
  for (std::uint64_t n = 1; n <= horizon; ++n) {
    if (z >= kStateCap) {
      out.overflow = true;
      break;
    }
    z = step(z, model, rng);
    if (z == 0) {
      out.tau = n;
      break;
    }
  }
  out.final_state = z;
  return out;
}

namespace {

void require_emigration_variant(const ProcessConfig& config) {
  config.validate();
  if (config.variant != Variant::Emigration && config.variant != Variant::DeterministicAr)
    throw Error(ErrorCode::InvalidParam, "estimator runs the emigration chain");
}

void require_trials(const McOptions& opts) {
  if (opts.trials == 0) throw Error(ErrorCode::InvalidParam, "trials must be positive");
}

}  // namespace

EstimateCI estimate_qk(const ProcessConfig& config, std::uint64_t horizon, const McOptions& opts) {
  require_emigration_variant(config);
  require_trials(opts);
  if (horizon == 0) throw Error(ErrorCode::InvalidParam, "horizon must be positive");
  const auto outcomes = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    Rng rng(trial_seed(opts.seed, i));
    return run_chain(config.model, config.initial_k, horizon, rng);
  });
  std::uint64_t extinct = 0;
  std::uint64_t censored = 0;
  for (const auto& o : outcomes) {
    if (o.tau) ++extinct;
    else if (!o.overflow && o.final_state < opts.survival_threshold) ++censored;
  }
  return frequency_estimate(extinct, opts.trials, censored, opts.level);
}

EstimateCI TauPmf::at(std::uint64_t n, double level) const {
  if (n >= counts.size()) throw Error(ErrorCode::InvalidParam, "n beyond the horizon");
  const auto alive = static_cast<std::uint64_t>(std::llround(censored_mass * static_cast<double>(trials)));
  return frequency_estimate(counts[n], trials, alive, level);
}

TauPmf estimate_tau_pmf(const ProcessConfig& config, std::uint64_t horizon, const McOptions& opts) {
  require_emigration_variant(config);
  require_trials(opts);
  if (horizon == 0) throw Error(ErrorCode::InvalidParam, "horizon must be positive");
  const auto outcomes = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    Rng rng(trial_seed(opts.seed, i));
    return run_chain(config.model, config.initial_k, horizon, rng);
  });
  TauPmf out;
  out.trials = opts.trials;
  out.counts.assign(horizon + 1, 0);
  std::uint64_t alive = 0;
  for (const auto& o : outcomes) {
    if (o.tau) ++out.counts[*o.tau];
    else ++alive;
  }
  const double n = static_cast<double>(opts.trials);
  for (auto c : out.counts) out.pmf.push_back(static_cast<double>(c) / n);
  out.censored_mass = static_cast<double>(alive) / n;
  return out;
}

RenewalTest renewal_return_test(const GenerationModel& model, std::uint64_t k, std::uint64_t horizon,
                                const McOptions& opts) {
  require_trials(opts);
  ProcessConfig cfg{model, k, Variant::Renewal, 0};
  const auto returns = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    const auto t = simulate(cfg, horizon, trial_seed(opts.seed, i));
    return t.return_times;
  });
  RenewalTest out;
  for (const auto& r : returns) {
    if (r.size() < 3) {
      ++out.censored;
      continue;
    }
    out.second_return.push_back(static_cast<double>(r[1]));
    out.third_return.push_back(static_cast<double>(r[2]));
  }
  if (out.second_return.empty()) throw Error(ErrorCode::InvalidParam, "no trial returned three times within the horizon");
  out.ks = ks_two_sample(out.second_return, out.third_return);
  return out;
}

EstimateCI WEstimate::prob_above(double eps, double level) const {
  std::uint64_t hits = 0;
  for (double w : w_terminal)
    if (w > eps) ++hits;
  return frequency_estimate(hits, w_terminal.size(), 0, level);
}

std::pair<double, std::uint64_t> WEstimate::conditional_occupancy(double a, double b) const {
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < w_terminal.size(); ++i) {
    if (!alive[i]) continue;
    ++n;
    if (w_terminal[i] > a && w_terminal[i] < b) ++hits;
  }
  return {n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n), n};
}

WEstimate estimate_W(const ProcessConfig& config, std::uint64_t n_terminal, const McOptions& opts) {
  require_trials(opts);
  config.validate();
  if (n_terminal < 2) throw Error(ErrorCode::InvalidParam, "n_terminal must be >= 2");
  const double lambda = config.model.lambda();
  if (!(lambda > 1.0)) throw Error(ErrorCode::NotSupercritical, "W needs lambda > 1");
  const bool pure = config.variant == Variant::Pure;
  const std::uint64_t half = n_terminal / 2;
  struct Sample {
    double w = 0.0;
    double w_half = 0.0;
    bool alive = false;
  };
  const auto samples = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    Rng rng(trial_seed(opts.seed, i));
    Sample s;
    std::uint64_t z = config.initial_k;
    std::uint64_t n = 0;
    for (; n < n_terminal && z > 0 && z < kStateCap; ++n) {
      z = pure ? pure_step(z, config.model, rng) : step(z, config.model, rng);
      if (n + 1 == half) s.w_half = static_cast<double>(z) / std::pow(lambda, static_cast<double>(half));
    }
    // an overflowed path keeps the last computable normalization
    s.w = static_cast<double>(z) / std::pow(lambda, static_cast<double>(n));
    if (n < half) s.w_half = s.w;
    s.alive = z > 0;
    return s;
  });
  WEstimate out;
  std::uint64_t alive = 0;
  for (const auto& s : samples) {
    out.w_terminal.push_back(s.w);
    out.w_half.push_back(s.w_half);
    out.alive.push_back(s.alive ? 1 : 0);
    if (s.alive) ++alive;
    const double gap = std::abs(s.w - s.w_half);
    out.mean_cauchy_gap += gap;
    out.max_cauchy_gap = std::max(out.max_cauchy_gap, gap);
  }
  out.mean_cauchy_gap /= static_cast<double>(opts.trials);
  out.survival = frequency_estimate(alive, opts.trials, 0, opts.level);
  return out;
}

std::vector<ExperimentRow> theorem3_experiment(const GenerationModel& model, const std::vector<std::uint64_t>& k_grid,
                                               std::optional<std::uint64_t> N, std::uint64_t horizon,
                                               const McOptions& opts) {
  require_trials(opts);
  const auto* pareto = std::get_if<ParetoTail>(&model.emigration().tail_spec());
  if (!pareto) throw Error(ErrorCode::OutOfScope, "emigration law must have a pareto tail (REG)");
  const double lambda = model.lambda();
  if (!(lambda > 1.0)) throw Error(ErrorCode::NotSupercritical, "lambda must exceed 1");
  if (N && *N < 2) throw Error(ErrorCode::InvalidParam, "N must be >= 2");
  const std::uint64_t last = N ? *N - 1 : horizon;
  if (last == 0) throw Error(ErrorCode::InvalidParam, "horizon must be positive");
  const double reference = theorem3_limit(lambda, pareto->alpha, N);
  std::vector<ExperimentRow> rows;
  for (std::size_t g = 0; g < k_grid.size(); ++g) {
    const std::uint64_t k = k_grid[g];
    if (k == 0) throw Error(ErrorCode::InvalidParam, "k must be positive");
    const std::uint64_t base = mix64(opts.seed ^ mix64(k));
    const auto outcomes = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
      Rng rng(trial_seed(base, i));
      return run_chain(model, k, last, rng);
    });
    std::uint64_t hits = 0;
    std::uint64_t censored = 0;
    for (const auto& o : outcomes) {
      if (o.tau) ++hits;
      else if (!o.overflow && o.final_state < opts.survival_threshold) ++censored;
    }
    const auto freq = frequency_estimate(hits, opts.trials, censored, opts.level);
    rows.push_back({static_cast<double>(k), scale(freq, model.emigration().tail(static_cast<double>(k))), reference});
  }
  return rows;
}

GrinceviciusTable grincevicius_experiment(double a, const DiscreteLaw& y, const std::vector<std::uint64_t>& k_grid,
                                          std::uint64_t depth, const McOptions& opts) {
  require_trials(opts);
  const auto* pareto = std::get_if<ParetoTail>(&y.tail_spec());
  if (!pareto) throw Error(ErrorCode::OutOfScope, "emigration law must have a pareto tail (REG)");
  if (!(a >= 0.0) || !(a < 1.0)) throw Error(ErrorCode::OutOfRange, "a must lie in [0, 1)");
  if (depth == 0) throw Error(ErrorCode::InvalidParam, "depth must be positive");
  const double alpha = pareto->alpha;
  const double reference = grincevicius_limit(std::pow(a, alpha));

  GrinceviciusTable out;
  // P[R > eta] <= sum_{j>=0} P[Y > eta (1 - b) a^-depth (b/a)^j] with b = sqrt(a): a geometric series in the tail.
  out.eta = 1e-6;
  if (a > 0.0) {
    const double b = std::sqrt(a);
    const double t_first = out.eta * (1.0 - b) * std::pow(a, -static_cast<double>(depth));
    const double ratio = std::pow(b / a, -alpha);  // successive tail terms shrink by this factor
    const double first = std::isfinite(t_first) ? y.tail(t_first) : 0.0;
    out.truncation_tail = first / (1.0 - ratio);
  }
  const auto draws = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    Rng rng(trial_seed(opts.seed, i));
    double x = 0.0;
    double w = 1.0;
    for (std::uint64_t n = 0; n < depth; ++n) {
      x += w * static_cast<double>(y.sample(rng));
      w *= a;
      if (w == 0.0) break;
    }
    return x;
  });
  for (auto k : k_grid) {
    std::uint64_t hits = 0;
    for (double x : draws)
      if (x > static_cast<double>(k)) ++hits;
    const auto freq = frequency_estimate(hits, opts.trials, 0, opts.level);
    out.rows.push_back({static_cast<double>(k), scale(freq, y.tail(static_cast<double>(k))), reference});
  }
  return out;
}

Proposition1Table proposition1_experiment(const GenerationModel& model, const std::vector<std::uint64_t>& k_grid,
                                          std::uint64_t horizon, const McOptions& opts) {
  if (!std::isfinite(model.emigration().log_plus_moment()))
    throw Error(ErrorCode::OutOfScope, "needs E[log_+ Y] < infinity");
  double q_prime = std::numeric_limits<double>::quiet_NaN();
  const auto c = model.emigration().constant_value();
  if (c && *c == 0 && model.lambda() > 1.0) q_prime = gw_extinction_prob(model.offspring()).q;
  Proposition1Table out;
  for (auto k : k_grid) {
    McOptions o = opts;
    o.seed = mix64(opts.seed ^ mix64(k));
    const auto e = estimate_qk(ProcessConfig{model, k, Variant::Emigration, 0}, horizon, o);
    out.rows.push_back({static_cast<double>(k), e, std::pow(q_prime, static_cast<double>(k))});
  }
  out.nonincreasing = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].estimate.point < out.rows[i - 1].estimate.point) ++out.decreasing_steps;
    if (out.rows[i].estimate.point > out.rows[i - 1].estimate.point) out.nonincreasing = false;
  }
  return out;
}

DecompositionTest decomposition_independence_test(const GenerationModel& model, std::uint64_t k, std::uint64_t k0,
                                                  std::uint64_t n_probe, const McOptions& opts) {
  require_trials(opts);
  if (n_probe < 2) throw Error(ErrorCode::InvalidParam, "n_probe must be >= 2");
  ProcessConfig cfg{model, k, Variant::Decomposition, k0};
  cfg.validate();
  struct Row {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    bool exact = false;
    std::uint64_t checks = 0;
    std::uint64_t violations = 0;
    std::uint64_t below = 0;
  };
  const auto rows = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    const auto t = simulate(cfg, n_probe, trial_seed(opts.seed, i));
    const auto& d = *t.decomposition;
    Row r;
    r.exact = t.states[1] == k0;
    for (std::size_t idx = 0; idx < d.first.size(); ++idx) {
      const std::uint64_t n = idx + 1;
      const std::uint64_t z = t.states[n];
      const std::uint64_t sum = d.first[idx] + d.second[idx];
      if (d.first[idx] > 0 && z < sum) ++r.below;
      if (r.exact && d.first[idx] > 0) {
        ++r.checks;
        if (z != sum) ++r.violations;
      }
    }
    r.a = d.first.back();
    r.b = d.second.back();
    return r;
  });
  DecompositionTest out;
  out.trials = opts.trials;
  std::vector<std::uint64_t> a;
  std::vector<std::uint64_t> b;
  for (const auto& r : rows) {
    a.push_back(r.a);
    b.push_back(r.b);
    if (r.exact) ++out.exact_start;
    out.identity_checks += r.checks;
    out.identity_violations += r.violations;
    out.inequality_violations += r.below;
  }
  out.chi_square = chi_square_independence(a, b);
  return out;
}

std::vector<double> walk_tail(std::uint64_t n, const std::vector<double>& t_grid, const McOptions& opts) {
  require_trials(opts);
  const auto sums = run_trials(opts.trials, opts.threads, [&](std::uint64_t i) {
    Rng rng(trial_seed(opts.seed, i));
    std::binomial_distribution<std::int64_t> bin(static_cast<std::int64_t>(n), 0.5);
    return 2 * bin(rng) - static_cast<std::int64_t>(n);
  });
  std::vector<double> out;
  for (double t : t_grid) {
    std::uint64_t hits = 0;
    for (auto s : sums)
      if (std::abs(static_cast<double>(s)) > t) ++hits;
    out.push_back(static_cast<double>(hits) / static_cast<double>(opts.trials));
  }
  return out;
}

std::uint64_t count_exceedances(const DiscreteLaw& y, double base, std::uint64_t N, std::uint64_t seed) {
  if (!(base > 1.0)) throw Error(ErrorCode::InvalidParam, "base must exceed 1");
  Rng rng(seed);
  const double log_base = std::log(base);
  std::uint64_t count = 0;
  for (std::uint64_t n = 1; n <= N; ++n) {
    // log scale keeps draws beyond the state cap comparable
    if (y.log_quantile(rng.uniform()) >= static_cast<double>(n) * log_base) ++count;
  }
  return count;
}

}  // namespace bpe
