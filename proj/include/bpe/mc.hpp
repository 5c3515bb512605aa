#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "bpe/laws.hpp"
#include "bpe/process.hpp"
#include "bpe/stats.hpp"

namespace bpe {

struct McOptions {
  std::uint64_t trials = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
  double level = 0.95;
  std::uint64_t survival_threshold = 1000000;
};

unsigned resolve_threads(unsigned requested);

/// Runs fn(i) for i in [0, trials) on a worker pool and returns the results indexed by trial,
/// so any reduction done afterwards is independent of the thread count.
template <class Fn>
auto run_trials(std::uint64_t trials, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::uint64_t{}))> {
  using R = decltype(fn(std::uint64_t{}));
  std::vector<R> out(trials);
  constexpr std::uint64_t kChunk = 512;
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::uint64_t lo = next.fetch_add(kChunk);
      if (lo >= trials) return;
      const std::uint64_t hi = std::min(trials, lo + kChunk);
      for (std::uint64_t i = lo; i < hi; ++i) out[i] = fn(i);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(resolve_threads(threads),
                                                     static_cast<unsigned>((trials + kChunk - 1) / kChunk)));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  return out;
}

/// Outcome of one emigration chain run to a horizon.
struct ChainOutcome {
  std::optional<std::uint64_t> tau;
  std::uint64_t final_state = 0;
  bool overflow = false;
};

ChainOutcome run_chain(const GenerationModel& model, std::uint64_t k, std::uint64_t horizon, Rng& rng);

/// Frequency of {tau <= horizon}. Survivors below survival_threshold are reported as censored.
EstimateCI estimate_qk(const ProcessConfig& config, std::uint64_t horizon, const McOptions& opts);

struct TauPmf {
  std::vector<double> pmf;  // pmf[n] = empirical P[tau = n], n = 0..horizon (pmf[0] = 0)
  std::vector<std::uint64_t> counts;
  double censored_mass = 0.0;  // trials alive at the horizon
  std::uint64_t trials = 0;
  EstimateCI at(std::uint64_t n, double level = 0.95) const;
};

TauPmf estimate_tau_pmf(const ProcessConfig& config, std::uint64_t horizon, const McOptions& opts);

struct RenewalTest {
  std::vector<double> second_return;  // gap between the first and second visit to 0
  std::vector<double> third_return;   // gap between the second and third visit
  KsResult ks;
  std::uint64_t censored = 0;  // trials without three visits inside the horizon
};

/// Renewal chain: successive return gaps to 0 from the same trials, compared by two-sample KS.
/// The first visit is a hitting time from k and is left out; every later gap is 1 + an independent copy of tau.
RenewalTest renewal_return_test(const GenerationModel& model, std::uint64_t k, std::uint64_t horizon,
                                const McOptions& opts);

struct WEstimate {
  std::vector<double> w_terminal;  // lambda^-n Z_n at n = n_terminal
  std::vector<double> w_half;      // at n = n_terminal / 2
  std::vector<std::uint8_t> alive;  // Z_{n_terminal} > 0
  double mean_cauchy_gap = 0.0;     // mean |W_n - W_{n/2}|
  double max_cauchy_gap = 0.0;
  EstimateCI survival;

  EstimateCI prob_above(double eps, double level = 0.95) const;
  /// Empirical P[a < W_n < b | Z_n > 0] together with the conditional sample size.
  std::pair<double, std::uint64_t> conditional_occupancy(double a, double b) const;
};

WEstimate estimate_W(const ProcessConfig& config, std::uint64_t n_terminal, const McOptions& opts);

struct ExperimentRow {
  double param = 0.0;
  EstimateCI estimate;
  double reference = 0.0;
};

/// Ratio P[tau < N | Z_0 = k] / P[Y > k] per k. N = nullopt means tau <= horizon stands in for tau < infinity.
std::vector<ExperimentRow> theorem3_experiment(const GenerationModel& model, const std::vector<std::uint64_t>& k_grid,
                                               std::optional<std::uint64_t> N, std::uint64_t horizon,
                                               const McOptions& opts);

struct GrinceviciusTable {
  std::vector<ExperimentRow> rows;
  /// Certified bound on P[sum_{n >= depth} a^n Y_{n+1} > eta].
  double truncation_tail = 0.0;
  double eta = 0.0;
};

/// Ratio P[X_inf > k] / P[Y > k] with X_inf = sum_{n>=0} a^n Y_{n+1} truncated at depth terms.
GrinceviciusTable grincevicius_experiment(double a, const DiscreteLaw& y, const std::vector<std::uint64_t>& k_grid,
                                          std::uint64_t depth, const McOptions& opts);

struct Proposition1Table {
  std::vector<ExperimentRow> rows;  // reference = q' ^ k when Y = 0, else NaN
  std::uint64_t decreasing_steps = 0;  // adjacent pairs with a strictly smaller point estimate
  bool nonincreasing = false;
};

Proposition1Table proposition1_experiment(const GenerationModel& model, const std::vector<std::uint64_t>& k_grid,
                                          std::uint64_t horizon, const McOptions& opts);

struct DecompositionTest {
  ChiSquareResult chi_square;
  std::uint64_t trials = 0;
  std::uint64_t exact_start = 0;          // trials with Z_1 = k0
  std::uint64_t identity_checks = 0;      // (trial, n) pairs on {Z_1 = k0, Z^(1)_n > 0}
  std::uint64_t identity_violations = 0;
  std::uint64_t inequality_violations = 0;  // Z_n < Z^(1)_n + Z^(2)_n on {Z_1 >= k0, Z^(1)_n > 0}
};

DecompositionTest decomposition_independence_test(const GenerationModel& model, std::uint64_t k, std::uint64_t k0,
                                                  std::uint64_t n_probe, const McOptions& opts);

/// Empirical P[|S_n| > t] for the centered +-1 walk, one entry per t.
std::vector<double> walk_tail(std::uint64_t n, const std::vector<double>& t_grid, const McOptions& opts);

/// Number of n <= N with Y_n >= base^n in one fixed realization drawn from seed.
std::uint64_t count_exceedances(const DiscreteLaw& y, double base, std::uint64_t N, std::uint64_t seed);

}  // namespace bpe
