#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "bpe/laws.hpp"

namespace bpe {

/// Finite-horizon law of tau from the truncated forward recursion.
struct DpResult {
  std::uint64_t k = 0;
  std::uint64_t N = 0;
  std::uint64_t M = 0;
  /// probs[n - 1] = P[tau < n | Z_0 = k], n = 1..N (probs[0] is always 0).
  std::vector<double> probs;
  /// Total probability that left {0..M}; it is carried as alive.
  double leaked_mass = 0.0;
  /// Bound on the probability that leaked mass dies before N; every prob is exact within it.
  double error_bound = 0.0;

  double prob_tau_lt(std::uint64_t n) const;
  /// {k, N, M, n_first: 2, probs: [P[tau < 2], ..., P[tau < N]], leaked_mass, error_bound}
  nlohmann::json to_json() const;
};

/// Exact distribution of Z_n on {0..M} for finite-support laws. M = nullopt picks the smallest power of
/// two whose a-priori error bound is within tolerance/2. Throws TruncationTooTight if error_bound > tolerance.
DpResult forward_dp_tau(const GenerationModel& model, std::uint64_t k, std::uint64_t N,
                        std::optional<std::uint64_t> M = std::nullopt, double tolerance = 1e-9);

struct TauBounds {
  double lower = 0.0;
  /// Set when the survival bound at N is within tolerance. It bounds E[tau] outright when that
  /// survival bound is exactly 0, and E[min(tau, N)] otherwise (truncated_upper = true).
  std::optional<double> upper;
  bool truncated_upper = false;
  /// Survival mass stays above tolerance and flat over the second half of the horizon.
  bool infinity_flag = false;
  std::vector<double> survival;  // P[tau > n], n = 0..N (lower-bound side)
  double error_bound = 0.0;
};

TauBounds expected_tau_bounds(const GenerationModel& model, std::uint64_t k, std::uint64_t N,
                              std::optional<std::uint64_t> M = std::nullopt, double tolerance = 1e-9);

struct PerpetuityBracket {
  double lower = 0.0;
  double upper = 1.0;
  std::uint64_t depth = 0;
};

/// Bracket for P[hatX_n < k for all n] when xi = lambda is an integer >= 2 and Y has finite support.
/// Exact over hatZ_n = lambda^n (k - hatX_n); states with (lambda - 1) hatZ >= max Y survive surely.
/// Throws DepthTooShallow when upper - lower > tolerance.
PerpetuityBracket perpetuity_bracket(std::uint64_t lambda, const DiscreteLaw& y, std::uint64_t k,
                                     std::uint64_t depth, double tolerance = 1e-6);

}  // namespace bpe
