#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bpe/laws.hpp"
#include "bpe/rng.hpp"

namespace bpe {

/// Sum of n i.i.d. offspring draws as one compound draw (multiply for constant laws,
/// multinomial aggregation for finite pmfs). Saturates at kStateCap.
std::uint64_t offspring_block_sum(const DiscreteLaw& offspring, std::uint64_t n, Rng& rng);

/// The input of one generation: the offspring stream (xi_j)_{j>=1} and the emigration Y.
/// Offspring sums are exposed as prefix sums over individuals 1..n, drawn lazily in
/// disjoint blocks, so chains stepping on the same Generation share individual draws.
class Generation {
 public:
  Generation(const GenerationModel& model, Rng& rng);

  std::uint64_t emigration() const noexcept { return y_; }

  /// xi_1 + ... + xi_n. A query below the furthest point drawn so far must repeat an
  /// earlier query exactly; otherwise queries must be nondecreasing.
  std::uint64_t offspring_prefix(std::uint64_t n);

 private:
  const GenerationModel* model_;
  Rng* rng_;
  std::uint64_t y_ = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> checkpoints_;  // (count, prefix sum)
};

/// (S - Y)_+ with overflow saturation: a saturated offspring sum yields kStateCap.
std::uint64_t emigrate(std::uint64_t offspring_sum, std::uint64_t y) noexcept;

std::uint64_t step(std::uint64_t state, const GenerationModel& model, Rng& rng);
std::uint64_t renewal_step(std::uint64_t state, const GenerationModel& model, std::uint64_t initial_k, Rng& rng);
std::uint64_t pure_step(std::uint64_t state, const GenerationModel& model, Rng& rng);
std::pair<std::uint64_t, std::uint64_t> decompose_step(std::pair<std::uint64_t, std::uint64_t> pair,
                                                       const GenerationModel& model, Rng& rng);
/// Same transitions on an existing generation; used by coupled runners.
std::uint64_t step_on(Generation& g, std::uint64_t state);
std::pair<std::uint64_t, std::uint64_t> decompose_on(Generation& g, std::pair<std::uint64_t, std::uint64_t> pair);

enum class Variant { Emigration, Renewal, Pure, Decomposition, DeterministicAr };

struct ProcessConfig {
  GenerationModel model;
  std::uint64_t initial_k = 1;
  Variant variant = Variant::Emigration;
  std::uint64_t k0 = 0;  // decomposition only

  void validate() const;
};

struct DecompositionPaths {
  /// first[i], second[i] hold Z^(1)_{i+1}, Z^(2)_{i+1}; the pair starts at (k, k0 - k) at time 1.
  std::vector<std::uint64_t> first;
  std::vector<std::uint64_t> second;
  std::uint64_t attempts = 0;  // first-generation draws until Z_1 >= k0
};

struct Trajectory {
  std::vector<std::uint64_t> states;           // Z_0 .. Z_H (shorter if overflowed)
  std::optional<std::uint64_t> tau;            // first n >= 1 with Z_n = 0
  std::vector<double> martingale_path;         // Z_n / lambda^n
  std::vector<std::uint64_t> emigration_draws; // Y_1 .. Y_H
  std::vector<std::uint64_t> return_times;     // renewal variant: successive return times to 0
  std::uint64_t draws_seed = 0;
  bool overflow = false;
  std::optional<DecompositionPaths> decomposition;
};

Trajectory simulate(const ProcessConfig& config, std::uint64_t horizon, std::uint64_t seed);

struct ArClosedForm {
  std::vector<long double> hat_z;  // lambda^n k - sum_j Y_j lambda^(n-j)
  std::vector<long double> hat_x;  // sum_{j<=n} lambda^-j Y_j, so hat_z = lambda^n (k - hat_x)
  std::vector<long double> ar_recursion;  // X_{n+1} = X_n / lambda + Y_{n+1}, X_0 = 0
};

ArClosedForm ar_closed_form(const DiscreteLaw& offspring, std::uint64_t k, std::span<const std::uint64_t> y_draws);
ArClosedForm ar_closed_form(double lambda, std::uint64_t k, std::span<const std::uint64_t> y_draws);

/// Chains stepped on one shared sequence of generations (pathwise coupling).
struct CoupledChain {
  Variant variant;  // Emigration, Renewal or Pure
  std::uint64_t initial;
};
std::vector<std::vector<std::uint64_t>> simulate_coupled(const GenerationModel& model,
                                                         std::span<const CoupledChain> chains,
                                                         std::uint64_t horizon, std::uint64_t seed);

}  // namespace bpe
