#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bpe/rng.hpp"

namespace bpe {

/// Population sizes and emigration draws saturate here; reaching it flags a trajectory as overflowed.
inline constexpr std::uint64_t kStateCap = std::uint64_t{1} << 62;

/// P[X > t] = (floor(t)/t0)^(-alpha) once floor(t) >= t0; realized as X = ceil(t0 * U^(-1/alpha)).
struct ParetoTail {
  double alpha;
  double t0;
};

/// P[X > e^n] = c/n for every integer n >= n0, with atoms at ceil(e^n) of mass c/n - c/(n+1).
struct Example1Tail {
  double c;
  std::int64_t n0;
};

using TailSpec = std::variant<std::monostate, ParetoTail, Example1Tail>;

/// A probability law on the nonnegative integers: finitely many atoms plus an optional
/// analytic tail family. Immutable after construction; moments are cached at build time.
class DiscreteLaw {
 public:
  static DiscreteLaw constant(std::uint64_t value);
  static DiscreteLaw from_pmf(const std::map<std::uint64_t, double>& pmf);
  static DiscreteLaw pareto(double alpha, double t0);
  static DiscreteLaw example1(double c, std::int64_t n0);

  /// Accepts {"type":"pmf","values":[...],"probs":[...]} | {"type":"const","value":n}
  /// | {"type":"pareto","alpha":a,"t0":t} | {"type":"example1","c":c,"n0":n}.
  static DiscreteLaw from_json(const nlohmann::json& descriptor);
  nlohmann::json to_json() const;

  const std::vector<std::uint64_t>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& atom_probs() const noexcept { return probs_; }
  const TailSpec& tail_spec() const noexcept { return tail_; }

  bool has_analytic_tail() const noexcept { return !std::holds_alternative<std::monostate>(tail_); }
  bool finite_support() const noexcept { return !has_analytic_tail(); }
  std::optional<std::uint64_t> constant_value() const noexcept;
  /// Largest atom; only meaningful for finite support.
  std::uint64_t max_value() const;
  std::uint64_t min_value() const;

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

  /// Exact P[X > t], combining atoms and analytic tail. t < 0 gives 1.
  double tail(double t) const;
  /// P[X > e^log_t]; stays exact-in-form for thresholds far beyond double range.
  double tail_log(double log_t) const;
  double pmf(std::uint64_t x) const;
  double cdf(double t) const { return 1.0 - tail(t); }
  /// Total probability carried by the analytic tail family.
  double analytic_mass() const noexcept;

  /// Generalized inverse cdf; nondecreasing in u on [0, 1). Saturates at kStateCap.
  std::uint64_t quantile(double u) const;
  std::uint64_t sample(Rng& rng) const { return quantile(rng.uniform()); }
  /// log of the unsaturated quantile; -infinity at 0.
  double log_quantile(double u) const;

  /// E[log_+ X], E[X log_+ X] and E[X^p]; +infinity when divergent.
  double log_plus_moment() const;
  double x_log_x_moment() const;
  double power_moment(double p) const;

 private:
  DiscreteLaw() = default;
  void finalize();
  double analytic_tail(double t) const;
  // Sum over j >= 1 of P[X > j] * w(j) where w is an increment of a moment function.
  template <class Increment, class TailIntegral>
  double tail_sum(Increment inc, TailIntegral integral) const;

  std::vector<std::uint64_t> atoms_;
  std::vector<double> probs_;
  std::vector<double> cum_;
  TailSpec tail_;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

double log_plus_moment(const DiscreteLaw& law);
double x_log_x_moment(const DiscreteLaw& law);

struct ExtinctionProbability {
  double q = 0.0;
  /// Bound on |q - q_true| induced by folding the tail beyond the truncation point.
  double truncation_error = 0.0;
  std::uint64_t truncation = 0;
  int iterations = 0;
};

/// Smallest fixed point of the offspring pgf on [0, 1], by iterating q <- f(q) from 0.
ExtinctionProbability gw_extinction_prob(const DiscreteLaw& offspring);

enum class Coupling { Independent, Comonotone };

std::string to_string(Coupling coupling);
Coupling coupling_from_string(const std::string& name);

/// Joint law of one generation's input: offspring stream, emigration, and their coupling.
class GenerationModel {
 public:
  GenerationModel(DiscreteLaw offspring, DiscreteLaw emigration,
                  Coupling coupling = Coupling::Independent);

  static GenerationModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const DiscreteLaw& offspring() const noexcept { return offspring_; }
  const DiscreteLaw& emigration() const noexcept { return emigration_; }
  Coupling coupling() const noexcept { return coupling_; }
  double lambda() const noexcept { return offspring_.mean(); }

 private:
  DiscreteLaw offspring_;
  DiscreteLaw emigration_;
  Coupling coupling_;
};

/// Joint pmf of (first offspring, emigration) restricted to emigration values <= y_max.
/// Under independence this is the product law; under comonotone coupling both are
/// quantiles of one uniform. Entries are (xi, y, probability).
struct JointAtom {
  std::uint64_t xi;
  std::uint64_t y;
  double p;
};
std::vector<JointAtom> first_pair_law(const GenerationModel& model, std::uint64_t y_max);

}  // namespace bpe
