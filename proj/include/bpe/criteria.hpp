#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpe/laws.hpp"

namespace bpe {

enum class Verdict { Holds, Fails, Undetermined };
std::string to_string(Verdict v);

struct CriterionParams {
  double r = 1.0;
  double epsilon = 0.5;
  double theta = 1.5;
  double b = 1.0;
  std::uint64_t max_terms = 1000000;

  void validate() const;
};

struct H1Check {
  Verdict verdict = Verdict::Undetermined;
  double probability = 0.0;  // P[xi_1 + ... + xi_k - Y >= k + 1]
};

/// Exact by convolution; joint enumeration of (xi_1, Y) under comonotone coupling.
H1Check check_h1(const GenerationModel& model, std::uint64_t k);

struct H2Check {
  Verdict verdict = Verdict::Undetermined;
  std::vector<double> probabilities;  // P[xi_1 + ... + xi_n - Y <= n - 1], n = 1..n_max
  bool holds_for_all_n = false;
  std::optional<std::uint64_t> first_failure;
  std::string reason;
};

H2Check check_h2(const GenerationModel& model, std::uint64_t n_max);

struct RecurrenceCheck {
  bool recurrent = false;
  double log_moment = 0.0;  // E[log_+ Y]
};

/// Recurrent (tau < infinity a.s.) iff E[log_+ Y] is infinite.
RecurrenceCheck classify_recurrence(const GenerationModel& model);

/// Threshold sequence g(m) = r * base^m (geometric) or r * base^m * m^-theta (geometric_poly).
struct Growth {
  enum class Kind { Geometric, GeometricPoly };
  Kind kind = Kind::Geometric;
  double base = 2.0;
  double theta = 0.0;

  static Growth geometric(double base) { return {Kind::Geometric, base, 0.0}; }
  static Growth geometric_poly(double base, double theta) { return {Kind::GeometricPoly, base, theta}; }
  double log_threshold(double r, double m) const;
};

enum class SeriesVerdict { Converges, Diverges, Undetermined };
std::string to_string(SeriesVerdict v);

struct SeriesResult {
  SeriesVerdict verdict = SeriesVerdict::Undetermined;
  std::string method;
  double first_factor = 0.0;
  std::optional<double> raabe_limit;  // lim n (1 - a_{n+1}/a_n) when the tail family determines it
  double partial_sum = 0.0;           // sum of the first evidence_terms terms
  std::uint64_t evidence_terms = 0;
};

/// Decides convergence of sum_{n>=1} prod_{m=1..n} P[Y <= g(m)].
/// Throws ZeroFactor when the first factor vanishes (the series is identically 0).
SeriesResult series_criterion(const DiscreteLaw& y, const Growth& growth, double r,
                              std::uint64_t max_terms = 1000000);

/// Black-box variant: tail_log(L) = P[Y > e^L]. Only exact zero/one factors or partial sums decide.
SeriesResult series_criterion(const std::function<double(double)>& tail_log, const Growth& growth, double r,
                              std::uint64_t max_terms);

/// Partial sums S_N of the series at each requested N (ascending), computed in log space.
std::vector<double> series_partial_sums(const DiscreteLaw& y, const Growth& growth, double r,
                                        const std::vector<std::uint64_t>& checkpoints);

enum class Lifetime { Finite, Infinite, Undetermined };
std::string to_string(Lifetime v);

struct LifetimeCheck {
  Lifetime verdict = Lifetime::Undetermined;
  std::string method;
  std::string reason;
  nlohmann::json evidence = nlohmann::json::object();
};

/// Positive recurrence via condition (2) over an epsilon grid, null recurrence via
/// condition (3) plus moment and independence side conditions.
LifetimeCheck classify_lifetime(const GenerationModel& model, const CriterionParams& params);

enum class ZernerVerdict { ExpectedTauInfinite, ExpectedTauFinite, Undetermined };
std::string to_string(ZernerVerdict v);

struct ZernerCheck {
  ZernerVerdict verdict = ZernerVerdict::Undetermined;
  std::string reason;
  nlohmann::json evidence = nlohmann::json::object();
};

/// E[tau] = infinity iff sum prod P[Y <= b lambda^m] diverges for some b; deterministic offspring only.
ZernerCheck zerner_criterion(const GenerationModel& model, const CriterionParams& params);

struct ClassificationReport {
  H1Check h1;
  H2Check h2;
  RecurrenceCheck recurrence;
  LifetimeCheck lifetime;
  ZernerCheck zerner;
  std::uint64_t k = 1;
  bool recurrence_determined = true;  // false when lambda <= 1
  std::string h1_error;
  std::string h2_error;

  bool all_undetermined() const;
  nlohmann::json to_json() const;
};

ClassificationReport classify(const GenerationModel& model, std::uint64_t k, const CriterionParams& params,
                              std::uint64_t h2_n_max = 64);

/// sum_{l=1}^{N-1} lambda^(-alpha l); N = nullopt means N = infinity.
double theorem3_limit(double lambda, double alpha, std::optional<std::uint64_t> N);
/// sum_{j>=0} ea^j = 1/(1 - ea).
double grincevicius_limit(double ea);
/// min(1, 2 c n t^(-1-delta)).
double vbe_tail_bound(double c_moment, double delta, std::uint64_t n, double t);

struct Lemma6Certificate {
  double a = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;  // delta actually used; halved from the request until a certificate exists
  std::uint64_t N = 0;
  std::vector<double> c_values;  // c_n = delta (a - epsilon)^n, n = 1..N
  double c = 1.0;                // x_n >= c^n for n = 1..horizon
  std::uint64_t horizon = 0;
};

Lemma6Certificate lemma6_construct(double a, double epsilon, double delta, std::uint64_t horizon = 1000);
/// Exact rational replay of the recursion; true iff x_n >= c^n for every n <= horizon.
bool verify_lemma6(const Lemma6Certificate& cert);

struct Lemma7Certificate {
  double a = 0.0;
  double epsilon1 = 0.0;
  std::uint64_t N = 0;
  double epsilon2 = 0.0;
};

Lemma7Certificate lemma7_epsilon2(double a, double epsilon1, std::uint64_t N);
/// Exact replay for every l = 1..N-1: x_j >= epsilon1 for j = 1..N.
bool verify_lemma7(double a, double epsilon1, std::uint64_t N, double epsilon2);

}  // namespace bpe
