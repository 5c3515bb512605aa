#include "bpe/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gmpxx.h>

#include "bpe/error.hpp"

namespace bpe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMaxSupport = 1000000;
constexpr double kMaxConvolutionWork = 5e8;
constexpr std::uint64_t kEvidenceTerms = 1000;
// |mu - 1| below this is treated as the Raabe boundary, where the Gauss test decides.
constexpr double kRaabeBoundaryTol = 1e-9;

nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

// pmf of xi_1 + ... + xi_n for a finite-support offspring law
std::vector<double> convolution_power(const DiscreteLaw& xi, std::uint64_t n) {
  const std::uint64_t top = xi.max_value();
  if (n > 0 && top > kMaxSupport / n) throw Error(ErrorCode::StateSpaceTooLarge, "convolution support exceeds 1e6");
  const double work = static_cast<double>(n) * static_cast<double>(n * top + 1) * static_cast<double>(xi.atoms().size());
  if (work > kMaxConvolutionWork) throw Error(ErrorCode::StateSpaceTooLarge, "convolution work exceeds limit");
  std::vector<double> dist{1.0};
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<double> next(dist.size() + top, 0.0);
    for (std::size_t s = 0; s < dist.size(); ++s) {
      if (dist[s] == 0.0) continue;
      for (std::size_t a = 0; a < xi.atoms().size(); ++a) next[s + xi.atoms()[a]] += dist[s] * xi.atom_probs()[a];
    }
    dist = std::move(next);
  }
  return dist;
}

// P[S <= v] from a pmf vector
double cdf_at(const std::vector<double>& pmf, std::int64_t v) {
  if (v < 0) return 0.0;
  double acc = 0.0;
  const auto top = std::min<std::int64_t>(v, static_cast<std::int64_t>(pmf.size()) - 1);
  for (std::int64_t i = 0; i <= top; ++i) acc += pmf[static_cast<std::size_t>(i)];
  return std::min(acc, 1.0);
}

void require_finite_offspring(const GenerationModel& model) {
  if (!model.offspring().finite_support())
    throw Error(ErrorCode::StateSpaceTooLarge, "offspring law has unbounded support");
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    default: return "undetermined";
  }
}

std::string to_string(SeriesVerdict v) {
  switch (v) {
    case SeriesVerdict::Converges: return "converges";
    case SeriesVerdict::Diverges: return "diverges";
    default: return "undetermined";
  }
}

std::string to_string(Lifetime v) {
  switch (v) {
    case Lifetime::Finite: return "finite";
    case Lifetime::Infinite: return "infinite";
    default: return "undetermined";
  }
}

std::string to_string(ZernerVerdict v) {
  switch (v) {
    case ZernerVerdict::ExpectedTauInfinite: return "E_tau_infinite";
    case ZernerVerdict::ExpectedTauFinite: return "E_tau_finite";
    default: return "undetermined";
  }
}

void CriterionParams::validate() const {
  if (!(r > 0.0) || !(epsilon > 0.0) || !(b > 0.0) || max_terms == 0)
    throw Error(ErrorCode::InvalidParam, "criterion parameters must be strictly positive");
  if (!(theta > 1.0)) throw Error(ErrorCode::InvalidParam, "theta must exceed 1");
}

H1Check check_h1(const GenerationModel& model, std::uint64_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidParam, "k must be positive");
  require_finite_offspring(model);
  const auto& xi = model.offspring();
  const auto rest = convolution_power(xi, k - 1);
  H1Check out;
  const auto reach = static_cast<std::int64_t>(k * xi.max_value()) - static_cast<std::int64_t>(k) - 1;
  if (reach >= 0) {
    for (const auto& [x, y, p] : first_pair_law(model, static_cast<std::uint64_t>(reach))) {
      // need rest >= k + 1 + y - x
      const auto need = static_cast<std::int64_t>(k + 1 + y) - static_cast<std::int64_t>(x);
      out.probability += p * (1.0 - cdf_at(rest, need - 1));
    }
  }
  out.probability = std::clamp(out.probability, 0.0, 1.0);
  out.verdict = out.probability > 0.0 ? Verdict::Holds : Verdict::Fails;
  return out;
}

H2Check check_h2(const GenerationModel& model, std::uint64_t n_max) {
  if (n_max == 0) throw Error(ErrorCode::InvalidParam, "n_max must be positive");
  require_finite_offspring(model);
  const auto& xi = model.offspring();
  const auto& y = model.emigration();
  const std::uint64_t top = xi.max_value();
  if (top > kMaxSupport / n_max) throw Error(ErrorCode::StateSpaceTooLarge, "convolution support exceeds 1e6");
  H2Check out;

  std::vector<double> rest{1.0};  // law of xi_2 + ... + xi_n
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    if (n > 1) {
      std::vector<double> next(rest.size() + top, 0.0);
      for (std::size_t s = 0; s < rest.size(); ++s)
        for (std::size_t a = 0; a < xi.atoms().size(); ++a) next[s + xi.atoms()[a]] += rest[s] * xi.atom_probs()[a];
      rest = std::move(next);
    }
    // beyond y_max the event holds whatever the offspring
    const std::uint64_t y_max = (n - 1) * (top > 0 ? top - 1 : 0) + top;
    double p = y.tail(static_cast<double>(y_max));
    for (const auto& [x, yy, q] : first_pair_law(model, y_max)) {
      const auto bound = static_cast<std::int64_t>(n - 1 + yy) - static_cast<std::int64_t>(x);
      p += q * cdf_at(rest, bound);
    }
    out.probabilities.push_back(std::clamp(p, 0.0, 1.0));
  }

  // Every n at once: the cheapest configuration puts min(xi) on individuals 2..n.
  const std::uint64_t m0 = xi.min_value();
  if (m0 == 0) {
    out.holds_for_all_n = true;
    out.reason = "P[xi = 0] > 0";
  } else {
    // D = sup{y - x : P[xi_1 = x, Y = y] > 0}
    double d = -kInf;
    if (!y.finite_support()) {
      d = kInf;
    } else {
      for (const auto& [x, yy, q] : first_pair_law(model, y.max_value()))
        if (q > 0.0) d = std::max(d, static_cast<double>(yy) - static_cast<double>(x));
    }
    if (m0 == 1) {
      out.holds_for_all_n = d >= 0.0;
      if (out.holds_for_all_n) out.reason = "min xi = 1 and P[xi_1 <= Y] > 0";
      else out.first_failure = 1;
    } else if (std::isinf(d) && d > 0.0) {
      out.holds_for_all_n = true;
      out.reason = "Y unbounded";
    } else {
      // holds at n iff D >= (n - 1)(m0 - 1)
      const double per = static_cast<double>(m0 - 1);
      out.first_failure = d < 0.0 ? 1 : static_cast<std::uint64_t>(std::floor(d / per)) + 2;
    }
  }
  if (out.holds_for_all_n) {
    out.verdict = Verdict::Holds;
  } else {
    out.verdict = Verdict::Fails;
    if (out.reason.empty()) out.reason = "fails at n = " + std::to_string(*out.first_failure);
  }
  return out;
}

RecurrenceCheck classify_recurrence(const GenerationModel& model) {
  RecurrenceCheck out;
  out.log_moment = model.emigration().log_plus_moment();
  out.recurrent = std::isinf(out.log_moment);
  return out;
}

double Growth::log_threshold(double r, double m) const {
  double v = std::log(r) + m * std::log(base);
  if (kind == Kind::GeometricPoly) v -= theta * std::log(m);
  return v;
}

namespace {

// first m from which the thresholds g(m) are nondecreasing
std::uint64_t increasing_from(const Growth& g) {
  if (g.kind == Growth::Kind::Geometric) return 1;
  return static_cast<std::uint64_t>(std::floor(g.theta / std::log(g.base))) + 1;
}

double evidence_sum(const std::function<double(double)>& factor, std::uint64_t terms) {
  double log_prod = 0.0;
  double sum = 0.0;
  for (std::uint64_t m = 1; m <= terms; ++m) {
    const double f = factor(static_cast<double>(m));
    if (f <= 0.0) break;
    log_prod += std::log(f);
    sum += std::exp(log_prod);
  }
  return sum;
}

}  // namespace

SeriesResult series_criterion(const DiscreteLaw& y, const Growth& growth, double r, std::uint64_t max_terms) {
  if (!(growth.base > 1.0)) throw Error(ErrorCode::InvalidParam, "growth base must exceed 1");
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidParam, "r must be positive");
  auto factor = [&](double m) { return 1.0 - y.tail_log(growth.log_threshold(r, m)); };

  SeriesResult out;
  out.first_factor = factor(1.0);
  if (out.first_factor <= 0.0) throw Error(ErrorCode::ZeroFactor, "P[Y <= g(1)] = 0: the series is 0");
  out.evidence_terms = std::min(max_terms, kEvidenceTerms);
  out.partial_sum = evidence_sum(factor, out.evidence_terms);

  // Scan until the thresholds increase and every later factor is positive; a zero factor
  // on the way truncates the series to a finite sum.
  const std::uint64_t m_inc = increasing_from(growth);
  const double lowest_atom = static_cast<double>(y.min_value());
  for (std::uint64_t m = 1;; ++m) {
    const double f = factor(static_cast<double>(m));
    if (f <= 0.0) {
      out.verdict = SeriesVerdict::Converges;
      out.method = "vanishing factor at m = " + std::to_string(m) + " (finite sum)";
      return out;
    }
    const bool past_turn = m >= m_inc;
    const bool above_floor = growth.log_threshold(r, static_cast<double>(m)) >= std::log(std::max(lowest_atom, 1.0));
    if ((past_turn && above_floor) || m >= max_terms) break;
  }

  if (y.finite_support()) {
    out.verdict = SeriesVerdict::Diverges;
    out.method = "factors reach 1 (bounded Y)";
    return out;
  }
  if (std::holds_alternative<ParetoTail>(y.tail_spec())) {
    out.verdict = SeriesVerdict::Diverges;
    out.method = "summable tail: product tends to a positive limit";
    return out;
  }
  const auto& e = std::get<Example1Tail>(y.tail_spec());
  // n (1 - a_{n+1}/a_n) -> c / log(base) for both growth forms
  const double mu = e.c / std::log(growth.base);
  out.raabe_limit = mu;
  if (std::abs(mu - 1.0) <= kRaabeBoundaryTol) {
    out.verdict = SeriesVerdict::Diverges;
    out.method = "gauss";
  } else {
    out.verdict = mu > 1.0 ? SeriesVerdict::Converges : SeriesVerdict::Diverges;
    out.method = "raabe";
  }
  return out;
}

SeriesResult series_criterion(const std::function<double(double)>& tail_log, const Growth& growth, double r,
                              std::uint64_t max_terms) {
  if (!(growth.base > 1.0)) throw Error(ErrorCode::InvalidParam, "growth base must exceed 1");
  auto factor = [&](double m) { return 1.0 - tail_log(growth.log_threshold(r, m)); };
  SeriesResult out;
  out.first_factor = factor(1.0);
  if (out.first_factor <= 0.0) throw Error(ErrorCode::ZeroFactor, "P[Y <= g(1)] = 0: the series is 0");
  double log_prod = 0.0;
  std::uint64_t ones_from = 0;
  for (std::uint64_t m = 1; m <= max_terms; ++m) {
    const double f = factor(static_cast<double>(m));
    if (f <= 0.0) {
      out.verdict = SeriesVerdict::Converges;
      out.method = "vanishing factor (finite sum)";
      out.evidence_terms = m - 1;
      return out;
    }
    if (f < 1.0) ones_from = m + 1;
    log_prod += std::log(f);
    out.partial_sum += std::exp(log_prod);
  }
  out.evidence_terms = max_terms;
  if (ones_from <= max_terms / 2) {
    out.verdict = SeriesVerdict::Diverges;
    out.method = "factors equal 1 over the second half of the partial sums";
  } else {
    out.method = "partial sums inconclusive";
  }
  return out;
}

std::vector<double> series_partial_sums(const DiscreteLaw& y, const Growth& growth, double r,
                                        const std::vector<std::uint64_t>& checkpoints) {
  std::vector<double> out;
  double log_prod = 0.0;
  double sum = 0.0;
  std::size_t next = 0;
  const std::uint64_t last = checkpoints.empty() ? 0 : checkpoints.back();
  bool dead = false;
  for (std::uint64_t m = 1; m <= last && next < checkpoints.size(); ++m) {
    if (!dead) {
      const double t = y.tail_log(growth.log_threshold(r, static_cast<double>(m)));
      if (t >= 1.0) dead = true;
      else {
        log_prod += std::log1p(-t);
        sum += std::exp(log_prod);
      }
    }
    while (next < checkpoints.size() && checkpoints[next] == m) {
      out.push_back(sum);
      ++next;
    }
  }
  return out;
}

namespace {

std::vector<double> dyadic_grid(int lo, int hi) {
  std::vector<double> g;
  for (int i = lo; i <= hi; ++i) g.push_back(std::ldexp(1.0, i));
  return g;
}

nlohmann::json series_evidence(const SeriesResult& s) {
  nlohmann::json j{{"series_verdict", to_string(s.verdict)},
                   {"series_method", s.method},
                   {"first_factor", s.first_factor},
                   {"partial_sum", s.partial_sum},
                   {"partial_sum_terms", s.evidence_terms}};
  if (s.raabe_limit) j["raabe_limit"] = *s.raabe_limit;
  return j;
}

}  // namespace

LifetimeCheck classify_lifetime(const GenerationModel& model, const CriterionParams& params) {
  params.validate();
  LifetimeCheck out;
  const double lambda = model.lambda();
  if (!(lambda > 1.0)) {
    out.reason = "precondition: lambda > 1 fails";
    return out;
  }
  const auto rec = classify_recurrence(model);
  if (!rec.recurrent) {
    out.reason = "precondition: E[log_+ Y] = infinity fails (transient)";
    return out;
  }
  const auto& y = model.emigration();
  auto r_grid = dyadic_grid(-10, 10);
  r_grid.insert(r_grid.begin(), params.r);

  // (I): 0 < sum prod P[Y <= r (lambda + eps)^m] < infinity for some eps, r
  auto eps_grid = dyadic_grid(-20, 0);
  std::reverse(eps_grid.begin(), eps_grid.end());
  eps_grid.insert(eps_grid.begin(), params.epsilon);
  for (double eps : eps_grid) {
    for (double r : r_grid) {
      SeriesResult s;
      try {
        s = series_criterion(y, Growth::geometric(lambda + eps), r, params.max_terms);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ZeroFactor) continue;
        throw;
      }
      if (s.verdict == SeriesVerdict::Converges) {
        out.verdict = Lifetime::Finite;
        out.method = "condition (2) converges";
        out.evidence = series_evidence(s);
        out.evidence["epsilon"] = eps;
        out.evidence["r"] = r;
        return out;
      }
    }
  }

  // (II): moment and (IND) side conditions, then divergence of condition (3)
  std::optional<double> delta_ok;
  for (double d : dyadic_grid(-20, 0))
    if (std::isfinite(model.offspring().power_moment(1.0 + d))) {
      delta_ok = d;
      break;
    }
  const bool independent = model.coupling() == Coupling::Independent;
  if (delta_ok && independent) {
    for (double r : r_grid) {
      SeriesResult s;
      try {
        s = series_criterion(y, Growth::geometric_poly(lambda, params.theta), r, params.max_terms);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ZeroFactor) continue;
        throw;
      }
      if (s.verdict == SeriesVerdict::Diverges) {
        out.verdict = Lifetime::Infinite;
        out.method = "condition (3) diverges";
        out.evidence = series_evidence(s);
        out.evidence["theta"] = params.theta;
        out.evidence["r"] = r;
        out.evidence["delta"] = *delta_ok;
        return out;
      }
    }
    out.reason = "condition (2) not shown for any tested epsilon and condition (3) converges";
  } else {
    out.reason = !independent ? "condition (2) not shown; (IND) fails so condition (3) is not applicable"
                              : "condition (2) not shown; no tested delta gives E[xi^(1+delta)] < infinity";
  }
  return out;
}

ZernerCheck zerner_criterion(const GenerationModel& model, const CriterionParams& params) {
  params.validate();
  ZernerCheck out;
  const auto v = model.offspring().constant_value();
  if (!v || *v < 2) {
    out.reason = "applies to deterministic offspring xi = lambda > 1 only";
    return out;
  }
  const double lambda = static_cast<double>(*v);
  auto b_grid = dyadic_grid(-10, 10);
  b_grid.insert(b_grid.begin(), params.b);
  bool all_converge = true;
  for (double b : b_grid) {
    SeriesResult s;
    try {
      s = series_criterion(model.emigration(), Growth::geometric(lambda), b, params.max_terms);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ZeroFactor) continue;
      throw;
    }
    if (s.verdict == SeriesVerdict::Diverges) {
      out.verdict = ZernerVerdict::ExpectedTauInfinite;
      out.evidence = series_evidence(s);
      out.evidence["b"] = b;
      return out;
    }
    if (s.verdict != SeriesVerdict::Converges) all_converge = false;
    out.evidence = series_evidence(s);
  }
  if (all_converge) out.verdict = ZernerVerdict::ExpectedTauFinite;
  else out.reason = "series undecided for some b";
  return out;
}

bool ClassificationReport::all_undetermined() const {
  return h1.verdict == Verdict::Undetermined && h2.verdict == Verdict::Undetermined &&
         lifetime.verdict == Lifetime::Undetermined && zerner.verdict == ZernerVerdict::Undetermined &&
         !recurrence_determined;
}

nlohmann::json ClassificationReport::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["h1"] = {{"verdict", to_string(h1.verdict)},
             {"method", "exact convolution"},
             {"evidence", {{"probability", h1.probability}}}};
  if (!h1_error.empty()) j["h1"]["evidence"]["error"] = h1_error;
  nlohmann::json h2e{{"probabilities", h2.probabilities}, {"holds_for_all_n", h2.holds_for_all_n},
                     {"reason", h2.reason}};
  if (h2.first_failure) h2e["first_failure"] = *h2.first_failure;
  if (!h2_error.empty()) h2e["error"] = h2_error;
  j["h2"] = {{"verdict", to_string(h2.verdict)}, {"method", "exact convolution + minimal configuration"},
             {"evidence", h2e}};
  j["recurrence"] = {
      {"verdict", !recurrence_determined ? "undetermined" : (recurrence.recurrent ? "recurrent" : "transient")},
      {"method", "E[log_+ Y] = infinity"},
      {"evidence", {{"E_log_plus_Y", number_or_inf(recurrence.log_moment)}}}};
  nlohmann::json le = lifetime.evidence;
  if (!lifetime.reason.empty()) le["reason"] = lifetime.reason;
  j["expected_lifetime"] = {{"verdict", to_string(lifetime.verdict)}, {"method", lifetime.method}, {"evidence", le}};
  nlohmann::json ze = zerner.evidence;
  if (!zerner.reason.empty()) ze["reason"] = zerner.reason;
  j["zerner"] = {{"verdict", to_string(zerner.verdict)}, {"method", "zerner series"}, {"evidence", ze}};
  return j;
}

ClassificationReport classify(const GenerationModel& model, std::uint64_t k, const CriterionParams& params,
                              std::uint64_t h2_n_max) {
  ClassificationReport rep;
  rep.k = k;
  try {
    rep.h1 = check_h1(model, k);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StateSpaceTooLarge) throw;
    rep.h1_error = e.what();
  }
  try {
    rep.h2 = check_h2(model, h2_n_max);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::StateSpaceTooLarge) throw;
    rep.h2_error = e.what();
  }
  rep.recurrence = classify_recurrence(model);
  rep.recurrence_determined = model.lambda() > 1.0;
  if (!rep.recurrence_determined) {
    rep.lifetime.reason = "precondition: lambda > 1 fails";
  } else if (!rep.recurrence.recurrent) {
    // transient: P[tau = infinity] > 0 forces E[tau] = infinity
    rep.lifetime.verdict = Lifetime::Infinite;
    rep.lifetime.method = "transience";
    rep.lifetime.evidence = {{"E_log_plus_Y", number_or_inf(rep.recurrence.log_moment)}};
  } else {
    rep.lifetime = classify_lifetime(model, params);
  }
  if (rep.recurrence_determined) rep.zerner = zerner_criterion(model, params);
  else rep.zerner.reason = "precondition: lambda > 1 fails";
  return rep;
}

double theorem3_limit(double lambda, double alpha, std::optional<std::uint64_t> N) {
  if (!(lambda > 1.0) || !(alpha > 0.0)) throw Error(ErrorCode::InvalidParam, "need lambda > 1 and alpha > 0");
  const double q = std::pow(lambda, -alpha);
  if (!N) return q / (1.0 - q);
  if (*N < 2) throw Error(ErrorCode::InvalidParam, "N must be >= 2");
  double sum = 0.0;
  double term = 1.0;
  for (std::uint64_t l = 1; l < *N; ++l) {
    term *= q;
    sum += term;
  }
  return sum;
}

double grincevicius_limit(double ea) {
  if (!(ea >= 0.0) || !(ea < 1.0)) throw Error(ErrorCode::OutOfRange, "E[A^alpha] must lie in [0, 1)");
  return 1.0 / (1.0 - ea);
}

double vbe_tail_bound(double c_moment, double delta, std::uint64_t n, double t) {
  if (!(c_moment > 0.0) || !(delta > 0.0) || !(delta <= 1.0) || n == 0 || !(t > 0.0))
    throw Error(ErrorCode::InvalidParam, "vbe_tail_bound needs c > 0, delta in (0,1], n >= 1, t > 0");
  return std::min(1.0, 2.0 * c_moment * static_cast<double>(n) * std::pow(t, -1.0 - delta));
}

namespace {

// x_n / a^n in floating point for the growth recursion; returns min_n x_n^(1/n), or 0 if some x_n <= 0.
double lemma6_screen(double a, double eps, double delta, std::uint64_t N, std::uint64_t horizon) {
  const long double r = (static_cast<long double>(a) - eps) / a;
  const long double log_a = std::log(static_cast<long double>(a));
  long double y = 1.0L;
  long double r_pow = 1.0L;  // r^n
  long double best = std::numeric_limits<long double>::infinity();
  for (std::uint64_t n = 0; n < horizon; ++n) {
    const long double r_next = r_pow * r;
    y -= (n + 1 <= N) ? static_cast<long double>(delta) * r_next : r_pow / a;
    r_pow = r_next;
    if (!(y > 0.0L)) return 0.0;
    best = std::min(best, log_a + std::log(y) / static_cast<long double>(n + 1));
  }
  return static_cast<double>(std::exp(best));
}

}  // namespace

bool verify_lemma6(const Lemma6Certificate& cert) {
  const mpq_class a(cert.a);
  const mpq_class base = a - mpq_class(cert.epsilon);
  const mpq_class delta(cert.delta);
  const mpq_class c(cert.c);
  if (c <= 1) return false;
  mpq_class x = 1;
  mpq_class base_pow = 1;  // (a - eps)^n
  mpq_class c_pow = 1;
  for (std::uint64_t n = 0; n < cert.horizon; ++n) {
    const mpq_class base_next = base_pow * base;
    if (n + 1 <= cert.N) x = a * x - delta * base_next;
    else x = a * x - base_pow;
    base_pow = base_next;
    c_pow *= c;
    if (x < c_pow) return false;
  }
  return true;
}

Lemma6Certificate lemma6_construct(double a, double epsilon, double delta, std::uint64_t horizon) {
  if (!(a > 1.0) || !(epsilon > 0.0) || !(a - epsilon > 1.0))
    throw Error(ErrorCode::InvalidParam, "growth certificate requires a > 1, epsilon > 0 and a - epsilon > 1");
  if (!(delta > 0.0) || !(delta < 1.0)) throw Error(ErrorCode::InvalidParam, "delta must lie in (0, 1)");
  if (horizon == 0) throw Error(ErrorCode::InvalidParam, "horizon must be positive");
  constexpr std::uint64_t kMaxN = 200;
  constexpr int kMaxHalvings = 40;
  double d = delta;
  for (int h = 0; h <= kMaxHalvings; ++h, d *= 0.5) {
    for (std::uint64_t N = 1; N <= kMaxN; ++N) {
      const double c_max = lemma6_screen(a, epsilon, d, N, horizon);
      if (!(c_max > 1.0)) continue;
      // dyadic c halfway to the screened maximum keeps the exact replay cheap
      const double c = std::floor((1.0 + c_max) / 2.0 * 1048576.0) / 1048576.0;
      if (!(c > 1.0)) continue;
      Lemma6Certificate cert{a, epsilon, d, N, {}, c, horizon};
      if (!verify_lemma6(cert)) continue;
      for (std::uint64_t n = 1; n <= N; ++n) cert.c_values.push_back(d * std::pow(a - epsilon, static_cast<double>(n)));
      return cert;
    }
  }
  throw Error(ErrorCode::SearchExhausted, "no (N, delta) certifies x_n >= c^n");
}

bool verify_lemma7(double a_d, double eps1_d, std::uint64_t N, double eps2_d) {
  if (N < 2) return false;
  const mpq_class a(a_d);
  const mpq_class eps1(eps1_d);
  const mpq_class eps2(eps2_d);
  const mpq_class base = a - eps1;
  for (std::uint64_t l = 1; l < N; ++l) {
    mpq_class x = 1;
    mpq_class base_pow = 1;  // (a - eps1)^n
    for (std::uint64_t n = 0; n < N; ++n) {
      const mpq_class b = n == l ? base_pow : eps2 * base_pow;
      x = a * x - b;
      if (x < eps1) return false;
      base_pow *= base;
    }
  }
  return true;
}

Lemma7Certificate lemma7_epsilon2(double a, double epsilon1, std::uint64_t N) {
  if (!(a > 1.0) || !(epsilon1 > 0.0) || !(a - epsilon1 > 1.0))
    throw Error(ErrorCode::InvalidParam, "positivity certificate requires a > 1, epsilon1 > 0 and a - epsilon1 > 1");
  if (N < 2) throw Error(ErrorCode::InvalidParam, "N must be >= 2");
  double hi = 1.0;
  if (verify_lemma7(a, epsilon1, N, hi)) return {a, epsilon1, N, hi};
  double lo = 0.5;
  int halvings = 0;
  while (!verify_lemma7(a, epsilon1, N, lo)) {
    hi = lo;
    lo *= 0.5;
    if (++halvings > 200) throw Error(ErrorCode::SearchExhausted, "no epsilon2 certifies the recursion");
  }
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (verify_lemma7(a, epsilon1, N, mid)) lo = mid;
    else hi = mid;
  }
  return {a, epsilon1, N, lo};
}

}  // namespace bpe
