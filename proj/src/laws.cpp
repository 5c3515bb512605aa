#include "bpe/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bpe/error.hpp"

namespace bpe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTol = 1e-12;
// Direct summation length for analytic-tail moment series before the integral remainder.
constexpr double kSeriesTerms = 1e6;

std::uint64_t saturate(double x) {
  if (!(x < static_cast<double>(kStateCap))) return kStateCap;
  return static_cast<std::uint64_t>(x);
}

// ceil(e^n) for the Example 1 atoms, saturated at the state cap.
std::uint64_t example1_atom(std::int64_t n) {
  if (n >= 43) return kStateCap;
  return saturate(std::ceil(std::exp(static_cast<double>(n))));
}

}  // namespace

DiscreteLaw DiscreteLaw::constant(std::uint64_t value) {
  return from_pmf({{value, 1.0}});
}

DiscreteLaw DiscreteLaw::from_pmf(const std::map<std::uint64_t, double>& pmf) {
  DiscreteLaw law;
  double total = 0.0;
  for (const auto& [x, p] : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidParam, "negative or non-finite probability");
    if (x >= kStateCap) throw Error(ErrorCode::InvalidParam, "atom beyond state cap");
    total += p;
    if (p > 0.0) {
      law.atoms_.push_back(x);
      law.probs_.push_back(p);
    }
  }
  if (law.atoms_.empty() || std::abs(total - 1.0) > kMassTol)
    throw Error(ErrorCode::NonNormalizable, "pmf masses sum to " + std::to_string(total));
  for (auto& p : law.probs_) p /= total;
  law.finalize();
  return law;
}

DiscreteLaw DiscreteLaw::pareto(double alpha, double t0) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidParam, "pareto alpha must be > 0");
  if (!(t0 > 0.0) || !std::isfinite(t0)) throw Error(ErrorCode::InvalidParam, "pareto t0 must be > 0");
  DiscreteLaw law;
  law.tail_ = ParetoTail{alpha, t0};
  law.finalize();
  return law;
}

DiscreteLaw DiscreteLaw::example1(double c, std::int64_t n0) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidParam, "example1 c must be > 0");
  if (n0 < 1) throw Error(ErrorCode::InvalidParam, "example1 n0 must be >= 1");
  const double top = c / static_cast<double>(n0);
  if (top > 1.0) throw Error(ErrorCode::InvalidParam, "example1 requires c/n0 <= 1");
  DiscreteLaw law;
  if (top < 1.0) {
    law.atoms_.push_back(0);
    law.probs_.push_back(1.0 - top);
  }
  law.tail_ = Example1Tail{c, n0};
  law.finalize();
  return law;
}

DiscreteLaw DiscreteLaw::from_json(const nlohmann::json& d) {
  if (!d.is_object() || !d.contains("type")) throw Error(ErrorCode::InvalidParam, "law descriptor needs a \"type\"");
  const std::string type = d.at("type").get<std::string>();
  try {
    if (type == "const") return constant(d.at("value").get<std::uint64_t>());
    if (type == "pmf") {
      const auto values = d.at("values").get<std::vector<std::uint64_t>>();
      const auto probs = d.at("probs").get<std::vector<double>>();
      if (values.size() != probs.size()) throw Error(ErrorCode::InvalidParam, "values/probs length mismatch");
      std::map<std::uint64_t, double> pmf;
      for (std::size_t i = 0; i < values.size(); ++i) pmf[values[i]] += probs[i];
      return from_pmf(pmf);
    }
    if (type == "pareto") return pareto(d.at("alpha").get<double>(), d.at("t0").get<double>());
    if (type == "example1") return example1(d.at("c").get<double>(), d.at("n0").get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParam, std::string("law descriptor: ") + e.what());
  }
  throw Error(ErrorCode::InvalidParam, "unknown law type '" + type + "'");
}

nlohmann::json DiscreteLaw::to_json() const {
  if (const auto* p = std::get_if<ParetoTail>(&tail_))
    return {{"type", "pareto"}, {"alpha", p->alpha}, {"t0", p->t0}};
  if (const auto* e = std::get_if<Example1Tail>(&tail_))
    return {{"type", "example1"}, {"c", e->c}, {"n0", e->n0}};
  if (atoms_.size() == 1) return {{"type", "const"}, {"value", atoms_.front()}};
  return {{"type", "pmf"}, {"values", atoms_}, {"probs", probs_}};
}

std::optional<std::uint64_t> DiscreteLaw::constant_value() const noexcept {
  if (has_analytic_tail() || atoms_.size() != 1) return std::nullopt;
  return atoms_.front();
}

std::uint64_t DiscreteLaw::max_value() const {
  if (has_analytic_tail()) throw Error(ErrorCode::Unsupported, "unbounded law has no maximum");
  return atoms_.back();
}

std::uint64_t DiscreteLaw::min_value() const {
  if (!atoms_.empty()) return atoms_.front();
  if (const auto* p = std::get_if<ParetoTail>(&tail_)) return saturate(std::ceil(p->t0));
  const auto& e = std::get<Example1Tail>(tail_);
  return example1_atom(e.n0);
}

double DiscreteLaw::analytic_mass() const noexcept {
  if (std::holds_alternative<ParetoTail>(tail_)) return 1.0;
  if (const auto* e = std::get_if<Example1Tail>(&tail_)) return e->c / static_cast<double>(e->n0);
  return 0.0;
}

double DiscreteLaw::analytic_tail(double t) const {
  if (const auto* p = std::get_if<ParetoTail>(&tail_)) {
    const double fl = std::floor(t);
    if (fl < p->t0) return 1.0;
    return std::pow(fl / p->t0, -p->alpha);
  }
  if (const auto* e = std::get_if<Example1Tail>(&tail_)) {
    const double c = e->c;
    if (t < static_cast<double>(example1_atom(e->n0))) return c / static_cast<double>(e->n0);
    // largest n with ceil(e^n) <= t; the tail is then c/(n+1)
    auto n = static_cast<std::int64_t>(std::floor(std::log(t)));
    while (std::ceil(std::exp(static_cast<double>(n + 1))) <= t) ++n;
    while (n >= e->n0 && std::ceil(std::exp(static_cast<double>(n))) > t) --n;
    return c / static_cast<double>(n + 1);
  }
  return 0.0;
}

double DiscreteLaw::tail(double t) const {
  if (t < 0.0) return 1.0;
  double mass = 0.0;
  // atoms strictly above t
  const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), t,
                                   [](double v, std::uint64_t a) { return v < static_cast<double>(a); });
  const auto idx = static_cast<std::size_t>(it - atoms_.begin());
  if (idx < atoms_.size()) mass = cum_.back() - (idx == 0 ? 0.0 : cum_[idx - 1]);
  if (has_analytic_tail()) mass += analytic_tail(t);
  return std::clamp(mass, 0.0, 1.0);
}

double DiscreteLaw::tail_log(double log_t) const {
  if (log_t < 700.0 && !(std::holds_alternative<Example1Tail>(tail_) && log_t >= std::log(1e15)))
    return tail(std::exp(log_t));
  // beyond every atom: only the analytic family contributes
  if (const auto* p = std::get_if<ParetoTail>(&tail_))
    return std::exp(-p->alpha * (log_t - std::log(p->t0)));
  if (const auto* e = std::get_if<Example1Tail>(&tail_)) {
    // ceil(e^n) <= e^L iff n < L for non-integer e^n, so the tail index is ceil(L)
    const double m = std::max(std::ceil(log_t), static_cast<double>(e->n0));
    return e->c / m;
  }
  return 0.0;
}

double DiscreteLaw::pmf(std::uint64_t x) const {
  double p = 0.0;
  const auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x);
  if (it != atoms_.end() && *it == x) p += probs_[static_cast<std::size_t>(it - atoms_.begin())];
  // analytic families put no mass at 0
  if (has_analytic_tail() && x >= 1)
    p += analytic_tail(static_cast<double>(x) - 1.0) - analytic_tail(static_cast<double>(x));
  return p;
}

std::uint64_t DiscreteLaw::quantile(double u) const {
  const double core = 1.0 - analytic_mass();
  if (!atoms_.empty() && u < core) {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    const auto idx = std::min(static_cast<std::size_t>(it - cum_.begin()), atoms_.size() - 1);
    return atoms_[idx];
  }
  // analytic part: v = 1 - u lies in (0, analytic_mass]
  const double v = std::max(1.0 - u, std::numeric_limits<double>::min());
  if (const auto* p = std::get_if<ParetoTail>(&tail_))
    return saturate(std::ceil(p->t0 * std::pow(v, -1.0 / p->alpha)));
  if (const auto* e = std::get_if<Example1Tail>(&tail_)) {
    const double n = std::floor(e->c / v);
    if (n >= 43.0) return kStateCap;
    return example1_atom(std::max(static_cast<std::int64_t>(n), e->n0));
  }
  return atoms_.back();
}

double DiscreteLaw::log_quantile(double u) const {
  const std::uint64_t v = quantile(u);
  if (v < kStateCap) return v == 0 ? -kInf : std::log(static_cast<double>(v));
  const double w = std::max(1.0 - u, std::numeric_limits<double>::min());
  if (const auto* p = std::get_if<ParetoTail>(&tail_)) return std::log(p->t0) - std::log(w) / p->alpha;
  if (const auto* e = std::get_if<Example1Tail>(&tail_)) return std::floor(e->c / w);  // log ceil(e^n) = n to double precision
  return std::log(static_cast<double>(v));
}

void DiscreteLaw::finalize() {
  cum_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cum_.begin());
  if (has_analytic_tail()) {
    mean_ = power_moment(1.0);
    variance_ = std::isfinite(mean_) ? power_moment(2.0) - mean_ * mean_ : kInf;
  } else {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const double x = static_cast<double>(atoms_[i]);
      m1 += probs_[i] * x;
      m2 += probs_[i] * x * x;
    }
    mean_ = m1;
    // central form avoids cancellation for large atoms
    double var = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const double d = static_cast<double>(atoms_[i]) - m1;
      var += probs_[i] * d * d;
    }
    variance_ = var;
    (void)m2;
  }
  if (std::isfinite(variance_) && variance_ < 0.0) variance_ = 0.0;
}

template <class Increment, class TailIntegral>
double DiscreteLaw::tail_sum(Increment inc, TailIntegral integral) const {
  // Only called for pareto tails: every term past J behaves like t0^alpha j^-alpha inc(j).
  const auto& p = std::get<ParetoTail>(tail_);
  const double J = std::max(kSeriesTerms, std::ceil(100.0 * p.t0));
  double sum = 0.0;
  for (double j = 1.0; j < J; j += 1.0) sum += tail(j) * inc(j);
  return sum + integral(J);
}

double DiscreteLaw::power_moment(double q) const {
  if (!has_analytic_tail()) {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      m += probs_[i] * std::pow(static_cast<double>(atoms_[i]), q);
    return m;
  }
  if (std::holds_alternative<Example1Tail>(tail_)) return q > 0.0 ? kInf : 1.0;
  const auto& p = std::get<ParetoTail>(tail_);
  if (p.alpha <= q) return kInf;
  // E[X^q] = sum_{j>=0} P[X > j] ((j+1)^q - j^q), and P[X > 0] = 1
  const double c = std::pow(p.t0, p.alpha);
  return 1.0 + tail_sum([q](double j) { return std::pow(j + 1.0, q) - std::pow(j, q); },
                        [&](double J) {
                          // integral of c x^-alpha q x^(q-1) on [J, inf) plus the trapezoid end correction
                          return q * c * std::pow(J, q - p.alpha) / (p.alpha - q) +
                                 0.5 * c * std::pow(J, -p.alpha) * q * std::pow(J, q - 1.0);
                        });
}

double DiscreteLaw::log_plus_moment() const {
  if (!has_analytic_tail()) {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (atoms_[i] > 1) m += probs_[i] * std::log(static_cast<double>(atoms_[i]));
    return m;
  }
  if (std::holds_alternative<Example1Tail>(tail_)) return kInf;
  const auto& p = std::get<ParetoTail>(tail_);
  const double c = std::pow(p.t0, p.alpha);
  return tail_sum([](double j) { return std::log1p(1.0 / j); },
                  [&](double J) {
                    // log(1+1/x) = 1/x - 1/(2x^2) + O(x^-3)
                    return c * (std::pow(J, -p.alpha) / p.alpha -
                                0.5 * std::pow(J, -p.alpha - 1.0) / (p.alpha + 1.0) +
                                0.5 * std::pow(J, -p.alpha - 1.0));
                  });
}

double DiscreteLaw::x_log_x_moment() const {
  if (!has_analytic_tail()) {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (atoms_[i] > 1) {
        const double x = static_cast<double>(atoms_[i]);
        m += probs_[i] * x * std::log(x);
      }
    return m;
  }
  if (std::holds_alternative<Example1Tail>(tail_)) return kInf;
  const auto& p = std::get<ParetoTail>(tail_);
  if (p.alpha <= 1.0) return kInf;
  const double c = std::pow(p.t0, p.alpha);
  const double a1 = p.alpha - 1.0;
  return tail_sum([](double j) { return (j + 1.0) * std::log(j + 1.0) - j * std::log(j); },
                  [&](double J) {
                    // increment ~ log x + 1; integral of c x^-alpha (log x + 1) on [J, inf)
                    const double lj = std::log(J);
                    return c * std::pow(J, -a1) * (lj / a1 + 1.0 / (a1 * a1) + 1.0 / a1) +
                           0.5 * c * std::pow(J, -p.alpha) * (lj + 1.0);
                  });
}

double log_plus_moment(const DiscreteLaw& law) { return law.log_plus_moment(); }
double x_log_x_moment(const DiscreteLaw& law) { return law.x_log_x_moment(); }

ExtinctionProbability gw_extinction_prob(const DiscreteLaw& offspring) {
  if (!(offspring.mean() > 1.0))
    throw Error(ErrorCode::NotSupercritical, "offspring mean " + std::to_string(offspring.mean()) + " <= 1");

  // Finite pgf: explicit atoms up to the truncation point, folded tail mass at the top.
  constexpr std::uint64_t kTruncation = 1000000;
  std::vector<std::pair<std::uint64_t, double>> terms;
  ExtinctionProbability out;
  if (offspring.finite_support()) {
    for (std::size_t i = 0; i < offspring.atoms().size(); ++i)
      terms.emplace_back(offspring.atoms()[i], offspring.atom_probs()[i]);
    out.truncation = offspring.max_value();
  } else {
    for (std::uint64_t x = 0; x < kTruncation; ++x) {
      const double p = offspring.pmf(x);
      if (p > 0.0) terms.emplace_back(x, p);
    }
    terms.emplace_back(kTruncation, offspring.tail(static_cast<double>(kTruncation) - 1.0));
    out.truncation = kTruncation;
  }

  auto pgf = [&](double s) {
    double v = 0.0;
    for (const auto& [x, p] : terms) v += p * std::pow(s, static_cast<double>(x));
    return v;
  };
  auto pgf_prime = [&](double s) {
    double v = 0.0;
    for (const auto& [x, p] : terms)
      if (x > 0) v += p * static_cast<double>(x) * std::pow(s, static_cast<double>(x) - 1.0);
    return v;
  };

  double q = 0.0;
  for (int it = 1; it <= 10000000; ++it) {
    const double next = pgf(q);
    out.iterations = it;
    const double delta = std::abs(next - q);
    q = next;
    if (delta < 1e-12) break;
  }
  out.q = q;
  if (!offspring.finite_support()) {
    const double slope = pgf_prime(q);
    const double folded = offspring.tail(static_cast<double>(kTruncation) - 1.0);
    out.truncation_error = slope < 1.0 ? folded / (1.0 - slope) : 1.0;
  }
  return out;
}

std::string to_string(Coupling coupling) {
  return coupling == Coupling::Independent ? "independent" : "comonotone";
}

Coupling coupling_from_string(const std::string& name) {
  if (name == "independent") return Coupling::Independent;
  if (name == "comonotone") return Coupling::Comonotone;
  throw Error(ErrorCode::InvalidParam, "unknown coupling '" + name + "'");
}

GenerationModel::GenerationModel(DiscreteLaw offspring, DiscreteLaw emigration, Coupling coupling)
    : offspring_(std::move(offspring)), emigration_(std::move(emigration)), coupling_(coupling) {
  if (!std::isfinite(offspring_.mean()))
    throw Error(ErrorCode::InvalidParam, "offspring law has infinite mean");
}

GenerationModel GenerationModel::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("offspring") || !j.contains("emigration"))
    throw Error(ErrorCode::InvalidParam, "model needs \"offspring\" and \"emigration\"");
  const auto coupling = j.contains("coupling") ? coupling_from_string(j.at("coupling").get<std::string>())
                                               : Coupling::Independent;
  return GenerationModel(DiscreteLaw::from_json(j.at("offspring")), DiscreteLaw::from_json(j.at("emigration")),
                         coupling);
}

nlohmann::json GenerationModel::to_json() const {
  return {{"offspring", offspring_.to_json()}, {"emigration", emigration_.to_json()},
          {"coupling", to_string(coupling_)}};
}

std::vector<JointAtom> first_pair_law(const GenerationModel& model, std::uint64_t y_max) {
  const auto& xi = model.offspring();
  const auto& y = model.emigration();
  if (!xi.finite_support()) throw Error(ErrorCode::StateSpaceTooLarge, "offspring law has unbounded support");
  if (y_max > 10000000) throw Error(ErrorCode::StateSpaceTooLarge, "emigration enumeration beyond 1e7");

  std::vector<std::pair<std::uint64_t, double>> ys;
  if (y.finite_support()) {
    for (std::size_t i = 0; i < y.atoms().size(); ++i)
      if (y.atoms()[i] <= y_max) ys.emplace_back(y.atoms()[i], y.atom_probs()[i]);
  } else {
    for (std::uint64_t v = 0; v <= y_max; ++v) {
      const double p = y.pmf(v);
      if (p > 0.0) ys.emplace_back(v, p);
    }
  }

  std::vector<JointAtom> out;
  if (model.coupling() == Coupling::Independent) {
    for (std::size_t i = 0; i < xi.atoms().size(); ++i)
      for (const auto& [v, q] : ys) out.push_back({xi.atoms()[i], v, xi.atom_probs()[i] * q});
    return out;
  }
  // Comonotone: walk both cdfs over u in [0,1) and emit overlapping intervals.
  std::size_t i = 0;
  std::size_t j = 0;
  double lo = 0.0;
  double xi_hi = xi.atom_probs()[0];
  double y_hi = ys.empty() ? 0.0 : ys[0].second;
  double y_cum = y_hi;
  while (i < xi.atoms().size() && j < ys.size()) {
    const double hi = std::min(xi_hi, y_hi);
    if (hi > lo) out.push_back({xi.atoms()[i], ys[j].first, hi - lo});
    lo = hi;
    if (xi_hi <= hi) {
      ++i;
      if (i < xi.atoms().size()) xi_hi += xi.atom_probs()[i];
      else break;
    }
    if (y_hi <= hi) {
      ++j;
      if (j < ys.size()) {
        y_cum += ys[j].second;
        y_hi = y_cum;
      }
    }
  }
  return out;
}

}  // namespace bpe
