#include "bpe/process.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/random/binomial_distribution.hpp>

#include "bpe/error.hpp"

namespace bpe {

namespace {

// Tail-category offspring are drawn one by one; refuse absurd block sizes.
constexpr std::uint64_t kMaxIndividualDraws = std::uint64_t{1} << 26;

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) noexcept {
  return (a >= kStateCap || b >= kStateCap || a + b >= kStateCap) ? kStateCap : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) noexcept {
  if (a == 0 || b == 0) return 0;
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  return p >= kStateCap ? kStateCap : static_cast<std::uint64_t>(p);
}

std::uint64_t binomial(std::uint64_t n, double p, Rng& rng) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  boost::random::binomial_distribution<long long, double> dist(static_cast<long long>(n), p);
  return static_cast<std::uint64_t>(dist(rng));
}

}  // namespace

std::uint64_t offspring_block_sum(const DiscreteLaw& law, std::uint64_t n, Rng& rng) {
  if (n == 0) return 0;
  if (auto v = law.constant_value()) return sat_mul(n, *v);

  const auto& atoms = law.atoms();
  const auto& probs = law.atom_probs();
  std::uint64_t remaining = n;
  double mass_left = 1.0;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < atoms.size() && remaining > 0; ++i) {
    const bool last_category = (i + 1 == atoms.size()) && !law.has_analytic_tail();
    const std::uint64_t count =
        last_category ? remaining : binomial(remaining, std::min(1.0, probs[i] / mass_left), rng);
    sum = sat_add(sum, sat_mul(count, atoms[i]));
    remaining -= count;
    mass_left -= probs[i];
  }
  if (remaining > 0 && law.has_analytic_tail()) {
    if (remaining > kMaxIndividualDraws)
      throw Error(ErrorCode::Unsupported, "too many heavy-tailed offspring draws in one generation");
    const double core = 1.0 - law.analytic_mass();
    for (std::uint64_t j = 0; j < remaining; ++j) {
      const double u = core + (1.0 - core) * rng.uniform();
      sum = sat_add(sum, law.quantile(std::min(u, std::nextafter(1.0, 0.0))));
    }
  }
  return sum;
}

Generation::Generation(const GenerationModel& model, Rng& rng) : model_(&model), rng_(&rng) {
  const double u = rng.uniform();
  const std::uint64_t first = model.offspring().quantile(u);
  y_ = model.coupling() == Coupling::Comonotone ? model.emigration().quantile(u) : model.emigration().sample(rng);
  checkpoints_.emplace_back(0, 0);
  checkpoints_.emplace_back(1, first);
}

std::uint64_t Generation::offspring_prefix(std::uint64_t n) {
  const auto& [count, sum] = checkpoints_.back();
  if (n == count) return sum;
  if (n > count) {
    const std::uint64_t next = sat_add(sum, offspring_block_sum(model_->offspring(), n - count, *rng_));
    checkpoints_.emplace_back(n, next);
    return next;
  }
  for (const auto& [c, s] : checkpoints_)
    if (c == n) return s;
  throw std::logic_error("Generation::offspring_prefix: query splits an already drawn block");
}

std::uint64_t emigrate(std::uint64_t offspring_sum, std::uint64_t y) noexcept {
  if (offspring_sum >= kStateCap) return kStateCap;
  return offspring_sum > y ? offspring_sum - y : 0;
}

std::uint64_t step_on(Generation& g, std::uint64_t state) {
  if (state == 0) return 0;
  return emigrate(g.offspring_prefix(state), g.emigration());
}

std::pair<std::uint64_t, std::uint64_t> decompose_on(Generation& g, std::pair<std::uint64_t, std::uint64_t> pair) {
  const auto [z1, z2] = pair;
  const std::uint64_t s1 = g.offspring_prefix(z1);
  const std::uint64_t s12 = g.offspring_prefix(sat_add(z1, z2));
  const std::uint64_t next1 = z1 == 0 ? 0 : emigrate(s1, g.emigration());
  return {next1, s12 >= kStateCap ? kStateCap : s12 - s1};
}

std::uint64_t step(std::uint64_t state, const GenerationModel& model, Rng& rng) {
  if (state == 0) return 0;
  Generation g(model, rng);
  return step_on(g, state);
}

std::uint64_t renewal_step(std::uint64_t state, const GenerationModel& model, std::uint64_t initial_k, Rng& rng) {
  if (state == 0) return initial_k;
  return step(state, model, rng);
}

std::uint64_t pure_step(std::uint64_t state, const GenerationModel& model, Rng& rng) {
  Generation g(model, rng);
  return g.offspring_prefix(state);
}

std::pair<std::uint64_t, std::uint64_t> decompose_step(std::pair<std::uint64_t, std::uint64_t> pair,
                                                       const GenerationModel& model, Rng& rng) {
  Generation g(model, rng);
  return decompose_on(g, pair);
}

void ProcessConfig::validate() const {
  if (initial_k == 0) throw Error(ErrorCode::InvalidParam, "initial population must be positive");
  if (variant == Variant::DeterministicAr && !model.offspring().constant_value())
    throw Error(ErrorCode::NotDeterministic, "deterministic_ar requires a constant offspring law");
  if (variant == Variant::Decomposition && k0 <= initial_k)
    throw Error(ErrorCode::InvalidParam, "decomposition requires k0 > initial_k");
}

namespace {

void finish_martingale(Trajectory& t, double lambda) {
  t.martingale_path.resize(t.states.size());
  for (std::size_t n = 0; n < t.states.size(); ++n)
    t.martingale_path[n] = static_cast<double>(t.states[n]) / std::pow(lambda, static_cast<double>(n));
}

Trajectory simulate_decomposition(const ProcessConfig& config, std::uint64_t horizon, Rng& rng) {
  const auto& model = config.model;
  Trajectory t;
  DecompositionPaths d;
  t.states.push_back(config.initial_k);
  constexpr std::uint64_t kMaxAttempts = 10000000;
  std::uint64_t z1_full = 0;
  std::uint64_t y1 = 0;
  for (;;) {
    ++d.attempts;
    Generation g(model, rng);
    z1_full = step_on(g, config.initial_k);
    y1 = g.emigration();
    if (z1_full >= config.k0) break;
    if (d.attempts >= kMaxAttempts)
      throw Error(ErrorCode::SearchExhausted, "P[Z_1 >= k0] too small for rejection sampling");
  }
  t.states.push_back(z1_full);
  t.emigration_draws.push_back(y1);
  std::pair<std::uint64_t, std::uint64_t> pair{config.initial_k, config.k0 - config.initial_k};
  d.first.push_back(pair.first);
  d.second.push_back(pair.second);

  std::uint64_t z = z1_full;
  for (std::uint64_t n = 1; n < horizon; ++n) {
    if (z >= kStateCap || pair.first >= kStateCap || pair.second >= kStateCap) {
      t.overflow = true;
      break;
    }
    Generation g(model, rng);
    // prefix queries must be issued in increasing order of individual count
    std::array<std::uint64_t, 3> pts{pair.first, pair.first + pair.second, z};
    std::sort(pts.begin(), pts.end());
    for (auto p : pts) g.offspring_prefix(p);
    pair = decompose_on(g, pair);
    z = step_on(g, z);
    t.states.push_back(z);
    t.emigration_draws.push_back(g.emigration());
    d.first.push_back(pair.first);
    d.second.push_back(pair.second);
    if (z == 0 && !t.tau) t.tau = n + 1;
  }
  if (z1_full == 0) t.tau = 1;
  t.decomposition = std::move(d);
  return t;
}

}  // namespace

Trajectory simulate(const ProcessConfig& config, std::uint64_t horizon, std::uint64_t seed) {
  config.validate();
  if (horizon == 0) throw Error(ErrorCode::InvalidParam, "horizon must be >= 1");
  Rng rng(seed);
  Trajectory t;
  if (config.variant == Variant::Decomposition) {
    t = simulate_decomposition(config, horizon, rng);
  } else {
    const auto& model = config.model;
    std::uint64_t z = config.initial_k;
    std::uint64_t last_return = 0;
    t.states.reserve(horizon + 1);
    t.states.push_back(z);
    for (std::uint64_t n = 1; n <= horizon; ++n) {
      if (z >= kStateCap) {
        t.overflow = true;
        break;
      }
      if (z == 0 && config.variant != Variant::Renewal) {
        // absorbed: no randomness is consumed after extinction
        t.states.push_back(0);
        continue;
      }
      if (z == 0) {
        z = config.initial_k;
        t.emigration_draws.push_back(0);
        t.states.push_back(z);
        continue;
      }
      Generation g(model, rng);
      const std::uint64_t s = g.offspring_prefix(z);
      z = config.variant == Variant::Pure ? s : emigrate(s, g.emigration());
      t.emigration_draws.push_back(g.emigration());
      t.states.push_back(z);
      if (z == 0) {
        if (!t.tau) t.tau = n;
        t.return_times.push_back(n - last_return);
        last_return = n;
      }
    }
  }
  t.draws_seed = seed;
  finish_martingale(t, config.model.lambda());
  return t;
}

ArClosedForm ar_closed_form(const DiscreteLaw& offspring, std::uint64_t k, std::span<const std::uint64_t> y_draws) {
  const auto v = offspring.constant_value();
  if (!v) throw Error(ErrorCode::NotDeterministic, "offspring law is not constant");
  return ar_closed_form(static_cast<double>(*v), k, y_draws);
}

ArClosedForm ar_closed_form(double lambda, std::uint64_t k, std::span<const std::uint64_t> y_draws) {
  if (!(lambda > 1.0)) throw Error(ErrorCode::InvalidParam, "lambda must exceed 1");
  ArClosedForm out;
  const long double lam = lambda;
  out.hat_z.push_back(static_cast<long double>(k));
  out.hat_x.push_back(0.0L);
  out.ar_recursion.push_back(0.0L);
  long double inv_pow = 1.0L;
  long double partial = 0.0L;
  for (std::size_t j = 0; j < y_draws.size(); ++j) {
    const auto y = static_cast<long double>(y_draws[j]);
    inv_pow /= lam;
    partial += inv_pow * y;
    out.hat_x.push_back(partial);
    // closed form: lambda^n k - sum_{i<=n} Y_i lambda^(n-i), accumulated by the same recursion
    out.hat_z.push_back(lam * out.hat_z.back() - y);
    out.ar_recursion.push_back(out.ar_recursion.back() / lam + y);
  }
  return out;
}

std::vector<std::vector<std::uint64_t>> simulate_coupled(const GenerationModel& model,
                                                         std::span<const CoupledChain> chains,
                                                         std::uint64_t horizon, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::uint64_t>> paths(chains.size());
  std::vector<std::uint64_t> cur(chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    cur[i] = chains[i].initial;
    paths[i].push_back(cur[i]);
  }
  std::vector<std::size_t> order(chains.size());
  for (std::uint64_t n = 1; n <= horizon; ++n) {
    if (std::any_of(cur.begin(), cur.end(), [](auto z) { return z >= kStateCap; })) break;
    Generation g(model, rng);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cur[a] < cur[b]; });
    std::vector<std::uint64_t> next(chains.size());
    for (auto i : order) {
      const auto z = cur[i];
      switch (chains[i].variant) {
        case Variant::Pure: next[i] = g.offspring_prefix(z); break;
        case Variant::Renewal: next[i] = z == 0 ? chains[i].initial : step_on(g, z); break;
        default: next[i] = step_on(g, z); break;
      }
    }
    cur = next;
    for (std::size_t i = 0; i < chains.size(); ++i) paths[i].push_back(cur[i]);
  }
  return paths;
}

}  // namespace bpe
