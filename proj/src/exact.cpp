#include "bpe/exact.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bpe/error.hpp"

namespace bpe {

namespace {

constexpr std::uint64_t kMinTruncation = 64;
constexpr std::uint64_t kMaxTruncation = std::uint64_t{1} << 15;
constexpr double kPlateauRelChange = 1e-3;

// Cramer rate of the lower tail: sup_{theta >= 0} (-theta c - log E[exp(-theta xi)]).
double lower_rate(const DiscreteLaw& xi, double c) {
  if (c >= xi.mean()) return 0.0;
  auto objective = [&](double th) {
    // log-sum-exp over atoms, shifted by the smallest exponent
    double shift = -th * static_cast<double>(xi.min_value());
    double s = 0.0;
    for (std::size_t i = 0; i < xi.atoms().size(); ++i)
      s += xi.atom_probs()[i] * std::exp(-th * static_cast<double>(xi.atoms()[i]) - shift);
    return -th * c - (shift + std::log(s));
  };
  double lo = 0.0;
  double hi = 64.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (objective(m1) < objective(m2)) lo = m1;
    else hi = m2;
  }
  return std::max(0.0, objective(0.5 * (lo + hi)));
}

// Bound on the chance that a chain sitting above M drops below its current size in one step:
// P[xi_2 + ... + xi_z <= z + B] for z > M.
double per_step_leak_bound(const GenerationModel& model, std::uint64_t M) {
  const double B = static_cast<double>(model.emigration().max_value());
  const double m = static_cast<double>(M);
  const double rate = lower_rate(model.offspring(), (m + 1.0 + B) / m);
  return std::min(1.0, std::exp(-m * rate));
}

void require_finite(const GenerationModel& model) {
  if (!model.offspring().finite_support() || !model.emigration().finite_support())
    throw Error(ErrorCode::Unsupported, "the forward recursion needs finite-support offspring and emigration laws");
}

// One convolution step of a truncated row; mass pushed past the end accumulates in overflow.
void convolve_in_place(std::vector<double>& row, double& overflow, const DiscreteLaw& xi,
                       std::vector<double>& scratch) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  const std::size_t L = row.size();
  for (std::size_t s = 0; s < L; ++s) {
    if (row[s] == 0.0) continue;
    for (std::size_t a = 0; a < xi.atoms().size(); ++a) {
      const std::size_t t = s + xi.atoms()[a];
      const double w = row[s] * xi.atom_probs()[a];
      if (t < L) scratch[t] += w;
      else overflow += w;
    }
  }
  row.swap(scratch);
}

}  // namespace

double DpResult::prob_tau_lt(std::uint64_t n) const {
  if (n == 0 || n > N) throw Error(ErrorCode::InvalidParam, "n must lie in 1..N");
  return probs[n - 1];
}

nlohmann::json DpResult::to_json() const {
  std::vector<double> tail(probs.begin() + 1, probs.end());
  return {{"k", k},
          {"N", N},
          {"M", M},
          {"n_first", 2},
          {"probs", tail},
          {"leaked_mass", leaked_mass},
          {"error_bound", error_bound}};
}

DpResult forward_dp_tau(const GenerationModel& model, std::uint64_t k, std::uint64_t N,
                        std::optional<std::uint64_t> M, double tolerance) {
  require_finite(model);
  if (k == 0 || N == 0) throw Error(ErrorCode::InvalidParam, "k and N must be positive");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidParam, "tolerance must be positive");
  const auto& xi = model.offspring();
  const auto& y = model.emigration();

  std::uint64_t trunc = 0;
  if (M) {
    trunc = *M;
    if (trunc < k) throw Error(ErrorCode::InvalidParam, "truncation M must be >= k");
  } else {
    trunc = kMinTruncation;
    while (trunc < k) trunc *= 2;
    while (trunc < kMaxTruncation &&
           static_cast<double>(N) * per_step_leak_bound(model, trunc) > tolerance / 2.0)
      trunc *= 2;
  }
  const double leak_rate = per_step_leak_bound(model, trunc);

  DpResult res;
  res.k = k;
  res.N = N;
  res.M = trunc;
  res.probs.assign(N, 0.0);

  const std::uint64_t B = y.max_value();
  const std::size_t L = static_cast<std::size_t>(trunc + B + 1);
  const bool comonotone = model.coupling() == Coupling::Comonotone;
  const auto pairs = comonotone ? first_pair_law(model, B) : std::vector<JointAtom>{};

  std::vector<double> w(trunc + 1, 0.0);
  w[k] = 1.0;
  double dead = 0.0;
  std::vector<double> row(L);
  std::vector<double> scratch(L);
  std::vector<double> next(trunc + 1);
  for (std::uint64_t step = 1; step < N; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    std::size_t zmax = 0;
    for (std::size_t z = w.size(); z-- > 1;)
      if (w[z] > 0.0) {
        zmax = z;
        break;
      }
    // row = law of the offspring sum that pairs with Y: all z individuals, or z - 1 when
    // the first one is drawn jointly with Y
    std::fill(row.begin(), row.end(), 0.0);
    row[0] = 1.0;
    double over = 0.0;
    double escaped = 0.0;
    for (std::size_t z = 1; z <= zmax; ++z) {
      if (!comonotone || z > 1) convolve_in_place(row, over, xi, scratch);
      const double wz = w[z];
      if (wz == 0.0) continue;
      escaped += wz * over;
      if (!comonotone) {
        for (std::size_t s = 0; s < L; ++s) {
          if (row[s] == 0.0) continue;
          const double ws = wz * row[s];
          for (std::size_t a = 0; a < y.atoms().size(); ++a) {
            const double p = ws * y.atom_probs()[a];
            const auto yy = y.atoms()[a];
            if (s <= yy) dead += p;
            else if (s - yy <= trunc) next[s - yy] += p;
            else escaped += p;
          }
        }
      } else {
        for (std::size_t s = 0; s < L; ++s) {
          if (row[s] == 0.0) continue;
          const double ws = wz * row[s];
          for (const auto& [x, yy, p] : pairs) {
            const std::uint64_t tot = s + x;
            if (tot <= yy) dead += ws * p;
            else if (tot - yy <= trunc) next[tot - yy] += ws * p;
            else escaped += ws * p;
          }
        }
      }
    }
    w.swap(next);
    res.leaked_mass += escaped;
    // escaped at this step may still die in steps step+1 .. N-1
    res.error_bound += escaped * static_cast<double>(N - 1 - step) * leak_rate;
    res.probs[step] = std::clamp(dead, res.probs[step - 1], 1.0);
  }
  res.error_bound = std::min(res.error_bound, 1.0);
  if (res.error_bound > tolerance)
    throw Error(ErrorCode::TruncationTooTight,
                "error bound " + std::to_string(res.error_bound) + " exceeds tolerance " + std::to_string(tolerance));
  return res;
}

TauBounds expected_tau_bounds(const GenerationModel& model, std::uint64_t k, std::uint64_t N,
                              std::optional<std::uint64_t> M, double tolerance) {
  const auto dp = forward_dp_tau(model, k, N + 1, M, tolerance);
  TauBounds out;
  out.error_bound = dp.error_bound;
  for (std::uint64_t n = 0; n <= N; ++n) out.survival.push_back(1.0 - dp.probs[n]);  // P[tau > n]
  for (std::uint64_t n = 0; n < N; ++n) out.lower += std::max(0.0, out.survival[n] - dp.error_bound);
  const double s_end = out.survival[N];
  if (s_end <= tolerance) {
    double up = 0.0;
    for (std::uint64_t n = 0; n < N; ++n) up += out.survival[n];
    out.upper = up;
    out.truncated_upper = s_end > 0.0;
  } else {
    const double s_half = out.survival[N / 2];
    out.infinity_flag = (s_half - s_end) <= kPlateauRelChange * s_end;
  }
  return out;
}

PerpetuityBracket perpetuity_bracket(std::uint64_t lambda, const DiscreteLaw& y, std::uint64_t k,
                                     std::uint64_t depth, double tolerance) {
  if (lambda < 2) throw Error(ErrorCode::InvalidParam, "lambda must be an integer >= 2");
  if (!y.finite_support()) throw Error(ErrorCode::Unsupported, "emigration law must have finite support");
  if (depth == 0) throw Error(ErrorCode::InvalidParam, "depth must be positive");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidParam, "tolerance must be positive");
  const auto B = static_cast<std::int64_t>(y.max_value());
  const auto lam = static_cast<std::int64_t>(lambda);
  auto certain = [&](std::int64_t z) { return (lam - 1) * z >= B; };

  PerpetuityBracket out;
  out.depth = depth;
  double safe = 0.0;
  std::map<std::int64_t, double> open;
  if (certain(static_cast<std::int64_t>(k))) safe = 1.0;
  else open[static_cast<std::int64_t>(k)] = 1.0;
  for (std::uint64_t d = 0; d < depth && !open.empty(); ++d) {
    std::map<std::int64_t, double> next;
    for (const auto& [z, p] : open)
      for (std::size_t a = 0; a < y.atoms().size(); ++a) {
        const std::int64_t nz = lam * z - static_cast<std::int64_t>(y.atoms()[a]);
        const double q = p * y.atom_probs()[a];
        if (nz <= 0) continue;
        if (certain(nz)) safe += q;
        else next[nz] += q;
      }
    open.swap(next);
  }
  double pending = 0.0;
  for (const auto& [z, p] : open) pending += p;
  out.lower = std::min(safe, 1.0);
  out.upper = std::min(safe + pending, 1.0);
  if (out.upper - out.lower > tolerance)
    throw Error(ErrorCode::DepthTooShallow, "bracket width " + std::to_string(out.upper - out.lower) +
                                                " exceeds tolerance at depth " + std::to_string(depth));
  return out;
}

}  // namespace bpe
