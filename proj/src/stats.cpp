#include "bpe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace bpe {

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

EstimateCI frequency_estimate(std::uint64_t events, std::uint64_t trials, std::uint64_t censored, double level) {
  if (trials == 0) throw std::invalid_argument("frequency_estimate: zero trials");
  EstimateCI e;
  e.trials = trials;
  e.censored = censored;
  const double n = static_cast<double>(trials);
  e.point = static_cast<double>(events) / n;
  e.stderr_ = std::sqrt(e.point * (1.0 - e.point) / n);
  if (events == 0) {
    e.ci_low = 0.0;
    e.ci_high = std::min(1.0, 3.0 / n);
    return e;
  }
  const double z = normal_quantile(0.5 + level / 2.0);
  e.ci_low = std::max(0.0, e.point - z * e.stderr_);
  e.ci_high = std::min(1.0, e.point + z * e.stderr_);
  return e;
}

EstimateCI scale(const EstimateCI& e, double divisor) {
  EstimateCI r = e;
  r.point /= divisor;
  r.stderr_ /= divisor;
  r.ci_low /= divisor;
  r.ci_high /= divisor;
  return r;
}

namespace {

double chi_square_sf(double stat, double dof) {
  if (dof <= 0.0) return 1.0;
  if (stat <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), stat));
}

// Pools sorted distinct values into contiguous bins holding at least min_count samples each.
std::vector<std::uint64_t> quantile_edges(std::span<const std::uint64_t> xs, int max_bins, double min_count) {
  std::map<std::uint64_t, std::uint64_t> freq;
  for (auto x : xs) ++freq[x];
  const double target = std::max(min_count, static_cast<double>(xs.size()) / max_bins);
  std::vector<std::uint64_t> upper;  // inclusive upper value of each bin
  double acc = 0.0;
  for (const auto& [v, c] : freq) {
    acc += static_cast<double>(c);
    if (acc >= target) {
      upper.push_back(v);
      acc = 0.0;
    }
  }
  if (upper.empty()) upper.push_back(freq.rbegin()->first);
  else if (acc > 0.0) upper.back() = freq.rbegin()->first;  // merge the short remainder
  return upper;
}

std::size_t bin_of(const std::vector<std::uint64_t>& upper, std::uint64_t x) {
  return static_cast<std::size_t>(std::lower_bound(upper.begin(), upper.end(), x) - upper.begin());
}

}  // namespace

ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed, std::span<const double> probs) {
  if (observed.size() != probs.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
  double n = 0.0;
  for (auto o : observed) n += static_cast<double>(o);
  std::vector<double> obs;
  std::vector<double> exp;
  double o_acc = 0.0;
  double e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += static_cast<double>(observed[i]);
    e_acc += probs[i] * n;
    if (e_acc >= 5.0) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (!exp.empty()) {
    obs.back() += o_acc;
    exp.back() += e_acc;
  }
  ChiSquareResult r;
  if (exp.size() < 2) return r;
  for (std::size_t i = 0; i < exp.size(); ++i) r.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  r.dof = static_cast<double>(exp.size() - 1);
  r.p_value = chi_square_sf(r.statistic, r.dof);
  r.applicable = true;
  return r;
}

ChiSquareResult chi_square_independence(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                        int max_bins) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("chi_square_independence: bad samples");
  const double n = static_cast<double>(a.size());
  // Each marginal bin holds >= sqrt(5 n) samples so row*col/n >= 5 in every cell.
  const double min_count = std::sqrt(5.0 * n);
  const auto ea = quantile_edges(a, max_bins, min_count);
  const auto eb = quantile_edges(b, max_bins, min_count);
  ChiSquareResult r;
  if (ea.size() < 2 || eb.size() < 2) return r;
  std::vector<double> table(ea.size() * eb.size(), 0.0);
  std::vector<double> rows(ea.size(), 0.0);
  std::vector<double> cols(eb.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ra = bin_of(ea, a[i]);
    const auto cb = bin_of(eb, b[i]);
    table[ra * eb.size() + cb] += 1.0;
    rows[ra] += 1.0;
    cols[cb] += 1.0;
  }
  for (std::size_t i = 0; i < ea.size(); ++i)
    for (std::size_t j = 0; j < eb.size(); ++j) {
      const double e = rows[i] * cols[j] / n;
      const double d = table[i * eb.size() + j] - e;
      r.statistic += d * d / e;
    }
  r.dof = static_cast<double>((ea.size() - 1) * (eb.size() - 1));
  r.p_value = chi_square_sf(r.statistic, r.dof);
  r.applicable = true;
  return r;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  r.p_value = kolmogorov_survival((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d);
  return r;
}

}  // namespace bpe
