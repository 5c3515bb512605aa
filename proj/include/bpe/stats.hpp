#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bpe {

/// Monte Carlo point estimate with normal-approximation interval.
struct EstimateCI {
  double point = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t censored = 0;
};

/// Frequency estimate events/trials. Zero events fall back to the rule-of-three bound [0, 3/trials].
EstimateCI frequency_estimate(std::uint64_t events, std::uint64_t trials, std::uint64_t censored = 0,
                              double level = 0.95);

/// Ratio of a frequency estimate to a known positive constant; the interval scales with it.
EstimateCI scale(const EstimateCI& e, double divisor);

double normal_quantile(double p);

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool applicable = false;  // false when binning leaves fewer than two categories on an axis
};

/// Goodness of fit of observed counts against expected probabilities (cells with expected
/// count < 5 are pooled into their neighbour).
ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed, std::span<const double> probs);

/// Independence test on paired samples, with quantile bins per axis chosen so every
/// expected cell count is at least 5.
ChiSquareResult chi_square_independence(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                        int max_bins = 6);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov distribution.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Q_KS(x) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2).
double kolmogorov_survival(double x);

}  // namespace bpe
