#include <doctest.h>

#include <cmath>
#include <functional>

#include "bpe/error.hpp"
#include "bpe/exact.hpp"
#include "oracles.hpp"

using namespace bpe;

namespace {

GenerationModel model_of(const oracle::Pmf& xi, const oracle::Pmf& y, Coupling c = Coupling::Independent) {
  return GenerationModel(DiscreteLaw::from_pmf(xi), DiscreteLaw::from_pmf(y), c);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::Unsupported;
}

// P[tau <= r | z] when xi_1 and Y are quantiles of one uniform
double comonotone_dies_within(const oracle::Pmf& xi, const oracle::Pmf& y, std::uint64_t z, std::uint64_t r) {
  if (z == 0) return 1.0;
  if (r == 0) return 0.0;
  // merge the cdfs of xi and Y
  std::vector<std::tuple<std::uint64_t, std::uint64_t, double>> pairs;
  double ca = 0.0, cb = 0.0, prev = 0.0;
  auto i = xi.begin();
  auto j = y.begin();
  ca = i->second;
  cb = j->second;
  while (i != xi.end() && j != y.end() && prev < 1.0 - 1e-15) {
    const double nx = std::min(ca, cb);
    if (nx > prev) pairs.emplace_back(i->first, j->first, nx - prev);
    prev = nx;
    if (ca <= nx + 1e-15 && ++i != xi.end()) ca += i->second;
    if (cb <= nx + 1e-15 && ++j != y.end()) cb += j->second;
  }
  const auto rest = oracle::power(xi, z - 1);
  double acc = 0.0;
  for (const auto& [x, yy, p] : pairs)
    for (const auto& [s, q] : rest)
      acc += p * q * (x + s <= yy ? 1.0 : comonotone_dies_within(xi, y, x + s - yy, r - 1));
  return acc;
}

}  // namespace

TEST_SUITE("exact") {

TEST_CASE("small horizon by hand") {
  const auto m = model_of({{0, 0.5}, {3, 0.5}}, {{1, 1.0}});
  const auto dp = forward_dp_tau(m, 1, 3);
  CHECK(dp.prob_tau_lt(1) == 0.0);
  CHECK(dp.prob_tau_lt(2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dp.prob_tau_lt(3) == doctest::Approx(0.625).epsilon(1e-12));
  const auto j = dp.to_json();
  CHECK(j["n_first"] == 2);
  REQUIRE(j["probs"].size() == 2);
  CHECK(j["probs"][0].get<double>() == doctest::Approx(0.5));
  CHECK(j["probs"][1].get<double>() == doctest::Approx(0.625));
  CHECK(code_of([&] { (void)dp.prob_tau_lt(4); }) == ErrorCode::InvalidParam);

  const auto sure = forward_dp_tau(model_of({{2, 1.0}}, {{2, 1.0}}), 1, 5);
  for (std::uint64_t n = 2; n <= 5; ++n) CHECK(sure.prob_tau_lt(n) == 1.0);
  const auto never = forward_dp_tau(model_of({{2, 1.0}}, {{1, 1.0}}), 1, 20);
  for (std::uint64_t n = 1; n <= 20; ++n) CHECK(never.prob_tau_lt(n) == 0.0);
}

TEST_CASE("agrees with the recursive oracle") {
  const std::vector<std::pair<oracle::Pmf, oracle::Pmf>> cases{
      {{{0, 0.5}, {3, 0.5}}, {{1, 1.0}}},
      {{{0, 0.2}, {1, 0.3}, {2, 0.5}}, {{0, 0.5}, {2, 0.5}}},
      {{{0, 0.25}, {2, 0.75}}, {{0, 0.3}, {1, 0.4}, {3, 0.3}}},
      {{{1, 0.6}, {3, 0.4}}, {{0, 0.2}, {4, 0.8}}},
  };
  for (const auto& [xi, y] : cases) {
    oracle::TauOracle brute(xi, y);
    for (std::uint64_t k = 1; k <= 3; ++k) {
      const auto dp = forward_dp_tau(model_of(xi, y), k, 7);
      CHECK(dp.error_bound <= 1e-9);
      for (std::uint64_t n = 1; n <= 7; ++n)
        CHECK(dp.prob_tau_lt(n) == doctest::Approx(brute.dies_within(k, n - 1)).epsilon(1e-9));
    }
  }
}

TEST_CASE("comonotone coupling against enumeration") {
  const oracle::Pmf xi{{0, 0.3}, {2, 0.4}, {3, 0.3}};
  const oracle::Pmf y{{0, 0.5}, {1, 0.2}, {4, 0.3}};
  const auto m = model_of(xi, y, Coupling::Comonotone);
  for (std::uint64_t k = 1; k <= 3; ++k) {
    const auto dp = forward_dp_tau(m, k, 5);
    for (std::uint64_t n = 1; n <= 5; ++n)
      CHECK(dp.prob_tau_lt(n) == doctest::Approx(comonotone_dies_within(xi, y, k, n - 1)).epsilon(1e-9));
  }
}

TEST_CASE("monotone in k and in n") {
  const auto m = model_of({{0, 0.3}, {1, 0.2}, {3, 0.5}}, {{0, 0.4}, {2, 0.6}});
  std::vector<double> prev;
  for (std::uint64_t k = 1; k <= 12; ++k) {
    const auto dp = forward_dp_tau(m, k, 30);
    for (std::uint64_t n = 2; n <= 30; ++n) CHECK(dp.prob_tau_lt(n) >= dp.prob_tau_lt(n - 1));
    if (!prev.empty())
      for (std::uint64_t n = 1; n <= 30; ++n) CHECK(dp.probs[n - 1] <= prev[n - 1] + 1e-12);
    prev = dp.probs;
  }
}

TEST_CASE("truncation control") {
  const auto m = model_of({{0, 0.5}, {3, 0.5}}, {{0, 0.5}, {1, 0.5}});
  CHECK(code_of([&] { forward_dp_tau(m, 1, 50, 4); }) == ErrorCode::TruncationTooTight);
  CHECK(code_of([&] { forward_dp_tau(m, 10, 50, 4); }) == ErrorCode::InvalidParam);
  const auto a = forward_dp_tau(m, 1, 50);
  CHECK(a.error_bound <= 1e-9);
  const auto b = forward_dp_tau(m, 1, 50, a.M * 4);
  for (std::uint64_t n = 1; n <= 50; ++n) CHECK(a.prob_tau_lt(n) == doctest::Approx(b.prob_tau_lt(n)).epsilon(1e-9));
  CHECK(code_of([] {
          forward_dp_tau(GenerationModel(DiscreteLaw::pareto(1.5, 2.0), DiscreteLaw::constant(0)), 1, 5);
        }) == ErrorCode::Unsupported);
}

TEST_CASE("expected tau") {
  const auto one = expected_tau_bounds(model_of({{2, 1.0}}, {{2, 1.0}}), 1, 10);
  REQUIRE(one.upper);
  CHECK(one.lower == doctest::Approx(1.0));
  CHECK(*one.upper == doctest::Approx(1.0));
  CHECK_FALSE(one.truncated_upper);

  // xi in {1, 2} against Y = 1 from k = 1 keeps Z in {0, 1}: tau is geometric(1/2), E[tau] = 2
  const auto geo = expected_tau_bounds(model_of({{1, 0.5}, {2, 0.5}}, {{1, 1.0}}), 1, 60);
  CHECK(geo.lower == doctest::Approx(2.0).epsilon(1e-6));
  REQUIRE(geo.upper);
  CHECK(*geo.upper >= geo.lower);
  CHECK(*geo.upper == doctest::Approx(2.0).epsilon(1e-6));

  // transient: survival flattens near 1 - q' = (3 - sqrt 5) / 2
  const auto tr = expected_tau_bounds(model_of({{0, 0.5}, {3, 0.5}}, {{0, 1.0}}), 1, 80);
  CHECK_FALSE(tr.upper);
  CHECK(tr.infinity_flag);
  CHECK(tr.survival.back() == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-6));
  for (std::size_t n = 1; n < tr.survival.size(); ++n) CHECK(tr.survival[n] <= tr.survival[n - 1]);
}

TEST_CASE("perpetuity bracket") {
  // Y = 1 and xi = 2 from k = 1 stays at 1 forever
  const auto a = perpetuity_bracket(2, DiscreteLaw::constant(1), 1, 10);
  CHECK(a.lower == 1.0);
  CHECK(a.upper == 1.0);
  const auto b = perpetuity_bracket(2, DiscreteLaw::constant(3), 1, 10);
  CHECK(b.upper == 0.0);

  const oracle::Pmf y{{0, 0.5}, {3, 0.5}};
  const auto law = DiscreteLaw::from_pmf(y);
  oracle::TauOracle brute({{2, 1.0}}, y);
  for (std::uint64_t k = 1; k <= 4; ++k) {
    const auto br = perpetuity_bracket(2, law, k, 80);
    CHECK(br.upper - br.lower <= 1e-6);
    // survival to depth r brackets the limit from above
    const double surv = 1.0 - brute.dies_within(k, 10);
    CHECK(br.lower <= surv + 1e-12);
    CHECK(br.upper <= surv + 1e-12);
    CHECK(br.lower > 0.0);
  }
  // nested brackets as depth grows
  double lo = 0.0, hi = 1.0;
  for (std::uint64_t d : {5u, 10u, 20u, 40u}) {
    const auto br = perpetuity_bracket(2, law, 1, d, 1.0);
    CHECK(br.lower >= lo - 1e-15);
    CHECK(br.upper <= hi + 1e-15);
    lo = br.lower;
    hi = br.upper;
  }
  CHECK(code_of([&] { perpetuity_bracket(2, law, 1, 2, 1e-9); }) == ErrorCode::DepthTooShallow);
  CHECK(code_of([&] { perpetuity_bracket(1, law, 1, 2); }) == ErrorCode::InvalidParam);
  CHECK(code_of([] { perpetuity_bracket(2, DiscreteLaw::pareto(2.0, 1.0), 1, 2); }) == ErrorCode::Unsupported);
}

}  // TEST_SUITE
