#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bpe/error.hpp"
#include "bpe/laws.hpp"
#include "bpe/process.hpp"
#include "bpe/stats.hpp"
#include "oracles.hpp"

using namespace bpe;

TEST_SUITE("laws") {

TEST_CASE("constant law") {
  const auto law = DiscreteLaw::from_pmf({{2, 1.0}});
  CHECK(law.mean() == 2.0);
  CHECK(law.variance() == 0.0);
  CHECK(law.constant_value() == std::optional<std::uint64_t>{2});
  CHECK(law.tail(1.5) == 1.0);
  CHECK(law.tail(2.0) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) REQUIRE(law.sample(rng) == 2);
  CHECK(law.x_log_x_moment() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(DiscreteLaw::constant(0).log_plus_moment() == 0.0);
}

TEST_CASE("two point law {0:1/4, 2:3/4}") {
  const auto law = DiscreteLaw::from_pmf({{0, 0.25}, {2, 0.75}});
  CHECK(law.mean() == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(law.variance() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(law.x_log_x_moment() == doctest::Approx(0.75 * 2.0 * std::log(2.0)).epsilon(1e-14));

  Rng rng(7);
  const int n = 1000000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += law.sample(rng) == 0;
  CHECK(oracle::within_se(static_cast<double>(zeros) / n, 0.25, n));
}

TEST_CASE("example1 law") {
  const auto law = DiscreteLaw::example1(1.0, 2);
  CHECK(law.pmf(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(law.tail(std::exp(3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (int n = 2; n < 200; ++n) CHECK(law.tail_log(n) == doctest::Approx(1.0 / n).epsilon(1e-14));
  CHECK(std::isinf(law.log_plus_moment()));
  CHECK(std::isinf(law.mean()));

  Rng rng(11);
  const int trials = 1000000;
  int hits = 0;
  const double threshold = std::exp(4.0);
  for (int i = 0; i < trials; ++i) hits += static_cast<double>(law.sample(rng)) > threshold;
  CHECK(oracle::within_se(static_cast<double>(hits) / trials, 0.25, trials));
}

TEST_CASE("pareto law") {
  const auto law = DiscreteLaw::pareto(1.0, 1.0);
  CHECK(law.tail(8.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(law.tail(0.5) == 1.0);
  CHECK(std::isinf(law.x_log_x_moment()));
  CHECK(std::isinf(law.mean()));

  // quadrature of E[log_+ Y] = int_0^inf P[Y > e^s] ds, midpoint rule with an analytic remainder
  const double h = 1e-4;
  const double top = 40.0;
  double integral = 0.0;
  for (double s = h / 2; s < top; s += h) integral += law.tail(std::exp(s)) * h;
  integral += std::exp(-top);  // int_top^inf e^-s ds bounds the remainder for this tail
  CHECK(law.log_plus_moment() == doctest::Approx(integral).epsilon(1e-3));

  const auto heavier = DiscreteLaw::pareto(2.5, 3.0);
  // P[Y > t] = (floor(t)/t0)^-alpha
  CHECK(heavier.tail(6.0) == doctest::Approx(std::pow(2.0, -2.5)).epsilon(1e-14));
  CHECK(std::isfinite(heavier.mean()));
}

TEST_CASE("normalization and tail consistency") {
  const std::vector<DiscreteLaw> laws{DiscreteLaw::from_pmf({{0, 0.2}, {1, 0.3}, {5, 0.5}}),
                                      DiscreteLaw::constant(3), DiscreteLaw::example1(0.7, 1),
                                      DiscreteLaw::example1(2.0, 3), DiscreteLaw::pareto(1.5, 2.0)};
  for (const auto& law : laws) {
    double mass = 0.0;
    for (auto p : law.atom_probs()) mass += p;
    CHECK(mass + law.analytic_mass() == doctest::Approx(1.0).epsilon(1e-12));
    double prev = 1.0;
    for (double t = 0.0; t < 500.0; t += 0.5) {
      const double v = law.tail(t);
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
  const auto finite = laws.front();
  for (double t : {0.0, 0.5, 1.0, 2.0, 4.99, 5.0, 7.0}) {
    double sum = 0.0;
    for (std::uint64_t x = 0; x <= 5; ++x)
      if (static_cast<double>(x) > t) sum += finite.pmf(x);
    CHECK(finite.tail(t) == doctest::Approx(sum).epsilon(1e-15));
  }
  // analytic pmf sums back to the tail
  const auto p = DiscreteLaw::pareto(1.5, 2.0);
  double acc = 0.0;
  for (std::uint64_t x = 0; x <= 1000; ++x) acc += p.pmf(x);
  CHECK(acc + p.tail(1000.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampler fidelity: chi-square against the pmf") {
  const int n = 100000;
  auto check_law = [&](const DiscreteLaw& law, const std::vector<std::uint64_t>& cuts, std::uint64_t seed) {
    // bins (-inf, cuts[0]], (cuts[0], cuts[1]], ..., (cuts.back(), inf)
    std::vector<double> probs;
    double prev = 1.0;
    for (auto c : cuts) {
      const double t = law.tail(static_cast<double>(c));
      probs.push_back(prev - t);
      prev = t;
    }
    probs.push_back(prev);
    std::vector<std::uint64_t> counts(probs.size(), 0);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
      const auto x = law.sample(rng);
      const auto it = std::lower_bound(cuts.begin(), cuts.end(), x);
      ++counts[static_cast<std::size_t>(it - cuts.begin())];
    }
    const auto r = chi_square_gof(counts, probs);
    CHECK(r.applicable);
    CHECK(r.p_value > 0.001);
  };
  check_law(DiscreteLaw::from_pmf({{0, 0.1}, {1, 0.2}, {2, 0.3}, {4, 0.4}}), {0, 1, 2}, 3);
  check_law(DiscreteLaw::pareto(1.0, 1.0), {1, 2, 3, 4, 6, 10, 20, 100}, 4);
  check_law(DiscreteLaw::pareto(2.0, 2.5), {3, 4, 5, 8, 16}, 5);
  check_law(DiscreteLaw::example1(1.0, 2), {0, 8, 21, 55, 149, 404, 1097}, 6);
}

TEST_CASE("extinction probability of the embedded Galton-Watson process") {
  const auto a = DiscreteLaw::from_pmf({{0, 0.25}, {2, 0.75}});
  CHECK(gw_extinction_prob(a).q == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK(gw_extinction_prob(DiscreteLaw::constant(2)).q == 0.0);
  const auto b = DiscreteLaw::from_pmf({{0, 0.5}, {3, 0.5}});
  const double qb = gw_extinction_prob(b).q;
  CHECK(qb == doctest::Approx(oracle::extinction_bisect(oracle::pmf_of(b))).epsilon(1e-9));
  // 0.5 + 0.5 q^3 = q has smallest root (sqrt 5 - 1)/2
  CHECK(qb == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-9));

  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::uint64_t, double> pmf;
    double total = 0.0;
    for (std::uint64_t x = 0; x <= 4; ++x) {
      pmf[x] = rng.uniform();
      total += pmf[x];
    }
    for (auto& [x, p] : pmf) p /= total;
    const auto law = DiscreteLaw::from_pmf(pmf);
    if (law.mean() <= 1.05) continue;
    const double q = gw_extinction_prob(law).q;
    CHECK(q >= 0.0);
    CHECK(q < 1.0);
    double f = 0.0;
    for (const auto& [x, p] : pmf) f += p * std::pow(q, static_cast<double>(x));
    CHECK(f == doctest::Approx(q).epsilon(1e-10));
  }
  CHECK_THROWS_AS(gw_extinction_prob(DiscreteLaw::from_pmf({{0, 0.5}, {2, 0.5}})), Error);
}

TEST_CASE("construction errors") {
  auto code_of = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Unsupported;
  };
  CHECK(code_of([] { DiscreteLaw::from_pmf({{0, 0.5}, {1, 0.4}}); }) == ErrorCode::NonNormalizable);
  CHECK(code_of([] { DiscreteLaw::example1(3.0, 2); }) == ErrorCode::InvalidParam);
  CHECK(code_of([] { DiscreteLaw::pareto(0.0, 1.0); }) == ErrorCode::InvalidParam);
  CHECK(code_of([] { GenerationModel(DiscreteLaw::pareto(1.0, 1.0), DiscreteLaw::constant(0)); }) ==
        ErrorCode::InvalidParam);
}

TEST_CASE("json descriptors round-trip") {
  const std::vector<std::string> docs{
      R"({"type":"pmf","values":[0,2],"probs":[0.25,0.75]})", R"({"type":"const","value":3})",
      R"({"type":"pareto","alpha":1.5,"t0":2.0})", R"({"type":"example1","c":1.0,"n0":2})"};
  for (const auto& d : docs) {
    const auto law = DiscreteLaw::from_json(nlohmann::json::parse(d));
    const auto again = DiscreteLaw::from_json(law.to_json());
    CHECK(again.to_json() == law.to_json());
    for (double t : {0.0, 1.0, 2.5, 10.0, 1000.0}) CHECK(again.tail(t) == law.tail(t));
  }
  const auto model = GenerationModel::from_json(nlohmann::json::parse(
      R"({"offspring":{"type":"const","value":2},"emigration":{"type":"const","value":1},"coupling":"comonotone"})"));
  CHECK(model.coupling() == Coupling::Comonotone);
  CHECK(GenerationModel::from_json(model.to_json()).to_json() == model.to_json());
}

TEST_CASE("comonotone coupling keeps both marginals") {
  const auto xi = DiscreteLaw::from_pmf({{0, 0.3}, {1, 0.3}, {3, 0.4}});
  const auto y = DiscreteLaw::from_pmf({{0, 0.5}, {1, 0.25}, {2, 0.25}});
  const GenerationModel model(xi, y, Coupling::Comonotone);
  Rng rng(21);
  const int n = 100000;
  std::vector<std::uint64_t> cx(3, 0);
  std::vector<std::uint64_t> cy(3, 0);
  std::uint64_t concordant = 0;
  for (int i = 0; i < n; ++i) {
    Generation g(model, rng);
    const auto x = g.offspring_prefix(1);
    ++cx[x == 0 ? 0 : (x == 1 ? 1 : 2)];
    ++cy[g.emigration()];
    concordant += (x == 3) == (g.emigration() == 2);
  }
  const std::vector<double> px{0.3, 0.3, 0.4};
  const std::vector<double> py{0.5, 0.25, 0.25};
  CHECK(chi_square_gof(cx, px).p_value > 0.001);
  CHECK(chi_square_gof(cy, py).p_value > 0.001);
  CHECK(concordant > static_cast<std::uint64_t>(0.8 * n));  // the joint law is far from independent

  // first_pair_law agrees with the same quantile construction
  double total = 0.0;
  for (const auto& a : first_pair_law(model, 2)) total += a.p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quantile is monotone and matches the cdf") {
  const std::vector<DiscreteLaw> laws{DiscreteLaw::from_pmf({{0, 0.2}, {1, 0.3}, {5, 0.5}}),
                                      DiscreteLaw::example1(0.7, 1), DiscreteLaw::pareto(1.5, 2.0)};
  for (const auto& law : laws) {
    std::uint64_t prev = 0;
    for (int i = 0; i < 10000; ++i) {
      const double u = i / 10000.0;
      const auto x = law.quantile(u);
      CHECK(x >= prev);
      prev = x;
      if (x == kStateCap) continue;
      // generalized inverse: P[X < x] <= u < P[X <= x]
      CHECK(law.cdf(static_cast<double>(x)) > u - 1e-12);
    }
  }
}

}  // TEST_SUITE
