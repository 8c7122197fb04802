#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "curstat/gcm.hpp"

using namespace curstat;

namespace {

// Independent check: build the greatest convex minorant of the cusum
// diagram as the lower convex hull of its points and read off segment
// slopes (left derivatives).  No pooling logic shared with the library.
std::vector<double> hull_left_derivatives(const CusumDiagram& dia) {
  const auto& p = dia.points;
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (hull.size() >= 2) {
      std::size_t a = hull[hull.size() - 2], b = hull[hull.size() - 1];
      // keep the envelope convex: drop b if it lies on or above segment a->i
      double cross = static_cast<double>(p[b].i - p[a].i) *
                         static_cast<double>(p[i].sum - p[a].sum) -
                     static_cast<double>(p[b].sum - p[a].sum) *
                         static_cast<double>(p[i].i - p[a].i);
      if (cross <= 0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }
  std::vector<double> deriv;
  for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
    std::size_t a = hull[s], b = hull[s + 1];
    double slope = static_cast<double>(p[b].sum - p[a].sum) /
                   static_cast<double>(p[b].i - p[a].i);
    for (std::int64_t k = p[a].i; k < p[b].i; ++k) deriv.push_back(slope);
  }
  return deriv;
}

// Grid maximizer of the binomial log-likelihood over monotone vectors with
// values in {0, 1/G, .., 1}: dynamic program with prefix maxima.
std::vector<double> grid_mle(const std::vector<int>& delta_sorted, int G) {
  std::size_t n = delta_sorted.size();
  const double neg = -1e18;
  std::vector<double> prev(G + 1, 0.0);       // prefix max of dp for i-1
  std::vector<std::vector<double>> dp(n, std::vector<double>(G + 1, neg));
  for (std::size_t i = 0; i < n; ++i) {
    for (int g = 0; g <= G; ++g) {
      double term;
      if (delta_sorted[i] == 1)
        term = g == 0 ? neg : std::log(static_cast<double>(g) / G);
      else
        term = g == G ? neg : std::log(1.0 - static_cast<double>(g) / G);
      double base = i == 0 ? 0.0 : prev[g];
      dp[i][g] = (term <= neg || base <= neg) ? neg : base + term;
    }
    // prefix max feeds the next row
    double acc = neg;
    for (int g = 0; g <= G; ++g) {
      acc = std::max(acc, dp[i][g]);
      prev[g] = acc;
    }
  }
  // backtrack: pick the smallest optimal level at each step
  std::vector<double> values(n);
  int g_hi = G;
  {
    double best = neg;
    for (int g = 0; g <= G; ++g) best = std::max(best, dp[n - 1][g]);
    for (int g = 0; g <= G; ++g)
      if (dp[n - 1][g] >= best - 1e-12) {
        g_hi = g;
        break;
      }
  }
  values[n - 1] = static_cast<double>(g_hi) / G;
  for (std::size_t i = n - 1; i > 0; --i) {
    // best dp[i-1][g] over g <= g_hi, then smallest attaining level
    double best = neg;
    for (int g = 0; g <= g_hi; ++g) best = std::max(best, dp[i - 1][g]);
    for (int g = 0; g <= g_hi; ++g)
      if (dp[i - 1][g] >= best - 1e-12) {
        g_hi = g;
        break;
      }
    values[i - 1] = static_cast<double>(g_hi) / G;
  }
  return values;
}

}  // namespace

TEST_CASE("cusum diagram starts at the origin and accumulates indicators") {
  std::vector<ScalarObs> obs = {{0.5, 1}, {0.2, 0}, {0.8, 1}, {0.4, 0}};
  auto dia = cumulative_diagram(obs);
  REQUIRE(dia.points.size() == 5);
  CHECK(dia.points[0].i == 0);
  CHECK(dia.points[0].sum == 0);
  CHECK(dia.times == std::vector<double>{0.2, 0.4, 0.5, 0.8});
  CHECK(dia.points[4].sum == 2);
  // ties: equal times sort delta=0 first
  auto dia2 = cumulative_diagram({{0.5, 1}, {0.5, 0}});
  CHECK(dia2.points[1].sum == 0);
  CHECK(dia2.points[2].sum == 1);
}

TEST_CASE("alternating indicators pool into the textbook step fit") {
  std::vector<ScalarObs> obs = {{0.2, 0}, {0.4, 1}, {0.6, 0}, {0.8, 1}};
  auto f = gcm_mle(obs);
  REQUIRE(f.values.size() == 4);
  CHECK(f.values[0] == 0.0);
  CHECK(f.values[1] == 0.5);
  CHECK(f.values[2] == 0.5);
  CHECK(f.values[3] == 1.0);
  CHECK(f.at(0.1) == 0.0);
  CHECK(f.at(0.4) == 0.5);
  CHECK(f.at(0.79) == 0.5);
  CHECK(f.at(5.0) == 1.0);
  CHECK(binomial_log_likelihood(f.values, {0, 1, 0, 1}) ==
        Catch::Approx(2 * std::log(0.5)));
}

TEST_CASE("pava output equals the convex hull left derivatives") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.below(40);
    std::vector<ScalarObs> obs(n);
    for (auto& o : obs) {
      o.t = rng.uniform01();
      o.delta = rng.uniform01() < 0.5 ? 1 : 0;
    }
    auto f = gcm_mle(obs);
    auto deriv = hull_left_derivatives(cumulative_diagram(obs));
    REQUIRE(deriv.size() == f.values.size());
    for (std::size_t i = 0; i < deriv.size(); ++i)
      CHECK_THAT(f.values[i], Catch::Matchers::WithinAbs(deriv[i], 1e-12));
  }
}

TEST_CASE("fitted values are a monotone proper distribution sequence") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.below(60);
    std::vector<ScalarObs> obs(n);
    for (auto& o : obs) {
      o.t = rng.uniform01();
      o.delta = rng.uniform01() < 0.3 ? 1 : 0;
    }
    auto f = gcm_mle(obs);
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      CHECK(f.values[i] >= 0.0);
      CHECK(f.values[i] <= 1.0);
      if (i) CHECK(f.values[i] >= f.values[i - 1]);
    }
  }
}

TEST_CASE("no observed event keeps the fit at zero, all events push it to one") {
  auto f0 = gcm_mle({{0.3, 0}, {0.6, 0}, {0.9, 0}});
  for (double v : f0.values) CHECK(v == 0.0);
  auto f1 = gcm_mle({{0.3, 1}, {0.6, 1}});
  for (double v : f1.values) CHECK(v == 1.0);
}

TEST_CASE("pava beats every monotone grid competitor (n <= 6 exhaustive)") {
  const int G = 200;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int bits = 0; bits < (1 << n); ++bits) {
      std::vector<ScalarObs> obs(n);
      std::vector<int> delta(n);
      for (std::size_t i = 0; i < n; ++i) {
        obs[i].t = static_cast<double>(i + 1) / (n + 1);
        obs[i].delta = (bits >> i) & 1;
        delta[i] = obs[i].delta;
      }
      auto f = gcm_mle(obs);
      auto grid = grid_mle(delta, G);
      double ll_pava = binomial_log_likelihood(f.values, delta);
      double ll_grid = binomial_log_likelihood(grid, delta);
      CHECK(ll_pava >= ll_grid - 1e-12);
      for (std::size_t i = 0; i < n; ++i)
        CHECK_THAT(f.values[i],
                   Catch::Matchers::WithinAbs(grid[i], 1.0 / G + 1e-12));
    }
  }
}

TEST_CASE("log-likelihood follows the 0 log 0 convention and boundary rules") {
  CHECK(binomial_log_likelihood({0.0}, {0}) == 0.0);
  CHECK(binomial_log_likelihood({1.0}, {1}) == 0.0);
  CHECK(binomial_log_likelihood({0.0}, {1}) == -kInf);
  CHECK(binomial_log_likelihood({1.0}, {0}) == -kInf);
  CHECK_THROWS_AS(binomial_log_likelihood({1.5}, {1}), std::invalid_argument);
}

TEST_CASE("step fit converts to an atomic distribution with matching cdf") {
  std::vector<ScalarObs> obs = {{0.2, 0}, {0.4, 1}, {0.6, 0}, {0.8, 1}};
  auto f = gcm_mle(obs);
  auto F = step_to_repr(f);
  F.validate();
  for (double t : {0.1, 0.2, 0.4, 0.5, 0.7, 0.8, 2.0})
    CHECK_THAT(F.cdf({t}), Catch::Matchers::WithinAbs(f.at(t), 1e-14));
  // tied times collapse into one atom
  auto g = gcm_mle({{0.5, 1}, {0.5, 1}, {0.2, 0}});
  auto G2 = step_to_repr(g);
  G2.validate();
  CHECK(G2.rects.size() == 1);
  CHECK(G2.cdf({0.5}) == 1.0);
}

TEST_CASE("input validation rejects bad scalar observations") {
  CHECK_THROWS_AS(gcm_mle({}), std::invalid_argument);
  CHECK_THROWS_AS(gcm_mle({{-0.1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(gcm_mle({{0.5, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(cumulative_diagram({{kInf, 0}}), std::invalid_argument);
}
