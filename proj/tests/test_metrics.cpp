#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "curstat/metrics.hpp"
#include "curstat/npmle.hpp"

using namespace curstat;

namespace {

DistributionRepr atoms_1d(const std::vector<std::pair<double, double>>& aw) {
  DistributionRepr F;
  F.d = 1;
  for (auto [a, w] : aw) {
    Interval iv;
    iv.lo = iv.hi = a;
    F.rects.push_back({iv});
    F.weights.push_back(w);
  }
  return F;
}

std::vector<Observation> random_obs(int d, int n, Rng& rng,
                                    const std::vector<double>& grid) {
  std::vector<Observation> obs(n);
  for (auto& o : obs) {
    o.t.resize(d);
    o.delta.resize(d);
    for (int j = 0; j < d; ++j) {
      o.t[j] = grid.empty() ? rng.uniform01() : grid[rng.below(grid.size())];
      o.delta[j] = rng.uniform01() < 0.5 ? 1 : 0;
    }
  }
  return obs;
}

}  // namespace

TEST_CASE("hellinger and l2 vanish when both arguments coincide") {
  auto F = atoms_1d({{0.3, 0.5}, {0.7, 0.5}});
  ReprEvaluator a(F), b(F);
  ProductLaw g0 = TruthSpec::uniform(1).G0;
  auto h = hellinger(a, b, g0, 1.0, GaussLegendre{32});
  auto l = l2_g0(a, b, g0, 1.0, GaussLegendre{32});
  CHECK(h.value == 0.0);
  CHECK(l.value == 0.0);
}

TEST_CASE("two separated atoms: both distances have closed forms") {
  // atoms at 0.3 and 0.7: the conditional cell laws disagree exactly on
  // (0.3, 0.7), where the squared root-difference sums to 2, so h^2 = 0.4;
  // the CDFs differ by 1 there, so l2^2 = 0.4 as well.
  auto A = atoms_1d({{0.3, 1.0}});
  auto B = atoms_1d({{0.7, 1.0}});
  ReprEvaluator a(A), b(B);
  ProductLaw g0 = TruthSpec::uniform(1).G0;
  auto h = hellinger(a, b, g0, 1.0, GaussLegendre{16});
  auto l = l2_g0(a, b, g0, 1.0, GaussLegendre{16});
  CHECK_THAT(h.value * h.value, Catch::Matchers::WithinAbs(0.4, 1e-13));
  CHECK_THAT(l.value * l.value, Catch::Matchers::WithinAbs(0.4, 1e-13));

  auto bc = check_hellinger_l2_bound(a, b, g0, 1.0, GaussLegendre{16});
  CHECK(bc.satisfied);
  CHECK_THAT(bc.lower_bound, Catch::Matchers::WithinAbs(0.1, 1e-13));
}

TEST_CASE("point mass at the origin against the uniform truth") {
  // p_A = (1, 0) at every t while p_U = (t, 1-t), so
  // h^2 = 1/2 int (1-sqrt(t))^2 + (1-t) dt = int (1 - sqrt(t)) dt = 1/3,
  // and l2^2 = int (1-t)^2 dt = 1/3.
  auto A = atoms_1d({{0.0, 1.0}});
  TruthSpec truth = TruthSpec::uniform(1);
  auto h = hellinger(A, truth, GaussLegendre{64});
  auto l = l2_g0(A, truth, GaussLegendre{64});
  // sqrt(t) is not polynomial, so the quadrature only gets close here
  CHECK_THAT(h.value * h.value, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-5));
  CHECK_THAT(l.value * l.value, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-13));
}

TEST_CASE("two-atom CDF against a hand integral") {
  // cdf jumps 0 -> 0.5 -> 1 at 0.3 and 0.7; against the uniform cdf t the
  // integral of the squared difference is 0.009 + 0.016/3 + 0.009 = 7/300.
  auto A = atoms_1d({{0.3, 0.5}, {0.7, 0.5}});
  TruthSpec truth = TruthSpec::uniform(1);
  auto l = l2_g0(A, truth, GaussLegendre{16});
  CHECK_THAT(l.value * l.value, Catch::Matchers::WithinAbs(7.0 / 300.0, 1e-13));
}

TEST_CASE("product-law cell probabilities match CDF inclusion-exclusion") {
  Rng rng(0xce11afu);
  for (const TruthSpec& truth :
       {TruthSpec::uniform(2), TruthSpec::tilted(2), TruthSpec::tilted(3, 1.5, 1.2)}) {
    int d = truth.dim();
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> t(d);
      for (double& v : t) v = rng.uniform01() * truth.M;
      auto p = cell_probabilities(truth.F0, t);
      REQUIRE(p.size() == std::size_t(1) << d);
      double sum = 0;
      for (double v : p) {
        CHECK(v >= -1e-15);
        sum += v;
      }
      CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
      for (int k = 1; k <= (1 << d); ++k) {
        auto delta = orthant_delta(k, d);
        double prod = 1;
        for (int j = 0; j < d; ++j) {
          double Fj = truth.F0.axes[j].cdf(t[j]);
          prod *= delta[j] == 1 ? Fj : 1.0 - Fj;
        }
        CHECK_THAT(p[k - 1], Catch::Matchers::WithinAbs(prod, 1e-12));
      }
    }
  }
}

TEST_CASE("axis law quantile inverts the cdf") {
  for (double slope : {0.0, 0.2, 0.4}) {
    AxisLaw ax{slope > 0 ? AxisLaw::tilted : AxisLaw::uniform, slope, 2.0};
    for (int i = 0; i <= 40; ++i) {
      double u = i / 40.0;
      double x = ax.quantile(u);
      CHECK(x >= 0.0);
      CHECK(x <= 2.0);
      CHECK_THAT(ax.cdf(x), Catch::Matchers::WithinAbs(u, 1e-12));
    }
  }
}

TEST_CASE("truth specs validate and expose the stated envelopes") {
  auto u2 = TruthSpec::uniform(2);
  CHECK(u2.c1 == 1.0);
  CHECK(u2.c2 == 1.0);
  CHECK(u2.M == 1.0);

  auto u1s = TruthSpec::uniform(1, 2.0);
  CHECK(u1s.c1 == 2.0);  // density 1/M needs c >= max(M, 1/M)

  auto t2 = TruthSpec::tilted(2);
  CHECK(t2.c1 == 2.0);
  CHECK(t2.F0.axes[0].slope == Catch::Approx(0.4));  // capped
  CHECK(t2.G0.axes[0].kind == AxisLaw::uniform);     // c2 = 1

  // small envelope: the cap does not bind
  double s = TruthSpec::slope_for(1.1, 3);
  CHECK(s < 0.4);
  CHECK(s == Catch::Approx(2.0 * (1.0 - std::pow(1.1, -1.0 / 3.0))));
  CHECK_NOTHROW(TruthSpec::tilted(3, 1.1, 1.05).validate());

  CHECK_THROWS(TruthSpec::tilted(2, 0.5));  // c1 < 1
}

TEST_CASE("grid evaluator worked example with a straddled cell") {
  DistributionRepr F;
  F.d = 2;
  F.rects.push_back({Interval{0.0, 1.0}, Interval{0.0, 1.0}});
  F.rects.push_back({Interval{2.0, kInf}, Interval{2.0, kInf}});
  F.weights = {0.5, 0.5};
  GridEvaluator g(F);
  ReprEvaluator r(F);

  auto p_mid = g.cell_probs({1.5, 1.5});
  CHECK_THAT(p_mid[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
  CHECK_THAT(p_mid[1], Catch::Matchers::WithinAbs(0.0, 1e-15));
  CHECK_THAT(p_mid[2], Catch::Matchers::WithinAbs(0.0, 1e-15));
  CHECK_THAT(p_mid[3], Catch::Matchers::WithinAbs(0.5, 1e-15));

  // mass inside [0,1]^2 spreads uniformly, so [0,0.5]^2 holds 0.125
  auto p_in = g.cell_probs({0.5, 0.5});
  CHECK_THAT(p_in[0], Catch::Matchers::WithinAbs(0.125, 1e-15));
  CHECK_THAT(p_in[1], Catch::Matchers::WithinAbs(0.125, 1e-15));
  CHECK_THAT(p_in[2], Catch::Matchers::WithinAbs(0.125, 1e-15));
  CHECK_THAT(p_in[3], Catch::Matchers::WithinAbs(0.625, 1e-15));

  for (auto t : {std::vector<double>{0.5, 0.5}, {1.5, 1.5}, {1.0, 2.0}, {3.0, 3.0}}) {
    auto pg = g.cell_probs(t);
    auto pr = r.cell_probs(t);
    for (int k = 0; k < 4; ++k)
      CHECK_THAT(pg[k], Catch::Matchers::WithinAbs(pr[k], 1e-15));
    CHECK_THAT(g.cdf(t), Catch::Matchers::WithinAbs(r.cdf(t), 1e-15));
  }
}

TEST_CASE("grid and rectangle-list evaluators agree on fitted distributions") {
  Rng rng(0x9a1du);
  for (int trial = 0; trial < 8; ++trial) {
    auto obs = random_obs(2, 14, rng, {});
    auto res = npmle_fit(obs);
    GridEvaluator g(res.distribution);
    ReprEvaluator r(res.distribution);
    for (int i = 0; i < 60; ++i) {
      std::vector<double> t = {rng.uniform01() * 1.2, rng.uniform01() * 1.2};
      auto pg = g.cell_probs(t);
      auto pr = r.cell_probs(t);
      double sum = 0;
      for (int k = 0; k < 4; ++k) {
        CHECK_THAT(pg[k], Catch::Matchers::WithinAbs(pr[k], 1e-12));
        sum += pg[k];
      }
      CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
      CHECK_THAT(g.cdf(t), Catch::Matchers::WithinAbs(r.cdf(t), 1e-12));
    }
    // distances computed through either evaluator coincide; the square
    // root in the integrand turns 1e-16 probability noise into ~1e-8, so
    // the h comparison cannot be tighter than that
    TruthSpec truth = TruthSpec::uniform(2);
    ProductEvaluator f0(truth.F0);
    auto hg = hellinger(g, f0, truth.G0, truth.M, GaussLegendre{24});
    auto hr = hellinger(r, f0, truth.G0, truth.M, GaussLegendre{24});
    CHECK_THAT(hg.value, Catch::Matchers::WithinAbs(hr.value, 5e-8));
    auto lg = l2_g0(g, f0, truth.G0, truth.M, GaussLegendre{24});
    auto lr = l2_g0(r, f0, truth.G0, truth.M, GaussLegendre{24});
    CHECK_THAT(lg.value, Catch::Matchers::WithinAbs(lr.value, 1e-12));
  }
}

TEST_CASE("quadrature and Monte Carlo integrators agree within 3.5 SE") {
  Rng rng(0x6c2dcu);
  auto obs = random_obs(2, 25, rng, {});
  auto res = npmle_fit(obs);
  TruthSpec truth = TruthSpec::uniform(2);
  auto h_gl = hellinger(res.distribution, truth, GaussLegendre{48});
  auto l_gl = l2_g0(res.distribution, truth, GaussLegendre{48});
  auto h_mc = hellinger(res.distribution, truth, MonteCarloInt{400000, 0xabcdefu});
  auto l_mc = l2_g0(res.distribution, truth, MonteCarloInt{400000, 0xabcdefu});
  CHECK(h_gl.se == 0.0);
  CHECK(h_mc.se > 0.0);
  CHECK(std::abs(h_gl.value - h_mc.value) <= 3.5 * h_mc.se + 1e-6);
  CHECK(std::abs(l_gl.value - l_mc.value) <= 3.5 * l_mc.se + 1e-6);
}

TEST_CASE("hellinger dominates the scaled l2 distance everywhere tested") {
  Rng rng(0xb0c4du);
  ProductLaw g0_1 = TruthSpec::uniform(1).G0;

  for (int trial = 0; trial < 70; ++trial) {
    auto rand_atoms = [&](int k) {
      std::vector<std::pair<double, double>> aw(k);
      double s = 0;
      for (auto& [a, w] : aw) {
        a = rng.uniform01();
        w = 0.05 + rng.uniform01();
        s += w;
      }
      for (auto& [a, w] : aw) w /= s;
      return atoms_1d(aw);
    };
    auto A = rand_atoms(1 + static_cast<int>(rng.below(5)));
    auto B = rand_atoms(1 + static_cast<int>(rng.below(5)));
    ReprEvaluator a(A), b(B);
    auto bc = check_hellinger_l2_bound(a, b, g0_1, 1.0, GaussLegendre{32});
    INFO("trial " << trial << " h2 " << bc.h2 << " bound " << bc.lower_bound);
    CHECK(bc.satisfied);
  }

  for (int trial = 0; trial < 30; ++trial) {
    auto obs = random_obs(2, 10 + static_cast<int>(rng.below(8)), rng, {});
    auto res = npmle_fit(obs);
    TruthSpec truth = trial % 2 ? TruthSpec::tilted(2) : TruthSpec::uniform(2);
    ReprEvaluator a(res.distribution);
    ProductEvaluator b(truth.F0);
    auto bc = check_hellinger_l2_bound(a, b, truth.G0, truth.M, GaussLegendre{24});
    INFO("trial " << trial << " h2 " << bc.h2 << " bound " << bc.lower_bound);
    CHECK(bc.satisfied);
  }
}

TEST_CASE("convenience wrappers mirror the explicit evaluator calls") {
  Rng rng(0xc0ffeeu);
  auto obs = random_obs(2, 12, rng, {});
  auto res = npmle_fit(obs);
  TruthSpec truth = TruthSpec::tilted(2);
  auto h1 = hellinger(res.distribution, truth, GaussLegendre{24});
  ReprEvaluator a(res.distribution);
  ProductEvaluator b(truth.F0);
  auto h2 = hellinger(a, b, truth.G0, truth.M, GaussLegendre{24});
  CHECK(h1.value == h2.value);
  auto l1 = l2_g0(res.distribution, truth, GaussLegendre{24});
  auto l2 = l2_g0(a, b, truth.G0, truth.M, GaussLegendre{24});
  CHECK(l1.value == l2.value);
}

TEST_CASE("metric argument validation") {
  auto A = atoms_1d({{0.5, 1.0}});
  TruthSpec t2 = TruthSpec::uniform(2);
  ReprEvaluator a(A);
  ProductEvaluator b(t2.F0);
  CHECK_THROWS(hellinger(a, b, t2.G0, 1.0, GaussLegendre{16}));  // 1d vs 2d
  TruthSpec t1 = TruthSpec::uniform(1);
  CHECK_THROWS(hellinger(A, t1, GaussLegendre{0}));   // empty rule
  CHECK_THROWS(hellinger(A, t1, MonteCarloInt{50}));  // too few draws
}
