#pragma once

// Validators for the measure-theoretic machinery behind the convergence
// rate: envelopes for the orthant cell probabilities on the unit cube, the
// bound on how much probability can sit where the cell probability is
// small, the exact tail integral of 1/(t_1..t_d), and the pair of densities
// whose weighted L2 spaces are isometric under the coordinatewise change of
// variables u = (log(t/sigma)/log(1/sigma))^d.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "curstat/metrics.hpp"
#include "curstat/quadrature.hpp"

namespace curstat {

inline double factorial(int d) {
  double f = 1;
  for (int k = 2; k <= d; ++k) f *= k;
  return f;
}

// With f0 inside [1/c1, c1] on [0,1]^d, the orthant region of (t, delta)
// has Lebesgue volume prod_j t_j^{delta_j} (1-t_j)^(1-delta_j), so its
// probability is sandwiched within a factor c1 of that volume.
struct EnvelopeBounds {
  double lower = 0, upper = 0;
};

inline EnvelopeBounds envelope_bounds(const std::vector<double>& t,
                                      const std::vector<int>& delta, double c1) {
  require(!t.empty() && t.size() == delta.size(), "t/delta size mismatch");
  require(c1 >= 1, "envelope constant must be >= 1");
  double vol = 1;
  for (std::size_t j = 0; j < t.size(); ++j) {
    require(t[j] >= 0 && t[j] <= 1, "t must lie in the unit cube");
    require(delta[j] == 0 || delta[j] == 1, "delta entries must be 0 or 1");
    vol *= delta[j] == 1 ? t[j] : 1.0 - t[j];
  }
  return {vol / c1, vol * c1};
}

// Threshold and bound of the small-cell-probability event
// P(p0_Delta(T) <= sigma) <= 2^d (c1 c2)^2 sigma.
struct SigmaSpec {
  double sigma = 0.01;
  double c1 = 1, c2 = 1;
  int d = 2;

  void validate() const {
    require(d >= 1 && d <= Limits::max_dimension, "dimension out of range");
    require(sigma > 0, "sigma must be positive");
    require(c1 >= 1 && c2 >= 1, "envelope constants must be >= 1");
  }

  double mass_bound() const {
    return std::pow(2.0, d) * (c1 * c2) * (c1 * c2) * sigma;
  }

  // the threshold that turns the bound into delta^2
  static SigmaSpec from_delta(double delta, double c1, double c2, int d) {
    SigmaSpec s;
    s.c1 = c1;
    s.c2 = c2;
    s.d = d;
    s.sigma = delta * delta / (std::pow(2.0, d) * (c1 * c2) * (c1 * c2));
    s.validate();
    return s;
  }
};

struct McCheck {
  double estimate = 0;
  double se = 0;
  double bound = 0;    // closed-form value being tested against
  bool satisfied = false;
};

// Simulate (T, Delta) under a truth realizing the envelopes and estimate
// how often the observed cell's probability falls at or below sigma.
inline McCheck small_mass_check(const SigmaSpec& s, std::int64_t draws,
                                std::uint64_t seed = 0x51face01u) {
  s.validate();
  require(draws >= 1000, "need at least 1e3 draws");
  TruthSpec truth = (s.c1 > 1 || s.c2 > 1) ? TruthSpec::tilted(s.d, s.c1, s.c2)
                                           : TruthSpec::uniform(s.d);
  Rng rng(seed);
  double mean = 0, m2 = 0;
  std::vector<int> delta(s.d);
  for (std::int64_t i = 0; i < draws; ++i) {
    auto y = truth.F0.sample(rng);
    auto t = truth.G0.sample(rng);
    for (int j = 0; j < s.d; ++j) delta[j] = y[j] <= t[j] ? 1 : 0;
    auto p = cell_probabilities(truth.F0, t);
    double x = p[orthant_index(delta) - 1] <= s.sigma ? 1.0 : 0.0;
    double dlt = x - mean;
    mean += dlt / static_cast<double>(i + 1);
    m2 += dlt * (x - mean);
  }
  McCheck out;
  out.estimate = mean;
  out.se = std::sqrt(std::max(m2 / static_cast<double>(draws - 1), 0.0) /
                     static_cast<double>(draws));
  out.bound = s.mass_bound();
  out.satisfied = out.estimate <= out.bound + 3.0 * out.se;
  return out;
}

// Exact identity: integral of 1/(t_1..t_d) over {t in (0,1]^d : prod t > b}
// equals (log(1/b))^d / d!.
inline double reciprocal_tail_closed_form(int d, double b) {
  require(d >= 1, "dimension must be >= 1");
  require(b > 0 && b < 1, "threshold must lie in (0,1)");
  return std::pow(std::log(1.0 / b), d) / factorial(d);
}

inline McCheck reciprocal_tail_mc(int d, double b, std::int64_t draws,
                                  std::uint64_t seed = 0x7a11c0deu) {
  require(d >= 1 && d <= Limits::max_dimension, "dimension out of range");
  require(b > 0 && b < 1, "threshold must lie in (0,1)");
  auto r = mc_mean(
      [&](const std::vector<double>& t) {
        double prod = 1;
        for (double v : t) prod *= v;
        return prod > b ? 1.0 / prod : 0.0;
      },
      [&](Rng& rng) {
        std::vector<double> t(d);
        for (double& v : t) v = rng.uniform01();
        return t;
      },
      draws, seed);
  McCheck out;
  out.estimate = r.value;
  out.se = r.se;
  out.bound = reciprocal_tail_closed_form(d, b);
  out.satisfied = std::abs(out.estimate - out.bound) <= 3.0 * out.se;
  return out;
}

// Mass that the renormalized 1/(t_1..t_d) measure assigns to a small-cell
// region: the closed-form bound (2^d c1 c2 / d!) (log(c1 c2 / sigma))^d.
inline double qsigma_mass(const SigmaSpec& s) {
  s.validate();
  require(s.sigma < s.c1 * s.c2, "sigma must be below c1*c2");
  return std::pow(2.0, s.d) * (s.c1 * s.c2) / factorial(s.d) *
         std::pow(std::log(s.c1 * s.c2 / s.sigma), s.d);
}

// MC companion to the bound: the measure's total mass is 2^d times the
// reciprocal tail integral at b = sigma/(c1 c2); at the uniform truth the
// chain is tight, so the bound is approached with near equality.
inline McCheck qsigma_check(const SigmaSpec& s, std::int64_t draws,
                            std::uint64_t seed = 0x7a11c0deu) {
  double bound = qsigma_mass(s);
  auto tail = reciprocal_tail_mc(s.d, s.sigma / (s.c1 * s.c2), draws, seed);
  double scale = std::pow(2.0, s.d);
  McCheck out;
  out.estimate = scale * tail.estimate;
  out.se = scale * tail.se;
  out.bound = bound;
  out.satisfied = out.estimate <= out.bound + 3.0 * out.se;
  return out;
}

// density (d!/d^d) prod u_j^{-(1-1/d)} on {sum u_j^{1/d} > d-1} in the cube
inline double cd_density(const std::vector<double>& u, int d) {
  require(d >= 1 && static_cast<int>(u.size()) == d, "dimension mismatch");
  double s = 0, prod = 1;
  for (double v : u) {
    require(v >= 0 && v <= 1, "u must lie in the unit cube");
    if (v == 0) return 0.0;
    s += std::pow(v, 1.0 / d);
    prod *= std::pow(v, 1.0 - 1.0 / d);
  }
  if (s <= d - 1) return 0.0;
  return factorial(d) / std::pow(static_cast<double>(d), d) / prod;
}

// density (d!/(log(1/sigma))^d) / (t_1..t_d) on {prod t > sigma} in the cube
inline double rds_density(const std::vector<double>& t, int d, double sigma) {
  require(d >= 1 && static_cast<int>(t.size()) == d, "dimension mismatch");
  require(sigma > 0 && sigma < 1, "sigma must lie in (0,1)");
  double prod = 1;
  for (double v : t) {
    require(v >= 0 && v <= 1, "t must lie in the unit cube");
    prod *= v;
  }
  if (prod <= sigma) return 0.0;
  double L = std::log(1.0 / sigma);
  return factorial(d) / std::pow(L, d) / prod;
}

// Both densities integrate to one.  cd uses the substitution u_j = v_j^d
// (the integrand collapses to d! 1{sum v_j > d-1}, so plain uniform draws
// have bounded variance); rds is integrable squared as-is.
inline McCheck density_normalization_mc(bool cd, int d, double sigma,
                                        std::int64_t draws,
                                        std::uint64_t seed = 0x11031u) {
  McResult r;
  if (cd) {
    r = mc_mean(
        [&](const std::vector<double>& v) {
          double s = 0;
          for (double x : v) s += x;
          return s > d - 1 ? factorial(d) : 0.0;
        },
        [&](Rng& rng) {
          std::vector<double> v(d);
          for (double& x : v) x = rng.uniform01();
          return v;
        },
        draws, seed);
  } else {
    r = mc_mean(
        [&](const std::vector<double>& t) { return rds_density(t, d, sigma); },
        [&](Rng& rng) {
          std::vector<double> t(d);
          for (double& x : t) x = rng.uniform01();
          return t;
        },
        draws, seed);
  }
  McCheck out;
  out.estimate = r.value;
  out.se = r.se;
  out.bound = 1.0;
  out.satisfied = std::abs(out.estimate - 1.0) <= 3.0 * out.se;
  return out;
}

// Coordinatewise map between the two weighted spaces.
struct CovMap {
  double sigma = 0.01;
  int d = 2;

  // outputs are clamped to the exact range so roundtrips stay in-domain
  double u_of_t(double t) const {
    require(t >= sigma && t <= 1, "t must lie in [sigma, 1]");
    double u = std::pow(std::log(t / sigma) / std::log(1.0 / sigma), d);
    return std::clamp(u, 0.0, 1.0);
  }

  double t_of_u(double u) const {
    require(u >= 0 && u <= 1, "u must lie in [0, 1]");
    double t = sigma * std::exp(std::pow(u, 1.0 / d) * std::log(1.0 / sigma));
    return std::clamp(t, sigma, 1.0);
  }
};

inline CovMap change_of_variables(double sigma, int d) {
  require(sigma > 0 && sigma < 1, "sigma must lie in (0,1)");
  require(d >= 1, "dimension must be >= 1");
  return CovMap{sigma, d};
}

struct IsometryResult {
  double lhs = 0;  // ∫ (h∘u - g∘u)^2 r_{d,sigma}(t) dt
  double rhs = 0;  // ∫ (h - g)^2 c_d(u) du
  double rel_err = 0;
};

// The change of variables is an L2 isometry: distances computed under
// r_{d,sigma} in t-space equal distances under c_d in u-space.  Quadrature
// substitutes t_j = e^{-s_j} on the left (simplex {sum s < L}) and
// u_j = x_j^d on the right (corner {sum x > d-1}), making both integrands
// smooth; supported for d <= 2, Monte Carlo for any d.
inline IsometryResult isometry_check(
    const std::function<double(const std::vector<double>&)>& g,
    const std::function<double(const std::vector<double>&)>& h, double sigma,
    int d, const Integrator& ig) {
  require(sigma > 0 && sigma < 1, "sigma must lie in (0,1)");
  require(d >= 1 && d <= Limits::max_dimension, "dimension out of range");
  validate_integrator(ig);
  const double L = std::log(1.0 / sigma);
  const double dfac = factorial(d);

  auto diff2_u = [&](const std::vector<double>& u) {
    double v = h(u) - g(u);
    return v * v;
  };
  // u coordinates reached from simplex coordinates s: u_j = ((L-s_j)/L)^d
  auto diff2_s = [&](const std::vector<double>& s) {
    std::vector<double> u(d);
    for (int j = 0; j < d; ++j)
      u[j] = std::pow((L - s[j]) / L, static_cast<double>(d));
    return diff2_u(u);
  };

  IsometryResult out;
  if (std::holds_alternative<GaussLegendre>(ig)) {
    require(d <= 2, "quadrature isometry check supports d <= 2");
    int q = std::max(std::get<GaussLegendre>(ig).nodes, 32);
    const auto& [gx, gw] = gl_rule(q);
    auto map01 = [&](double z) { return 0.5 * (z + 1.0); };  // [-1,1] -> [0,1]
    if (d == 1) {
      double lhs = 0, rhs = 0;
      for (int i = 0; i < q; ++i) {
        double w = 0.5 * gw[i];
        lhs += w * diff2_s({L * map01(gx[i])});  // (1/L) ds over [0,L]
        rhs += w * diff2_u({map01(gx[i])});
      }
      out.lhs = lhs;
      out.rhs = rhs;
    } else {
      double lhs = 0;
      for (int i = 0; i < q; ++i) {
        double s1 = L * map01(gx[i]);
        double span = L - s1;
        double inner = 0;
        for (int k = 0; k < q; ++k)
          inner += 0.5 * gw[k] * diff2_s({s1, span * map01(gx[k])});
        lhs += 0.5 * gw[i] * inner * span;  // ds2 over [0, L-s1]
      }
      out.lhs = lhs * 2.0 / (L * L) * L;  // (d!/L^d) ∫∫, outer ds1 scale L
      double rhs = 0;
      for (int i = 0; i < q; ++i) {
        double x1 = map01(gx[i]);
        double span = x1;  // x2 in (1-x1, 1]
        double inner = 0;
        for (int k = 0; k < q; ++k) {
          double x2 = 1.0 - span + span * map01(gx[k]);
          std::vector<double> u = {x1 * x1, x2 * x2};
          inner += 0.5 * gw[k] * diff2_u(u);
        }
        rhs += 0.5 * gw[i] * inner * span;
      }
      out.rhs = rhs * dfac;
    }
  } else {
    const auto& mc = std::get<MonteCarloInt>(ig);
    auto lhsr = mc_mean(
        [&](const std::vector<double>& s) {
          double sum = 0;
          for (double v : s) sum += v;
          return sum < L ? dfac * diff2_s(s) : 0.0;
        },
        [&](Rng& rng) {
          std::vector<double> s(d);
          for (double& v : s) v = L * rng.uniform01();
          return s;
        },
        mc.draws, mc.seed);
    auto rhsr = mc_mean(
        [&](const std::vector<double>& x) {
          double sum = 0;
          for (double v : x) sum += v;
          if (sum <= d - 1) return 0.0;
          std::vector<double> u(d);
          for (int j = 0; j < d; ++j) u[j] = std::pow(x[j], static_cast<double>(d));
          return dfac * diff2_u(u);
        },
        [&](Rng& rng) {
          std::vector<double> x(d);
          for (double& v : x) v = rng.uniform01();
          return x;
        },
        mc.draws, mc.seed + 1);
    out.lhs = lhsr.value;
    out.rhs = rhsr.value;
  }
  out.rel_err = std::abs(out.lhs - out.rhs) / std::max(std::abs(out.rhs), 1e-300);
  return out;
}

struct EntropyCurves {
  double sharp = 0;      // eps^{-1} (log(1/eps))^{2(d-1)}
  double crude = 0;      // eps^{-1} (log(1/eps))^{5d/2-2}
  double ratio = 0;      // crude / sharp
  double ratio_power = 0;  // (log(1/eps))^{d/2}, what the ratio must equal
};

// The sharp entropy bound versus the cruder one the global-rate argument
// consumes; their gap is exactly a (log(1/eps))^{d/2} factor.
inline EntropyCurves entropy_curves(double eps, int d) {
  require(eps > 0 && eps < 1, "eps must lie in (0,1)");
  require(d >= 1, "dimension must be >= 1");
  double l = std::log(1.0 / eps);
  EntropyCurves out;
  out.sharp = std::pow(l, 2.0 * (d - 1)) / eps;
  out.crude = std::pow(l, 2.5 * d - 2.0) / eps;
  out.ratio = out.crude / out.sharp;
  out.ratio_power = std::pow(l, 0.5 * d);
  return out;
}

}  // namespace curstat
