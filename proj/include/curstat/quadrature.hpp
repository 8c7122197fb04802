#pragma once

// Numerical integration backends shared by the metric and appendix code:
// tensor Gauss-Legendre (optionally composite, subdividing each axis at the
// discontinuity points of a step function) and plain Monte Carlo with a
// standard-error estimate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <utility>
#include <variant>
#include <vector>

#include "curstat/common.hpp"

namespace curstat {

struct GaussLegendre {
  int nodes = 64;  // per axis when the integrand is smooth on the whole box
};

struct MonteCarloInt {
  std::int64_t draws = 200000;
  std::uint64_t seed = 0x5eed0001u;
};

using Integrator = std::variant<GaussLegendre, MonteCarloInt>;

inline void validate_integrator(const Integrator& ig) {
  if (std::holds_alternative<GaussLegendre>(ig)) {
    require(std::get<GaussLegendre>(ig).nodes >= 16,
            "quadrature needs at least 16 nodes per axis");
  } else {
    require(std::get<MonteCarloInt>(ig).draws >= 100000,
            "Monte Carlo needs at least 1e5 draws");
  }
}

// Gauss-Legendre rule on [-1, 1]; nodes found by Newton iteration on P_q.
inline const std::pair<std::vector<double>, std::vector<double>>& gl_rule(int q) {
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(q);
  if (it != cache.end()) return it->second;
  require(q >= 1 && q <= 512, "rule order out of range");
  std::vector<double> x(q), w(q);
  for (int i = 0; i < q; ++i) {
    double xi = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (xi * p1 - p0) / (xi * xi - 1.0);
      double step = p1 / dp;
      xi -= step;
      if (std::abs(step) < 1e-15) break;
    }
    x[i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
  }
  return cache.emplace(q, std::make_pair(std::move(x), std::move(w))).first->second;
}

namespace detail {

// per-axis composite nodes: one fixed-order panel per subinterval
inline void composite_axis(double lo, double hi, const std::vector<double>& cuts,
                           int order, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  std::vector<double> edges;
  edges.push_back(lo);
  for (double c : cuts)
    if (c > lo && c < hi && (edges.empty() || c > edges.back())) edges.push_back(c);
  edges.push_back(hi);
  const auto& [gx, gw] = gl_rule(order);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    double a = edges[p], b = edges[p + 1];
    if (!(b > a)) continue;
    double h = 0.5 * (b - a), m = 0.5 * (a + b);
    for (int i = 0; i < order; ++i) {
      nodes.push_back(m + h * gx[i]);
      weights.push_back(h * gw[i]);
    }
  }
}

}  // namespace detail

// Integral of f over [0, M]^d.  interior_cuts[j] lists sorted axis-j
// subdivision points; with no cuts a single panel of `order` nodes is used,
// otherwise each piece gets a small panel (the integrand is assumed smooth
// within pieces, so low order per piece converges fast).
inline double composite_tensor(const std::function<double(const double*)>& f,
                               int d, double M,
                               const std::vector<std::vector<double>>& interior_cuts,
                               int order, int piece_order = 8) {
  std::vector<std::vector<double>> nodes(d), weights(d);
  for (int j = 0; j < d; ++j) {
    bool plain = interior_cuts.empty() || interior_cuts[j].empty();
    int q = plain ? order : piece_order;
    detail::composite_axis(0.0, M, plain ? std::vector<double>{} : interior_cuts[j],
                           q, nodes[j], weights[j]);
  }
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  double total = 0;
  while (true) {
    double w = 1;
    for (int j = 0; j < d; ++j) {
      x[j] = nodes[j][idx[j]];
      w *= weights[j][idx[j]];
    }
    total += w * f(x.data());
    int j = d - 1;
    while (j >= 0 && ++idx[j] == nodes[j].size()) idx[j--] = 0;
    if (j < 0) break;
  }
  return total;
}

struct McResult {
  double value = 0;
  double se = 0;
};

// Mean of f over draws from `sampler` (which encodes the measure), with the
// usual sqrt(var/N) standard error.
inline McResult mc_mean(const std::function<double(const std::vector<double>&)>& f,
                        const std::function<std::vector<double>(Rng&)>& sampler,
                        std::int64_t draws, std::uint64_t seed) {
  require(draws >= 2, "need at least two draws");
  Rng rng(seed);
  double mean = 0, m2 = 0;
  for (std::int64_t i = 0; i < draws; ++i) {
    double v = f(sampler(rng));
    double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  double var = m2 / static_cast<double>(draws - 1);
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(draws))};
}

}  // namespace curstat
