#pragma once

// Univariate current-status MLE.  Sort the observations by time, draw the
// cumulative-sum diagram of the indicators over (0,0),(1,S_1),..,(n,S_n),
// and take left derivatives of its greatest convex minorant.  Those
// derivatives are exactly the pool-adjacent-violators block means of the
// sorted indicator sequence, which is how they are computed here.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "curstat/model.hpp"

namespace curstat {

struct ScalarObs {
  double t = 0;
  int delta = 0;
};

// ties in t are broken by delta ascending, then input order (stable sort)
inline std::vector<ScalarObs> sort_scalar_obs(std::vector<ScalarObs> obs) {
  std::stable_sort(obs.begin(), obs.end(), [](const ScalarObs& a, const ScalarObs& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.delta < b.delta;
  });
  return obs;
}

struct CusumPoint {
  std::int64_t i = 0;   // number of observations consumed
  std::int64_t sum = 0; // running count of delta = 1
};

struct CusumDiagram {
  std::vector<CusumPoint> points;  // size n+1, starts at (0,0)
  std::vector<double> times;       // sorted observation times, size n
};

inline void check_scalar_obs(const std::vector<ScalarObs>& obs) {
  require(!obs.empty(), "need at least one observation");
  for (const auto& o : obs) {
    require(std::isfinite(o.t) && o.t >= 0, "times must be finite and >= 0");
    require(o.delta == 0 || o.delta == 1, "delta must be 0 or 1");
  }
}

inline CusumDiagram cumulative_diagram(const std::vector<ScalarObs>& obs) {
  check_scalar_obs(obs);
  auto sorted = sort_scalar_obs(obs);
  CusumDiagram d;
  d.points.reserve(sorted.size() + 1);
  d.points.push_back({0, 0});
  std::int64_t run = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    run += sorted[i].delta;
    d.points.push_back({static_cast<std::int64_t>(i + 1), run});
    d.times.push_back(sorted[i].t);
  }
  return d;
}

// Right-continuous step function with F(t) = 0 left of the first knot.
struct StepDistribution {
  std::vector<double> knots;
  std::vector<double> values;

  double at(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }
};

// isotonic block means of the sorted indicator sequence (equal weights)
inline std::vector<double> pava_means(const std::vector<int>& delta) {
  struct Block {
    double sum;
    std::int64_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(delta.size());
  for (int v : delta) {
    blocks.push_back({static_cast<double>(v), 1});
    while (blocks.size() >= 2) {
      auto& a = blocks[blocks.size() - 2];
      auto& b = blocks.back();
      if (a.sum * b.count >= b.sum * a.count) {  // prev mean >= cur mean
        a.sum += b.sum;
        a.count += b.count;
        blocks.pop_back();
      } else {
        break;
      }
    }
  }
  std::vector<double> out;
  out.reserve(delta.size());
  for (const auto& b : blocks)
    out.insert(out.end(), static_cast<std::size_t>(b.count), b.sum / b.count);
  return out;
}

inline StepDistribution gcm_mle(const std::vector<ScalarObs>& obs) {
  check_scalar_obs(obs);
  auto sorted = sort_scalar_obs(obs);
  std::vector<int> delta(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) delta[i] = sorted[i].delta;
  StepDistribution f;
  f.values = pava_means(delta);
  f.knots.reserve(sorted.size());
  for (const auto& o : sorted) f.knots.push_back(o.t);
  return f;
}

// sum over i of [delta_i log F_i + (1-delta_i) log(1-F_i)] with 0 log 0 = 0,
// aligned to the sorted order used by gcm_mle
inline double binomial_log_likelihood(const std::vector<double>& values,
                                      const std::vector<int>& delta) {
  require(values.size() == delta.size(), "values/delta size mismatch");
  double ll = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double f = values[i];
    require(f >= 0 && f <= 1, "fitted values must lie in [0,1]");
    if (delta[i] == 1) {
      if (f <= 0) return -kInf;
      ll += std::log(f);
    } else {
      if (f >= 1) return -kInf;
      ll += std::log1p(-f);
    }
  }
  return ll;
}

// Atomic representation of the fit: a point mass at each knot carrying the
// jump of the step function, plus a tail rectangle (t_max, inf) holding any
// mass the data never forces below infinity.
inline DistributionRepr step_to_repr(const StepDistribution& f) {
  DistributionRepr F;
  F.d = 1;
  double prev = 0;
  for (std::size_t i = 0; i < f.knots.size(); ++i) {
    double jump = f.values[i] - prev;
    prev = f.values[i];
    if (jump > 0) {
      if (!F.rects.empty() && F.rects.back()[0].hi == f.knots[i]) {
        F.weights.back() += jump;  // tied observation times share one atom
      } else {
        F.rects.push_back({Interval{f.knots[i], f.knots[i], true}});
        F.weights.push_back(jump);
      }
    }
  }
  if (prev < 1.0) {
    F.rects.push_back({Interval{f.knots.empty() ? 0.0 : f.knots.back(), kInf, false}});
    F.weights.push_back(1.0 - prev);
  }
  return F;
}

}  // namespace curstat
