#pragma once

// Core types for multivariate current-status data.  An observation is a
// time vector t and an indicator vector delta with delta_j = 1 when the
// latent coordinate Y_j has already happened by t_j (Y_j <= t_j).  The
// indicator pattern selects one of the 2^d orthants cut by t, and a
// candidate distribution is carried around as a finite list of disjoint
// axis-aligned rectangles with nonnegative weights.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "curstat/common.hpp"

namespace curstat {

// 2^d cell vectors get expensive fast; keep a configurable guard.
struct Limits {
  static inline int max_dimension = 6;
};

struct Observation {
  std::vector<double> t;
  std::vector<int> delta;

  int dim() const { return static_cast<int>(t.size()); }

  void validate() const {
    require(!t.empty() && t.size() == delta.size(),
            "observation needs matching nonempty t and delta");
    for (double v : t)
      require(std::isfinite(v) && v >= 0, "observation times must be finite and >= 0");
    for (int b : delta) require(b == 0 || b == 1, "delta entries must be 0 or 1");
  }
};

// One axis factor of a rectangle: (lo, hi], with lo itself included when
// closed_lo (used for the leftmost piece [0, b] and for singletons lo == hi).
struct Interval {
  double lo = 0.0;
  double hi = kInf;
  bool closed_lo = true;

  bool contains(double y) const {
    if (y > hi) return false;
    return closed_lo ? y >= lo : y > lo;
  }

  bool within_low(double tj) const { return hi <= tj; }  // subset of [0, tj]

  bool within_high(double tj) const {  // subset of (tj, inf)
    return closed_lo ? lo > tj : lo >= tj;
  }

  // Share of this interval's length falling in [0, tj]; degenerate and
  // unbounded intervals never straddle (an infinite tail counts as high).
  double low_fraction(double tj) const {
    if (within_low(tj)) return 1.0;
    if (within_high(tj)) return 0.0;
    if (hi == kInf) return 0.0;
    double f = (tj - lo) / (hi - lo);
    return std::clamp(f, 0.0, 1.0);
  }

  bool overlaps(const Interval& o) const {
    double lo2 = std::max(lo, o.lo);
    double hi2 = std::min(hi, o.hi);
    if (lo2 < hi2) return true;
    return lo2 == hi2 && contains(lo2) && o.contains(lo2);
  }
};

using Rectangle = std::vector<Interval>;

inline bool rectangles_overlap(const Rectangle& a, const Rectangle& b) {
  for (std::size_t j = 0; j < a.size(); ++j)
    if (!a[j].overlaps(b[j])) return false;
  return true;
}

// delta pattern -> orthant number in 1..2^d: K = 1 + sum_j (1-delta_j) 2^(j-1)
inline int orthant_index(const std::vector<int>& delta) {
  int d = static_cast<int>(delta.size());
  require(d >= 1 && d <= 30, "delta dimension out of range");
  int k = 1;
  for (int j = 0; j < d; ++j) {
    require(delta[j] == 0 || delta[j] == 1, "delta entries must be 0 or 1");
    k += (1 - delta[j]) << j;
  }
  return k;
}

inline std::vector<int> orthant_delta(int k, int d) {
  require(d >= 1 && d <= 30, "dimension out of range");
  require(k >= 1 && k <= (1 << d), "orthant index out of range");
  std::vector<int> delta(d);
  int bits = k - 1;
  for (int j = 0; j < d; ++j) delta[j] = 1 - ((bits >> j) & 1);
  return delta;
}

// Product of per-axis sides: [0, t_j] on axes with delta_j = 1 and
// (t_j, inf) on axes with delta_j = 0.
struct OrthantRegion {
  std::vector<double> t;
  std::vector<int> delta;

  int dim() const { return static_cast<int>(t.size()); }

  bool contains(const std::vector<double>& y) const {
    for (int j = 0; j < dim(); ++j) {
      bool low = y[j] <= t[j];
      if (low != (delta[j] == 1)) return false;
    }
    return true;
  }

  Rectangle rect() const {
    Rectangle r(dim());
    for (int j = 0; j < dim(); ++j) {
      if (delta[j] == 1)
        r[j] = Interval{0.0, t[j], true};
      else
        r[j] = Interval{t[j], kInf, false};
    }
    return r;
  }
};

inline OrthantRegion orthant_region(int k, const std::vector<double>& t) {
  return OrthantRegion{t, orthant_delta(k, static_cast<int>(t.size()))};
}

// Finitely supported candidate distribution: weights on disjoint rectangles.
// F(x) counts only rectangles wholly inside [0, x] (right-continuous CDF);
// partial overlaps contribute nothing to the CDF but are split
// length-proportionally per axis when forming cell probabilities.
struct DistributionRepr {
  int d = 1;
  std::vector<Rectangle> rects;
  std::vector<double> weights;

  double total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }

  double cdf(const std::vector<double>& x) const {
    double s = 0;
    for (std::size_t r = 0; r < rects.size(); ++r) {
      bool in = true;
      for (int j = 0; j < d && in; ++j) in = rects[r][j].hi <= x[j];
      if (in) s += weights[r];
    }
    return s;
  }

  void validate(bool check_disjoint = true) const {
    require(d >= 1, "dimension must be >= 1");
    require(rects.size() == weights.size(), "rects/weights size mismatch");
    double s = 0;
    for (double w : weights) {
      require(w >= 0 && std::isfinite(w), "weights must be nonnegative");
      s += w;
    }
    require(std::abs(s - 1.0) <= 1e-12, "weights must sum to 1");
    for (const auto& r : rects) {
      require(static_cast<int>(r.size()) == d, "rectangle dimension mismatch");
      for (const auto& iv : r) {
        require(iv.lo >= 0 && iv.lo <= iv.hi, "bad interval bounds");
        require(iv.lo < iv.hi || iv.closed_lo, "empty interval in support");
      }
    }
    if (check_disjoint) {
      for (std::size_t a = 0; a < rects.size(); ++a)
        for (std::size_t b = a + 1; b < rects.size(); ++b)
          require(!rectangles_overlap(rects[a], rects[b]),
                  "support rectangles must be pairwise disjoint");
    }
  }
};

namespace detail {

// Fold per-axis low-mass fractions into the 2^d orthant cells.  Cell k
// (1-based) takes the product over axes of fr_j when delta_j(k) = 1 and
// (1 - fr_j) otherwise; bit j-1 of k-1 equals 1 - delta_j.
inline void fold_axis_fractions(const std::vector<double>& fr, double w,
                                std::vector<double>& out) {
  int d = static_cast<int>(fr.size());
  std::vector<double> acc(std::size_t(1) << d, 0.0);
  acc[0] = w;
  std::size_t filled = 1;
  for (int j = 0; j < d; ++j) {
    for (std::size_t b = 0; b < filled; ++b) {
      double v = acc[b];
      acc[b] = v * fr[j];
      acc[b | (std::size_t(1) << j)] = v * (1.0 - fr[j]);
    }
    filled <<= 1;
  }
  for (std::size_t b = 0; b < acc.size(); ++b) out[b] += acc[b];
}

}  // namespace detail

// p_k(t; F) for k = 1..2^d, in orthant-index order.
inline std::vector<double> cell_probabilities(const DistributionRepr& F,
                                              const std::vector<double>& t) {
  require(F.d == static_cast<int>(t.size()), "dimension mismatch");
  require(F.d <= Limits::max_dimension, "dimension exceeds configured cap");
  std::vector<double> out(std::size_t(1) << F.d, 0.0);
  std::vector<double> fr(F.d);
  for (std::size_t r = 0; r < F.rects.size(); ++r) {
    for (int j = 0; j < F.d; ++j) fr[j] = F.rects[r][j].low_fraction(t[j]);
    detail::fold_axis_fractions(fr, F.weights[r], out);
  }
  return out;
}

// Smooth product laws on [0, M]^d used as simulation truths: uniform and a
// linearly tilted variant with per-axis density 1 + slope (x/M - 1/2).
struct AxisLaw {
  enum Kind { uniform, tilted };
  Kind kind = uniform;
  double slope = 0.0;
  double M = 1.0;

  void validate() const {
    require(M > 0, "axis scale must be positive");
    require(slope >= 0 && slope < 2, "tilt slope must lie in [0, 2)");
  }

  double cdf(double x) const {
    double z = std::clamp(x / M, 0.0, 1.0);
    if (kind == uniform || slope == 0) return z;
    return z * (1.0 + slope * (z - 1.0) / 2.0);
  }

  double pdf(double x) const {
    double z = x / M;
    if (z < 0 || z > 1) return 0.0;
    if (kind == uniform || slope == 0) return 1.0 / M;
    return (1.0 + slope * (z - 0.5)) / M;
  }

  double quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    if (kind == uniform || slope == 0) return M * u;
    // invert u = z + s z(z-1)/2  (monotone quadratic on [0,1])
    double s = slope, b = 1.0 - s / 2.0;
    double z = (-b + std::sqrt(b * b + 2.0 * s * u)) / s;
    return M * std::clamp(z, 0.0, 1.0);
  }
};

struct ProductLaw {
  std::vector<AxisLaw> axes;

  int dim() const { return static_cast<int>(axes.size()); }

  double cdf(const std::vector<double>& x) const {
    double p = 1;
    for (int j = 0; j < dim(); ++j) p *= axes[j].cdf(x[j]);
    return p;
  }

  double density(const std::vector<double>& x) const {
    double p = 1;
    for (int j = 0; j < dim(); ++j) p *= axes[j].pdf(x[j]);
    return p;
  }

  std::vector<double> sample(Rng& rng) const {
    std::vector<double> x(dim());
    for (int j = 0; j < dim(); ++j) x[j] = axes[j].quantile(rng.uniform01());
    return x;
  }
};

inline std::vector<double> cell_probabilities(const ProductLaw& F,
                                              const std::vector<double>& t) {
  int d = F.dim();
  require(d == static_cast<int>(t.size()), "dimension mismatch");
  require(d <= Limits::max_dimension, "dimension exceeds configured cap");
  std::vector<double> out(std::size_t(1) << d, 0.0);
  std::vector<double> fr(d);
  for (int j = 0; j < d; ++j) fr[j] = F.axes[j].cdf(t[j]);
  detail::fold_axis_fractions(fr, 1.0, out);
  return out;
}

}  // namespace curstat
