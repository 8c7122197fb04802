#pragma once

// Distances between a fitted distribution and a simulation truth, measured
// through what the data actually sees: at observation time t the model only
// matters via the 2^d cell probabilities p_k(t; F), so the Hellinger metric
// integrates the squared difference of their square roots against the
// observation-time density g0, and the L2 metric integrates (F - F0)^2.
// Both step-function fits and smooth product laws hide behind one evaluator
// interface; step fits report their discontinuity cuts so the quadrature
// can subdivide and stay accurate.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "curstat/model.hpp"
#include "curstat/npmle.hpp"
#include "curstat/quadrature.hpp"

namespace curstat {

// Simulation truth: latent law F0 and observation-time law G0 on [0,M]^d,
// with Lebesgue density envelopes 1/c1 <= f0 <= c1 and 1/c2 <= g0 <= c2.
struct TruthSpec {
  ProductLaw F0;
  ProductLaw G0;
  double c1 = 1, c2 = 1, M = 1;

  int dim() const { return F0.dim(); }

  void validate() const {
    require(F0.dim() >= 1 && F0.dim() == G0.dim(), "truth dimension mismatch");
    require(c1 >= 1 && c2 >= 1 && M > 0, "bad truth envelope parameters");
    double fmin = 1, fmax = 1, gmin = 1, gmax = 1;
    for (int j = 0; j < dim(); ++j) {
      F0.axes[j].validate();
      G0.axes[j].validate();
      require(F0.axes[j].M == M && G0.axes[j].M == M, "axis scale mismatch");
      fmin *= (1.0 - F0.axes[j].slope / 2) / M;
      fmax *= (1.0 + F0.axes[j].slope / 2) / M;
      gmin *= (1.0 - G0.axes[j].slope / 2) / M;
      gmax *= (1.0 + G0.axes[j].slope / 2) / M;
    }
    require(fmin >= 1.0 / c1 - 1e-12 && fmax <= c1 + 1e-12,
            "latent density violates its envelope");
    require(gmin >= 1.0 / c2 - 1e-12 && gmax <= c2 + 1e-12,
            "observation density violates its envelope");
  }

  static TruthSpec uniform(int d, double M = 1) {
    TruthSpec s;
    s.M = M;
    s.c1 = s.c2 = std::max(M, 1.0 / M);
    s.F0.axes.assign(d, AxisLaw{AxisLaw::uniform, 0.0, M});
    s.G0.axes.assign(d, AxisLaw{AxisLaw::uniform, 0.0, M});
    s.validate();
    return s;
  }

  // Largest slope whose product density stays inside [1/c, c] on d axes.
  static double slope_for(double c, int d) {
    double s = std::min(2.0 * (std::pow(c, 1.0 / d) - 1.0),
                        2.0 * (1.0 - std::pow(c, -1.0 / d)));
    return std::min(0.4, s);
  }

  static TruthSpec tilted(int d, double c1 = 2, double c2 = 1, double M = 1) {
    TruthSpec s;
    s.M = M;
    s.c1 = c1;
    s.c2 = c2;
    double sf = slope_for(c1, d), sg = slope_for(c2, d);
    s.F0.axes.assign(d, AxisLaw{sf > 0 ? AxisLaw::tilted : AxisLaw::uniform, sf, M});
    s.G0.axes.assign(d, AxisLaw{sg > 0 ? AxisLaw::tilted : AxisLaw::uniform, sg, M});
    s.validate();
    return s;
  }
};

class DistEvaluator {
 public:
  virtual ~DistEvaluator() = default;
  virtual int dim() const = 0;
  virtual std::vector<double> cell_probs(const std::vector<double>& t) const = 0;
  virtual double cdf(const std::vector<double>& t) const = 0;
  // axis positions where cell_probs/cdf may jump or kink (for quadrature)
  virtual std::vector<double> breakpoints(int) const { return {}; }
};

class ProductEvaluator : public DistEvaluator {
 public:
  explicit ProductEvaluator(ProductLaw law) : law_(std::move(law)) {}
  int dim() const override { return law_.dim(); }
  std::vector<double> cell_probs(const std::vector<double>& t) const override {
    return cell_probabilities(law_, t);
  }
  double cdf(const std::vector<double>& t) const override { return law_.cdf(t); }

 private:
  ProductLaw law_;
};

// Generic rectangle-list evaluator; d = 1 gets a sorted prefix fast path
// (disjoint intervals ordered by right endpoint admit binary search).
class ReprEvaluator : public DistEvaluator {
 public:
  explicit ReprEvaluator(DistributionRepr F) : F_(std::move(F)) {
    if (F_.d == 1) {
      order_.resize(F_.rects.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        return F_.rects[a][0].hi < F_.rects[b][0].hi;
      });
      his_.reserve(order_.size());
      prefix_.reserve(order_.size() + 1);
      prefix_.push_back(0);
      for (std::size_t i : order_) {
        his_.push_back(F_.rects[i][0].hi);
        prefix_.push_back(prefix_.back() + F_.weights[i]);
      }
    }
  }

  int dim() const override { return F_.d; }

  std::vector<double> cell_probs(const std::vector<double>& t) const override {
    if (F_.d == 1) {
      double low = low_mass_1d(t[0]);
      return {low, 1.0 - low};
    }
    return cell_probabilities(F_, t);
  }

  double cdf(const std::vector<double>& t) const override {
    if (F_.d == 1) {
      std::size_t k = std::upper_bound(his_.begin(), his_.end(), t[0]) - his_.begin();
      return prefix_[k];
    }
    return F_.cdf(t);
  }

  std::vector<double> breakpoints(int axis) const override {
    std::vector<double> cuts;
    for (const auto& r : F_.rects) {
      if (r[axis].lo > 0 && std::isfinite(r[axis].lo)) cuts.push_back(r[axis].lo);
      if (std::isfinite(r[axis].hi)) cuts.push_back(r[axis].hi);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    return cuts;
  }

  const DistributionRepr& repr() const { return F_; }

 private:
  double low_mass_1d(double t) const {
    std::size_t k = std::upper_bound(his_.begin(), his_.end(), t) - his_.begin();
    double low = prefix_[k];
    // disjoint intervals sorted by hi are sorted by lo too, so at most the
    // next interval can straddle t
    for (std::size_t i = k; i < order_.size(); ++i) {
      const Interval& iv = F_.rects[order_[i]][0];
      if (iv.within_high(t)) break;
      low += F_.weights[order_[i]] * iv.low_fraction(t);
    }
    return low;
  }

  DistributionRepr F_;
  std::vector<std::size_t> order_;
  std::vector<double> his_;
  std::vector<double> prefix_;
};

// d = 2 evaluator with O(1) lookups: the support is laid on the grid of its
// own rectangle endpoints, masses go into a prefix-summed matrix, and both
// the CDF corner mass and the four orthant masses come out of a handful of
// prefix reads plus the straddling row/column fractions.
class GridEvaluator : public DistEvaluator {
 public:
  explicit GridEvaluator(const DistributionRepr& F) {
    require(F.d == 2, "grid evaluator is two-dimensional");
    for (int j = 0; j < 2; ++j) {
      for (const auto& r : F.rects) {
        if (r[j].lo > 0 && std::isfinite(r[j].lo)) cuts_[j].push_back(r[j].lo);
        if (std::isfinite(r[j].hi)) cuts_[j].push_back(r[j].hi);
      }
      std::sort(cuts_[j].begin(), cuts_[j].end());
      cuts_[j].erase(std::unique(cuts_[j].begin(), cuts_[j].end()), cuts_[j].end());
    }
    nx_ = static_cast<std::int64_t>(cuts_[0].size()) + 1;
    ny_ = static_cast<std::int64_t>(cuts_[1].size()) + 1;
    mass_.assign(nx_ * ny_, 0.0);
    for (std::size_t r = 0; r < F.rects.size(); ++r) {
      auto xs = axis_shares(0, F.rects[r][0]);
      auto ys = axis_shares(1, F.rects[r][1]);
      for (auto [a, fa] : xs)
        for (auto [b, fb] : ys) mass_[a * ny_ + b] += F.weights[r] * fa * fb;
    }
    prefix_.assign((nx_ + 1) * (ny_ + 1), 0.0);
    for (std::int64_t a = 0; a < nx_; ++a)
      for (std::int64_t b = 0; b < ny_; ++b)
        at(a + 1, b + 1) = mass_[a * ny_ + b] + at(a, b + 1) + at(a + 1, b) - at(a, b);
  }

  int dim() const override { return 2; }

  double cdf(const std::vector<double>& t) const override {
    return at(count_le(0, t[0]), count_le(1, t[1]));
  }

  std::vector<double> cell_probs(const std::vector<double>& t) const override {
    std::int64_t cx = count_le(0, t[0]), cy = count_le(1, t[1]);
    double fx = straddle_fraction(0, cx, t[0]);
    double fy = straddle_fraction(1, cy, t[1]);
    double sx = cx < nx_ ? at(cx + 1, cy) - at(cx, cy) : 0.0;       // col cx, rows < cy
    double sy = cy < ny_ ? at(cx, cy + 1) - at(cx, cy) : 0.0;       // row cy, cols < cx
    double mxy = (cx < nx_ && cy < ny_) ? mass_[cx * ny_ + cy] : 0.0;
    double ll = at(cx, cy) + fx * sx + fy * sy + fx * fy * mxy;
    double lowx = at(cx, ny_) + fx * (cx < nx_ ? at(cx + 1, ny_) - at(cx, ny_) : 0.0);
    double lowy = at(nx_, cy) + fy * (cy < ny_ ? at(nx_, cy + 1) - at(nx_, cy) : 0.0);
    double lh = lowx - ll;
    double hl = lowy - ll;
    double total = at(nx_, ny_);
    double hh = total - ll - lh - hl;
    return {ll, hl, lh, std::max(hh, 0.0)};  // order: delta=(1,1),(0,1),(1,0),(0,0)
  }

  std::vector<double> breakpoints(int axis) const override { return cuts_[axis]; }

 private:
  double& at(std::int64_t a, std::int64_t b) { return prefix_[a * (ny_ + 1) + b]; }
  double at(std::int64_t a, std::int64_t b) const { return prefix_[a * (ny_ + 1) + b]; }

  std::int64_t count_le(int axis, double t) const {
    return std::upper_bound(cuts_[axis].begin(), cuts_[axis].end(), t) -
           cuts_[axis].begin();
  }

  Interval column(int axis, std::int64_t a) const {
    const auto& c = cuts_[axis];
    Interval iv;
    iv.closed_lo = (a == 0);
    iv.lo = a == 0 ? 0.0 : c[a - 1];
    iv.hi = a == static_cast<std::int64_t>(c.size()) ? kInf : c[a];
    return iv;
  }

  double straddle_fraction(int axis, std::int64_t a, double t) const {
    std::int64_t cols = axis == 0 ? nx_ : ny_;
    if (a >= cols) return 0.0;
    return column(axis, a).low_fraction(t);
  }

  // grid columns covered by one rectangle edge interval, with length shares
  std::vector<std::pair<std::int64_t, double>> axis_shares(int axis,
                                                           const Interval& iv) const {
    const auto& c = cuts_[axis];
    std::int64_t cols = axis == 0 ? nx_ : ny_;
    if (iv.hi == kInf) return {{cols - 1, 1.0}};  // all mass sits past every cut
    if (iv.lo == iv.hi) {
      std::int64_t a = std::lower_bound(c.begin(), c.end(), iv.hi) - c.begin();
      return {{a, 1.0}};
    }
    std::int64_t a0 = std::upper_bound(c.begin(), c.end(), iv.lo) - c.begin();
    if (iv.lo == 0 && a0 > 0) a0 = 0;  // leftmost closed interval
    std::int64_t a1 = std::lower_bound(c.begin(), c.end(), iv.hi) - c.begin();
    std::vector<std::pair<std::int64_t, double>> out;
    double len = iv.hi - iv.lo;
    for (std::int64_t a = a0; a <= a1 && a < cols; ++a) {
      Interval col = column(axis, a);
      double lo = std::max(iv.lo, col.lo), hi = std::min(iv.hi, col.hi);
      if (hi > lo) out.emplace_back(a, (hi - lo) / len);
    }
    return out;
  }

  std::vector<double> cuts_[2];
  std::int64_t nx_ = 1, ny_ = 1;
  std::vector<double> mass_;
  std::vector<double> prefix_;
};

struct MetricResult {
  double value = 0;
  double se = 0;  // zero for quadrature
};

namespace detail {

inline std::vector<std::vector<double>> merged_cuts(const DistEvaluator& A,
                                                    const DistEvaluator& B,
                                                    double M) {
  int d = A.dim();
  std::vector<std::vector<double>> cuts(d);
  for (int j = 0; j < d; ++j) {
    auto a = A.breakpoints(j);
    auto b = B.breakpoints(j);
    cuts[j].reserve(a.size() + b.size());
    for (double v : a)
      if (v > 0 && v < M) cuts[j].push_back(v);
    for (double v : b)
      if (v > 0 && v < M) cuts[j].push_back(v);
    std::sort(cuts[j].begin(), cuts[j].end());
    cuts[j].erase(std::unique(cuts[j].begin(), cuts[j].end()), cuts[j].end());
  }
  return cuts;
}

template <class F>
inline MetricResult integrate_metric(const F& raw, const DistEvaluator& A,
                                     const DistEvaluator& B, const ProductLaw& g0,
                                     double M, const Integrator& ig) {
  validate_integrator(ig);
  int d = A.dim();
  require(d == B.dim() && d == g0.dim(), "dimension mismatch");
  if (std::holds_alternative<GaussLegendre>(ig)) {
    auto cuts = merged_cuts(A, B, M);
    std::size_t pieces = 1;
    for (auto& c : cuts) pieces = std::max(pieces, c.size() + 1);
    int piece_order = pieces > 64 ? 4 : 8;
    std::vector<double> t(d);
    double val = composite_tensor(
        [&](const double* x) {
          for (int j = 0; j < d; ++j) t[j] = x[j];
          return raw(t) * g0.density(t);
        },
        d, M, cuts, std::get<GaussLegendre>(ig).nodes, piece_order);
    return {val, 0.0};
  }
  const auto& mc = std::get<MonteCarloInt>(ig);
  auto r = mc_mean([&](const std::vector<double>& t) { return raw(t); },
                   [&](Rng& rng) { return g0.sample(rng); }, mc.draws, mc.seed);
  return {r.value, r.se};
}

}  // namespace detail

// Hellinger distance between conditional cell laws:
// h(A,B)^2 = 1/2 ∫ Σ_k (√p_k(t;A) − √p_k(t;B))² g0(t) dt
inline MetricResult hellinger(const DistEvaluator& A, const DistEvaluator& B,
                              const ProductLaw& g0, double M, const Integrator& ig) {
  auto h2 = detail::integrate_metric(
      [&](const std::vector<double>& t) {
        auto pa = A.cell_probs(t);
        auto pb = B.cell_probs(t);
        double s = 0;
        for (std::size_t k = 0; k < pa.size(); ++k) {
          double dk = std::sqrt(std::max(pa[k], 0.0)) - std::sqrt(std::max(pb[k], 0.0));
          s += dk * dk;
        }
        return 0.5 * s;
      },
      A, B, g0, M, ig);
  double v = std::sqrt(std::max(h2.value, 0.0));
  double se = v > 1e-12 ? h2.se / (2 * v) : std::sqrt(std::max(h2.se, 0.0));
  return {v, se};
}

// L2(G0) distance between the distribution functions themselves.
inline MetricResult l2_g0(const DistEvaluator& A, const DistEvaluator& B,
                          const ProductLaw& g0, double M, const Integrator& ig) {
  auto v2 = detail::integrate_metric(
      [&](const std::vector<double>& t) {
        double diff = A.cdf(t) - B.cdf(t);
        return diff * diff;
      },
      A, B, g0, M, ig);
  double v = std::sqrt(std::max(v2.value, 0.0));
  double se = v > 1e-12 ? v2.se / (2 * v) : std::sqrt(std::max(v2.se, 0.0));
  return {v, se};
}

struct BoundCheck {
  double h2 = 0;            // squared Hellinger distance
  double l2sq = 0;          // squared L2(G0) distance
  double lower_bound = 0;   // (1/4 or 1/8) * l2sq
  bool satisfied = false;
};

// h² dominates a multiple of the squared L2 distance: 1/4 in one dimension,
// 1/8 beyond.  The pointwise inequality under the integral makes the check
// exact when both sides share quadrature nodes, which they do here.
inline BoundCheck check_hellinger_l2_bound(const DistEvaluator& A,
                                           const DistEvaluator& B,
                                           const ProductLaw& g0, double M,
                                           const Integrator& ig,
                                           double slack = 1e-9) {
  auto h = hellinger(A, B, g0, M, ig);
  auto l = l2_g0(A, B, g0, M, ig);
  BoundCheck out;
  out.h2 = h.value * h.value;
  out.l2sq = l.value * l.value;
  out.lower_bound = (A.dim() == 1 ? 0.25 : 0.125) * out.l2sq;
  out.satisfied = out.h2 + slack >= out.lower_bound;
  return out;
}

// convenience wrappers against a simulation truth
inline MetricResult hellinger(const DistributionRepr& F, const TruthSpec& truth,
                              const Integrator& ig) {
  ReprEvaluator a(F);
  ProductEvaluator b(truth.F0);
  return hellinger(a, b, truth.G0, truth.M, ig);
}

inline MetricResult l2_g0(const DistributionRepr& F, const TruthSpec& truth,
                          const Integrator& ig) {
  ReprEvaluator a(F);
  ProductEvaluator b(truth.F0);
  return l2_g0(a, b, truth.G0, truth.M, ig);
}

}  // namespace curstat
