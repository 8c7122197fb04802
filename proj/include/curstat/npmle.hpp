#pragma once

// Multivariate current-status NPMLE.  The observation times cut [0,inf)^d
// into a grid of cells; the likelihood depends on a candidate distribution
// only through the mass it puts on each cell, so the fit reduces to a
// finite mixture problem: maximize sum_i log((A w)_i) over the simplex,
// where A is the binary matrix saying which cells lie inside observation
// i's orthant region.  Columns with identical rows are interchangeable and
// get merged; columns whose row set is strictly contained in another's can
// never help and can optionally be pruned (this keeps the attainable
// likelihood and the fitted row probabilities A w unchanged).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <unordered_map>
#include <vector>

#include "curstat/model.hpp"

namespace curstat {

// Grid generated by the distinct observed times per axis: on axis j with
// breaks b_1 < .. < b_k the intervals are [0,b_1], (b_1,b_2], .., (b_k,inf).
struct CellPartition {
  int d = 1;
  std::vector<std::vector<double>> breaks;

  std::int64_t axis_intervals(int j) const {
    return static_cast<std::int64_t>(breaks[j].size()) + 1;
  }

  std::int64_t cell_count() const {
    std::int64_t m = 1;
    for (int j = 0; j < d; ++j) m *= axis_intervals(j);
    return m;
  }

  Interval axis_interval(int j, std::int64_t a) const {
    const auto& b = breaks[j];
    Interval iv;
    iv.closed_lo = (a == 0);
    iv.lo = (a == 0) ? 0.0 : b[a - 1];
    iv.hi = (a == static_cast<std::int64_t>(b.size())) ? kInf : b[a];
    return iv;
  }

  // row-major cell ids: axis 0 most significant, so ascending id order is
  // lexicographic order on the index tuple
  std::vector<std::int64_t> strides() const {
    std::vector<std::int64_t> s(d, 1);
    for (int j = d - 2; j >= 0; --j) s[j] = s[j + 1] * axis_intervals(j + 1);
    return s;
  }

  std::vector<std::int64_t> cell_tuple(std::int64_t cell) const {
    std::vector<std::int64_t> idx(d);
    for (int j = d - 1; j >= 0; --j) {
      idx[j] = cell % axis_intervals(j);
      cell /= axis_intervals(j);
    }
    return idx;
  }

  Rectangle cell_rect(std::int64_t cell) const {
    auto idx = cell_tuple(cell);
    Rectangle r(d);
    for (int j = 0; j < d; ++j) r[j] = axis_interval(j, idx[j]);
    return r;
  }
};

inline CellPartition build_partition(const std::vector<Observation>& obs) {
  require(!obs.empty(), "need at least one observation");
  int d = obs.front().dim();
  require(d <= Limits::max_dimension, "dimension exceeds configured cap");
  CellPartition P;
  P.d = d;
  P.breaks.assign(d, {});
  for (const auto& o : obs) {
    o.validate();
    require(o.dim() == d, "mixed dimensions in observation list");
    for (int j = 0; j < d; ++j) P.breaks[j].push_back(o.t[j]);
  }
  for (int j = 0; j < d; ++j) {
    auto& b = P.breaks[j];
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
  }
  return P;
}

// Binary membership matrix stored column-wise as row bitmasks.  A column is
// either one grid cell or (after merging) a class of cells with identical
// rows; rep_cell is the smallest member cell id, class_size the member count.
struct MembershipMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  int words = 0;
  std::vector<std::uint64_t> patterns;
  std::vector<std::int64_t> rep_cell;
  std::vector<std::int64_t> class_size;

  const std::uint64_t* col(std::int64_t c) const {
    return patterns.data() + static_cast<std::size_t>(c) * words;
  }

  bool at(std::int64_t row, std::int64_t c) const {
    return (col(c)[row >> 6] >> (row & 63)) & 1u;
  }

  std::vector<std::int64_t> row_cols(std::int64_t row) const {
    std::vector<std::int64_t> out;
    for (std::int64_t c = 0; c < cols; ++c)
      if (at(row, c)) out.push_back(c);
    return out;
  }

  std::int64_t nnz() const {
    std::int64_t s = 0;
    for (std::uint64_t w : patterns) s += std::popcount(w);
    return s;
  }
};

namespace detail {

// For one axis: bitmask over observations whose orthant region covers each
// axis interval (delta = 1 wants [0, t] so intervals with hi <= t; delta = 0
// wants (t, inf) so intervals entirely right of t).
struct AxisMasks {
  std::int64_t count = 0;
  int words = 0;
  std::vector<std::uint64_t> bits;

  const std::uint64_t* mask(std::int64_t a) const {
    return bits.data() + static_cast<std::size_t>(a) * words;
  }
};

inline AxisMasks build_axis_masks(const CellPartition& P,
                                  const std::vector<Observation>& obs, int j) {
  AxisMasks m;
  m.count = P.axis_intervals(j);
  m.words = static_cast<int>((obs.size() + 63) / 64);
  m.bits.assign(static_cast<std::size_t>(m.count) * m.words, 0);
  for (std::int64_t a = 0; a < m.count; ++a) {
    Interval iv = P.axis_interval(j, a);
    std::uint64_t* w = m.bits.data() + static_cast<std::size_t>(a) * m.words;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      bool in = obs[i].delta[j] == 1 ? iv.within_low(obs[i].t[j])
                                     : iv.within_high(obs[i].t[j]);
      if (in) w[i >> 6] |= std::uint64_t(1) << (i & 63);
    }
  }
  return m;
}

inline std::uint64_t hash_words(const std::uint64_t* w, int n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < n; ++i) h = mix64(h ^ w[i]);
  return h;
}

inline bool words_equal(const std::uint64_t* a, const std::uint64_t* b, int n) {
  return std::memcmp(a, b, static_cast<std::size_t>(n) * 8) == 0;
}

inline bool words_zero(const std::uint64_t* a, int n) {
  for (int i = 0; i < n; ++i)
    if (a[i]) return false;
  return true;
}

// a subset of b
inline bool words_subset(const std::uint64_t* a, const std::uint64_t* b, int n) {
  for (int i = 0; i < n; ++i)
    if (a[i] & ~b[i]) return false;
  return true;
}

}  // namespace detail

struct BuildOptions {
  bool merge = true;
  bool prune = false;                       // drop strictly dominated classes
  std::int64_t max_cells = 200'000'000;     // guard against runaway grids
};

// Scan the grid in cell-id order, AND-ing per-axis masks into each cell's
// row pattern.  With merge on, identical patterns collapse into one column
// and all-zero patterns are dropped.  With prune on, a class is also
// dropped when one of its cells has an adjacent cell whose pattern is a
// strict superset: rectangle regions make inclusion between any two cells
// detectable across a single grid edge, so this removes exactly the
// non-maximal classes.
inline MembershipMatrix build_membership(const CellPartition& P,
                                         const std::vector<Observation>& obs,
                                         const BuildOptions& opt = {}) {
  require(!obs.empty(), "need at least one observation");
  require(!opt.prune || opt.merge, "prune requires merge");
  const int d = P.d;
  const std::int64_t n = static_cast<std::int64_t>(obs.size());
  const int words = static_cast<int>((n + 63) / 64);
  const std::int64_t cells = P.cell_count();
  require(cells <= opt.max_cells, "cell grid too large");
  if (!opt.merge)
    require(cells * words * 8 <= std::int64_t(2e9), "unmerged matrix too large");

  std::vector<detail::AxisMasks> X(d);
  for (int j = 0; j < d; ++j) X[j] = detail::build_axis_masks(P, obs, j);

  MembershipMatrix A;
  A.rows = n;
  A.words = words;

  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> seen;
  std::vector<char> dominated;  // per column class
  std::vector<std::int64_t> idx(d, 0);
  std::vector<std::vector<std::uint64_t>> prefix(
      d, std::vector<std::uint64_t>(words));  // prefix[j] = AND of axes 0..j
  std::vector<std::uint64_t> other(words), nb(words);

  auto recompute_prefix = [&](int from) {
    for (int j = from; j < d; ++j) {
      const std::uint64_t* mj = X[j].mask(idx[j]);
      if (j == 0)
        std::copy(mj, mj + words, prefix[0].begin());
      else
        for (int k = 0; k < words; ++k) prefix[j][k] = prefix[j - 1][k] & mj[k];
    }
  };
  recompute_prefix(0);

  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const std::uint64_t* pat = prefix[d - 1].data();

    std::int64_t col = -1;
    bool fresh = false;
    if (opt.merge) {
      if (!detail::words_zero(pat, words)) {
        std::uint64_t h = detail::hash_words(pat, words);
        auto& bucket = seen[h];
        for (std::int64_t c : bucket)
          if (detail::words_equal(pat, A.col(c), words)) {
            col = c;
            break;
          }
        if (col < 0) {
          col = A.cols++;
          fresh = true;
          bucket.push_back(col);
          A.patterns.insert(A.patterns.end(), pat, pat + words);
          A.rep_cell.push_back(cell);
          A.class_size.push_back(1);
          dominated.push_back(0);
        } else {
          A.class_size[col] += 1;
        }
      }
    } else {
      col = A.cols++;
      fresh = true;
      A.patterns.insert(A.patterns.end(), pat, pat + words);
      A.rep_cell.push_back(cell);
      A.class_size.push_back(1);
    }

    if (opt.prune && col >= 0 && !dominated[col]) {
      // pattern of the axes other than j, then the neighbor's pattern
      for (int j = 0; j < d && !dominated[col]; ++j) {
        bool have_other = false;
        for (int dir = -1; dir <= 1; dir += 2) {
          std::int64_t a = idx[j] + dir;
          if (a < 0 || a >= X[j].count) continue;
          if (!have_other) {
            std::fill(other.begin(), other.end(), ~std::uint64_t(0));
            for (int k = 0; k < d; ++k) {
              if (k == j) continue;
              const std::uint64_t* mk = X[k].mask(idx[k]);
              for (int t = 0; t < words; ++t) other[t] &= mk[t];
            }
            have_other = true;
          }
          const std::uint64_t* mj = X[j].mask(a);
          for (int t = 0; t < words; ++t) nb[t] = other[t] & mj[t];
          if (detail::words_subset(pat, nb.data(), words) &&
              !detail::words_equal(pat, nb.data(), words)) {
            dominated[col] = 1;
            break;
          }
        }
      }
    }
    (void)fresh;

    // odometer step, last axis fastest
    int j = d - 1;
    while (j >= 0 && ++idx[j] == X[j].count) idx[j--] = 0;
    if (j < 0) break;
    recompute_prefix(j);
  }

  if (opt.prune) {
    MembershipMatrix B;
    B.rows = n;
    B.words = words;
    for (std::int64_t c = 0; c < A.cols; ++c) {
      if (dominated[c]) continue;
      B.patterns.insert(B.patterns.end(), A.col(c), A.col(c) + words);
      B.rep_cell.push_back(A.rep_cell[c]);
      B.class_size.push_back(A.class_size[c]);
      ++B.cols;
    }
    return B;
  }
  return A;
}

// Column per grid cell, in cell-id order (no merging).
inline MembershipMatrix membership_matrix(const CellPartition& P,
                                          const std::vector<Observation>& obs) {
  BuildOptions opt;
  opt.merge = false;
  return build_membership(P, obs, opt);
}

struct MergeResult {
  MembershipMatrix matrix;
  std::vector<std::int64_t> col_map;  // old column -> new column, -1 if dropped
};

// Collapse identical columns; all-zero columns are dropped (they can never
// carry likelihood).  Column order follows first appearance, so class ids
// stay sorted by smallest member.
inline MergeResult merge_equivalent_cells(const MembershipMatrix& A) {
  MergeResult out;
  out.matrix.rows = A.rows;
  out.matrix.words = A.words;
  out.col_map.assign(A.cols, -1);
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> seen;
  for (std::int64_t c = 0; c < A.cols; ++c) {
    const std::uint64_t* pat = A.col(c);
    if (detail::words_zero(pat, A.words)) continue;
    std::uint64_t h = detail::hash_words(pat, A.words);
    auto& bucket = seen[h];
    std::int64_t id = -1;
    for (std::int64_t k : bucket)
      if (detail::words_equal(pat, out.matrix.col(k), A.words)) {
        id = k;
        break;
      }
    if (id < 0) {
      id = out.matrix.cols++;
      bucket.push_back(id);
      out.matrix.patterns.insert(out.matrix.patterns.end(), pat, pat + A.words);
      out.matrix.rep_cell.push_back(A.rep_cell[c]);
      out.matrix.class_size.push_back(A.class_size[c]);
    } else {
      out.matrix.rep_cell[id] = std::min(out.matrix.rep_cell[id], A.rep_cell[c]);
      out.matrix.class_size[id] += A.class_size[c];
    }
    out.col_map[c] = id;
  }
  return out;
}

namespace detail {

struct Csc {
  std::int64_t n = 0, m = 0;
  std::vector<std::int64_t> start;
  std::vector<std::int32_t> rows;
};

inline Csc to_csc(const MembershipMatrix& A) {
  Csc c;
  c.n = A.rows;
  c.m = A.cols;
  c.start.assign(A.cols + 1, 0);
  c.rows.reserve(static_cast<std::size_t>(A.nnz()));
  for (std::int64_t col = 0; col < A.cols; ++col) {
    const std::uint64_t* pat = A.col(col);
    for (int w = 0; w < A.words; ++w) {
      std::uint64_t bits = pat[w];
      while (bits) {
        int b = std::countr_zero(bits);
        c.rows.push_back(static_cast<std::int32_t>((w << 6) + b));
        bits &= bits - 1;
      }
    }
    c.start[col + 1] = static_cast<std::int64_t>(c.rows.size());
  }
  return c;
}

struct EmPass {
  double loglik = -kInf;  // total log-likelihood at the input weights
  double gap = kInf;      // Fenchel certificate at the input weights
  bool valid = true;      // false when some row probability vanished
};

// One EM sweep: q = A w, directional derivatives D_c = (1/n) sum 1/q_i over
// the column's rows, next weights w_c D_c.  gap = max_c D_c - 1 covers all
// columns (also zero-weight ones), which is the optimality certificate.
inline EmPass em_pass(const Csc& A, const std::vector<double>& w,
                      std::vector<double>& q, std::vector<double>& wnext) {
  EmPass out;
  q.assign(static_cast<std::size_t>(A.n), 0.0);
  for (std::int64_t c = 0; c < A.m; ++c) {
    double wc = w[c];
    if (wc == 0.0) continue;
    for (std::int64_t k = A.start[c]; k < A.start[c + 1]; ++k) q[A.rows[k]] += wc;
  }
  double ll = 0;
  for (std::int64_t i = 0; i < A.n; ++i) {
    if (q[i] <= 0.0) {
      out.valid = false;
      out.loglik = -kInf;
      return out;
    }
    ll += std::log(q[i]);
  }
  out.loglik = ll;
  std::vector<double>& r = q;  // reuse: r_i = 1 / (n q_i)
  double inv_n = 1.0 / static_cast<double>(A.n);
  for (std::int64_t i = 0; i < A.n; ++i) r[i] = inv_n / q[i];
  wnext.resize(static_cast<std::size_t>(A.m));
  double gmax = -kInf;
  for (std::int64_t c = 0; c < A.m; ++c) {
    double dc = 0;
    for (std::int64_t k = A.start[c]; k < A.start[c + 1]; ++k) dc += r[A.rows[k]];
    if (dc > gmax) gmax = dc;
    wnext[c] = w[c] * dc;
  }
  out.gap = gmax - 1.0;
  return out;
}

// Gaussian elimination with partial pivoting; false when the system is
// numerically singular.  a is row-major k x k and is destroyed.
inline bool solve_dense(std::vector<double>& a, std::vector<double>& b,
                        std::size_t k) {
  double amax = 0;
  for (double x : a) amax = std::max(amax, std::abs(x));
  if (amax == 0) return false;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
    if (std::abs(a[piv * k + col]) < 1e-12 * amax) return false;
    if (piv != col) {
      for (std::size_t j = col; j < k; ++j) std::swap(a[piv * k + j], a[col * k + j]);
      std::swap(b[piv], b[col]);
    }
    double inv = 1.0 / a[col * k + col];
    for (std::size_t r = col + 1; r < k; ++r) {
      double f = a[r * k + col] * inv;
      if (f == 0) continue;
      for (std::size_t j = col; j < k; ++j) a[r * k + j] -= f * a[col * k + j];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = k; r-- > 0;) {
    double s = b[r];
    for (std::size_t j = r + 1; j < k; ++j) s -= a[r * k + j] * b[j];
    b[r] = s / a[r * k + r];
  }
  return true;
}

// directional derivatives D_c = (1/n) sum_{i in col c} 1/(A w)_i for every
// column; false when some row probability vanishes
inline bool direction_derivs(const Csc& A, const std::vector<double>& w,
                             std::vector<double>& q, std::vector<double>& D) {
  q.assign(static_cast<std::size_t>(A.n), 0.0);
  for (std::int64_t c = 0; c < A.m; ++c) {
    if (w[c] == 0.0) continue;
    for (std::int64_t k = A.start[c]; k < A.start[c + 1]; ++k) q[A.rows[k]] += w[c];
  }
  double invn = 1.0 / static_cast<double>(A.n);
  for (std::int64_t i = 0; i < A.n; ++i) {
    if (q[i] <= 0.0) return false;
    q[i] = invn / q[i];
  }
  D.assign(static_cast<std::size_t>(A.m), 0.0);
  for (std::int64_t c = 0; c < A.m; ++c) {
    double s = 0;
    for (std::int64_t k = A.start[c]; k < A.start[c + 1]; ++k) s += q[A.rows[k]];
    D[c] = s;
  }
  return true;
}

// Newton refinement on the active face: solve the stationarity system
// D_c(w) = 1 over the currently positive weights.  EM identifies the
// support only at a harmonic rate when a weight must vanish, so weight
// error stalls around the square root of the certificate; solving the
// face equations directly removes that floor.  A weight driven negative
// is stepped exactly to zero and dropped from the face.  The caller
// re-checks the certificate and the likelihood, so a partial or failed
// polish can never make the returned fit worse.
inline bool newton_face_polish(const Csc& A, std::vector<double>& w,
                               std::size_t max_support = 600) {
  const std::int64_t m = A.m;
  std::vector<std::int64_t> S;
  for (std::int64_t c = 0; c < m; ++c)
    if (w[c] > 0) S.push_back(c);
  if (S.empty() || S.size() > max_support) return false;

  std::vector<double> ws;
  std::vector<std::vector<std::int32_t>> rowmem;
  auto rebuild = [&]() {
    ws.resize(S.size());
    for (std::size_t c = 0; c < S.size(); ++c) ws[c] = w[S[c]];
    rowmem.assign(static_cast<std::size_t>(A.n), {});
    for (std::size_t c = 0; c < S.size(); ++c)
      for (std::int64_t k = A.start[S[c]]; k < A.start[S[c] + 1]; ++k)
        rowmem[A.rows[k]].push_back(static_cast<std::int32_t>(c));
  };
  rebuild();

  std::vector<double> q(static_cast<std::size_t>(A.n));
  std::vector<double> jac, rhs;
  const double invn = 1.0 / static_cast<double>(A.n);
  bool progressed = false;

  for (int round = 0; round < 60; ++round) {
    std::size_t k = S.size();
    if (k == 0) break;
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t c = 0; c < k; ++c)
      for (std::int64_t p = A.start[S[c]]; p < A.start[S[c] + 1]; ++p)
        q[A.rows[p]] += ws[c];
    double res = 0;
    rhs.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0;
      for (std::int64_t p = A.start[S[c]]; p < A.start[S[c] + 1]; ++p) {
        if (q[A.rows[p]] <= 0.0) return progressed;
        s += 1.0 / q[A.rows[p]];
      }
      double r = invn * s - 1.0;
      rhs[c] = -r;
      res = std::max(res, std::abs(r));
    }
    if (res <= 1e-15) break;

    jac.assign(k * k, 0.0);
    for (std::int64_t i = 0; i < A.n; ++i) {
      double fac = -invn / (q[i] * q[i]);
      const auto& mem = rowmem[i];
      for (std::int32_t a : mem)
        for (std::int32_t b : mem) jac[static_cast<std::size_t>(a) * k + b] += fac;
    }
    std::vector<double> step = rhs;
    std::vector<double> work = jac;
    if (!solve_dense(work, step, k)) {
      // damp toward steepest ascent and retry once
      double amax = 0;
      for (double x : jac) amax = std::max(amax, std::abs(x));
      for (std::size_t c = 0; c < k; ++c) jac[c * k + c] -= 1e-8 * amax;
      step = rhs;
      if (!solve_dense(jac, step, k)) return progressed;
    }

    double alpha = 1.0;
    std::size_t blocker = k;
    for (std::size_t c = 0; c < k; ++c)
      if (step[c] < 0 && ws[c] + step[c] < 0) {
        double a = ws[c] / -step[c];
        if (a < alpha) {
          alpha = a;
          blocker = c;
        }
      }
    for (std::size_t c = 0; c < k; ++c) ws[c] = std::max(ws[c] + alpha * step[c], 0.0);
    if (blocker < k) ws[blocker] = 0.0;
    double tot = 0;
    for (double x : ws) tot += x;
    if (tot <= 0) return progressed;
    for (double& x : ws) x /= tot;
    progressed = true;

    if (blocker < k) {  // face shrank: rewrite support and start over
      for (std::int64_t c : S) w[c] = 0.0;
      std::vector<std::int64_t> S2;
      std::vector<double> ws2;
      for (std::size_t c = 0; c < k; ++c)
        if (ws[c] > 0) {
          S2.push_back(S[c]);
          ws2.push_back(ws[c]);
        }
      S.swap(S2);
      for (std::size_t c = 0; c < S.size(); ++c) w[S[c]] = ws2[c];
      rebuild();
    }
  }

  for (std::int64_t c = 0; c < m; ++c) w[c] = 0.0;
  for (std::size_t c = 0; c < S.size(); ++c) w[S[c]] = ws[c];
  return progressed;
}

inline void check_rows_covered(const MembershipMatrix& A) {
  std::vector<std::uint64_t> cover(A.words, 0);
  for (std::int64_t c = 0; c < A.cols; ++c)
    for (int w = 0; w < A.words; ++w) cover[w] |= A.col(c)[w];
  for (std::int64_t i = 0; i < A.rows; ++i)
    require((cover[i >> 6] >> (i & 63)) & 1u,
            "observation outside every column: bad membership matrix");
}

}  // namespace detail

inline double log_likelihood(const MembershipMatrix& A, const std::vector<double>& w) {
  require(static_cast<std::int64_t>(w.size()) == A.cols, "weight size mismatch");
  auto csc = detail::to_csc(A);
  std::vector<double> q, scratch;
  auto pass = detail::em_pass(csc, w, q, scratch);
  return pass.loglik;  // -inf when some row probability is zero
}

inline std::vector<double> em_step(const MembershipMatrix& A,
                                   const std::vector<double>& w) {
  require(static_cast<std::int64_t>(w.size()) == A.cols, "weight size mismatch");
  auto csc = detail::to_csc(A);
  std::vector<double> q, wnext;
  auto pass = detail::em_pass(csc, w, q, wnext);
  if (!pass.valid) throw std::runtime_error("em_step: zero row probability");
  return wnext;
}

inline double optimality_gap(const MembershipMatrix& A, const std::vector<double>& w) {
  require(static_cast<std::int64_t>(w.size()) == A.cols, "weight size mismatch");
  auto csc = detail::to_csc(A);
  std::vector<double> q, wnext;
  auto pass = detail::em_pass(csc, w, q, wnext);
  if (!pass.valid) throw std::runtime_error("optimality_gap: zero row probability");
  return pass.gap;
}

struct EmOptions {
  double tol = 1e-8;
  std::int64_t max_iter = 50000;  // counts individual EM sweeps
  bool accelerate = true;         // three-point extrapolation between sweeps
  bool polish = true;             // Newton refinement on the final active face
};

struct MleFit {
  std::vector<double> weights;
  std::vector<double> loglik_trace;  // mean log-likelihood of each accepted iterate
  double loglik = -kInf;             // total log-likelihood at returned weights
  double gap = kInf;
  std::int64_t iterations = 0;
  std::int64_t polish_rounds = 0;
  bool converged = false;
};

// EM from uniform weights until the Fenchel gap drops below tol.  With
// accelerate on, each round runs two EM sweeps, extrapolates through the
// pair of steps (Varadhan-Roland squared scheme), feasibility-clamps, and
// stabilizes with one more sweep; the extrapolated point is kept only when
// its log-likelihood does not fall behind the plain EM path, so the trace
// stays monotone and the certificate is unaffected.
inline MleFit em_solve(const MembershipMatrix& A, const EmOptions& opt = {}) {
  require(A.cols >= 1, "membership matrix has no columns");
  require(opt.tol > 0 && opt.max_iter >= 1, "bad solver options");
  detail::check_rows_covered(A);
  auto csc = detail::to_csc(A);
  const std::int64_t m = A.cols;
  const double n = static_cast<double>(A.rows);

  MleFit fit;
  std::vector<double> w(m, 1.0 / static_cast<double>(m));
  std::vector<double> q, w1, w2, wtry, wnext;
  double prev_ll = -kInf;
  int stalled = 0;
  bool budget_hit = false;

  auto renorm = [](std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    for (double& x : v) x /= s;
  };

  while (true) {
    auto pass = detail::em_pass(csc, w, q, w1);
    fit.loglik_trace.push_back(pass.loglik / n);
    if (pass.gap <= opt.tol) break;
    if (fit.iterations >= opt.max_iter) {
      budget_hit = true;
      break;
    }
    // a vanishing weight decays only harmonically, pinning the certificate
    // above tight tolerances; once sweeps stop moving the likelihood at
    // float resolution, hand the endgame to the Newton polish
    double gain = (pass.loglik - prev_ll) / (1.0 + std::abs(pass.loglik));
    stalled = (prev_ll > -kInf && gain < 1e-13) ? stalled + 1 : 0;
    prev_ll = pass.loglik;
    if (opt.polish && opt.accelerate && pass.gap <= 1e-5 && stalled >= 12) break;

    if (!opt.accelerate) {
      w.swap(w1);
      renorm(w);
      ++fit.iterations;
      continue;
    }

    ++fit.iterations;  // w -> w1
    auto pass1 = detail::em_pass(csc, w1, q, w2);
    ++fit.iterations;  // w1 -> w2
    if (fit.iterations >= opt.max_iter) {
      w.swap(w2);
      renorm(w);
      continue;
    }

    double rr = 0, vv = 0;
    for (std::int64_t c = 0; c < m; ++c) {
      double r = w1[c] - w[c];
      double v = w2[c] - 2.0 * w1[c] + w[c];
      rr += r * r;
      vv += v * v;
    }
    double alpha = vv > 0 ? -std::sqrt(rr / vv) : -1.0;
    if (alpha > -1.0) alpha = -1.0;

    double ref = pass1.loglik;  // log-likelihood at w1; w2 is at least as good
    bool accepted = false;
    for (int bt = 0; bt < 8 && !accepted; ++bt) {
      wtry.resize(static_cast<std::size_t>(m));
      bool feasible = true;
      for (std::int64_t c = 0; c < m; ++c) {
        double r = w1[c] - w[c];
        double v = w2[c] - 2.0 * w1[c] + w[c];
        double x = w[c] - 2.0 * alpha * r + alpha * alpha * v;
        if (x < 0) {
          if (x < -1e-12) feasible = false;
          x = 0;
        }
        wtry[c] = x;
      }
      if (feasible) {
        renorm(wtry);
        auto ptry = detail::em_pass(csc, wtry, q, wnext);
        if (ptry.valid && ptry.loglik >= ref - 1e-12 * (1.0 + std::abs(ref))) {
          w.swap(wnext);  // the stabilizing sweep's output
          renorm(w);
          ++fit.iterations;
          accepted = true;
          break;
        }
      }
      if (alpha == -1.0) break;
      alpha = (alpha - 1.0) / 2.0;  // back toward plain EM
    }
    if (!accepted) {
      w.swap(w2);
      renorm(w);
    }
  }

  if (opt.polish && !budget_hit) {
    // EM leaves the weights a square root of the certificate away from the
    // optimum when support identification is slow; finish on the active
    // face with Newton, re-admitting any excluded column that still breaks
    // the certificate.  Nothing is kept unless the likelihood holds up.
    // Skipped when the iteration budget ran out: the cap means stop.
    std::vector<double> w_best = w;
    double ll_best = detail::em_pass(csc, w, q, w1).loglik;
    std::vector<double> derivs;
    for (int round = 0; round < 30; ++round) {
      bool ran = detail::newton_face_polish(csc, w);
      auto p = detail::em_pass(csc, w, q, w1);
      if (!p.valid) break;
      if (p.loglik >= ll_best) {
        ll_best = p.loglik;
        w_best = w;
      }
      ++fit.polish_rounds;
      if (!ran || p.gap <= opt.tol) break;
      if (!detail::direction_derivs(csc, w, q, derivs)) break;
      std::int64_t cstar = 0;
      for (std::int64_t c = 1; c < m; ++c)
        if (derivs[c] > derivs[cstar]) cstar = c;
      if (w[cstar] == 0.0) {  // certificate breaker off the face: re-admit it
        w[cstar] = 1e-8;
        renorm(w);
      }
      // otherwise the polish ran out of inner rounds mid-shrink (it retires
      // at most one face column per Newton step); keep going
    }
    w = std::move(w_best);
    if (fit.polish_rounds > 0) fit.loglik_trace.push_back(ll_best / n);
  }

  // drop numerically dead support, then report the certificate at the
  // returned weights
  for (double& x : w)
    if (x < 1e-14) x = 0;
  renorm(w);
  auto final_pass = detail::em_pass(csc, w, q, w1);
  fit.gap = final_pass.gap;
  fit.loglik = final_pass.loglik;
  fit.converged = fit.gap <= opt.tol;
  fit.weights = std::move(w);
  return fit;
}

namespace detail {

inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0, tau = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0) {
      k = i + 1;
      tau = t;
    }
  }
  (void)k;
  for (double& x : v) x = std::max(x - tau, 0.0);
  return v;
}

}  // namespace detail

// Reference maximizer for small instances: projected gradient ascent on the
// mean log-likelihood with diminishing steps, many random restarts, then a
// long polish from the best point found.  Intentionally independent of the
// EM code path.
inline std::vector<double> oracle_solve(const MembershipMatrix& A,
                                        std::uint64_t seed = 0x0c0ffee1u,
                                        int restarts = 200) {
  require(A.cols >= 1 && A.cols <= 12, "oracle_solve: at most 12 columns");
  require(A.rows >= 1 && A.rows <= 50, "oracle_solve: at most 50 rows");
  detail::check_rows_covered(A);
  auto csc = detail::to_csc(A);
  const std::int64_t m = A.cols;
  const double n = static_cast<double>(A.rows);

  std::vector<double> q(static_cast<std::size_t>(A.rows));
  auto mean_loglik = [&](const std::vector<double>& w) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::int64_t c = 0; c < m; ++c)
      for (std::int64_t k = csc.start[c]; k < csc.start[c + 1]; ++k)
        q[csc.rows[k]] += w[c];
    double ll = 0;
    for (double qi : q) {
      if (qi < 1e-300) return -1e300;
      ll += std::log(qi);
    }
    return ll / n;
  };
  auto gradient = [&](std::vector<double>& g) {
    // q already holds A w from the last mean_loglik call
    g.assign(static_cast<std::size_t>(m), 0.0);
    for (std::int64_t c = 0; c < m; ++c) {
      double s = 0;
      for (std::int64_t k = csc.start[c]; k < csc.start[c + 1]; ++k)
        s += 1.0 / q[csc.rows[k]];
      g[c] = s / n;
    }
  };

  Rng rng(seed);
  std::vector<double> best, w, g;
  double best_ll = -kInf;

  auto run = [&](std::vector<double> w0, int iters, double step_offset) {
    w = std::move(w0);
    for (int t = 0; t < iters; ++t) {
      double ll = mean_loglik(w);
      if (ll <= -1e299) {  // wandered onto a degenerate face; mix back
        for (double& x : w) x = 0.9 * x + 0.1 / static_cast<double>(m);
        ll = mean_loglik(w);
      }
      if (ll > best_ll) {
        best_ll = ll;
        best = w;
      }
      gradient(g);
      double eta = 0.3 / std::sqrt(step_offset + t + 1.0);
      for (std::int64_t c = 0; c < m; ++c) w[c] += eta * g[c];
      w = detail::project_simplex(std::move(w));
    }
  };

  for (int r = 0; r < restarts; ++r) {
    std::vector<double> w0(static_cast<std::size_t>(m));
    double s = 0;
    for (double& x : w0) {
      x = -std::log(std::max(rng.uniform01(), 1e-300));
      s += x;
    }
    for (double& x : w0) x /= s;
    run(std::move(w0), 1000, 0.0);
  }
  run(best, 250000, 1000.0);
  double final_ll = mean_loglik(best);
  (void)final_ll;
  return best;
}

// Distribution carried by the fitted weights: one rectangle per class, the
// class's smallest cell (ties in the merged class are unidentifiable, so
// the representative is a fixed deterministic choice).
inline DistributionRepr mle_distribution(const CellPartition& P,
                                         const MembershipMatrix& A,
                                         const std::vector<double>& w) {
  require(static_cast<std::int64_t>(w.size()) == A.cols, "weight size mismatch");
  double s = 0;
  for (double x : w) {
    require(x >= 0, "weights must be nonnegative");
    s += x;
  }
  require(std::abs(s - 1.0) <= 1e-9, "weights must sum to 1");
  std::vector<std::int64_t> order(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) order[c] = static_cast<std::int64_t>(c);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return A.rep_cell[a] < A.rep_cell[b];
  });
  DistributionRepr F;
  F.d = P.d;
  for (std::int64_t c : order) {
    if (w[c] <= 0) continue;
    F.rects.push_back(P.cell_rect(A.rep_cell[c]));
    F.weights.push_back(w[c] / s);
  }
  return F;
}

struct NpmleOptions {
  BuildOptions build;
  EmOptions em;
};

struct NpmleResult {
  CellPartition partition;
  MembershipMatrix matrix;
  MleFit fit;
  DistributionRepr distribution;
  std::int64_t total_cells = 0;
};

inline NpmleResult npmle_fit(const std::vector<Observation>& obs,
                             const NpmleOptions& opt = {}) {
  NpmleResult out;
  out.partition = build_partition(obs);
  out.total_cells = out.partition.cell_count();
  out.matrix = build_membership(out.partition, obs, opt.build);
  out.fit = em_solve(out.matrix, opt.em);
  out.distribution = mle_distribution(out.partition, out.matrix, out.fit.weights);
  return out;
}

}  // namespace curstat
