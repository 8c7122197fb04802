#pragma once

// Convergence-rate benchmark: simulate current-status datasets from a known
// truth along a ladder of sample sizes, fit the NPMLE, measure Hellinger
// and L2(G0) distances to the truth, and regress the per-n medians.  All
// randomness is derived from one master seed per (n, rep) pair, so tables
// are reproducible record-by-record regardless of execution order.

#include <atomic>
#include <numeric>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

#include "curstat/gcm.hpp"
#include "curstat/metrics.hpp"
#include "curstat/npmle.hpp"

namespace curstat {

enum class TruthKind { uniform, tilted };

struct BenchConfig {
  int d = 1;
  TruthKind truth = TruthKind::uniform;
  std::vector<std::int64_t> ladder;
  int replications = 40;
  std::uint64_t seed = 20260825;
  double tol = 1e-7;
  std::int64_t max_iter = 200000;
  bool accelerate = true;
  bool prune = true;  // membership pruning for the d >= 2 solver
  Integrator integrator = GaussLegendre{64};
  int threads = 1;

  void validate() const {
    require(d >= 1 && d <= Limits::max_dimension, "dimension out of range");
    require(!ladder.empty(), "ladder must not be empty");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      require(ladder[i] >= 1, "ladder entries must be >= 1");
      require(i == 0 || ladder[i] > ladder[i - 1], "ladder must be strictly increasing");
    }
    require(replications >= 1, "need at least one replication");
    require(tol > 0 && max_iter >= 1, "bad solver options");
    require(threads >= 1, "threads must be >= 1");
    validate_integrator(integrator);
  }

  static BenchConfig defaults(int d) {
    BenchConfig c;
    c.d = d;
    if (d == 1) {
      c.ladder = {100, 200, 400, 800, 1600, 3200};
      c.replications = 40;
    } else if (d == 2) {
      c.ladder = {50, 100, 200, 400, 800};
      c.replications = 20;
    } else {
      c.ladder = {50, 100, 200};
      c.replications = 10;
      c.integrator = MonteCarloInt{200000, 0x6d6373u};
    }
    return c;
  }

  TruthSpec make_truth() const {
    return truth == TruthKind::uniform ? TruthSpec::uniform(d)
                                       : TruthSpec::tilted(d, 2.0, 1.0);
  }
};

inline std::vector<Observation> sample_dataset(const TruthSpec& truth,
                                               std::int64_t n, std::uint64_t seed) {
  require(n >= 1, "need at least one observation");
  truth.validate();
  Rng rng(seed);
  int d = truth.dim();
  std::vector<Observation> obs(static_cast<std::size_t>(n));
  for (auto& o : obs) {
    auto y = truth.F0.sample(rng);
    o.t = truth.G0.sample(rng);
    o.delta.resize(d);
    for (int j = 0; j < d; ++j) o.delta[j] = y[j] <= o.t[j] ? 1 : 0;
  }
  return obs;
}

struct RateRecord {
  std::int64_t n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  double hellinger = 0;
  double l2 = 0;
  std::int64_t iterations = 0;
  double gap = 0;
  bool converged = false;
  std::int64_t wall_ms = 0;
};

struct RateTable {
  BenchConfig config;
  std::vector<RateRecord> records;
};

namespace detail {

inline RateRecord bench_one(const BenchConfig& cfg, const TruthSpec& truth,
                            std::int64_t n, int rep) {
  RateRecord rec;
  rec.n = n;
  rec.rep = rep;
  rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(n),
                         static_cast<std::uint64_t>(rep));
  auto t0 = std::chrono::steady_clock::now();
  auto obs = sample_dataset(truth, n, rec.seed);

  DistributionRepr F;
  if (cfg.d == 1) {
    std::vector<ScalarObs> so(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
      so[i] = {obs[i].t[0], obs[i].delta[0]};
    F = step_to_repr(gcm_mle(so));  // exact one-dimensional solution
    rec.gap = 0;
    rec.iterations = 0;
    rec.converged = true;
  } else {
    NpmleOptions opt;
    opt.build.prune = cfg.prune;
    opt.em.tol = cfg.tol;
    opt.em.max_iter = cfg.max_iter;
    opt.em.accelerate = cfg.accelerate;
    auto res = npmle_fit(obs, opt);
    F = std::move(res.distribution);
    rec.gap = res.fit.gap;
    rec.iterations = res.fit.iterations;
    rec.converged = res.fit.converged;
  }

  Integrator ig = cfg.integrator;
  if (std::holds_alternative<MonteCarloInt>(ig))
    std::get<MonteCarloInt>(ig).seed = derive_seed(rec.seed, 0xb00b5u);
  ProductEvaluator truth_eval(truth.F0);
  if (cfg.d == 2) {
    GridEvaluator fit_eval(F);
    rec.hellinger = hellinger(fit_eval, truth_eval, truth.G0, truth.M, ig).value;
    rec.l2 = l2_g0(fit_eval, truth_eval, truth.G0, truth.M, ig).value;
  } else {
    ReprEvaluator fit_eval(F);
    rec.hellinger = hellinger(fit_eval, truth_eval, truth.G0, truth.M, ig).value;
    rec.l2 = l2_g0(fit_eval, truth_eval, truth.G0, truth.M, ig).value;
  }
  rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

}  // namespace detail

inline RateTable run_ladder(const BenchConfig& cfg) {
  cfg.validate();
  TruthSpec truth = cfg.make_truth();
  RateTable table;
  table.config = cfg;
  std::vector<std::pair<std::int64_t, int>> jobs;
  for (std::int64_t n : cfg.ladder)
    for (int rep = 0; rep < cfg.replications; ++rep) jobs.emplace_back(n, rep);
  table.records.resize(jobs.size());
  if (cfg.threads == 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k)
      table.records[k] = detail::bench_one(cfg, truth, jobs[k].first, jobs[k].second);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        std::size_t k = next.fetch_add(1);
        if (k >= jobs.size()) return;
        table.records[k] = detail::bench_one(cfg, truth, jobs[k].first, jobs[k].second);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return table;
}

enum class RateModel { pure_power, fixed_log };

struct RateFit {
  RateModel model = RateModel::pure_power;
  int d = 1;
  double exponent = 0;    // slope on log n (fixed at -1/3 for fixed_log)
  double log_exponent = 0;  // exponent on log n (0 for pure_power)
  double constant = 0;
  double resid_se = 0;
  std::vector<std::pair<std::int64_t, double>> medians;
};

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

inline std::vector<std::pair<std::int64_t, double>> median_hellinger(
    const RateTable& table) {
  std::vector<std::pair<std::int64_t, double>> out;
  for (std::int64_t n : table.config.ladder) {
    std::vector<double> h;
    for (const auto& r : table.records)
      if (r.n == n) h.push_back(r.hellinger);
    require(!h.empty(), "ladder entry missing from records");
    out.emplace_back(n, median_of(std::move(h)));
  }
  return out;
}

// gamma_d = (5d-4)/6 for d >= 2; the one-dimensional rate has no log factor
inline double rate_log_exponent(int d) {
  require(d >= 1, "dimension must be >= 1");
  return d == 1 ? 0.0 : (5.0 * d - 4.0) / 6.0;
}

inline RateFit fit_rate(const RateTable& table, RateModel model) {
  auto med = median_hellinger(table);
  require(med.size() >= 3, "need at least three ladder sizes to fit a rate");
  RateFit fit;
  fit.model = model;
  fit.d = table.config.d;
  fit.medians = med;
  std::size_t k = med.size();
  if (model == RateModel::pure_power) {
    // least squares on log median = a + b log n
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [n, m] : med) {
      require(m > 0, "median distance must be positive to fit a power law");
      double x = std::log(static_cast<double>(n)), y = std::log(m);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double nk = static_cast<double>(k);
    double b = (nk * sxy - sx * sy) / (nk * sxx - sx * sx);
    double a = (sy - b * sx) / nk;
    fit.exponent = b;
    fit.log_exponent = 0;
    fit.constant = std::exp(a);
    double rss = 0;
    for (auto [n, m] : med) {
      double e = std::log(m) - (a + b * std::log(static_cast<double>(n)));
      rss += e * e;
    }
    fit.resid_se = k > 2 ? std::sqrt(rss / static_cast<double>(k - 2)) : 0.0;
  } else {
    // median = C n^{-1/3} (log n)^{gamma_d}; average the implied log C
    double g = rate_log_exponent(table.config.d);
    std::vector<double> logc;
    for (auto [n, m] : med) {
      require(m > 0, "median distance must be positive to fit a rate");
      double ln = std::log(static_cast<double>(n));
      logc.push_back(std::log(m) + ln / 3.0 - g * std::log(ln));
    }
    double mean = 0;
    for (double v : logc) mean += v;
    mean /= static_cast<double>(k);
    fit.exponent = -1.0 / 3.0;
    fit.log_exponent = g;
    fit.constant = std::exp(mean);
    double rss = 0;
    for (double v : logc) rss += (v - mean) * (v - mean);
    fit.resid_se = k > 1 ? std::sqrt(rss / static_cast<double>(k - 1)) : 0.0;
  }
  return fit;
}

struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Rate bookkeeping: r_n = n^{1/3} / (log n)^{gamma}, phi(delta) =
// sqrt(delta) (log(1/delta))^{3 gamma / 2}, and the identity
// r_n^2 phi(1/r_n) = sqrt(n) ((log r_n)/(log n))^{3 gamma/2}.  The literal
// ratio creeps upward with n because log r_n = (1/3) log n - gamma loglog n;
// replacing log r_n by its leading term (1/3) log n makes it exactly the
// constant 3^{-3 gamma/2}.
struct RateTheory {
  int d = 1;
  Rational gamma;  // {0,1} for d = 1
  Rational beta;   // 2 gamma

  double r_n(double n) const {
    require(n > 1, "n must exceed 1");
    return std::pow(n, 1.0 / 3.0) / std::pow(std::log(n), gamma.value());
  }

  double phi(double delta) const {
    require(delta > 0 && delta < 1, "delta must lie in (0,1)");
    return std::sqrt(delta) *
           std::pow(std::log(1.0 / delta), 1.5 * gamma.value());
  }

  double bookkeeping_ratio(double n) const {
    double r = r_n(n);
    return r * r * phi(1.0 / r) / std::sqrt(n);
  }

  double bookkeeping_ratio_leading(double n) const {
    double r = r_n(n);
    double phi_leading = std::sqrt(1.0 / r) *
                         std::pow(std::log(n) / 3.0, 1.5 * gamma.value());
    return r * r * phi_leading / std::sqrt(n);
  }

  double bookkeeping_limit() const {
    return std::pow(3.0, -1.5 * gamma.value());
  }
};

inline RateTheory theoretical_rates(int d) {
  require(d >= 1, "dimension must be >= 1");
  RateTheory th;
  th.d = d;
  if (d == 1) {
    th.gamma = {0, 1};
    th.beta = {0, 1};
    return th;
  }
  auto reduced = [](long long num, long long den) {
    long long g = std::gcd(num, den);
    return Rational{num / g, den / g};
  };
  th.gamma = reduced(5LL * d - 4, 6);
  th.beta = reduced(5LL * d - 4, 3);
  return th;
}

}  // namespace curstat
