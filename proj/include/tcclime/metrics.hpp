#pragma once

// Support-recovery ROC, estimation errors, and the simulation benchmark harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "tcclime/estimators.hpp"
#include "tcclime/simulation.hpp"
#include "tcclime/tuning.hpp"

namespace tcclime {

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

inline constexpr double kEdgeFloor = 1e-12;

/// Sweeps a magnitude threshold over the upper-triangle entries of the estimate.
/// At threshold t the declared edges are the entries with |w_ij| >= t. The curve
/// starts at (0, 0) with threshold +inf and ends at (1, 1).
///
/// `n_thresholds` = 0 uses every distinct magnitude; otherwise at most that many,
/// evenly spaced through the sorted distinct magnitudes (the smallest is always kept).
inline std::vector<RocPoint> roc_from_estimate(const Matrix& omega_hat, const Matrix& omega_true,
                                               std::size_t n_thresholds = 0) {
  require(omega_hat.rows() == omega_true.rows() && omega_hat.cols() == omega_true.cols() &&
              omega_true.rows() == omega_true.cols(),
          Errc::dimension_mismatch, "ROC inputs differ in size");
  const Eigen::Index p = omega_true.rows();
  struct Entry {
    double mag;
    bool edge;
  };
  std::vector<Entry> entries;
  std::size_t n_true = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const bool edge = std::abs(omega_true(i, j)) > kEdgeFloor;
      n_true += edge;
      entries.push_back({std::abs(omega_hat(i, j)), edge});
    }
  const std::size_t n_false = entries.size() - n_true;
  require(n_true > 0 && n_false > 0, Errc::degenerate_truth, "true graph is empty or complete");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.mag > b.mag; });

  // Group boundaries: entries[0, ends[g]) have magnitude >= the g-th distinct value.
  std::vector<std::size_t> ends;
  for (std::size_t i = 1; i <= entries.size(); ++i)
    if (i == entries.size() || entries[i].mag != entries[i - 1].mag) ends.push_back(i);
  std::vector<std::size_t> keep;
  if (n_thresholds == 0 || n_thresholds >= ends.size()) {
    for (std::size_t g = 0; g < ends.size(); ++g) keep.push_back(g);
  } else {
    for (std::size_t k = 1; k <= n_thresholds; ++k) keep.push_back((k * ends.size()) / n_thresholds - 1);
  }

  std::vector<RocPoint> roc{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0, pos = 0;
  for (std::size_t g : keep) {
    for (; pos < ends[g]; ++pos) (entries[pos].edge ? tp : fp) += 1;
    roc.push_back({entries[ends[g] - 1].mag, static_cast<double>(tp) / static_cast<double>(n_true),
                   static_cast<double>(fp) / static_cast<double>(n_false)});
  }
  if (roc.back().tpr != 1.0 || roc.back().fpr != 1.0) roc.push_back({0.0, 1.0, 1.0});
  return roc;
}

/// Trapezoidal area under the curve.
inline double roc_auc(const std::vector<RocPoint>& roc) {
  double a = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    a += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
  return a;
}

/// TPR of a piecewise-linear curve at a given FPR; on vertical runs the highest TPR.
inline double tpr_at(const std::vector<RocPoint>& roc, double fpr) {
  double best = 0.0;
  bool hit = false;
  for (const auto& pt : roc)
    if (pt.fpr == fpr) {
      best = hit ? std::max(best, pt.tpr) : pt.tpr;
      hit = true;
    }
  if (hit) return best;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const auto& a = roc[i - 1];
    const auto& b = roc[i];
    if (a.fpr < fpr && fpr < b.fpr) return a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
  }
  return roc.back().tpr;
}

inline std::vector<double> fpr_grid(std::size_t points = 101) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

inline double frobenius_error(const Matrix& omega_hat, const Matrix& omega_true) {
  require(omega_hat.rows() == omega_true.rows() && omega_hat.cols() == omega_true.cols(), Errc::dimension_mismatch,
          "frobenius_error inputs differ in size");
  return (symmetrize_min(omega_hat).matrix() - omega_true).norm();
}

/// Column-wise l2 norms of sym(omega_hat) - omega_true.
inline std::vector<double> column_l2_errors(const Matrix& omega_hat, const Matrix& omega_true) {
  const Matrix diff = symmetrize_min(omega_hat).matrix() - omega_true;
  std::vector<double> e(static_cast<std::size_t>(diff.cols()));
  for (Eigen::Index j = 0; j < diff.cols(); ++j) e[static_cast<std::size_t>(j)] = diff.col(j).norm();
  return e;
}

/// (1/p) ||sym(omega_hat) - omega_true||_F^2: the mean squared column error.
inline double mean_column_sq_error(const Matrix& omega_hat, const Matrix& omega_true) {
  const double f = frobenius_error(omega_hat, omega_true);
  return f * f / static_cast<double>(omega_true.cols());
}

// ---------------------------------------------------------------------------
// Benchmark harness

struct TrialResult {
  Method method = Method::CC;
  double frobenius_error = 0.0;
  std::vector<double> column_l2_errors;
  std::vector<RocPoint> roc;
  std::uint64_t seed = 0;
  double c_n = 0.0;
  bool ok = true;
  std::string error;
};

struct SuiteConfig {
  std::vector<DesignKind> designs{DesignKind::banded};
  std::vector<TransformKind> transforms{TransformKind::linear};
  std::vector<double> r_values{10.0};
  std::vector<int> n_info{3};
  std::vector<Method> methods{Method::C, Method::TC, Method::PC, Method::CC, Method::CTC, Method::CPC};
  int trials = 100;
  Eigen::Index p = 100;
  Eigen::Index n = 200;
  Eigen::Index n_k = 200;
  int K = 5;
  double mu_g0 = 0.05;
  double sigma_g0 = 0.4;
  double pd_eps = kDefaultPdEps;
  double split_fraction = 2.0 / 3.0;
  bool cross_validate = true;
  double fixed_c_n = 1.0;  // used when cross_validate is false
  CvGrid grid{};
  std::size_t roc_points = 101;
  std::uint64_t master_seed = 20240101;
  unsigned parallel = 1;
};

struct Cell {
  DesignKind design;
  TransformKind transform;
  double r;
  int n_info;
};

inline std::vector<Cell> suite_cells(const SuiteConfig& cfg) {
  std::vector<Cell> cells;
  for (auto d : cfg.designs)
    for (auto t : cfg.transforms)
      for (double r : cfg.r_values)
        for (int k : cfg.n_info) cells.push_back({d, t, r, k});
  return cells;
}

/// Trial seed keyed by the cell's parameters, so each cell's data does not
/// depend on which other cells are in the suite.
inline std::uint64_t trial_seed(std::uint64_t master, const Cell& c, int trial) {
  return derive_seed(master, {static_cast<std::uint64_t>(c.design), static_cast<std::uint64_t>(c.transform),
                              static_cast<std::uint64_t>(std::llround(c.r * 1000.0)),
                              static_cast<std::uint64_t>(c.n_info), static_cast<std::uint64_t>(trial)});
}

inline constexpr std::uint64_t kPipelineStream = 4;

inline SimulationConfig simulation_for(const SuiteConfig& cfg, const Cell& c, std::uint64_t seed) {
  SimulationConfig s;
  s.design = c.design;
  s.transform = {c.transform, cfg.mu_g0, cfg.sigma_g0};
  s.p = cfg.p;
  s.n = cfg.n;
  s.n_k = cfg.n_k;
  s.K = cfg.K;
  s.informative.clear();
  for (int k = 1; k <= c.n_info; ++k) s.informative.push_back(k);
  s.r = c.r;
  s.pd_eps = cfg.pd_eps;
  s.seed = seed;
  return s;
}

inline TransferConfig transfer_for(const SuiteConfig& cfg, const SimulatedBundle& b, std::uint64_t seed) {
  TransferConfig t;
  t.informative_set = b.informative;
  t.c_n = cfg.fixed_c_n;
  t.split_fraction = cfg.split_fraction;
  t.seed = derive_seed(seed, {kPipelineStream});
  return t;
}

/// One trial: simulate the bundle, fit every method on the same data, score each.
inline std::vector<TrialResult> run_trial(const SuiteConfig& cfg, const Cell& cell, int trial,
                                          const PrecisionModel& truth) {
  const std::uint64_t seed = trial_seed(cfg.master_seed, cell, trial);
  const SimulatedBundle b = simulate_bundle(simulation_for(cfg, cell, seed), truth);
  const TransferConfig tcfg = transfer_for(cfg, b, seed);
  std::vector<TrialResult> out;
  for (Method m : cfg.methods) {
    TrialResult r;
    r.method = m;
    r.seed = seed;
    try {
      PrecisionEstimate est;
      if (cfg.cross_validate) {
        auto tuned = fit_tuned(b.target, b.aux, tcfg, cfg.grid, m, cfg.pd_eps);
        est = std::move(tuned.estimate);
        r.c_n = tuned.cv.best;
      } else {
        est = run_pipeline(b.target, b.aux, tcfg, m);
        r.c_n = tcfg.c_n;
      }
      r.frobenius_error = frobenius_error(est.omega, truth.omega.matrix());
      r.column_l2_errors = column_l2_errors(est.omega, truth.omega.matrix());
      r.roc = roc_from_estimate(est.omega, truth.omega.matrix());
    } catch (const Error& e) {
      r.ok = false;
      r.error = e.what();
      r.frobenius_error = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct CellSummary {
  Cell cell;
  Method method;
  int trials_ok = 0;
  double mean_frob = 0.0;
  double se_frob = 0.0;
  std::vector<double> mean_tpr;  // on the fpr grid
};

struct FailedTrial {
  Cell cell;
  int trial;
  Method method;
  std::uint64_t seed;
  std::string error;
};

struct BenchmarkResult {
  SuiteConfig config;
  std::vector<Cell> cells;
  // trials[cell][trial] holds one TrialResult per method, in config order.
  std::vector<std::vector<std::vector<TrialResult>>> trials;
  std::vector<CellSummary> summary;
  std::vector<FailedTrial> failures;
  std::vector<double> fpr;
};

/// Runs the suite on `cfg.parallel` workers. Jobs are (cell, trial) pairs written
/// into fixed slots, so the result is identical for any worker count.
inline BenchmarkResult run_benchmark(const SuiteConfig& cfg) {
  require(cfg.trials >= 1, Errc::invalid_argument, "benchmark needs at least one trial");
  require(!cfg.methods.empty(), Errc::invalid_argument, "benchmark needs at least one method");
  for (int k : cfg.n_info) require(k >= 0 && k <= cfg.K, Errc::invalid_argument, "n_info must lie in 0..K");
  BenchmarkResult res;
  res.config = cfg;
  res.cells = suite_cells(cfg);
  res.fpr = fpr_grid(cfg.roc_points);
  res.trials.assign(res.cells.size(), std::vector<std::vector<TrialResult>>(static_cast<std::size_t>(cfg.trials)));

  std::vector<PrecisionModel> truths;
  for (const auto& c : res.cells) truths.push_back(make_design(c.design, cfg.p));

  const std::size_t jobs = res.cells.size() * static_cast<std::size_t>(cfg.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t c = j / static_cast<std::size_t>(cfg.trials);
      const int t = static_cast<int>(j % static_cast<std::size_t>(cfg.trials));
      res.trials[c][static_cast<std::size_t>(t)] = run_trial(cfg, res.cells[c], t, truths[c]);
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.parallel, static_cast<unsigned>(jobs)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      CellSummary s{res.cells[c], cfg.methods[mi], 0, 0.0, 0.0, std::vector<double>(res.fpr.size(), 0.0)};
      std::vector<double> errs;
      for (int t = 0; t < cfg.trials; ++t) {
        const TrialResult& r = res.trials[c][static_cast<std::size_t>(t)][mi];
        if (!r.ok) {
          res.failures.push_back({res.cells[c], t, r.method, r.seed, r.error});
          continue;
        }
        errs.push_back(r.frobenius_error);
        for (std::size_t g = 0; g < res.fpr.size(); ++g) s.mean_tpr[g] += tpr_at(r.roc, res.fpr[g]);
      }
      s.trials_ok = static_cast<int>(errs.size());
      if (!errs.empty()) {
        double sum = 0.0;
        for (double e : errs) sum += e;
        s.mean_frob = sum / static_cast<double>(errs.size());
        double ss = 0.0;
        for (double e : errs) ss += (e - s.mean_frob) * (e - s.mean_frob);
        s.se_frob = errs.size() > 1 ? std::sqrt(ss / static_cast<double>(errs.size() - 1) / static_cast<double>(errs.size())) : 0.0;
        for (double& v : s.mean_tpr) v /= static_cast<double>(errs.size());
      } else {
        s.mean_frob = std::numeric_limits<double>::quiet_NaN();
        s.se_frob = std::numeric_limits<double>::quiet_NaN();
      }
      res.summary.push_back(std::move(s));
    }
  }
  return res;
}

inline std::string format_r(double r) {
  std::string s = format_double(r);
  return s;
}

/// results.csv: design,transform,r,n_info,method,trial,frob (failed fits carry frob = nan).
inline void write_results_csv(std::ostream& os, const BenchmarkResult& res) {
  os << "design,transform,r,n_info,method,trial,frob\n";
  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    const Cell& cell = res.cells[c];
    for (std::size_t t = 0; t < res.trials[c].size(); ++t)
      for (const auto& r : res.trials[c][t])
        os << to_string(cell.design) << ',' << to_string(cell.transform) << ',' << format_r(cell.r) << ','
           << cell.n_info << ',' << to_string(r.method) << ',' << t << ','
           << (r.ok ? format_double(r.frobenius_error) : std::string("nan")) << '\n';
  }
}

/// roc_mean.csv: design,transform,r,n_info,fpr,<one mean-TPR column per method>.
inline void write_roc_mean_csv(std::ostream& os, const BenchmarkResult& res) {
  os << "design,transform,r,n_info,fpr";
  for (Method m : res.config.methods) os << ',' << to_string(m);
  os << '\n';
  const std::size_t nm = res.config.methods.size();
  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    const Cell& cell = res.cells[c];
    for (std::size_t g = 0; g < res.fpr.size(); ++g) {
      os << to_string(cell.design) << ',' << to_string(cell.transform) << ',' << format_r(cell.r) << ','
         << cell.n_info << ',' << format_double(res.fpr[g]);
      for (std::size_t mi = 0; mi < nm; ++mi) os << ',' << format_double(res.summary[c * nm + mi].mean_tpr[g]);
      os << '\n';
    }
  }
}

/// summary.csv: per cell and method, mean and standard error of the Frobenius error.
inline void write_summary_csv(std::ostream& os, const BenchmarkResult& res) {
  os << "design,transform,r,n_info,method,trials_ok,mean_frob,se_frob\n";
  for (const auto& s : res.summary)
    os << to_string(s.cell.design) << ',' << to_string(s.cell.transform) << ',' << format_r(s.cell.r) << ','
       << s.cell.n_info << ',' << to_string(s.method) << ',' << s.trials_ok << ',' << format_double(s.mean_frob)
       << ',' << format_double(s.se_frob) << '\n';
}

}  // namespace tcclime
