// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            exit 1 if a criterion fails outside the known-deviation list
//   acceptance --strict   exit 1 on any failure
//   acceptance --only 3,7 run a subset

#include <sys/wait.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support/oracles.hpp"
#include "tcclime/metrics.hpp"

using namespace tcclime;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
  bool known_deviation = false;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned workers() {
  if (const char* env = std::getenv("TCC_THREADS"))
    if (std::atoi(env) > 0) return static_cast<unsigned>(std::atoi(env));
  return std::max(1u, std::thread::hardware_concurrency());
}

StudyDataset as_dataset(Matrix x) {
  StudyDataset d;
  d.x = std::move(x);
  d.label = "acceptance";
  return d;
}

// -- 1 ---------------------------------------------------------------------

Outcome kendall_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  int mismatches = 0, tied = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(299);
    const bool ties = rep % 2 == 1;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = ties ? std::floor(rng.uniform() * 6.0) : rng.normal();
      y[i] = ties ? std::floor(rng.uniform() * 6.0) : rng.normal();
    }
    tied += ties;
    const double fast = kendall_tau_pair(std::span<const double>(x), std::span<const double>(y));
    mismatches += fast != testing::naive_kendall_tau(x, y);
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(mismatches) + " mismatches over 200 vectors (" + std::to_string(tied) + " with ties), " +
              fmt(secs, 3) + " s"};
}

// -- 2 ---------------------------------------------------------------------

Outcome monotone_invariance() {
  Rng rng(202);
  const GaussianCdfTransform cdf(0.05, 0.4);
  int broken = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index p = 4 + static_cast<Eigen::Index>(rng.below(5));
    const Eigen::Index n = 30 + static_cast<Eigen::Index>(rng.below(150));
    const auto sigma = rescale_to_correlation(SymMatrix(testing::random_pd(p, rng, 0.3)));
    auto z = sample_nonparanormal(sigma, {TransformKind::linear}, n, rng).x;
    // Keep values inside the range where the CDF transform is strictly increasing in double.
    z = (3.0 * (z.array() / 3.0).tanh()).matrix();
    const auto base = rank_correlation_matrix(as_dataset(z)).s_hat;
    const Matrix ex = z.array().exp().matrix();
    const Matrix cube = z.array().cube().matrix();
    const Matrix gc = z.unaryExpr([&](double v) { return cdf(v); });
    for (const Matrix* m : {&ex, &cube, &gc}) broken += !(rank_correlation_matrix(as_dataset(*m)).s_hat == base);
  }
  return {broken == 0, std::to_string(broken) + " of 60 transformed datasets differ bit-for-bit"};
}

// -- 3 ---------------------------------------------------------------------

Outcome lp_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);
  double worst_obj = 0.0, worst_viol = 0.0;
  int not_optimal = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(5));
    const Matrix a = testing::random_pd(p, rng, 0.3);
    Vector b(p);
    if (rep % 2 == 0) {
      b = Vector::Unit(p, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p))));
    } else {
      for (Eigen::Index i = 0; i < p; ++i) b[i] = rng.uniform(-1.0, 1.0);
    }
    const double lambda = rng.uniform(0.01, 0.4);
    const auto s = solve_column({a, b, lambda});
    if (s.status != SolveStatus::optimal) {
      ++not_optimal;
      continue;
    }
    worst_obj = std::max(worst_obj, std::abs(s.omega.lpNorm<1>() - testing::lp_vertex_oracle(a, b, lambda)));
    worst_viol = std::max(worst_viol, (a * s.omega - b).cwiseAbs().maxCoeff() - lambda);
  }
  const double secs = seconds_since(t0);
  return {not_optimal == 0 && worst_obj <= 1e-6 && worst_viol <= 1e-7 && secs < 30.0,
          "max |objective gap| " + fmt(worst_obj) + ", max violation beyond lambda " + fmt(worst_viol) + ", " +
              std::to_string(not_optimal) + " non-optimal, " + fmt(secs, 3) + " s"};
}

// -- 4 ---------------------------------------------------------------------

Outcome zero_transfer() {
  SimulationConfig cfg;
  cfg.p = 20;
  cfg.n = 150;
  cfg.K = 0;
  cfg.informative = {};
  cfg.transform = {TransformKind::exponential};
  cfg.seed = 404;
  const auto b = simulate_bundle(cfg);
  const std::vector<StudyDataset> copies(3, b.target);
  const auto s = rank_correlation_matrix(b.target).s_hat;
  const auto ac = aux_correlation(copies, {1, 2, 3}, true);
  const auto l = default_lambdas(0.5, cfg.p, static_cast<std::size_t>(cfg.n), ac.n_a);
  const auto fit = fit_transfer(s, ac.s_a, l);
  const bool delta_zero = fit.delta0.delta.isZero(0.0);
  const bool same = fit.omega_tr.omega == copula_clime(s, l.omega).omega;
  return {delta_zero && same, std::string("initial divergence ") + (delta_zero ? "exactly zero" : "nonzero") +
                                  ", transfer output " + (same ? "identical to" : "differs from") +
                                  " single-study CLIME at lambda_Omega"};
}

// -- 5 ---------------------------------------------------------------------

Outcome refine_closed_form() {
  Rng rng(505);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng.below(4));
    const auto s = rescale_to_correlation(SymMatrix(testing::random_pd(p, rng, 0.5)));
    const auto sa = rescale_to_correlation(SymMatrix(testing::random_pd(p, rng, 0.5)));
    PrecisionEstimate w;
    w.omega = testing::random_gaussian_matrix(p, p, rng);
    const DivergenceEstimate d0{0.2 * testing::random_gaussian_matrix(p, p, rng), DeltaStage::initial};
    const double lambda = rng.uniform(0.02, 0.3);
    worst = std::max(worst, max_norm(refine_delta(d0, w, s, sa, lambda).delta -
                                     refine_delta_generic(d0, w, s, sa, lambda).delta));
  }
  return {worst <= 1e-8, "max entrywise gap " + fmt(worst) + " over 20 instances"};
}

// -- 6 ---------------------------------------------------------------------

Outcome concentration() {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index p = 50, n = 400;
  const double bound = 4.0 * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
  int within = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng(derive_seed(606, {static_cast<std::uint64_t>(rep)}));
    const auto s = rank_correlation_matrix(as_dataset(testing::iid_normal(n, p, rng))).s_hat;
    const double dev = max_norm(s.matrix() - Matrix::Identity(p, p));
    worst = std::max(worst, dev);
    within += dev <= bound;
  }
  const double secs = seconds_since(t0);
  return {within >= 95 && secs < 60.0, std::to_string(within) + "/100 within " + fmt(bound) + " (worst " + fmt(worst) +
                                           "), " + fmt(secs, 3) + " s"};
}

// -- 7, 8 ------------------------------------------------------------------

struct Paired {
  double mean_a = 0.0, mean_b = 0.0, mean_diff = 0.0, se_diff = 0.0;
  int n = 0;
};

// Paired over trials: a and b are fitted on the same simulated bundle.
Paired paired(const BenchmarkResult& r, std::size_t ia, std::size_t ib) {
  std::vector<double> a, b;
  for (const auto& trial : r.trials[0]) {
    if (!trial[ia].ok || !trial[ib].ok) continue;
    a.push_back(trial[ia].frobenius_error);
    b.push_back(trial[ib].frobenius_error);
  }
  Paired out;
  out.n = static_cast<int>(a.size());
  if (out.n < 2) return out;
  double ss = 0.0;
  for (int i = 0; i < out.n; ++i) {
    out.mean_a += a[i] / out.n;
    out.mean_b += b[i] / out.n;
  }
  out.mean_diff = out.mean_a - out.mean_b;
  for (int i = 0; i < out.n; ++i) ss += std::pow(a[i] - b[i] - out.mean_diff, 2);
  out.se_diff = std::sqrt(ss / (out.n - 1) / out.n);
  return out;
}

SuiteConfig reduced_cell(TransformKind t, std::vector<Method> methods) {
  SuiteConfig s;
  s.designs = {DesignKind::banded};
  s.transforms = {t};
  s.r_values = {10.0};
  s.n_info = {2};
  s.methods = std::move(methods);
  s.trials = 50;
  s.p = 50;
  s.n = 150;
  s.n_k = 150;
  s.K = 3;
  s.cross_validate = true;
  s.parallel = workers();
  return s;
}

std::string describe(const char* a, const char* b, const Paired& d) {
  return std::string(a) + " " + fmt(d.mean_a) + " vs " + b + " " + fmt(d.mean_b) + ", diff " + fmt(d.mean_diff) +
         " (se " + fmt(d.se_diff, 3) + ", " + std::to_string(d.n) + " trials)";
}

Outcome exp_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_benchmark(reduced_cell(TransformKind::exponential, {Method::CC, Method::TC, Method::CTC}));
  const Paired vs_cc = paired(r, 2, 0), vs_tc = paired(r, 2, 1);
  const bool pass = vs_cc.n >= 45 && vs_tc.n >= 45 && -vs_cc.mean_diff > vs_cc.se_diff && -vs_tc.mean_diff > vs_tc.se_diff;
  return {pass, describe("CTC", "CC", vs_cc) + "; " + describe("CTC", "TC", vs_tc) + "; " + fmt(seconds_since(t0), 4) +
                    " s"};
}

Outcome gaussian_parity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_benchmark(reduced_cell(TransformKind::linear, {Method::TC, Method::CTC}));
  const Paired d = paired(r, 1, 0);
  // Unpaired standard error for comparison.
  double se_unpaired = 0.0;
  for (const auto& sm : r.summary) se_unpaired += sm.se_frob * sm.se_frob;
  se_unpaired = std::sqrt(se_unpaired);
  const bool pass = d.n >= 45 && std::abs(d.mean_diff) <= 3.0 * d.se_diff;
  return {pass, describe("CTC", "TC", d) + ", |diff|/se " + fmt(std::abs(d.mean_diff) / d.se_diff, 3) +
                    " paired, " + fmt(std::abs(d.mean_diff) / se_unpaired, 3) + " unpaired; " +
                    fmt(seconds_since(t0), 4) + " s"};
}

// -- 9, 10 -----------------------------------------------------------------

Outcome cc_rate() {
  double err[2] = {0.0, 0.0};
  const Eigen::Index sizes[2] = {200, 400};
  for (int k = 0; k < 2; ++k) {
    for (int rep = 0; rep < 30; ++rep) {
      SimulationConfig cfg;
      cfg.p = 50;
      cfg.n = sizes[k];
      cfg.K = 0;
      cfg.informative = {};
      cfg.transform = {TransformKind::gaussian_cdf};
      cfg.seed = derive_seed(909, {static_cast<std::uint64_t>(rep)});
      const auto b = simulate_bundle(cfg);
      TransferConfig tc;
      tc.c_n = 0.5;
      err[k] += frobenius_error(run_pipeline(b.target, {}, tc, Method::CC).omega, b.truth.omega.matrix()) / 30.0;
    }
  }
  return {err[1] < err[0], "mean Frobenius " + fmt(err[0]) + " at n=200, " + fmt(err[1]) + " at n=400"};
}

Outcome aux_rate() {
  double err[2] = {0.0, 0.0};
  const Eigen::Index per_study[2] = {100, 200};  // n_A = 200, 400 over K = 2 studies
  for (int k = 0; k < 2; ++k) {
    for (int rep = 0; rep < 30; ++rep) {
      SimulationConfig cfg;
      cfg.p = 50;
      cfg.n = 150;
      cfg.n_k = per_study[k];
      cfg.K = 2;
      cfg.informative = {1, 2};
      cfg.r = 0.0;  // auxiliary covariance equals the target's
      cfg.transform = {TransformKind::exponential};
      cfg.seed = derive_seed(1010, {static_cast<std::uint64_t>(rep)});
      const auto b = simulate_bundle(cfg);
      TransferConfig tc;
      tc.informative_set = {1, 2};
      tc.c_n = 0.5;
      tc.seed = static_cast<std::uint64_t>(rep);
      err[k] +=
          mean_column_sq_error(run_pipeline(b.target, b.aux, tc, Method::CTC).omega, b.truth.omega.matrix()) / 30.0;
    }
  }
  return {err[1] < err[0], "mean column l2^2 " + fmt(err[0]) + " at n_A=200, " + fmt(err[1]) + " at n_A=400"};
}

// -- 11 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "tcclime_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string base = std::string(TCCLIME_CLI_PATH) +
                           " benchmark --designs banded,block --transforms exp,cdf --methods CC,CTC,CPC --trials 4"
                           " --p 20 --n 80 --n-k 80 --K 3 --n-info 2 --seed 1111 --out ";
  for (const char* w : {"1", "8"}) {
    const std::string cmd = base + (dir / w).string() + " --parallel " + w + " > " + (dir / "log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      return {false, "benchmark --parallel " + std::string(w) + " failed: " + slurp(dir / "log")};
  }
  std::vector<std::string> differ;
  for (const char* f : {"results.csv", "roc_mean.csv", "summary.csv", "manifest.json"}) {
    const std::string a = slurp(dir / "1" / f);
    if (a.empty() || a != slurp(dir / "8" / f)) differ.push_back(f);
  }
  std::string detail = differ.empty() ? "all four outputs byte-identical" : "differ:";
  for (const auto& f : differ) detail += " " + f;
  return {differ.empty(), detail + " (4 cells x 4 trials x 3 methods, CV on)"};
}

// -- 12 --------------------------------------------------------------------

Outcome cdf_calibration() {
  const GaussianCdfTransform g(0.05, 0.4);
  Rng rng(1212);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = g(rng.normal());
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  return {std::abs(mean) <= 0.02 && std::abs(var - 1.0) <= 0.05, "mean " + fmt(mean) + ", variance " + fmt(var)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  bool strict = false;
  std::vector<int> only;
  app.add_flag("--strict", strict, "fail on any criterion, including known deviations");
  app.add_option("--only", only, "comma list of criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "Kendall tau matches the naive double loop", kendall_oracle},
      {2, "rank correlation is invariant under monotone transforms", monotone_invariance},
      {3, "column LP matches vertex enumeration", lp_oracle},
      {4, "identical auxiliary data collapse to single-study CLIME", zero_transfer},
      {5, "divergence refinement soft-thresholds", refine_closed_form},
      {6, "rank correlation concentrates at sqrt(log p / n)", concentration},
      {7, "exp transform: CTC beats CC and TC", exp_ordering},
      {8, "linear transform: CTC within 3 se of TC", gaussian_parity, true},
      {9, "CC error falls from n=200 to n=400", cc_rate},
      {10, "CTC error falls from n_A=200 to n_A=400", aux_rate},
      {11, "benchmark output independent of --parallel", cli_determinism},
      {12, "Gaussian-CDF transform has mean 0 and variance 1", cdf_calibration},
  };

  std::ostringstream report;
  int failed = 0, blocking = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << c.id << "] " << c.name << " -- " << o.detail
         << (!o.pass && c.known_deviation ? " (known deviation)" : "") << '\n';
    std::cout << line.str() << std::flush;
    report << line.str();
    if (!o.pass) {
      ++failed;
      if (strict || !c.known_deviation) ++blocking;
    }
  }
  std::string summary = std::to_string(ran - failed) + "/" + std::to_string(ran) + " criteria pass";
  if (failed > blocking) summary += ", " + std::to_string(failed - blocking) + " known deviation(s)";
  std::cout << summary << std::endl;
  report << summary << '\n';
  std::ofstream("acceptance_report.txt") << report.str();
  return blocking == 0 ? 0 : 1;
}
