// tcclime_cli: simulate | estimate | benchmark | roc

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tcclime/dataset_io.hpp"
#include "tcclime/estimators.hpp"
#include "tcclime/metrics.hpp"
#include "tcclime/simulation.hpp"
#include "tcclime/tuning.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tcclime;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage:
      return kExitUsage;
    case ErrorCategory::data:
      return kExitData;
    case ErrorCategory::numerical:
      return kExitNumerical;
  }
  return kExitNumerical;
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

// Flat key=value file; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::invalid_argument, "cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::invalid_argument,
            path + ":" + std::to_string(lineno) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::invalid_argument, "bad number '" + s + "' for " + what);
}

int to_int(const std::string& s, const std::string& what) {
  const double v = to_double(s, what);
  require(v == std::floor(v), Errc::invalid_argument, "expected an integer for " + what + ", got " + s);
  return static_cast<int>(v);
}

std::vector<double> doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& t : split_list(s)) out.push_back(to_double(t, what));
  return out;
}

std::vector<int> ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& t : split_list(s)) out.push_back(to_int(t, what));
  return out;
}

std::vector<Method> methods(const std::string& s) {
  std::vector<Method> out;
  for (const auto& t : split_list(s)) out.push_back(parse_method(t));
  return out;
}

unsigned default_parallel() {
  if (const char* env = std::getenv("TCC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io_error, "cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  require(static_cast<bool>(os), Errc::io_error, "write failed for " + path.string());
}

template <class F>
void write_text(const fs::path& path, F&& fn) {
  std::ofstream os(path);
  require(static_cast<bool>(os), Errc::io_error, "cannot open " + path.string() + " for writing");
  fn(os);
  require(static_cast<bool>(os), Errc::io_error, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), Errc::io_error, "cannot create output directory " + dir.string());
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string design = "banded", transform = "cdf", informative = "1,2,3", out = "sim_out";
  int p = 100, n = 200, n_k = 200, K = 5;
  double r = 10.0, pd_eps = kDefaultPdEps, mu_g0 = 0.05, sigma_g0 = 0.4;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  SimulationConfig cfg;
  cfg.design = parse_design(a.design);
  cfg.transform = {parse_transform(a.transform), a.mu_g0, a.sigma_g0};
  cfg.p = a.p;
  cfg.n = a.n;
  cfg.n_k = a.n_k;
  cfg.K = a.K;
  cfg.informative = ints(a.informative, "informative");
  cfg.r = a.r;
  cfg.pd_eps = a.pd_eps;
  cfg.seed = a.seed;
  require(cfg.n >= 2 && cfg.n_k >= 2, Errc::invalid_argument, "sample sizes must be at least 2");
  const SimulatedBundle b = simulate_bundle(cfg);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_dataset_csv((dir / "target.csv").string(), b.target);
  write_matrix_csv((dir / "omega.csv").string(), b.truth.omega.matrix());
  write_matrix_csv((dir / "sigma.csv").string(), b.truth.sigma.matrix());

  json aux = json::array();
  for (std::size_t k = 0; k < b.aux.size(); ++k) {
    const auto& t = b.aux_truth[k];
    const std::string idx = std::to_string(t.index);
    write_dataset_csv((dir / ("aux" + idx + ".csv")).string(), b.aux[k]);
    write_matrix_csv((dir / ("sigma_aux" + idx + ".csv")).string(), t.sigma.matrix());
    aux.push_back({{"index", t.index},
                   {"informative", t.informative},
                   {"file", "aux" + idx + ".csv"},
                   {"sigma_file", "sigma_aux" + idx + ".csv"},
                   {"n", b.aux[k].n()},
                   {"covariance_seed", t.covariance_seed},
                   {"sample_seed", t.sample_seed},
                   {"delta_max_abs", t.delta.cwiseAbs().maxCoeff()},
                   {"delta_max_col_l1", t.delta.cwiseAbs().colwise().sum().maxCoeff()},
                   {"delta_frobenius", t.delta.norm()}});
  }
  json m = {{"command", "simulate"},
            {"design", to_string(cfg.design)},
            {"transform", to_string(cfg.transform.kind)},
            {"mu_g0", cfg.transform.mu_g0},
            {"sigma_g0", cfg.transform.sigma_g0},
            {"p", cfg.p},
            {"n", cfg.n},
            {"n_k", cfg.n_k},
            {"K", cfg.K},
            {"r", cfg.r},
            {"pd_eps", cfg.pd_eps},
            {"informative", b.informative},
            {"seed", cfg.seed},
            {"target_seed", b.target_seed},
            {"target_file", "target.csv"},
            {"omega_file", "omega.csv"},
            {"sigma_file", "sigma.csv"},
            {"aux", aux}};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << 1 + b.aux.size() << " datasets to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string method = "CTC", target, aux, informative, out = "estimate.csv", sidecar, cv_trace;
  std::string grid = "0.25,0.5,0.75,1,1.5,2";
  int folds = 5;
  bool no_cv = false;
  double c_n = 1.0, split_fraction = 2.0 / 3.0, pd_eps = kDefaultPdEps;
  double lambda_cl = 0.0, lambda_delta = 0.0, lambda_omega = 0.0;
  std::uint64_t seed = 1;
  unsigned parallel = 1;
};

int cmd_estimate(const EstimateArgs& a) {
  const Method method = parse_method(a.method);
  require(!a.target.empty(), Errc::invalid_argument, "--target is required");
  StudyDataset target = read_dataset_csv(a.target);
  target.label = "target";
  std::vector<StudyDataset> aux;
  int k = 0;
  for (const auto& path : split_list(a.aux)) {
    StudyDataset d = read_dataset_csv(path);
    d.kind = StudyKind::auxiliary;
    d.aux_index = ++k;
    aux.push_back(std::move(d));
  }
  TransferConfig cfg;
  cfg.informative_set = ints(a.informative, "informative");
  cfg.c_n = a.c_n;
  cfg.split_fraction = a.split_fraction;
  cfg.seed = a.seed;
  cfg.threads = a.parallel;
  if (a.lambda_cl > 0.0) cfg.lambda_cl = a.lambda_cl;
  if (a.lambda_delta > 0.0) cfg.lambda_delta = a.lambda_delta;
  if (a.lambda_omega > 0.0) cfg.lambda_omega = a.lambda_omega;
  if (is_transfer(method)) {
    require(!informative_for(method, cfg, aux.size()).empty(), Errc::empty_informative_set,
            "method " + to_string(method) + " needs a non-empty informative set (--informative)");
    require(!aux.empty(), Errc::invalid_argument, "method " + to_string(method) + " needs auxiliary datasets (--aux)");
  }

  PrecisionEstimate est;
  std::optional<CvResult> cv;
  if (a.no_cv) {
    est = run_pipeline(target, aux, cfg, method);
  } else {
    CvGrid grid;
    grid.candidates = doubles(a.grid, "grid");
    grid.folds = a.folds;
    auto tuned = fit_tuned(target, aux, cfg, grid, method, a.pd_eps);
    est = std::move(tuned.estimate);
    cv = std::move(tuned.cv);
  }

  write_matrix_csv(a.out, est.omega);
  if (cv && !a.cv_trace.empty()) write_text(a.cv_trace, [&](std::ostream& os) { write_cv_trace_csv(os, *cv); });

  const auto& d = est.diagnostics;
  json sidecar = {{"method", to_string(method)},
                  {"estimate_file", a.out},
                  {"p", target.p()},
                  {"n", target.n()},
                  {"c_n", est.config.c_n},
                  {"cross_validated", cv.has_value()},
                  {"lambda_cl", est.lambdas.cl},
                  {"lambda_delta", est.lambdas.delta},
                  {"lambda_omega", est.lambdas.omega},
                  {"seed", a.seed},
                  {"split_fraction", a.split_fraction},
                  {"informative", d.informative_used},
                  {"fold_estimation", d.fold_estimation},
                  {"fold_aggregation", d.fold_aggregation},
                  {"singular_columns", d.singular_columns},
                  {"stage_seconds", d.stage_seconds}};
  if (cv) {
    json trace = json::array();
    for (const auto& row : cv->trace)
      trace.push_back({{"candidate", row.candidate}, {"mean", row.mean}, {"fold_scores", row.fold_scores}});
    sidecar["cv"] = {{"folds", a.folds}, {"trace", trace}};
  }
  write_json(a.sidecar.empty() ? fs::path(a.out + ".json") : fs::path(a.sidecar), sidecar);
  std::cout << "wrote " << a.out << " (" << to_string(method) << ", c_n=" << format_double(est.config.c_n) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string designs = "banded", transforms = "exp", r = "10", n_info = "3";
  std::string methods = "C,TC,PC,CC,CTC,CPC", grid = "0.25,0.5,0.75,1,1.5,2", out = "bench_out";
  int trials = 100, p = 100, n = 200, n_k = 200, K = 5, folds = 5, roc_points = 101;
  bool no_cv = false;
  double c_n = 1.0, split_fraction = 2.0 / 3.0, pd_eps = kDefaultPdEps, mu_g0 = 0.05, sigma_g0 = 0.4;
  std::uint64_t seed = 20240101;
  unsigned parallel = 1;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  SuiteConfig s;
  s.designs.clear();
  for (const auto& d : split_list(a.designs)) s.designs.push_back(parse_design(d));
  s.transforms.clear();
  for (const auto& t : split_list(a.transforms)) s.transforms.push_back(parse_transform(t));
  s.r_values = doubles(a.r, "r");
  s.n_info = ints(a.n_info, "n_info");
  s.methods = methods(a.methods);
  s.trials = a.trials;
  s.p = a.p;
  s.n = a.n;
  s.n_k = a.n_k;
  s.K = a.K;
  s.mu_g0 = a.mu_g0;
  s.sigma_g0 = a.sigma_g0;
  s.pd_eps = a.pd_eps;
  s.split_fraction = a.split_fraction;
  s.cross_validate = !a.no_cv;
  s.fixed_c_n = a.c_n;
  s.grid.candidates = doubles(a.grid, "grid");
  s.grid.folds = a.folds;
  s.roc_points = static_cast<std::size_t>(a.roc_points);
  s.master_seed = a.seed;
  s.parallel = a.parallel;
  require(!s.designs.empty() && !s.transforms.empty() && !s.r_values.empty() && !s.n_info.empty(),
          Errc::invalid_argument, "benchmark needs at least one design, transform, r and n_info");
  require(a.roc_points >= 2, Errc::invalid_argument, "roc_points must be at least 2");
  if (s.cross_validate) s.grid.validate();
  for (Method m : s.methods)
    if (is_transfer(m) && !is_pooled(m))
      for (int k : s.n_info)
        require(k >= 1, Errc::empty_informative_set, "method " + to_string(m) + " needs n_info >= 1");

  const BenchmarkResult res = run_benchmark(s);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_text(dir / "results.csv", [&](std::ostream& os) { write_results_csv(os, res); });
  write_text(dir / "roc_mean.csv", [&](std::ostream& os) { write_roc_mean_csv(os, res); });
  write_text(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, res); });

  json cells = json::array();
  for (const auto& c : res.cells) {
    std::vector<std::uint64_t> seeds;
    for (int t = 0; t < s.trials; ++t) seeds.push_back(trial_seed(s.master_seed, c, t));
    cells.push_back({{"design", to_string(c.design)},
                     {"transform", to_string(c.transform)},
                     {"r", c.r},
                     {"n_info", c.n_info},
                     {"trial_seeds", seeds}});
  }
  json failures = json::array();
  for (const auto& f : res.failures)
    failures.push_back({{"design", to_string(f.cell.design)},
                        {"transform", to_string(f.cell.transform)},
                        {"r", f.cell.r},
                        {"n_info", f.cell.n_info},
                        {"trial", f.trial},
                        {"method", to_string(f.method)},
                        {"seed", f.seed},
                        {"error", f.error}});
  std::vector<std::string> mnames;
  for (Method m : s.methods) mnames.push_back(to_string(m));
  json m = {{"command", "benchmark"},
            {"master_seed", s.master_seed},
            {"p", s.p},
            {"n", s.n},
            {"n_k", s.n_k},
            {"K", s.K},
            {"trials", s.trials},
            {"methods", mnames},
            {"mu_g0", s.mu_g0},
            {"sigma_g0", s.sigma_g0},
            {"pd_eps", s.pd_eps},
            {"split_fraction", s.split_fraction},
            {"cross_validate", s.cross_validate},
            {"c_n", s.cross_validate ? json(nullptr) : json(s.fixed_c_n)},
            {"grid", s.grid.candidates},
            {"folds", s.grid.folds},
            {"roc_points", s.roc_points},
            {"files", {"results.csv", "roc_mean.csv", "summary.csv"}},
            {"cells", cells},
            {"failures", failures}};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << res.cells.size() << " cells x " << s.trials << " trials to " << dir.string();
  if (!res.failures.empty()) std::cout << " (" << res.failures.size() << " failed fits, see manifest.json)";
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RocArgs {
  std::string estimate, truth, out = "roc.csv";
  int thresholds = 0;
};

int cmd_roc(const RocArgs& a) {
  require(!a.estimate.empty() && !a.truth.empty(), Errc::invalid_argument, "--estimate and --truth are required");
  const Matrix est = read_matrix_csv(a.estimate);
  const Matrix truth = read_matrix_csv(a.truth);
  require(a.thresholds >= 0, Errc::invalid_argument, "thresholds must be non-negative");
  const auto roc = roc_from_estimate(est, truth, static_cast<std::size_t>(a.thresholds));
  write_text(a.out, [&](std::ostream& os) {
    os << "threshold,fpr,tpr\n";
    for (const auto& pt : roc) os << format_double(pt.threshold) << ',' << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
  });
  std::cout << "auc=" << format_double(roc_auc(roc)) << " frobenius=" << format_double(frobenius_error(est, truth))
            << '\n';
  return 0;
}

// Applies config-file values as option defaults so that explicit flags still win.
void apply_config(CLI::App* sub, const std::map<std::string, std::string>& cfg) {
  for (const auto& [key, value] : cfg) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + flag);
    require(opt != nullptr && flag != "config", Errc::invalid_argument,
            "unknown config key '" + key + "' for " + sub->get_name());
    opt->default_val(value);
  }
}

std::string find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning sparse precision estimation under a Gaussian copula"};
  app.require_subcommand(1);
  std::string config_path;

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a target study, auxiliary studies and ground truth");
  s->add_option("--config", config_path, "key=value config file");
  s->add_option("--design", sim.design, "banded | block");
  s->add_option("--transform", sim.transform, "cdf | exp | linear");
  s->add_option("--p", sim.p);
  s->add_option("--n", sim.n);
  s->add_option("--n-k", sim.n_k);
  s->add_option("--K", sim.K);
  s->add_option("--informative", sim.informative, "comma list of 1-based auxiliary indices");
  s->add_option("--r", sim.r);
  s->add_option("--pd-eps", sim.pd_eps);
  s->add_option("--mu-g0", sim.mu_g0);
  s->add_option("--sigma-g0", sim.sigma_g0);
  s->add_option("--seed", sim.seed);
  s->add_option("--out", sim.out, "output directory");

  EstimateArgs est;
  est.parallel = default_parallel();
  auto* e = app.add_subcommand("estimate", "Fit one of C, TC, PC, CC, CTC, CPC");
  e->add_option("--config", config_path, "key=value config file");
  e->add_option("--method", est.method);
  e->add_option("--target", est.target, "target dataset CSV");
  e->add_option("--aux", est.aux, "comma list of auxiliary dataset CSVs");
  e->add_option("--informative", est.informative, "comma list of 1-based positions in --aux");
  e->add_option("--c-n", est.c_n, "penalty constant when --no-cv is set");
  e->add_flag("--no-cv", est.no_cv, "skip cross-validation and use --c-n");
  e->add_option("--grid", est.grid, "comma list of c_n candidates");
  e->add_option("--folds", est.folds);
  e->add_option("--split-fraction", est.split_fraction);
  e->add_option("--lambda-cl", est.lambda_cl, "explicit penalty (with --no-cv)");
  e->add_option("--lambda-delta", est.lambda_delta, "explicit penalty");
  e->add_option("--lambda-omega", est.lambda_omega, "explicit penalty (with --no-cv)");
  e->add_option("--pd-eps", est.pd_eps);
  e->add_option("--seed", est.seed);
  e->add_option("--parallel", est.parallel, "column solver threads (default TCC_THREADS or 1)");
  e->add_option("--out", est.out, "estimate CSV");
  e->add_option("--sidecar", est.sidecar, "JSON sidecar path (default <out>.json)");
  e->add_option("--cv-trace", est.cv_trace, "write the CV trace CSV here");

  BenchmarkArgs bench;
  bench.parallel = default_parallel();
  auto* b = app.add_subcommand("benchmark", "Run a simulation suite");
  b->add_option("--config", config_path, "key=value config file");
  b->add_option("--designs", bench.designs, "comma list of banded, block");
  b->add_option("--transforms", bench.transforms, "comma list of cdf, exp, linear");
  b->add_option("--r", bench.r, "comma list of similarity levels");
  b->add_option("--n-info", bench.n_info, "comma list of informative-study counts");
  b->add_option("--methods", bench.methods);
  b->add_option("--trials", bench.trials);
  b->add_option("--p", bench.p);
  b->add_option("--n", bench.n);
  b->add_option("--n-k", bench.n_k);
  b->add_option("--K", bench.K);
  b->add_flag("--no-cv", bench.no_cv, "use --c-n instead of cross-validation");
  b->add_option("--c-n", bench.c_n);
  b->add_option("--grid", bench.grid);
  b->add_option("--folds", bench.folds);
  b->add_option("--split-fraction", bench.split_fraction);
  b->add_option("--pd-eps", bench.pd_eps);
  b->add_option("--mu-g0", bench.mu_g0);
  b->add_option("--sigma-g0", bench.sigma_g0);
  b->add_option("--roc-points", bench.roc_points);
  b->add_option("--seed", bench.seed, "master seed");
  b->add_option("--parallel", bench.parallel, "worker threads (default TCC_THREADS or 1)");
  b->add_option("--out", bench.out, "output directory");

  RocArgs roc;
  auto* r = app.add_subcommand("roc", "ROC curve of an estimate against a true precision matrix");
  r->add_option("--config", config_path, "key=value config file");
  r->add_option("--estimate", roc.estimate, "estimate matrix CSV");
  r->add_option("--truth", roc.truth, "true precision matrix CSV");
  r->add_option("--thresholds", roc.thresholds, "0 = every distinct magnitude");
  r->add_option("--out", roc.out, "ROC CSV");

  try {
    if (const std::string path = find_config(argc, argv); !path.empty()) {
      const auto cfg = read_config(path);
      // The subcommand is the first non-option argument.
      for (int i = 1; i < argc; ++i) {
        if (auto* sub = app.get_subcommand_no_throw(argv[i])) {
          apply_config(sub, cfg);
          break;
        }
      }
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (e->parsed()) return cmd_estimate(est);
    if (b->parsed()) return cmd_benchmark(bench);
    if (r->parsed()) return cmd_roc(roc);
  } catch (const ColumnError& err) {
    std::cerr << "error (column " << err.column() << "): " << err.what() << '\n';
    return exit_code(err.category());
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code(err.category());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
