#pragma once

// Precision-matrix estimators: single-study CLIME (Pearson or rank based), the
// three-step transfer estimator, its aggregation step, and the six pipelines
// C, TC, PC, CC, CTC, CPC built from them.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcclime/clime_solver.hpp"
#include "tcclime/matrix.hpp"
#include "tcclime/rank_corr.hpp"
#include "tcclime/rng.hpp"

namespace tcclime {

enum class Method { C, TC, PC, CC, CTC, CPC };

inline constexpr Method kAllMethods[] = {Method::C, Method::TC, Method::PC, Method::CC, Method::CTC, Method::CPC};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::C: return "C";
    case Method::TC: return "TC";
    case Method::PC: return "PC";
    case Method::CC: return "CC";
    case Method::CTC: return "CTC";
    case Method::CPC: return "CPC";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  throw Error(Errc::invalid_argument, "unknown method '" + s + "' (expected C|TC|PC|CC|CTC|CPC)");
}

constexpr bool uses_rank(Method m) noexcept { return m == Method::CC || m == Method::CTC || m == Method::CPC; }
constexpr bool is_transfer(Method m) noexcept { return m != Method::C && m != Method::CC; }
constexpr bool is_pooled(Method m) noexcept { return m == Method::PC || m == Method::CPC; }

struct Lambdas {
  double cl = 0.0;
  double delta = 0.0;
  double omega = 0.0;
};

/// lambda_CL = 2 c sqrt(log p / n), lambda_Delta = 2 sqrt(log p / n),
/// lambda_Omega = 2 c sqrt(log p / n_A).
inline Lambdas default_lambdas(double c_n, Eigen::Index p, std::size_t n, std::size_t n_a) {
  const double lp = std::log(static_cast<double>(p));
  Lambdas l;
  l.cl = 2.0 * c_n * std::sqrt(lp / static_cast<double>(n));
  l.delta = 2.0 * std::sqrt(lp / static_cast<double>(n));
  l.omega = n_a > 0 ? 2.0 * c_n * std::sqrt(lp / static_cast<double>(n_a)) : 0.0;
  return l;
}

struct TransferConfig {
  std::vector<int> informative_set;  // 1-based positions in the auxiliary list
  // Explicit penalties override the c_n rule when set.
  std::optional<double> lambda_cl, lambda_delta, lambda_omega;
  double c_n = 1.0;
  double split_fraction = 2.0 / 3.0;
  std::uint64_t seed = 1;
  bool use_rank_correlation = true;
  unsigned threads = 1;

  Lambdas resolve(Eigen::Index p, std::size_t n, std::size_t n_a) const {
    Lambdas l = default_lambdas(c_n, p, n, n_a);
    if (lambda_cl) l.cl = *lambda_cl;
    if (lambda_delta) l.delta = *lambda_delta;
    if (lambda_omega) l.omega = *lambda_omega;
    return l;
  }

  void validate() const {
    require(split_fraction > 0.0 && split_fraction < 1.0, Errc::invalid_argument, "split_fraction must lie in (0, 1)");
    require(c_n > 0.0, Errc::invalid_argument, "c_n must be positive");
    for (auto* l : {&lambda_cl, &lambda_delta, &lambda_omega})
      if (*l) require(**l > 0.0, Errc::invalid_argument, "penalties must be positive");
  }
};

struct EstimateDiagnostics {
  std::vector<std::size_t> fold_estimation;   // target rows used for Steps 1-3
  std::vector<std::size_t> fold_aggregation;  // held-out target rows
  std::vector<std::size_t> singular_columns;  // aggregation fell back for these
  std::map<std::string, double> stage_seconds;
  std::vector<int> informative_used;
};

struct PrecisionEstimate {
  Matrix omega;
  bool symmetrized = false;
  Method method = Method::CC;
  TransferConfig config;
  Lambdas lambdas;
  EstimateDiagnostics diagnostics;
};

enum class DeltaStage { initial, refined };

struct DivergenceEstimate {
  Matrix delta;
  DeltaStage stage = DeltaStage::initial;
};

// ---------------------------------------------------------------------------
// Building blocks

/// Min-magnitude symmetrization; on ties the (i<j) entry wins.
inline SymMatrix symmetrize_min(const Matrix& w) {
  require(w.rows() == w.cols(), Errc::dimension_mismatch, "symmetrize_min needs a square matrix");
  require(w.allFinite(), Errc::invalid_argument, "symmetrize_min needs finite entries");
  Matrix out = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < w.cols(); ++j) {
      const double v = std::abs(w(i, j)) <= std::abs(w(j, i)) ? w(i, j) : w(j, i);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return SymMatrix(out, 0.0);
}

inline PrecisionEstimate copula_clime(const CorrelationMatrix& s_hat, double lambda_cl, unsigned threads = 1) {
  require(lambda_cl > 0.0, Errc::invalid_argument, "lambda_CL must be positive");
  PrecisionEstimate est;
  const Eigen::Index p = s_hat.dim();
  est.omega = solve_matrix(s_hat.matrix(), Matrix::Identity(p, p), lambda_cl, threads);
  est.method = Method::CC;
  est.lambdas.cl = lambda_cl;
  return est;
}

/// Delta^(0): column-wise min ||Delta||_1 s.t. ||S Delta - (S_A - S)||_max <= lambda_Delta.
inline DivergenceEstimate estimate_delta_initial(const CorrelationMatrix& s_hat, const CorrelationMatrix& s_a,
                                                 double lambda_delta, unsigned threads = 1) {
  require(s_hat.dim() == s_a.dim(), Errc::dimension_mismatch, "target and auxiliary correlations differ in size");
  return {solve_matrix(s_hat.matrix(), s_a.matrix() - s_hat.matrix(), lambda_delta, threads), DeltaStage::initial};
}

/// The matrix the refinement step shrinks: Delta0 + Omega_CL (S_A - S - S Delta0).
inline Matrix debiased_delta(const DivergenceEstimate& delta0, const Matrix& omega_cl, const CorrelationMatrix& s_hat,
                             const CorrelationMatrix& s_a) {
  const Matrix& d0 = delta0.delta;
  return d0 + omega_cl * (s_a.matrix() - s_hat.matrix() - s_hat.matrix() * d0);
}

inline Matrix soft_threshold(const Matrix& m, double t) {
  return m.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

/// With the identity as constraint matrix the refined program separates by
/// entry, and its solution is soft-thresholding at 2 lambda_Delta.
inline DivergenceEstimate refine_delta(const DivergenceEstimate& delta0, const PrecisionEstimate& omega_cl,
                                       const CorrelationMatrix& s_hat, const CorrelationMatrix& s_a,
                                       double lambda_delta) {
  require(omega_cl.omega.rows() == s_hat.dim(), Errc::dimension_mismatch, "refine_delta inputs differ in size");
  return {soft_threshold(debiased_delta(delta0, omega_cl.omega, s_hat, s_a), 2.0 * lambda_delta),
          DeltaStage::refined};
}

/// Same program through the generic column solver; used to cross-check refine_delta.
inline DivergenceEstimate refine_delta_generic(const DivergenceEstimate& delta0, const PrecisionEstimate& omega_cl,
                                               const CorrelationMatrix& s_hat, const CorrelationMatrix& s_a,
                                               double lambda_delta) {
  const Matrix d = debiased_delta(delta0, omega_cl.omega, s_hat, s_a);
  return {solve_matrix(Matrix::Identity(d.rows(), d.rows()), d, 2.0 * lambda_delta), DeltaStage::refined};
}

/// Omega-hat: min ||Omega||_1 s.t. ||S_A Omega - (Delta_A + I)'||_max <= lambda_Omega.
inline PrecisionEstimate trans_step3(const CorrelationMatrix& s_a, const DivergenceEstimate& delta_a,
                                     double lambda_omega, unsigned threads = 1) {
  require(lambda_omega > 0.0, Errc::invalid_argument, "lambda_Omega must be positive");
  const Eigen::Index p = s_a.dim();
  PrecisionEstimate est;
  const Matrix rhs = (delta_a.delta + Matrix::Identity(p, p)).transpose();
  est.omega = solve_matrix(s_a.matrix(), rhs, lambda_omega, threads);
  est.method = Method::CTC;
  est.lambdas.omega = lambda_omega;
  return est;
}

inline constexpr double kAggregationCondLimit = 1e12;

/// Column-wise quadratic loss 1/2 w'Sw - w_j; the aggregation weights minimize it
/// over the span of the two candidate columns.
inline double aggregation_score(const CorrelationMatrix& s_c, const Vector& w, Eigen::Index j) {
  return 0.5 * w.dot(s_c.matrix() * w) - w[j];
}

struct AggregationResult {
  PrecisionEstimate estimate;
  std::vector<std::size_t> singular_columns;
};

/// Combines corresponding columns of the single-study and transfer estimates with
/// weights v_j = W(j)^{-1} (Omega_CL_jj, Omega_jj) computed on the held-out
/// correlation. When W(j) is numerically singular the better-scoring input column is
/// kept unchanged (ties go to the single-study column).
inline AggregationResult aggregate(const PrecisionEstimate& omega_cl, const PrecisionEstimate& omega_tr,
                                   const CorrelationMatrix& s_tilde_c) {
  const Eigen::Index p = s_tilde_c.dim();
  require(omega_cl.omega.rows() == p && omega_tr.omega.rows() == p, Errc::dimension_mismatch,
          "aggregate inputs differ in size");
  AggregationResult res;
  res.estimate = omega_tr;
  Matrix& out = res.estimate.omega;
  const Matrix& s = s_tilde_c.matrix();
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector c = omega_cl.omega.col(j);
    const Vector t = omega_tr.omega.col(j);
    const Vector sc = s * c, st = s * t;
    const double w11 = c.dot(sc), w12 = c.dot(st), w22 = t.dot(st);
    // Eigenvalues of the symmetric 2x2 Gram matrix.
    const double mid = 0.5 * (w11 + w22);
    const double rad = std::hypot(0.5 * (w11 - w22), w12);
    const double big = std::max(std::abs(mid + rad), std::abs(mid - rad));
    const double small = std::min(std::abs(mid + rad), std::abs(mid - rad));
    const bool singular = !(small > 0.0) || big / small > kAggregationCondLimit || !std::isfinite(big);
    if (singular) {
      res.singular_columns.push_back(static_cast<std::size_t>(j));
      out.col(j) = aggregation_score(s_tilde_c, t, j) < aggregation_score(s_tilde_c, c, j) ? t : c;
      continue;
    }
    const double det = w11 * w22 - w12 * w12;
    const double v1 = (w22 * c[j] - w12 * t[j]) / det;
    const double v2 = (w11 * t[j] - w12 * c[j]) / det;
    out.col(j) = v1 * c + v2 * t;
  }
  res.estimate.diagnostics.singular_columns = res.singular_columns;
  return res;
}

// ---------------------------------------------------------------------------
// Pipelines

struct FoldSplit {
  std::vector<std::size_t> first;   // estimation fold, ceil(fraction n) rows
  std::vector<std::size_t> second;  // aggregation fold
};

inline constexpr std::uint64_t kSplitStream = 3;

/// Seeded uniform random partition; indices in each fold are sorted ascending.
inline FoldSplit split_target(std::size_t n, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, Errc::invalid_argument, "split fraction must lie in (0, 1)");
  const auto first_size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  require(first_size >= 2 && n - first_size >= 2, Errc::too_few_samples,
          "target too small to split into two folds of at least 2 rows");
  Rng rng(derive_seed(seed, {kSplitStream}));
  const auto perm = random_permutation(n, rng);
  FoldSplit s;
  s.first.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first_size));
  s.second.assign(perm.begin() + static_cast<std::ptrdiff_t>(first_size), perm.end());
  std::sort(s.first.begin(), s.first.end());
  std::sort(s.second.begin(), s.second.end());
  return s;
}

inline CorrelationMatrix correlation_of(const StudyDataset& d, bool rank) {
  return rank ? rank_correlation_matrix(d).s_hat : pearson_correlation_matrix(d);
}

/// Informative set a method uses: the configured one for TC/CTC, all K for the
/// pooled variants.
inline std::vector<int> informative_for(Method m, const TransferConfig& cfg, std::size_t k) {
  if (is_pooled(m)) {
    std::vector<int> all(k);
    for (std::size_t i = 0; i < k; ++i) all[i] = static_cast<int>(i + 1);
    return all;
  }
  return cfg.informative_set;
}

struct AuxCorrelation {
  CorrelationMatrix s_a;
  std::size_t n_a = 0;
};

inline AuxCorrelation aux_correlation(const std::vector<StudyDataset>& aux, const std::vector<int>& informative,
                                      bool rank) {
  require(!informative.empty(), Errc::empty_informative_set, "transfer estimator needs a non-empty informative set");
  std::vector<CorrelationMatrix> mats;
  std::vector<std::size_t> sizes;
  for (int k : informative) {
    require(k >= 1 && static_cast<std::size_t>(k) <= aux.size(), Errc::invalid_argument,
            "informative index " + std::to_string(k) + " has no auxiliary dataset");
    const auto& d = aux[static_cast<std::size_t>(k - 1)];
    mats.push_back(correlation_of(d, rank));
    sizes.push_back(static_cast<std::size_t>(d.n()));
  }
  AuxCorrelation out{weighted_aux_correlation(mats, sizes), 0};
  for (auto s : sizes) out.n_a += s;
  return out;
}

/// Intermediate results of Steps 1-3 on one target correlation.
struct TransferFit {
  PrecisionEstimate omega_cl;
  DivergenceEstimate delta0;
  DivergenceEstimate delta_a;
  PrecisionEstimate omega_tr;
};

namespace detail {

struct StageTimer {
  std::map<std::string, double>* sink;
  std::string name;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  ~StageTimer() {
    if (sink)
      (*sink)[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace detail

inline TransferFit fit_transfer(const CorrelationMatrix& s_tilde, const CorrelationMatrix& s_a, const Lambdas& l,
                                unsigned threads = 1, std::map<std::string, double>* timings = nullptr) {
  TransferFit f;
  {
    detail::StageTimer t{timings, "step1_clime"};
    f.omega_cl = copula_clime(s_tilde, l.cl, threads);
  }
  {
    detail::StageTimer t{timings, "step2_delta_initial"};
    f.delta0 = estimate_delta_initial(s_tilde, s_a, l.delta, threads);
  }
  {
    detail::StageTimer t{timings, "step2_delta_refine"};
    f.delta_a = refine_delta(f.delta0, f.omega_cl, s_tilde, s_a, l.delta);
  }
  {
    detail::StageTimer t{timings, "step3_transfer"};
    f.omega_tr = trans_step3(s_a, f.delta_a, l.omega, threads);
  }
  return f;
}

/// Runs one of the six methods end to end and returns the symmetrized estimate.
///
/// C/CC fit CLIME on the correlation of all target rows. The transfer methods
/// split the target by `split_fraction`, run Steps 1-3 on the first fold and
/// aggregate with the second. Penalties come from `cfg.resolve`, with n the size
/// of the data the step actually sees. The method decides rank vs Pearson
/// correlation; `cfg.use_rank_correlation` is overwritten in the returned config.
inline PrecisionEstimate run_pipeline(const StudyDataset& target, const std::vector<StudyDataset>& aux,
                                      const TransferConfig& cfg_in, Method method) {
  TransferConfig cfg = cfg_in;
  cfg.validate();
  cfg.use_rank_correlation = uses_rank(method);
  target.validate();
  const bool rank = cfg.use_rank_correlation;
  const Eigen::Index p = target.p();
  PrecisionEstimate out;
  std::map<std::string, double> timings;

  if (!is_transfer(method)) {
    CorrelationMatrix s;
    {
      detail::StageTimer t{&timings, "correlation"};
      s = correlation_of(target, rank);
    }
    const Lambdas l = cfg.resolve(p, static_cast<std::size_t>(target.n()), 0);
    PrecisionEstimate fit;
    {
      detail::StageTimer t{&timings, "step1_clime"};
      fit = copula_clime(s, l.cl, cfg.threads);
    }
    out.omega = symmetrize_min(fit.omega).matrix();
    out.lambdas = l;
    out.lambdas.delta = 0.0;
    out.lambdas.omega = 0.0;
  } else {
    const std::vector<int> informative = informative_for(method, cfg, aux.size());
    require(!informative.empty(), Errc::empty_informative_set,
            "method " + to_string(method) + " needs a non-empty informative set");
    for (const auto& d : aux) {
      d.validate();
      require(d.p() == p, Errc::dimension_mismatch, "auxiliary dataset '" + d.label + "' has a different p");
    }
    const FoldSplit split = split_target(static_cast<std::size_t>(target.n()), cfg.split_fraction, cfg.seed);
    CorrelationMatrix s_tilde, s_tilde_c;
    AuxCorrelation ac;
    {
      detail::StageTimer t{&timings, "correlation"};
      s_tilde = correlation_of(target.rows(split.first), rank);
      s_tilde_c = correlation_of(target.rows(split.second), rank);
      ac = aux_correlation(aux, informative, rank);
    }
    const Lambdas l = cfg.resolve(p, split.first.size(), ac.n_a);
    const TransferFit fit = fit_transfer(s_tilde, ac.s_a, l, cfg.threads, &timings);
    AggregationResult agg;
    {
      detail::StageTimer t{&timings, "aggregation"};
      agg = aggregate(fit.omega_cl, fit.omega_tr, s_tilde_c);
    }
    out.omega = symmetrize_min(agg.estimate.omega).matrix();
    out.lambdas = l;
    out.diagnostics.fold_estimation = split.first;
    out.diagnostics.fold_aggregation = split.second;
    out.diagnostics.singular_columns = agg.singular_columns;
    out.diagnostics.informative_used = informative;
  }
  out.symmetrized = true;
  out.method = method;
  out.config = cfg;
  out.diagnostics.stage_seconds = std::move(timings);
  return out;
}

}  // namespace tcclime
