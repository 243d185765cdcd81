#pragma once

// Cross-validated choice of the shared penalty constant c_n.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tcclime/estimators.hpp"

namespace tcclime {

struct CvGrid {
  std::vector<double> candidates{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  int folds = 5;

  void validate() const {
    require(!candidates.empty(), Errc::invalid_argument, "CV grid is empty");
    for (double c : candidates) require(c > 0.0 && std::isfinite(c), Errc::invalid_argument, "CV candidates must be positive");
    require(folds >= 2, Errc::invalid_argument, "CV needs at least 2 folds");
  }
};

/// (Tr(S Omega+) - log det Omega+) / (2p) with Omega+ the eigenvalue-clipped
/// min-magnitude symmetrization of Omega.
inline double nll_score(const CorrelationMatrix& s_test, const Matrix& omega, double eps = kDefaultPdEps) {
  require(omega.rows() == s_test.dim() && omega.cols() == s_test.dim(), Errc::dimension_mismatch,
          "nll_score dimensions disagree");
  require(omega.allFinite(), Errc::invalid_argument, "nll_score needs a finite estimate");
  const SymMatrix plus = pd_project(symmetrize_min(omega), eps);
  const double p = static_cast<double>(s_test.dim());
  const double trace = (s_test.matrix().cwiseProduct(plus.matrix())).sum();
  return (trace - log_det_pd(plus)) / (2.0 * p);
}

struct CvTraceRow {
  double candidate = 0.0;
  std::vector<double> fold_scores;
  double mean = 0.0;
};

struct CvResult {
  double best = 0.0;
  std::vector<CvTraceRow> trace;  // in grid order
};

inline constexpr std::uint64_t kCvStream = 5;

/// Seeded partition of n rows into `folds` parts of near-equal size.
inline std::vector<std::vector<std::size_t>> cv_partition(std::size_t n, int folds, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kCvStream}));
  const auto perm = random_permutation(n, rng);
  std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i) parts[i % static_cast<std::size_t>(folds)].push_back(perm[i]);
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return parts;
}

/// Picks c_n by `grid.folds`-fold CV on `data` (the estimation fold for transfer
/// methods, the whole target otherwise).
///
/// For every held-out part the method is refitted on the remaining rows with the
/// c_n penalty rule (explicit penalties in `cfg` are ignored here), and scored
/// with nll_score against the held-out correlation of the same kind. Transfer
/// methods are scored on their Step-3 estimate. A candidate whose fit fails scores
/// +inf. Ties go to the smaller candidate.
inline CvResult cv_select(const StudyDataset& data, const std::vector<StudyDataset>& aux, const TransferConfig& cfg,
                          const CvGrid& grid, Method method, double eps = kDefaultPdEps) {
  grid.validate();
  data.validate();
  const auto n = static_cast<std::size_t>(data.n());
  require(n >= 5 * static_cast<std::size_t>(grid.folds), Errc::too_few_samples,
          "cross-validation needs at least 5 rows per fold");
  const bool rank = uses_rank(method);
  const Eigen::Index p = data.p();

  std::optional<AuxCorrelation> ac;
  if (is_transfer(method)) ac = aux_correlation(aux, informative_for(method, cfg, aux.size()), rank);

  const auto parts = cv_partition(n, grid.folds, cfg.seed);
  CvResult res;
  res.trace.resize(grid.candidates.size());
  for (std::size_t c = 0; c < grid.candidates.size(); ++c) res.trace[c].candidate = grid.candidates[c];

  for (std::size_t f = 0; f < parts.size(); ++f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < parts.size(); ++g)
      if (g != f) train.insert(train.end(), parts[g].begin(), parts[g].end());
    std::sort(train.begin(), train.end());
    const CorrelationMatrix s_train = correlation_of(data.rows(train), rank);
    const CorrelationMatrix s_test = correlation_of(data.rows(parts[f]), rank);

    std::optional<DivergenceEstimate> delta0;
    bool delta0_failed = false;
    if (ac) {
      const Lambdas l = default_lambdas(1.0, p, train.size(), ac->n_a);
      try {
        delta0 = estimate_delta_initial(s_train, ac->s_a, l.delta, cfg.threads);
      } catch (const Error&) {
        delta0_failed = true;
      }
    }

    for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
      double score = std::numeric_limits<double>::infinity();
      if (!delta0_failed) {
        try {
          const Lambdas l = default_lambdas(grid.candidates[c], p, train.size(), ac ? ac->n_a : 0);
          const PrecisionEstimate cl = copula_clime(s_train, l.cl, cfg.threads);
          Matrix fitted;
          if (ac) {
            const auto delta_a = refine_delta(*delta0, cl, s_train, ac->s_a, l.delta);
            fitted = trans_step3(ac->s_a, delta_a, l.omega, cfg.threads).omega;
          } else {
            fitted = cl.omega;
          }
          score = nll_score(s_test, fitted, eps);
        } catch (const Error&) {
          score = std::numeric_limits<double>::infinity();
        }
      }
      res.trace[c].fold_scores.push_back(score);
    }
  }

  std::size_t best = grid.candidates.size();
  for (std::size_t c = 0; c < res.trace.size(); ++c) {
    auto& row = res.trace[c];
    double sum = 0.0;
    for (double s : row.fold_scores) sum += s;
    row.mean = sum / static_cast<double>(row.fold_scores.size());
    if (!std::isfinite(row.mean)) continue;
    if (best == grid.candidates.size() || row.mean < res.trace[best].mean ||
        (row.mean == res.trace[best].mean && row.candidate < res.trace[best].candidate)) {
      best = c;
    }
  }
  require(best < grid.candidates.size(), Errc::numerical_failure, "every CV candidate failed to fit");
  res.best = res.trace[best].candidate;
  return res;
}

struct TunedEstimate {
  PrecisionEstimate estimate;
  CvResult cv;
};

/// CV on the data the method estimates from, then a refit at the chosen c_n.
inline TunedEstimate fit_tuned(const StudyDataset& target, const std::vector<StudyDataset>& aux,
                               const TransferConfig& cfg, const CvGrid& grid, Method method,
                               double eps = kDefaultPdEps) {
  target.validate();
  TunedEstimate out;
  if (is_transfer(method)) {
    require(!informative_for(method, cfg, aux.size()).empty(), Errc::empty_informative_set,
            "method " + to_string(method) + " needs a non-empty informative set");
    const FoldSplit split = split_target(static_cast<std::size_t>(target.n()), cfg.split_fraction, cfg.seed);
    out.cv = cv_select(target.rows(split.first), aux, cfg, grid, method, eps);
  } else {
    out.cv = cv_select(target, aux, cfg, grid, method, eps);
  }
  TransferConfig tuned = cfg;
  tuned.c_n = out.cv.best;
  tuned.lambda_cl.reset();
  tuned.lambda_omega.reset();
  out.estimate = run_pipeline(target, aux, tuned, method);
  return out;
}

inline void write_cv_trace_csv(std::ostream& os, const CvResult& cv) {
  os << "candidate,fold,score\n";
  for (const auto& row : cv.trace) {
    for (std::size_t f = 0; f < row.fold_scores.size(); ++f)
      os << format_double(row.candidate) << ',' << f + 1 << ',' << format_double(row.fold_scores[f]) << '\n';
    os << format_double(row.candidate) << ",mean," << format_double(row.mean) << '\n';
  }
}

}  // namespace tcclime
