#pragma once

// Data generation: precision-matrix designs, auxiliary-study perturbations and
// nonparanormal sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tcclime/matrix.hpp"
#include "tcclime/rank_corr.hpp"
#include "tcclime/rng.hpp"

namespace tcclime {

enum class DesignKind { banded, block_toeplitz };
enum class TransformKind { gaussian_cdf, exponential, linear };

inline std::string to_string(DesignKind d) { return d == DesignKind::banded ? "banded" : "block"; }

inline std::string to_string(TransformKind t) {
  switch (t) {
    case TransformKind::gaussian_cdf: return "cdf";
    case TransformKind::exponential: return "exp";
    case TransformKind::linear: return "linear";
  }
  return "?";
}

inline DesignKind parse_design(const std::string& s) {
  if (s == "banded") return DesignKind::banded;
  if (s == "block" || s == "block_toeplitz") return DesignKind::block_toeplitz;
  throw Error(Errc::invalid_argument, "unknown design '" + s + "' (expected banded|block)");
}

inline TransformKind parse_transform(const std::string& s) {
  if (s == "cdf" || s == "gaussian_cdf") return TransformKind::gaussian_cdf;
  if (s == "exp" || s == "exponential") return TransformKind::exponential;
  if (s == "linear") return TransformKind::linear;
  throw Error(Errc::invalid_argument, "unknown transform '" + s + "' (expected cdf|exp|linear)");
}

struct TransformSpec {
  TransformKind kind = TransformKind::linear;
  double mu_g0 = 0.05;
  double sigma_g0 = 0.4;
};

/// Target precision design. `raw_omega` is the formula before the correlation
/// rescaling; `omega` is the inverse of the rescaled covariance `sigma`.
struct PrecisionModel {
  DesignKind kind = DesignKind::banded;
  SymMatrix raw_omega;
  SymMatrix omega;
  CorrelationMatrix sigma;
};

namespace detail {

inline constexpr double kSupportFloor = 1e-12;

inline PrecisionModel finalize_design(DesignKind kind, const Matrix& raw) {
  const SymMatrix raw_sym(raw);
  const CorrelationMatrix sigma = rescale_to_correlation(invert_pd(raw_sym));
  Matrix omega = invert_pd(sigma.sym()).matrix();
  // Reinversion leaves round-off where the design has exact zeros.
  omega = omega.unaryExpr([](double v) { return std::abs(v) < kSupportFloor ? 0.0 : v; });
  return {kind, raw_sym, SymMatrix(omega), sigma};
}

}  // namespace detail

/// Omega_ij = 2 * 0.6^|i-j| for |i-j| <= 7, zero beyond.
inline PrecisionModel banded_precision(Eigen::Index p) {
  require(p >= 8, Errc::invalid_argument, "banded design needs p >= 8");
  Matrix raw = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto d = std::abs(i - j);
      if (d <= 7) raw(i, j) = 2.0 * std::pow(0.6, static_cast<double>(d));
    }
  return detail::finalize_design(DesignKind::banded, raw);
}

/// Block diagonal with 4x4 symmetric Toeplitz blocks (1.2, 0.9, 0.6, 0.3).
inline PrecisionModel block_toeplitz_precision(Eigen::Index p) {
  require(p > 0 && p % 4 == 0, Errc::invalid_argument, "block design needs p divisible by 4");
  static constexpr double row[4] = {1.2, 0.9, 0.6, 0.3};
  Matrix raw = Matrix::Zero(p, p);
  for (Eigen::Index b = 0; b < p; b += 4)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) raw(b + i, b + j) = row[std::abs(i - j)];
  return detail::finalize_design(DesignKind::block_toeplitz, raw);
}

inline PrecisionModel make_design(DesignKind kind, Eigen::Index p) {
  return kind == DesignKind::banded ? banded_precision(p) : block_toeplitz_precision(p);
}

struct InformativeAux {
  CorrelationMatrix sigma;  // final Sigma^(k)
  Matrix delta_drawn;       // sparse draw used to build Sigma (Delta + I)
  Matrix delta;             // Omega Sigma^(k) - I for the final Sigma^(k)
};

inline constexpr double kAuxSparsityProb = 0.1;

/// Sigma^(k) = Sigma (Delta + I) with sparse uniform Delta, then symmetrized,
/// projected to eigenvalues >= eps and rescaled to unit diagonal.
inline InformativeAux informative_aux_covariance(const CorrelationMatrix& sigma, const SymMatrix& omega, double r,
                                                 Rng& rng, double eps = kDefaultPdEps) {
  require(r >= 0.0, Errc::invalid_argument, "similarity level r must be non-negative");
  const Eigen::Index p = sigma.dim();
  require(omega.dim() == p, Errc::dimension_mismatch, "Sigma and Omega differ in dimension");
  const double half_width = r / static_cast<double>(p);
  Matrix delta = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      if (rng.bernoulli(kAuxSparsityProb)) delta(i, j) = rng.uniform(-half_width, half_width);
  const Matrix sk = sigma.matrix() * (delta + Matrix::Identity(p, p));
  const SymMatrix projected = pd_project(SymMatrix::symmetrize(sk), eps);
  CorrelationMatrix final_sigma = rescale_to_correlation(projected);
  Matrix realized = omega.matrix() * final_sigma.matrix() - Matrix::Identity(p, p);
  return {std::move(final_sigma), std::move(delta), std::move(realized)};
}

/// Omega^(k)_ij = 1.5 I(i=j) + delta_ij with delta_ij = 0.2 w.p. 0.1; symmetrized,
/// projected, inverted and rescaled.
inline CorrelationMatrix noninformative_aux_covariance(Eigen::Index p, Rng& rng, double eps = kDefaultPdEps) {
  require(p >= 2, Errc::invalid_argument, "non-informative design needs p >= 2");
  Matrix om = 1.5 * Matrix::Identity(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      if (rng.bernoulli(kAuxSparsityProb)) om(i, j) += 0.2;
  const SymMatrix projected = pd_project(SymMatrix::symmetrize(om), eps);
  return rescale_to_correlation(invert_pd(projected));
}

// ---------------------------------------------------------------------------
// Marginal transformations g = f^{-1}.

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Gaussian-CDF transform centred and scaled so g(Z) has mean 0 and variance 1
/// for Z ~ N(mu_j, sigma_j^2). The two normalizing integrals are evaluated once
/// at construction.
class GaussianCdfTransform {
 public:
  static constexpr double kQuadTol = 1e-10;

  GaussianCdfTransform(double mu_g0, double sigma_g0, double mu_j = 0.0, double sigma_j = 1.0)
      : mu_g0_(mu_g0), sigma_g0_(sigma_g0) {
    require(sigma_g0 > 0.0, Errc::invalid_argument, "sigma_g0 must be positive");
    require(sigma_j > 0.0, Errc::invalid_argument, "sigma_j must be positive");
    using boost::math::quadrature::gauss_kronrod;
    const double lo = mu_j - 8.0 * sigma_j, hi = mu_j + 8.0 * sigma_j;
    auto density = [=](double t) { return normal_pdf((t - mu_j) / sigma_j) / sigma_j; };
    double err = 0.0;
    mean_ = gauss_kronrod<double, 15>::integrate([&](double t) { return g0(t) * density(t); }, lo, hi, 15,
                                                 1e-13, &err);
    check(err);
    const double m = mean_;
    const double var = gauss_kronrod<double, 15>::integrate(
        [&](double t) {
          const double d = g0(t) - m;
          return d * d * density(t);
        },
        lo, hi, 15, 1e-13, &err);
    check(err);
    require(var > 0.0, Errc::quadrature_failure, "normalizing integral is not positive");
    scale_ = std::sqrt(var);
  }

  double operator()(double z) const { return (g0(z) - mean_) / scale_; }

  double mean_integral() const noexcept { return mean_; }
  double scale() const noexcept { return scale_; }

 private:
  double g0(double t) const { return normal_cdf((t - mu_g0_) / sigma_g0_); }

  static void check(double err) {
    if (!(err <= kQuadTol)) throw Error(Errc::quadrature_failure, "quadrature error estimate " + format_double(err));
  }

  double mu_g0_, sigma_g0_;
  double mean_ = 0.0, scale_ = 1.0;
};

/// Single-value form with a process-wide cache keyed by the transform parameters.
inline double gaussian_cdf_transform_value(double z, double mu_g0, double sigma_g0, double sigma_j,
                                           double mu_j = 0.0) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, double, double>, GaussianCdfTransform> cache;
  const auto key = std::make_tuple(mu_g0, sigma_g0, mu_j, sigma_j);
  const GaussianCdfTransform* t = nullptr;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, GaussianCdfTransform(mu_g0, sigma_g0, mu_j, sigma_j)).first;
    t = &it->second;
  }
  return (*t)(z);
}

/// Z rows ~ N(0, Sigma) through the Cholesky factor; X = g(Z) column by column.
inline StudyDataset sample_nonparanormal(const CorrelationMatrix& sigma, const TransformSpec& t, Eigen::Index n,
                                         Rng& rng) {
  require(n >= 1, Errc::invalid_argument, "sample size must be positive");
  const LowerTriangular l = cholesky(sigma.sym());
  const Eigen::Index p = sigma.dim();
  Matrix g(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) g(i, j) = rng.normal();
  Matrix z = g * l.l.transpose();

  StudyDataset d;
  switch (t.kind) {
    case TransformKind::linear:
      break;
    case TransformKind::exponential:
      z = z.array().exp().matrix();
      break;
    case TransformKind::gaussian_cdf: {
      // sigma_j = Sigma_jj = 1 and mu_j = 0 for every coordinate.
      const GaussianCdfTransform tr(t.mu_g0, t.sigma_g0, 0.0, 1.0);
      z = z.unaryExpr([&](double v) { return tr(v); });
      break;
    }
  }
  d.x = std::move(z);
  return d;
}

// ---------------------------------------------------------------------------
// A full target + auxiliary bundle.

struct SimulationConfig {
  DesignKind design = DesignKind::banded;
  TransformSpec transform{};
  Eigen::Index p = 100;
  Eigen::Index n = 200;
  Eigen::Index n_k = 200;
  int K = 5;
  std::vector<int> informative{1, 2, 3};  // 1-based auxiliary indices
  double r = 10.0;
  double pd_eps = kDefaultPdEps;
  std::uint64_t seed = 1;
};

struct AuxTruth {
  int index = 0;  // 1-based
  bool informative = false;
  CorrelationMatrix sigma;
  Matrix delta;  // Omega Sigma^(k) - I against the final Sigma^(k)
  std::uint64_t covariance_seed = 0;
  std::uint64_t sample_seed = 0;
};

struct SimulatedBundle {
  PrecisionModel truth;
  StudyDataset target;
  std::vector<StudyDataset> aux;
  std::vector<AuxTruth> aux_truth;
  std::vector<int> informative;
  std::uint64_t target_seed = 0;
};

inline bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

/// Stream tags for derive_seed: covariance draws and samples use separate substreams.
inline constexpr std::uint64_t kCovarianceStream = 1;
inline constexpr std::uint64_t kSampleStream = 2;

inline SimulatedBundle simulate_bundle(const SimulationConfig& cfg, const PrecisionModel& truth) {
  require(cfg.K >= 0, Errc::invalid_argument, "K must be non-negative");
  for (int k : cfg.informative)
    require(k >= 1 && k <= cfg.K, Errc::invalid_argument, "informative index " + std::to_string(k) + " outside 1..K");
  SimulatedBundle b;
  b.truth = truth;
  b.informative = cfg.informative;
  std::sort(b.informative.begin(), b.informative.end());

  b.target_seed = derive_seed(cfg.seed, {kSampleStream, 0});
  Rng target_rng(b.target_seed);
  b.target = sample_nonparanormal(truth.sigma, cfg.transform, cfg.n, target_rng);
  b.target.label = "target";
  b.target.kind = StudyKind::target;

  for (int k = 1; k <= cfg.K; ++k) {
    AuxTruth at;
    at.index = k;
    at.informative = contains(b.informative, k);
    at.covariance_seed = derive_seed(cfg.seed, {kCovarianceStream, static_cast<std::uint64_t>(k)});
    at.sample_seed = derive_seed(cfg.seed, {kSampleStream, static_cast<std::uint64_t>(k)});
    Rng cov_rng(at.covariance_seed);
    if (at.informative) {
      auto inf = informative_aux_covariance(truth.sigma, truth.omega, cfg.r, cov_rng, cfg.pd_eps);
      at.sigma = std::move(inf.sigma);
      at.delta = std::move(inf.delta);
    } else {
      at.sigma = noninformative_aux_covariance(truth.sigma.dim(), cov_rng, cfg.pd_eps);
      at.delta = truth.omega.matrix() * at.sigma.matrix() - Matrix::Identity(truth.sigma.dim(), truth.sigma.dim());
    }
    Rng sample_rng(at.sample_seed);
    StudyDataset d = sample_nonparanormal(at.sigma, cfg.transform, cfg.n_k, sample_rng);
    d.label = "aux" + std::to_string(k);
    d.kind = StudyKind::auxiliary;
    d.aux_index = k;
    b.aux.push_back(std::move(d));
    b.aux_truth.push_back(std::move(at));
  }
  return b;
}

inline SimulatedBundle simulate_bundle(const SimulationConfig& cfg) {
  return simulate_bundle(cfg, make_design(cfg.design, cfg.p));
}

/// Population Delta^A = sum_k alpha_k (Omega Sigma^(k) - I) over the informative studies.
inline Matrix population_delta(const SimulatedBundle& b) {
  const Eigen::Index p = b.truth.omega.dim();
  Matrix acc = Matrix::Zero(p, p);
  double total = 0.0;
  for (std::size_t k = 0; k < b.aux.size(); ++k) {
    if (!b.aux_truth[k].informative) continue;
    const auto nk = static_cast<double>(b.aux[k].n());
    acc += nk * b.aux_truth[k].delta;
    total += nk;
  }
  return total > 0 ? Matrix(acc / total) : acc;
}

}  // namespace tcclime
