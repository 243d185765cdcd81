#pragma once

// Kendall's tau and the rank-based correlation estimators built from it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcclime/matrix.hpp"

namespace tcclime {

enum class StudyKind { target, auxiliary };

struct StudyDataset {
  Matrix x;  // n x p observations
  std::string label;
  StudyKind kind = StudyKind::target;
  int aux_index = 0;  // 1-based study index for auxiliary data, 0 for the target
  std::vector<std::string> column_names;

  Eigen::Index n() const noexcept { return x.rows(); }
  Eigen::Index p() const noexcept { return x.cols(); }

  void validate() const {
    require(x.rows() >= 2, Errc::too_few_samples, "dataset '" + label + "' needs at least 2 observations");
    require(x.cols() >= 1, Errc::invalid_argument, "dataset '" + label + "' has no columns");
    require(x.allFinite(), Errc::invalid_argument, "dataset '" + label + "' has non-finite entries");
  }

  StudyDataset rows(std::span<const std::size_t> idx) const {
    StudyDataset out{Matrix(static_cast<Eigen::Index>(idx.size()), x.cols()), label, kind, aux_index, column_names};
    for (std::size_t r = 0; r < idx.size(); ++r) out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    return out;
  }
};

struct RankCorrelation {
  CorrelationMatrix s_hat;
  std::size_t source_n = 0;
};

namespace detail {

inline int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

inline void check_pair(std::size_t nx, std::size_t ny) {
  require(nx == ny, Errc::length_mismatch, "kendall tau inputs differ in length");
  require(nx >= 2, Errc::too_few_samples, "kendall tau needs at least 2 observations");
}

inline double tau_from_numerator(std::int64_t numerator, std::size_t n) noexcept {
  return 2.0 * static_cast<double>(numerator) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// Counts inversions (strictly decreasing pairs) of v while sorting it.
template <class T>
std::int64_t count_inversions(std::vector<T>& v, std::vector<T>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

template <class T>
std::int64_t tie_pairs_sorted(const std::vector<T>& sorted) {
  std::int64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      ties += static_cast<std::int64_t>(run * (run - 1) / 2);
      run = 1;
    }
  }
  return ties;
}

}  // namespace detail

/// Sum over pairs m < m' of sign(x_m - x_m') * sign(y_m - y_m'). O(n^2).
template <class T>
std::int64_t kendall_numerator_naive(std::span<const T> x, std::span<const T> y) {
  detail::check_pair(x.size(), y.size());
  std::int64_t s = 0;
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = a + 1; b < x.size(); ++b)
      s += detail::sign(static_cast<double>(x[a]) - static_cast<double>(x[b])) *
           detail::sign(static_cast<double>(y[a]) - static_cast<double>(y[b]));
  return s;
}

/// Same quantity by Knight's merge-sort method, O(n log n). Tied pairs count zero.
template <class T>
std::int64_t kendall_numerator_fast(std::span<const T> x, std::span<const T> y) {
  detail::check_pair(x.size(), y.size());
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  std::int64_t tx = 0, txy = 0;
  for (std::size_t i = 0, run_x = 1, run_xy = 1; i < n; ++i) {
    const bool last = i + 1 == n;
    const bool same_x = !last && x[order[i + 1]] == x[order[i]];
    const bool same_xy = same_x && y[order[i + 1]] == y[order[i]];
    if (same_x) {
      ++run_x;
    } else {
      tx += static_cast<std::int64_t>(run_x * (run_x - 1) / 2);
      run_x = 1;
    }
    if (same_xy) {
      ++run_xy;
    } else {
      txy += static_cast<std::int64_t>(run_xy * (run_xy - 1) / 2);
      run_xy = 1;
    }
  }

  std::vector<T> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t discordant = detail::count_inversions(ys, buf, 0, n);
  const std::int64_t ty = detail::tie_pairs_sorted(ys);
  return n0 - tx - ty + txy - 2 * discordant;
}

inline constexpr std::size_t kKendallFastThreshold = 64;

template <class T>
std::int64_t kendall_numerator(std::span<const T> x, std::span<const T> y) {
  return x.size() > kKendallFastThreshold ? kendall_numerator_fast(x, y) : kendall_numerator_naive(x, y);
}

/// Kendall's tau-a U-statistic.
inline double kendall_tau_pair(std::span<const double> x, std::span<const double> y) {
  return detail::tau_from_numerator(kendall_numerator(x, y), x.size());
}

/// Dense ranks of a column (equal values share a rank). Rank-based statistics see
/// only these, which makes them exactly invariant under increasing maps.
inline std::vector<std::int32_t> dense_ranks(const Eigen::Ref<const Vector>& col) {
  const auto n = static_cast<std::size_t>(col.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return col[static_cast<Eigen::Index>(a)] < col[static_cast<Eigen::Index>(b)];
  });
  std::vector<std::int32_t> r(n);
  std::int32_t rank = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && col[static_cast<Eigen::Index>(order[i])] != col[static_cast<Eigen::Index>(order[i - 1])]) ++rank;
    r[order[i]] = rank;
  }
  return r;
}

/// Kendall's tau for every column pair.
inline Matrix kendall_tau_matrix(const StudyDataset& d) {
  d.validate();
  const Eigen::Index p = d.p();
  const auto n = static_cast<std::size_t>(d.n());
  std::vector<std::vector<std::int32_t>> ranks;
  ranks.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) ranks.push_back(dense_ranks(d.x.col(j)));
  Matrix tau = Matrix::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const std::span<const std::int32_t> a(ranks[static_cast<std::size_t>(i)]);
      const std::span<const std::int32_t> b(ranks[static_cast<std::size_t>(j)]);
      const double t = detail::tau_from_numerator(kendall_numerator(a, b), n);
      tau(i, j) = t;
      tau(j, i) = t;
    }
  }
  return tau;
}

/// sin(pi/2 * tau) off the diagonal, 1 on it.
inline RankCorrelation rank_correlation_matrix(const StudyDataset& d) {
  Matrix s = kendall_tau_matrix(d);
  const Eigen::Index p = s.rows();
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      s(i, j) = i == j ? 1.0 : std::clamp(std::sin(std::numbers::pi / 2.0 * s(i, j)), -1.0, 1.0);
    }
  }
  return {CorrelationMatrix(SymMatrix(s)), static_cast<std::size_t>(d.n())};
}

inline CorrelationMatrix pearson_correlation_matrix(const StudyDataset& d) {
  d.validate();
  const Matrix centered = d.x.rowwise() - d.x.colwise().mean();
  Matrix cov = centered.transpose() * centered;
  const Eigen::Index p = cov.rows();
  Vector sd(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(cov(j, j) > 0.0)) throw Error(Errc::zero_variance, "column " + std::to_string(j) + " has zero variance");
    sd[j] = std::sqrt(cov(j, j));
  }
  Matrix r(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double v = std::clamp(cov(i, j) / (sd[i] * sd[j]), -1.0, 1.0);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return CorrelationMatrix(SymMatrix(r));
}

/// Sample-size weighted average sum_k (n_k / n_A) S_k.
///
/// Accumulated as S_1 + sum_{k>1} a_k (S_k - S_1) so that identical inputs give
/// back S_1 bit-for-bit.
inline CorrelationMatrix weighted_aux_correlation(std::span<const CorrelationMatrix> mats,
                                                  std::span<const std::size_t> sizes) {
  require(!mats.empty(), Errc::empty_informative_set, "no auxiliary correlation matrices to combine");
  require(mats.size() == sizes.size(), Errc::dimension_mismatch, "one sample size per matrix required");
  const Eigen::Index p = mats.front().dim();
  double total = 0.0;
  for (std::size_t k = 0; k < mats.size(); ++k) {
    require(mats[k].dim() == p, Errc::dimension_mismatch, "auxiliary matrices differ in dimension");
    require(sizes[k] > 0, Errc::invalid_argument, "auxiliary sample size must be positive");
    total += static_cast<double>(sizes[k]);
  }
  Matrix acc = mats.front().matrix();
  for (std::size_t k = 1; k < mats.size(); ++k) {
    const double w = static_cast<double>(sizes[k]) / total;
    acc += w * (mats[k].matrix() - mats.front().matrix());
  }
  acc = acc.cwiseMax(-1.0).cwiseMin(1.0);
  acc.diagonal().setOnes();
  return CorrelationMatrix(SymMatrix::symmetrize(acc));
}

inline CorrelationMatrix weighted_aux_correlation(std::span<const RankCorrelation> mats) {
  std::vector<CorrelationMatrix> m;
  std::vector<std::size_t> n;
  for (const auto& r : mats) {
    m.push_back(r.s_hat);
    n.push_back(r.source_n);
  }
  return weighted_aux_correlation(std::span<const CorrelationMatrix>(m), std::span<const std::size_t>(n));
}

}  // namespace tcclime
