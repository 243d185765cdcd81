#pragma once

#include <stdexcept>
#include <string>

namespace tcclime {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  length_mismatch,
  too_few_samples,
  zero_variance,
  non_positive_diagonal,
  not_positive_definite,
  no_convergence,
  empty_informative_set,
  infeasible,
  numerical_failure,
  quadrature_failure,
  degenerate_truth,
  parse_error,
  io_error,
};

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { usage, data, numerical };

constexpr const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::zero_variance: return "ZeroVariance";
    case Errc::non_positive_diagonal: return "NonPositiveDiagonal";
    case Errc::not_positive_definite: return "NotPositiveDefinite";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::empty_informative_set: return "EmptyInformativeSet";
    case Errc::infeasible: return "Infeasible";
    case Errc::numerical_failure: return "NumericalFailure";
    case Errc::quadrature_failure: return "QuadratureFailure";
    case Errc::degenerate_truth: return "DegenerateTruth";
    case Errc::parse_error: return "ParseError";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

constexpr ErrorCategory errc_category(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument:
    case Errc::empty_informative_set:
      return ErrorCategory::usage;
    case Errc::not_positive_definite:
    case Errc::no_convergence:
    case Errc::infeasible:
    case Errc::numerical_failure:
    case Errc::quadrature_failure:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return errc_category(code_); }

 private:
  Errc code_;
};

/// Solver failure that remembers which column of a matrix problem broke.
class ColumnError : public Error {
 public:
  ColumnError(Errc code, std::size_t column, const std::string& what)
      : Error(code, "column " + std::to_string(column) + ": " + what), column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace tcclime
