#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scorematch {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixI = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  domain,
  numerical,
  io,
  parse,
  internal,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` separates user-facing
/// problems (bad input, bad data, divergent series) from internal faults.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }
  bool internal() const noexcept { return code_ == ErrorCode::internal; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

/// Fixed-design regression data: covariates plus exactly one response block.
class Dataset {
 public:
  static Dataset continuous(RowMatrix x, RowMatrix y);
  static Dataset counts(RowMatrix x, RowMatrixI y);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  std::size_t covariates() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  std::size_t response_dim() const noexcept;
  bool is_count() const noexcept { return y_count_.has_value(); }

  const RowMatrix& x() const noexcept { return x_; }
  const RowMatrix& y_cont() const;
  const RowMatrixI& y_count() const;

  std::span<const double> x_row(std::size_t i) const {
    return {x_.data() + i * covariates(), covariates()};
  }
  std::span<const double> y_cont_row(std::size_t i) const;
  std::span<const int> y_count_row(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  Dataset() = default;
  RowMatrix x_;
  std::optional<RowMatrix> y_cont_;
  std::optional<RowMatrixI> y_count_;
};

struct TruncGaussParams {
  Eigen::MatrixXd B;       // d x p_cov
  Eigen::MatrixXd Lambda;  // d x d precision
};

struct CmpParams {
  Eigen::VectorXd beta;
  double nu = 1.0;
};

enum class Layout { truncated_gaussian, cmp };

/// Flat parameter vector. Truncated Gaussian packs (vec(B), vech(Lambda)),
/// vech being the lower triangle read column by column; CMP packs (beta, nu).
struct ParamVector {
  Layout layout = Layout::cmp;
  std::size_t response_dim = 1;
  std::size_t covariates = 0;
  Eigen::VectorXd theta;

  std::size_t size() const noexcept { return static_cast<std::size_t>(theta.size()); }
  std::span<const double> span() const noexcept { return {theta.data(), size()}; }
};

std::size_t tg_parameter_count(std::size_t d, std::size_t p_cov) noexcept;
/// Position of Lambda(row, col), row >= col, inside vech.
std::size_t vech_index(std::size_t row, std::size_t col, std::size_t d) noexcept;

ParamVector pack(const TruncGaussParams& params);
ParamVector pack(const CmpParams& params);
TruncGaussParams unpack_tg(const ParamVector& pv);
CmpParams unpack_cmp(const ParamVector& pv);

ParamVector make_param_vector(Layout layout, std::size_t d, std::size_t p_cov, Eigen::VectorXd theta);

std::vector<std::string> parameter_names(Layout layout, std::size_t d, std::size_t p_cov);

/// Lower Cholesky factor; throws `domain` if the matrix is not positive definite.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m);
bool is_positive_definite(const Eigen::MatrixXd& m);

}  // namespace scorematch
