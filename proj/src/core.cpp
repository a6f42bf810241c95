#include "scorematch/core.hpp"

#include <cmath>

namespace scorematch {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::domain: return "domain";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

namespace {

template <typename M>
void require_finite(const M& m, const char* what) {
  if (!m.allFinite()) fail(ErrorCode::invalid_argument, std::string(what) + " contains NaN or Inf");
}

}  // namespace

Dataset Dataset::continuous(RowMatrix x, RowMatrix y) {
  if (x.rows() < 1) fail(ErrorCode::invalid_argument, "dataset must have at least one row");
  if (x.rows() != y.rows())
    fail(ErrorCode::dimension_mismatch, "covariate and response row counts differ");
  if (y.cols() < 1) fail(ErrorCode::invalid_argument, "response block has no columns");
  require_finite(x, "covariates");
  require_finite(y, "responses");
  Dataset d;
  d.x_ = std::move(x);
  d.y_cont_ = std::move(y);
  return d;
}

Dataset Dataset::counts(RowMatrix x, RowMatrixI y) {
  if (x.rows() < 1) fail(ErrorCode::invalid_argument, "dataset must have at least one row");
  if (x.rows() != y.rows())
    fail(ErrorCode::dimension_mismatch, "covariate and response row counts differ");
  if (y.cols() < 1) fail(ErrorCode::invalid_argument, "response block has no columns");
  require_finite(x, "covariates");
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      if (y(i, j) < 0)
        fail(ErrorCode::invalid_argument,
             "negative count at row " + std::to_string(i) + " column " + std::to_string(j));
  Dataset d;
  d.x_ = std::move(x);
  d.y_count_ = std::move(y);
  return d;
}

std::size_t Dataset::response_dim() const noexcept {
  return static_cast<std::size_t>(y_count_ ? y_count_->cols() : y_cont_->cols());
}

const RowMatrix& Dataset::y_cont() const {
  if (!y_cont_) fail(ErrorCode::invalid_argument, "dataset has count responses, not continuous");
  return *y_cont_;
}

const RowMatrixI& Dataset::y_count() const {
  if (!y_count_) fail(ErrorCode::invalid_argument, "dataset has continuous responses, not counts");
  return *y_count_;
}

std::span<const double> Dataset::y_cont_row(std::size_t i) const {
  const auto& y = y_cont();
  return {y.data() + i * static_cast<std::size_t>(y.cols()), static_cast<std::size_t>(y.cols())};
}

std::span<const int> Dataset::y_count_row(std::size_t i) const {
  const auto& y = y_count();
  return {y.data() + i * static_cast<std::size_t>(y.cols()), static_cast<std::size_t>(y.cols())};
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  if (rows.empty()) fail(ErrorCode::invalid_argument, "empty row subset");
  RowMatrix xs(static_cast<Eigen::Index>(rows.size()), x_.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= this->rows()) fail(ErrorCode::invalid_argument, "row index out of range");
    xs.row(static_cast<Eigen::Index>(k)) = x_.row(static_cast<Eigen::Index>(rows[k]));
  }
  if (y_count_) {
    RowMatrixI ys(static_cast<Eigen::Index>(rows.size()), y_count_->cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
      ys.row(static_cast<Eigen::Index>(k)) = y_count_->row(static_cast<Eigen::Index>(rows[k]));
    return counts(std::move(xs), std::move(ys));
  }
  RowMatrix ys(static_cast<Eigen::Index>(rows.size()), y_cont_->cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    ys.row(static_cast<Eigen::Index>(k)) = y_cont_->row(static_cast<Eigen::Index>(rows[k]));
  return continuous(std::move(xs), std::move(ys));
}

std::size_t tg_parameter_count(std::size_t d, std::size_t p_cov) noexcept {
  return d * p_cov + d * (d + 1) / 2;
}

std::size_t vech_index(std::size_t row, std::size_t col, std::size_t d) noexcept {
  // columns 0..col-1 hold d, d-1, ... entries
  return col * d - col * (col - 1) / 2 + (row - col);
}

ParamVector pack(const TruncGaussParams& params) {
  const auto d = static_cast<std::size_t>(params.B.rows());
  const auto p = static_cast<std::size_t>(params.B.cols());
  if (d == 0 || p == 0) fail(ErrorCode::dimension_mismatch, "B must be non-empty");
  if (static_cast<std::size_t>(params.Lambda.rows()) != d ||
      static_cast<std::size_t>(params.Lambda.cols()) != d)
    fail(ErrorCode::dimension_mismatch, "Lambda must be d x d with d = rows(B)");
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < j; ++k)
      if (std::abs(params.Lambda(j, k) - params.Lambda(k, j)) > 1e-12)
        fail(ErrorCode::invalid_argument, "Lambda is not symmetric");

  ParamVector pv;
  pv.layout = Layout::truncated_gaussian;
  pv.response_dim = d;
  pv.covariates = p;
  pv.theta.resize(static_cast<Eigen::Index>(tg_parameter_count(d, p)));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t j = 0; j < d; ++j) pv.theta(pos++) = params.B(j, k);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = c; r < d; ++r) pv.theta(pos++) = params.Lambda(r, c);
  return pv;
}

ParamVector pack(const CmpParams& params) {
  if (params.beta.size() == 0) fail(ErrorCode::dimension_mismatch, "beta must be non-empty");
  ParamVector pv;
  pv.layout = Layout::cmp;
  pv.response_dim = 1;
  pv.covariates = static_cast<std::size_t>(params.beta.size());
  pv.theta.resize(params.beta.size() + 1);
  pv.theta.head(params.beta.size()) = params.beta;
  pv.theta(params.beta.size()) = params.nu;
  return pv;
}

TruncGaussParams unpack_tg(const ParamVector& pv) {
  if (pv.layout != Layout::truncated_gaussian)
    fail(ErrorCode::invalid_argument, "parameter vector is not a truncated Gaussian layout");
  const std::size_t d = pv.response_dim, p = pv.covariates;
  if (pv.size() != tg_parameter_count(d, p))
    fail(ErrorCode::dimension_mismatch, "theta length does not match (d, p_cov)");
  TruncGaussParams out;
  out.B.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(p));
  out.Lambda.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::size_t pos = 0;
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t j = 0; j < d; ++j) out.B(j, k) = pv.theta(pos++);
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = c; r < d; ++r) {
      out.Lambda(r, c) = pv.theta(pos);
      out.Lambda(c, r) = pv.theta(pos);
      ++pos;
    }
  return out;
}

CmpParams unpack_cmp(const ParamVector& pv) {
  if (pv.layout != Layout::cmp) fail(ErrorCode::invalid_argument, "parameter vector is not a CMP layout");
  if (pv.size() != pv.covariates + 1)
    fail(ErrorCode::dimension_mismatch, "theta length does not match p_cov + 1");
  CmpParams out;
  out.beta = pv.theta.head(static_cast<Eigen::Index>(pv.covariates));
  out.nu = pv.theta(static_cast<Eigen::Index>(pv.covariates));
  return out;
}

ParamVector make_param_vector(Layout layout, std::size_t d, std::size_t p_cov, Eigen::VectorXd theta) {
  const std::size_t expected = layout == Layout::cmp ? p_cov + 1 : tg_parameter_count(d, p_cov);
  if (static_cast<std::size_t>(theta.size()) != expected)
    fail(ErrorCode::dimension_mismatch, "theta has " + std::to_string(theta.size()) +
                                            " entries, expected " + std::to_string(expected));
  ParamVector pv;
  pv.layout = layout;
  pv.response_dim = layout == Layout::cmp ? 1 : d;
  pv.covariates = p_cov;
  pv.theta = std::move(theta);
  return pv;
}

std::vector<std::string> parameter_names(Layout layout, std::size_t d, std::size_t p_cov) {
  std::vector<std::string> names;
  if (layout == Layout::cmp) {
    for (std::size_t k = 0; k < p_cov; ++k) names.push_back("beta" + std::to_string(k + 1));
    names.emplace_back("nu");
    return names;
  }
  for (std::size_t k = 0; k < p_cov; ++k)
    for (std::size_t j = 0; j < d; ++j)
      names.push_back("B" + std::to_string(j + 1) + std::to_string(k + 1));
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t r = c; r < d; ++r)
      names.push_back("Lambda" + std::to_string(r + 1) + std::to_string(c + 1));
  return names;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) fail(ErrorCode::domain, "matrix is not positive definite");
  return llt.matrixL();
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace scorematch
