#include "scorematch/model.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace scorematch {

namespace {

[[noreturn]] void unsupported(const char* what) {
  fail(ErrorCode::invalid_argument, std::string("model does not provide ") + what);
}

inline double logistic_t(double log_u) {
  // t(u) = 1 / (1 + u) evaluated from log u without overflow
  if (log_u > 0.0) {
    const double e = std::exp(-log_u);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(log_u));
}

// Shared row kernel for the log-transformed truncated Gaussian. Works on
// stack buffers; callers validate dimensions.
struct TgRow {
  std::size_t d = 0;
  std::array<double, kMaxTgDim> t{};  // exp(y~)
  std::array<double, kMaxTgDim> r{};  // t - Bx
  std::array<double, kMaxTgDim> s{};  // Lambda r

  TgRow(std::span<const double> y, std::span<const double> x, std::span<const double> theta) : d(y.size()) {
    const std::size_t p = x.size();
    const std::size_t off = d * p;
    for (std::size_t j = 0; j < d; ++j) {
      double mu = 0.0;
      for (std::size_t k = 0; k < p; ++k) mu += theta[j + k * d] * x[k];
      t[j] = std::exp(y[j]);
      r[j] = t[j] - mu;
    }
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += lambda(theta, off, j, k) * r[k];
      s[j] = acc;
    }
  }

  double lambda(std::span<const double> theta, std::size_t off, std::size_t j, std::size_t k) const {
    return j >= k ? theta[off + vech_index(j, k, d)] : theta[off + vech_index(k, j, d)];
  }
};

void check_tg_dims(std::size_t d, std::span<const double> y, std::span<const double> x,
                   std::span<const double> theta) {
  if (y.size() != d) fail(ErrorCode::dimension_mismatch, "response length does not match model dimension");
  if (x.empty()) fail(ErrorCode::dimension_mismatch, "empty covariate row");
  if (theta.size() != tg_parameter_count(d, x.size()))
    fail(ErrorCode::dimension_mismatch, "theta length does not match (d, p_cov)");
}

void check_cmp_dims(std::span<const double> x, std::span<const double> theta) {
  if (x.empty() || theta.size() != x.size() + 1)
    fail(ErrorCode::dimension_mismatch, "CMP theta must have length p_cov + 1");
}

}  // namespace

void ModelSpec::check_parameters(std::span<const double> theta) const {
  for (double v : theta)
    if (!std::isfinite(v)) fail(ErrorCode::domain, "non-finite parameter value");
}

double ModelSpec::log_unnorm(std::span<const double>, std::span<const double>, std::span<const double>) const {
  unsupported("a continuous log density");
}

double ModelSpec::log_unnorm(std::span<const int>, std::span<const double>, std::span<const double>) const {
  unsupported("a count log mass");
}

double ModelSpec::sample_derivatives(std::span<const double>, std::span<const double>, std::span<const double>,
                                     std::span<double>) const {
  unsupported("sample-space derivatives");
}

double ModelSpec::forward_ratio(std::span<const int>, std::size_t, std::span<const double>,
                                std::span<const double>) const {
  unsupported("forward ratios");
}

double ModelSpec::backward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                                 std::span<const double> theta) const {
  if (j >= y.size()) fail(ErrorCode::dimension_mismatch, "coordinate index out of range");
  if (y[j] == 0) return std::numeric_limits<double>::infinity();
  if (y.size() <= kMaxTgDim) {
    std::array<int, kMaxTgDim> down{};
    std::copy(y.begin(), y.end(), down.begin());
    down[j] -= 1;
    return forward_ratio(std::span<const int>(down.data(), y.size()), j, x, theta);
  }
  std::vector<int> down(y.begin(), y.end());
  down[j] -= 1;
  return forward_ratio(down, j, x, theta);
}

bool ModelSpec::rho_gradient(ObjectiveTag, const Observation&, std::span<const double>, std::span<double>) const {
  return false;
}

bool ModelSpec::interior(std::span<const double>) const { return true; }

double linear_predictor(std::span<const double> x, std::span<const double> beta) {
  if (x.size() != beta.size()) fail(ErrorCode::dimension_mismatch, "covariate row and beta lengths differ");
  double eta = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) eta += x[k] * beta[k];
  return eta;
}

// ---------------------------------------------------------------------------
// Truncated Gaussian

TgModel::TgModel(std::size_t d) : d_(d) {
  if (d == 0 || d > kMaxTgDim)
    fail(ErrorCode::invalid_argument, "truncated Gaussian dimension must be in [1, 16]");
}

std::size_t TgModel::parameter_count(std::size_t covariates) const { return tg_parameter_count(d_, covariates); }

void TgModel::check_parameters(std::span<const double> theta) const { ModelSpec::check_parameters(theta); }

double TgModel::log_unnorm(std::span<const double> y, std::span<const double> x,
                           std::span<const double> theta) const {
  check_tg_dims(d_, y, x, theta);
  const TgRow row(y, x, theta);
  double lin = 0.0, quad = 0.0;
  for (std::size_t j = 0; j < d_; ++j) {
    lin += y[j];
    quad += row.r[j] * row.s[j];
  }
  return lin - 0.5 * quad;
}

double TgModel::sample_derivatives(std::span<const double> y, std::span<const double> x,
                                   std::span<const double> theta, std::span<double> grad) const {
  check_tg_dims(d_, y, x, theta);
  if (grad.size() != d_) fail(ErrorCode::dimension_mismatch, "gradient buffer has wrong length");
  const TgRow row(y, x, theta);
  const std::size_t off = d_ * x.size();
  double lap = 0.0;
  for (std::size_t j = 0; j < d_; ++j) {
    const double ts = row.t[j] * row.s[j];
    grad[j] = 1.0 - ts;
    lap += -ts - row.t[j] * row.t[j] * row.lambda(theta, off, j, j);
  }
  return lap;
}

bool TgModel::rho_gradient(ObjectiveTag tag, const Observation& obs, std::span<const double> theta,
                           std::span<double> out) const {
  if (tag != ObjectiveTag::sm_continuous) return false;
  check_tg_dims(d_, obs.y_cont, obs.x, theta);
  if (out.size() != theta.size()) fail(ErrorCode::dimension_mismatch, "gradient buffer has wrong length");
  const TgRow row(obs.y_cont, obs.x, theta);
  const std::size_t p = obs.x.size();
  const std::size_t off = d_ * p;

  std::array<double, kMaxTgDim> v{};   // T^2 s
  std::array<double, kMaxTgDim> gr{};  // d rho / d r = Lambda (-4 t + 2 v)
  for (std::size_t j = 0; j < d_; ++j) v[j] = row.t[j] * row.t[j] * row.s[j];
  for (std::size_t j = 0; j < d_; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d_; ++k) acc += row.lambda(theta, off, j, k) * (-4.0 * row.t[k] + 2.0 * v[k]);
    gr[j] = acc;
  }
  for (std::size_t k = 0; k < p; ++k)
    for (std::size_t j = 0; j < d_; ++j) out[j + k * d_] = -gr[j] * obs.x[k];
  for (std::size_t c = 0; c < d_; ++c)
    for (std::size_t r = c; r < d_; ++r) {
      double g;
      if (r == c) {
        g = -4.0 * row.t[r] * row.r[r] - 2.0 * row.t[r] * row.t[r] + 2.0 * row.r[r] * v[r];
      } else {
        g = -4.0 * (row.t[r] * row.r[c] + row.t[c] * row.r[r]) + 2.0 * (row.r[r] * v[c] + row.r[c] * v[r]);
      }
      out[off + vech_index(r, c, d_)] = g;
    }
  return true;
}

TgEval tg_eval(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& x, const TruncGaussParams& params) {
  const auto d = static_cast<std::size_t>(params.B.rows());
  if (static_cast<std::size_t>(y_tilde.size()) != d || x.size() != params.B.cols())
    fail(ErrorCode::dimension_mismatch, "tg_eval: inconsistent dimensions");
  const TgModel model(d);
  const ParamVector pv = pack(params);
  TgEval out;
  out.grad_y.resize(static_cast<Eigen::Index>(d));
  const std::span<const double> ys(y_tilde.data(), d);
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  out.log_unnorm = model.log_unnorm(ys, xs, pv.span());
  out.laplacian = model.sample_derivatives(ys, xs, pv.span(), {out.grad_y.data(), d});
  return out;
}

// ---------------------------------------------------------------------------
// Conway-Maxwell-Poisson

void CmpModel::check_parameters(std::span<const double> theta) const {
  ModelSpec::check_parameters(theta);
  if (theta.empty()) fail(ErrorCode::dimension_mismatch, "empty CMP theta");
  if (theta.back() < 0.0) fail(ErrorCode::domain, "CMP dispersion nu must be >= 0");
}

double CmpModel::log_unnorm(std::span<const int> y, std::span<const double> x,
                            std::span<const double> theta) const {
  check_cmp_dims(x, theta);
  if (y.size() != 1) fail(ErrorCode::dimension_mismatch, "CMP response is univariate");
  if (y[0] < 0) fail(ErrorCode::domain, "CMP count must be >= 0");
  const double eta = linear_predictor(x, theta.first(x.size()));
  return y[0] * eta - theta.back() * std::lgamma(y[0] + 1.0);
}

double CmpModel::forward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                               std::span<const double> theta) const {
  check_cmp_dims(x, theta);
  if (y.size() != 1 || j != 0) fail(ErrorCode::dimension_mismatch, "CMP response is univariate");
  if (y[0] < 0) fail(ErrorCode::domain, "CMP count must be >= 0");
  const double eta = linear_predictor(x, theta.first(x.size()));
  return std::exp(eta - theta.back() * std::log(y[0] + 1.0));
}

bool CmpModel::rho_gradient(ObjectiveTag tag, const Observation& obs, std::span<const double> theta,
                            std::span<double> out) const {
  if (tag == ObjectiveTag::sm_continuous) return false;
  check_cmp_dims(obs.x, theta);
  if (obs.y_count.size() != 1) fail(ErrorCode::dimension_mismatch, "CMP response is univariate");
  if (out.size() != theta.size()) fail(ErrorCode::dimension_mismatch, "gradient buffer has wrong length");
  const int y = obs.y_count[0];
  if (y < 0) fail(ErrorCode::domain, "CMP count must be >= 0");
  const std::size_t p = obs.x.size();
  const double nu = theta.back();
  const double eta = linear_predictor(obs.x, theta.first(p));

  // rho = ta^2 + tb^2 - 2 ta with dt/dlog(u) = -t (1 - t)
  const double log_y1 = std::log(y + 1.0);
  const double ta = logistic_t(eta - nu * log_y1);
  const double ca = (2.0 * ta - 2.0) * (-ta * (1.0 - ta));
  double cb = 0.0, log_y = 0.0;
  if (y > 0) {
    log_y = std::log(static_cast<double>(y));
    const double tb = logistic_t(eta - nu * log_y);
    cb = 2.0 * tb * (-tb * (1.0 - tb));
  }
  for (std::size_t k = 0; k < p; ++k) out[k] = (ca + cb) * obs.x[k];
  out[p] = -ca * log_y1 - cb * log_y;
  return true;
}

bool CmpModel::interior(std::span<const double> theta) const { return !theta.empty() && theta.back() > 0.0; }

double cmp_forward_ratio(int y, std::span<const double> x, const CmpParams& params) {
  if (y < 0) fail(ErrorCode::domain, "CMP count must be >= 0");
  const double eta = linear_predictor(x, {params.beta.data(), static_cast<std::size_t>(params.beta.size())});
  return std::exp(eta - params.nu * std::log(y + 1.0));
}

}  // namespace scorematch
