#include "scorematch/objective.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace scorematch {

double t_transform(double u) {
  if (std::isnan(u) || u < 0.0) fail(ErrorCode::domain, "t_transform: argument must be in [0, +inf]");
  if (std::isinf(u)) return 0.0;
  return 1.0 / (1.0 + u);
}

double rho_sm_generic(std::span<const double> y, std::span<const double> x, std::span<const double> theta,
                      const ModelSpec& model) {
  const std::size_t d = y.size();
  std::array<double, kMaxTgDim> small{};
  std::vector<double> large;
  std::span<double> grad;
  if (d <= kMaxTgDim) {
    grad = std::span<double>(small.data(), d);
  } else {
    large.resize(d);
    grad = large;
  }
  const double lap = model.sample_derivatives(y, x, theta, grad);
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double rho = 2.0 * lap + sq;
  if (!std::isfinite(rho)) fail(ErrorCode::numerical, "non-finite sample-space derivative");
  return rho;
}

double rho_sm_tg_closed(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& x, const TruncGaussParams& params) {
  if (y_tilde.size() != params.B.rows() || x.size() != params.B.cols() || params.Lambda.rows() != params.B.rows() ||
      params.Lambda.cols() != params.B.rows())
    fail(ErrorCode::dimension_mismatch, "rho_sm_tg_closed: inconsistent dimensions");
  const Eigen::VectorXd t = y_tilde.array().exp().matrix();
  const Eigen::VectorXd r = t - params.B * x;
  const Eigen::VectorXd s = params.Lambda * r;
  const Eigen::VectorXd ts = t.array().square().matrix();
  return -4.0 * s.dot(t) - 2.0 * ts.dot(params.Lambda.diagonal()) + s.dot(ts.asDiagonal() * s);
}

namespace {

inline double gsm_terms(double forward, double backward) {
  const double tf = t_transform(forward);
  const double tb = t_transform(backward);
  return tf * tf + tb * tb - 2.0 * tf;
}

}  // namespace

double rho_gsm_univariate(int y, std::span<const double> x, std::span<const double> theta, const ModelSpec& model) {
  if (model.response_dim() != 1) fail(ErrorCode::invalid_argument, "univariate GSM needs a one-dimensional model");
  if (y < 0) fail(ErrorCode::domain, "count must be >= 0");
  const std::span<const int> ys(&y, 1);
  return gsm_terms(model.forward_ratio(ys, 0, x, theta), model.backward_ratio(ys, 0, x, theta));
}

double rho_gsm_multivariate(std::span<const int> y, std::span<const double> x, std::span<const double> theta,
                            const ModelSpec& model) {
  if (y.size() != model.response_dim()) fail(ErrorCode::dimension_mismatch, "response length does not match model");
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] < 0) fail(ErrorCode::domain, "count must be >= 0");
    acc += gsm_terms(model.forward_ratio(y, j, x, theta), model.backward_ratio(y, j, x, theta));
  }
  return acc;
}

// ---------------------------------------------------------------------------

Objective::Objective(ObjectiveTag tag, const ModelSpec& model, const Dataset& data)
    : tag_(tag), model_(&model), data_(&data), p_(model.parameter_count(data.covariates())) {
  const bool count_tag = tag != ObjectiveTag::sm_continuous;
  if (count_tag != data.is_count())
    fail(ErrorCode::invalid_argument, "objective kind does not match the dataset's response type");
  if (count_tag != (model.response_type() == ResponseType::count))
    fail(ErrorCode::invalid_argument, "objective kind does not match the model's response type");
  if (data.response_dim() != model.response_dim())
    fail(ErrorCode::dimension_mismatch, "dataset response dimension does not match the model");
  if (tag == ObjectiveTag::gsm_univariate && model.response_dim() != 1)
    fail(ErrorCode::invalid_argument, "univariate GSM requires a one-dimensional response");
}

void Objective::check_theta(std::span<const double> theta) const {
  if (theta.size() != p_)
    fail(ErrorCode::dimension_mismatch,
         "theta has " + std::to_string(theta.size()) + " entries, expected " + std::to_string(p_));
  model_->check_parameters(theta);
}

Observation Objective::observation(std::size_t i) const {
  Observation obs;
  obs.x = data_->x_row(i);
  if (data_->is_count())
    obs.y_count = data_->y_count_row(i);
  else
    obs.y_cont = data_->y_cont_row(i);
  return obs;
}

double Objective::row_value(std::size_t i, std::span<const double> theta) const {
  const Observation obs = observation(i);
  try {
    double rho = 0.0;
    switch (tag_) {
      case ObjectiveTag::sm_continuous: rho = rho_sm_generic(obs.y_cont, obs.x, theta, *model_); break;
      case ObjectiveTag::gsm_univariate: rho = rho_gsm_univariate(obs.y_count[0], obs.x, theta, *model_); break;
      case ObjectiveTag::gsm_multivariate: rho = rho_gsm_multivariate(obs.y_count, obs.x, theta, *model_); break;
    }
    return rho;
  } catch (const Error& e) {
    throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what());
  }
}

void Objective::row_gradient(std::size_t i, std::span<const double> theta, std::span<double> out) const {
  if (out.size() != p_) fail(ErrorCode::dimension_mismatch, "gradient buffer has wrong length");
  const bool interior = model_->interior(theta);
  if (interior && model_->rho_gradient(tag_, observation(i), theta, out)) return;

  // central differences inside the domain, forward differences on its boundary
  std::vector<double> probe(theta.begin(), theta.end());
  const double base = interior ? 0.0 : row_value(i, theta);
  for (std::size_t k = 0; k < p_; ++k) {
    const double h = 1e-6 * (1.0 + std::abs(theta[k]));
    probe[k] = theta[k] + h;
    const double up = row_value(i, probe);
    if (interior) {
      probe[k] = theta[k] - h;
      out[k] = (up - row_value(i, probe)) / (2.0 * h);
    } else {
      out[k] = (up - base) / h;
    }
    probe[k] = theta[k];
  }
}

double Objective::value(std::span<const double> theta, Exec exec) const {
  check_theta(theta);
  const std::size_t n = rows();
  std::vector<double> rho(n);
  for_each_index(n, exec, [&](std::size_t i) { rho[i] = row_value(i, theta); });
  return pairwise_sum(rho) / static_cast<double>(n);
}

Gradient Objective::gradient(std::span<const double> theta, Exec exec) const {
  check_theta(theta);
  Gradient out;
  out.value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p_));
  if (!model_->interior(theta)) {
    out.finite_difference = true;
    const double base = value(theta, exec);
    std::vector<double> probe(theta.begin(), theta.end());
    for (std::size_t k = 0; k < p_; ++k) {
      const double h = 1e-6 * (1.0 + std::abs(theta[k]));
      probe[k] = theta[k] + h;
      out.value(static_cast<Eigen::Index>(k)) = (value(probe, exec) - base) / h;
      probe[k] = theta[k];
    }
    return out;
  }

  const std::size_t n = rows();
  // column k holds d rho_i / d theta_k for all rows
  std::vector<double> per_row(n * p_);
  std::vector<double> scratch_probe(p_);
  out.finite_difference = !model_->rho_gradient(tag_, observation(0), theta, scratch_probe);
  for_each_index(n, exec, [&](std::size_t i) {
    std::array<double, 64> small{};
    std::vector<double> large;
    std::span<double> g;
    if (p_ <= small.size()) {
      g = std::span<double>(small.data(), p_);
    } else {
      large.resize(p_);
      g = large;
    }
    row_gradient(i, theta, g);
    for (std::size_t k = 0; k < p_; ++k) per_row[k * n + i] = g[k];
  });
  for (std::size_t k = 0; k < p_; ++k)
    out.value(static_cast<Eigen::Index>(k)) =
        pairwise_sum(std::span<const double>(per_row.data() + k * n, n)) / static_cast<double>(n);
  return out;
}

double objective_value(const ParamVector& theta, const Objective& objective, Exec exec) {
  return objective.value(theta.span(), exec);
}

Gradient objective_gradient(const ParamVector& theta, const Objective& objective, Exec exec) {
  return objective.gradient(theta.span(), exec);
}

}  // namespace scorematch
