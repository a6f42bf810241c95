// Independent reference computations used only by the tests. Nothing here
// calls into the estimators under test except through the ModelSpec
// interface, which is what the population checks exercise.
#pragma once

#include "scorematch/core.hpp"
#include "scorematch/model.hpp"
#include "scorematch/objective.hpp"
#include "scorematch/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using scorematch::RowMatrix;

/// CMP restricted to {0, ..., K}: p(y) proportional to lambda^y / (y!)^nu
/// inside the support, zero outside. theta = (beta, nu).
class TruncatedCmpModel final : public scorematch::ModelSpec {
 public:
  explicit TruncatedCmpModel(int k) : k_(k) {}

  scorematch::ResponseType response_type() const override { return scorematch::ResponseType::count; }
  std::size_t response_dim() const override { return 1; }
  std::size_t parameter_count(std::size_t covariates) const override { return covariates + 1; }

  double log_unnorm(std::span<const int> y, std::span<const double> x, std::span<const double> theta) const override {
    if (y[0] < 0 || y[0] > k_) return -std::numeric_limits<double>::infinity();
    const double eta = scorematch::linear_predictor(x, theta.first(x.size()));
    return y[0] * eta - theta[x.size()] * std::lgamma(y[0] + 1.0);
  }

  double forward_ratio(std::span<const int> y, std::size_t, std::span<const double> x,
                       std::span<const double> theta) const override {
    if (y[0] >= k_) return 0.0;
    const double eta = scorematch::linear_predictor(x, theta.first(x.size()));
    return std::exp(eta - theta[x.size()] * std::log(y[0] + 1.0));
  }

  int support_max() const noexcept { return k_; }

 private:
  int k_;
};

/// Normalized pmf of the truncated CMP on {0..K} by direct summation.
inline std::vector<double> truncated_cmp_pmf(double eta, double nu, int k) {
  std::vector<double> logw(static_cast<std::size_t>(k) + 1);
  for (int y = 0; y <= k; ++y) logw[static_cast<std::size_t>(y)] = y * eta - nu * std::lgamma(y + 1.0);
  const double m = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double v : logw) z += std::exp(v - m);
  std::vector<double> p(logw.size());
  for (std::size_t y = 0; y < p.size(); ++y) p[y] = std::exp(logw[y] - m) / z;
  return p;
}

inline double t_of(double u) { return std::isinf(u) ? 0.0 : 1.0 / (1.0 + u); }

/// Two-sided population divergence between the truncated CMP at
/// (eta_q, nu_q) and the model at (eta_p, nu_p), by direct summation. Ratios
/// are formed from normalized probabilities: 0 beyond K, +inf below 0.
inline double full_gsm_divergence(double eta_q, double nu_q, double eta_p, double nu_p, int k) {
  const auto q = truncated_cmp_pmf(eta_q, nu_q, k);
  const auto p = truncated_cmp_pmf(eta_p, nu_p, k);
  auto fwd = [&](const std::vector<double>& f, int y) { return y >= k ? 0.0 : f[y + 1] / f[y]; };
  auto bwd = [&](const std::vector<double>& f, int y) {
    return y == 0 ? std::numeric_limits<double>::infinity() : f[y] / f[y - 1];
  };
  double total = 0.0;
  for (int y = 0; y <= k; ++y) {
    const double a = t_of(fwd(p, y)) - t_of(fwd(q, y));
    const double b = t_of(bwd(p, y)) - t_of(bwd(q, y));
    total += q[static_cast<std::size_t>(y)] * (a * a + b * b);
  }
  return total;
}

/// Expected library rho_GSM under the truncated CMP q; the tractable part.
inline double tractable_gsm(double eta_q, double nu_q, double eta_p, double nu_p, int k) {
  const auto q = truncated_cmp_pmf(eta_q, nu_q, k);
  const TruncatedCmpModel model(k);
  const double x[1] = {1.0};
  const double theta[2] = {eta_p, nu_p};
  double total = 0.0;
  for (int y = 0; y <= k; ++y) total += q[static_cast<std::size_t>(y)] * scorematch::rho_gsm_univariate(y, x, theta, model);
  return total;
}

/// Central differences of a scalar function with step h_k = rel * (1 + |x_k|).
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double rel = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel * (1.0 + std::abs(x(k)));
    Eigen::VectorXd a = x, b = x;
    a(k) += h;
    b(k) -= h;
    g(k) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Poisson regression by iteratively reweighted least squares.
inline Eigen::VectorXd poisson_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  beta(0) = std::log(std::max(y.mean(), 1e-3));
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd mu = (x * beta).array().exp().matrix();
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    const Eigen::MatrixXd info = x.transpose() * mu.asDiagonal() * x;
    const Eigen::VectorXd step = info.ldlt().solve(score);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return beta;
}

/// Cell probabilities of N(mean, precision^-1) truncated to the positive
/// quadrant, on the box [0, hi]^2 split into m x m cells, by midpoint
/// quadrature with s x s sub-points per cell. Normalized over the quadrant
/// using a wider box [0, 12 sd].
inline std::vector<double> truncated_normal_cells(const Eigen::Vector2d& mean, const Eigen::Matrix2d& precision,
                                                  double hi, int m, int s = 8) {
  auto dens = [&](double a, double b) {
    const Eigen::Vector2d r(a - mean(0), b - mean(1));
    return std::exp(-0.5 * r.dot(precision * r));
  };
  const Eigen::Matrix2d cov = precision.inverse();
  const double wide = std::max({hi, mean(0) + 12.0 * std::sqrt(cov(0, 0)), mean(1) + 12.0 * std::sqrt(cov(1, 1))});
  const int fine = 1200;
  const double hw = wide / fine;
  double total = 0.0;
  for (int i = 0; i < fine; ++i)
    for (int j = 0; j < fine; ++j) total += dens((i + 0.5) * hw, (j + 0.5) * hw);
  total *= hw * hw;

  std::vector<double> cells(static_cast<std::size_t>(m * m));
  const double hc = hi / m, hs = hc / s;
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double acc = 0.0;
      for (int u = 0; u < s; ++u)
        for (int v = 0; v < s; ++v) acc += dens(a * hc + (u + 0.5) * hs, b * hc + (v + 0.5) * hs);
      cells[static_cast<std::size_t>(a * m + b)] = acc * hs * hs / total;
    }
  return cells;
}

/// Kolmogorov-Smirnov distance of a sample to Uniform(0, 1), straight from
/// the definition.
inline double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
    d = std::max(d, u[i] - static_cast<double>(i) / n);
  }
  return d;
}

/// Largest componentwise |a - b| / |b|; components of b below `floor` are
/// compared against `floor` instead.
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a(k) - b(k)) / std::max(floor, std::abs(b(k))));
  return worst;
}

}  // namespace oracle
