#include "scorematch/inference.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace scorematch {

Eigen::VectorXd SandwichCovariance::asd() const {
  return (sigma_hat.diagonal().array().max(0.0) / static_cast<double>(n)).sqrt().matrix();
}

SandwichCovariance sandwich_from_moments(Eigen::MatrixXd I_hat, Eigen::MatrixXd J_hat, std::size_t n) {
  if (n == 0) fail(ErrorCode::invalid_argument, "sandwich needs n >= 1");
  if (I_hat.rows() != I_hat.cols() || J_hat.rows() != I_hat.rows() || J_hat.cols() != I_hat.cols())
    fail(ErrorCode::dimension_mismatch, "sandwich moment matrices must be square and of equal size");
  if (!I_hat.allFinite() || !J_hat.allFinite()) fail(ErrorCode::numerical, "non-finite sandwich moment matrix");
  I_hat = 0.5 * (I_hat + I_hat.transpose()).eval();
  J_hat = 0.5 * (J_hat + J_hat.transpose()).eval();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(I_hat);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin >= kMaxConditionNumber)
    fail(ErrorCode::numerical,
         "information matrix is singular or ill-conditioned; the model may be non-identifiable or n too small");
  const Eigen::MatrixXd inv = I_hat.inverse();
  // I^-1 + I^-1 J I^-1 written as A (I + J) A keeps the result symmetric PSD
  // whenever I + J = mean g g' is.
  Eigen::MatrixXd sigma = inv * (I_hat + J_hat) * inv;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  SandwichCovariance out;
  out.I_hat = std::move(I_hat);
  out.J_hat = std::move(J_hat);
  out.sigma_hat = std::move(sigma);
  out.n = n;
  return out;
}

SandwichCovariance sandwich_from_rows(std::size_t n, const Eigen::VectorXd& theta, const RowGradientFn& row_gradient,
                                      Exec exec) {
  if (n == 0) fail(ErrorCode::invalid_argument, "sandwich needs n >= 1");
  const auto p = static_cast<std::size_t>(theta.size());
  // per-row outer products and Hessians, entry-major so each entry reduces
  // over a contiguous block
  std::vector<double> outer(p * p * n), hess(p * p * n);
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> probe(theta.data(), theta.data() + p), g(p), up(p), down(p);
    row_gradient(i, probe, g);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b) outer[(a * p + b) * n + i] = g[a] * g[b];
    Eigen::MatrixXd h(p, p);
    for (std::size_t k = 0; k < p; ++k) {
      const double step = 1e-5 * (1.0 + std::abs(theta(static_cast<Eigen::Index>(k))));
      probe[k] = theta(static_cast<Eigen::Index>(k)) + step;
      row_gradient(i, probe, up);
      probe[k] = theta(static_cast<Eigen::Index>(k)) - step;
      row_gradient(i, probe, down);
      probe[k] = theta(static_cast<Eigen::Index>(k));
      for (std::size_t a = 0; a < p; ++a)
        h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) = (up[a] - down[a]) / (2.0 * step);
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        hess[(a * p + b) * n + i] = 0.5 * (h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +
                                           h(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)));
  });

  const auto np = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd mean_outer(np, np), mean_hess(np, np);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) {
      const std::size_t e = (a * p + b) * n;
      mean_outer(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          pairwise_sum(std::span<const double>(outer.data() + e, n)) * inv_n;
      mean_hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          pairwise_sum(std::span<const double>(hess.data() + e, n)) * inv_n;
    }
  return sandwich_from_moments(-mean_hess, mean_outer + mean_hess, n);
}

SandwichCovariance sandwich(const ParamVector& theta_hat, const Objective& objective, Exec exec) {
  if (theta_hat.size() != objective.parameter_count())
    fail(ErrorCode::dimension_mismatch, "estimate does not match the objective");
  objective.model().check_parameters(theta_hat.span());
  const RowGradientFn g = [&](std::size_t i, std::span<const double> theta, std::span<double> out) {
    objective.row_gradient(i, theta, out);
  };
  return sandwich_from_rows(objective.rows(), theta_hat.theta, g, exec);
}

// ---------------------------------------------------------------------------

const char* ci_method_name(CiMethod m) noexcept {
  return m == CiMethod::wald ? "wald" : "bootstrap_percentile";
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::invalid_argument, "normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::invalid_argument, "confidence level must be in (0, 1)");
}

}  // namespace

CiTable wald_table(const ParamVector& theta_hat, const Eigen::VectorXd& se, double level) {
  check_level(level);
  if (static_cast<std::size_t>(se.size()) != theta_hat.size())
    fail(ErrorCode::dimension_mismatch, "standard errors do not match the estimate");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const auto names = parameter_names(theta_hat.layout, theta_hat.response_dim, theta_hat.covariates);
  CiTable table;
  for (std::size_t k = 0; k < theta_hat.size(); ++k) {
    const double est = theta_hat.theta(static_cast<Eigen::Index>(k));
    const double s = se(static_cast<Eigen::Index>(k));
    CiRow row;
    row.parameter = names[k];
    row.estimate = est;
    row.se = s;
    row.t_abs = std::abs(est) / s;
    row.lo = est - z * s;
    row.hi = est + z * s;
    row.method = CiMethod::wald;
    table.push_back(row);
  }
  return table;
}

CiTable wald_table(const ParamVector& theta_hat, const SandwichCovariance& cov, double level) {
  return wald_table(theta_hat, cov.asd(), level);
}

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) fail(ErrorCode::invalid_argument, "quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) fail(ErrorCode::invalid_argument, "quantile probability must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_percentile(const ParamVector& theta_hat, const SimulateFn& simulate, const RefitFn& refit,
                                     const BootstrapOptions& opts) {
  check_level(opts.level);
  if (opts.replicates < 2) fail(ErrorCode::invalid_argument, "bootstrap needs at least 2 replicates");
  const auto reps = static_cast<std::size_t>(opts.replicates);
  const std::size_t p = theta_hat.size();
  std::vector<Eigen::VectorXd> estimates(reps);
  std::vector<char> ok(reps, 0);

  for_each_index(
      reps, opts.exec,
      [&](std::size_t b) {
        RngStream rng(opts.seed, b);
        try {
          const Dataset sim = simulate(rng);
          Eigen::VectorXd est = refit(sim);
          if (static_cast<std::size_t>(est.size()) != p) fail(ErrorCode::internal, "refit returned a wrong-length estimate");
          if (est.allFinite()) {
            estimates[b] = std::move(est);
            ok[b] = 1;
          }
        } catch (const Error& e) {
          if (e.internal()) throw;
        }
      },
      true);

  BootstrapResult out;
  std::vector<std::size_t> good;
  for (std::size_t b = 0; b < reps; ++b) {
    if (ok[b])
      good.push_back(b);
    else
      out.failed.push_back(static_cast<int>(b));
  }
  if (static_cast<double>(out.failed.size()) > opts.max_failure_fraction * static_cast<double>(reps))
    fail(ErrorCode::numerical, std::to_string(out.failed.size()) + " of " + std::to_string(reps) +
                                   " bootstrap refits failed, above the allowed fraction");
  if (good.size() < 2) fail(ErrorCode::numerical, "fewer than two successful bootstrap refits");

  out.draws.resize(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < good.size(); ++r) out.draws.row(static_cast<Eigen::Index>(r)) = estimates[good[r]].transpose();

  const double alpha = 1.0 - opts.level;
  const auto names = parameter_names(theta_hat.layout, theta_hat.response_dim, theta_hat.covariates);
  for (std::size_t k = 0; k < p; ++k) {
    const Eigen::VectorXd col = out.draws.col(static_cast<Eigen::Index>(k));
    std::vector<double> v(col.data(), col.data() + col.size());
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
    CiRow row;
    row.parameter = names[k];
    row.estimate = theta_hat.theta(static_cast<Eigen::Index>(k));
    row.se = sd;
    row.t_abs = std::abs(row.estimate) / sd;
    row.lo = quantile_type7(v, 0.5 * alpha);
    row.hi = quantile_type7(std::move(v), 1.0 - 0.5 * alpha);
    row.method = CiMethod::bootstrap_percentile;
    out.table.push_back(row);
  }
  return out;
}

}  // namespace scorematch
