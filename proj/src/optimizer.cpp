#include "scorematch/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace scorematch {

void NmConfig::validate(std::size_t dim) const {
  if (!(alpha > 0.0)) fail(ErrorCode::invalid_argument, "Nelder-Mead alpha must be > 0");
  if (!(gamma > 1.0)) fail(ErrorCode::invalid_argument, "Nelder-Mead gamma must be > 1");
  if (!(rho_c > 0.0 && rho_c < 1.0)) fail(ErrorCode::invalid_argument, "Nelder-Mead rho_c must be in (0, 1)");
  if (!(sigma > 0.0 && sigma < 1.0)) fail(ErrorCode::invalid_argument, "Nelder-Mead sigma must be in (0, 1)");
  if (max_iter < 1) fail(ErrorCode::invalid_argument, "Nelder-Mead max_iter must be >= 1");
  if (!(f_tol >= 0.0) || !(x_tol >= 0.0)) fail(ErrorCode::invalid_argument, "tolerances must be >= 0");
  if (init_step.size() != 0 && static_cast<std::size_t>(init_step.size()) != dim)
    fail(ErrorCode::dimension_mismatch, "init_step length does not match the starting point");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Counted {
  const ScalarFn& f;
  int evals = 0;
  double operator()(const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  }
};

}  // namespace

NmResult minimize(const ScalarFn& f, const Eigen::VectorXd& x0, const NmConfig& cfg) {
  const auto dim = static_cast<std::size_t>(x0.size());
  if (dim == 0) fail(ErrorCode::invalid_argument, "cannot minimize over an empty parameter vector");
  cfg.validate(dim);
  Eigen::VectorXd step = cfg.init_step;
  if (step.size() == 0) step = 0.1 * (1.0 + x0.array().abs()).matrix();

  Counted eval{f};
  const std::size_t m = dim + 1;
  std::vector<Eigen::VectorXd> v(m, x0);
  std::vector<double> fv(m, kInf);

  // Build an initial simplex with finite values, shrinking and shifting the
  // spread on each retry.
  bool ready = false;
  for (int attempt = 0; attempt <= 10 && !ready; ++attempt) {
    const double scale = std::pow(-0.5, attempt);
    v[0] = x0;
    for (std::size_t k = 0; k < dim && attempt > 0; ++k)
      v[0](static_cast<Eigen::Index>(k)) += 0.05 * attempt * step(static_cast<Eigen::Index>(k)) * (k % 2 ? -1.0 : 1.0);
    fv[0] = eval(v[0]);
    ready = std::isfinite(fv[0]);
    for (std::size_t k = 0; k < dim && ready; ++k) {
      v[k + 1] = v[0];
      v[k + 1](static_cast<Eigen::Index>(k)) += scale * step(static_cast<Eigen::Index>(k));
      fv[k + 1] = eval(v[k + 1]);
      ready = std::isfinite(fv[k + 1]);
    }
  }
  if (!ready) fail(ErrorCode::numerical, "Nelder-Mead initialization: objective is not finite at any jittered start");

  NmResult res;
  std::vector<std::size_t> order(m);
  Eigen::VectorXd centroid(dim);

  auto sort_vertices = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  sort_vertices();
  while (true) {
    const std::size_t best = order.front(), worst = order.back(), second = order[m - 2];
    if (cfg.record_trace) {
      res.trace_value.push_back(fv[best]);
      res.trace_x.push_back(v[best]);
    }
    double diameter = 0.0;
    for (std::size_t k = 0; k < m; ++k) diameter = std::max(diameter, (v[k] - v[best]).cwiseAbs().maxCoeff());
    if (fv[worst] - fv[best] < cfg.f_tol * (1.0 + std::abs(fv[best])) && diameter < cfg.x_tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= cfg.max_iter) break;
    ++res.iterations;

    centroid.setZero();
    for (std::size_t k = 0; k < m; ++k)
      if (k != worst) centroid += v[k];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = centroid + cfg.alpha * (centroid - v[worst]);
    const double fr = eval(xr);
    bool shrink = false;
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + cfg.gamma * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        v[worst] = xe;
        fv[worst] = fe;
      } else {
        v[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      v[worst] = xr;
      fv[worst] = fr;
    } else if (fr < fv[worst]) {
      const Eigen::VectorXd xc = centroid + cfg.rho_c * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        v[worst] = xc;
        fv[worst] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xc = centroid + cfg.rho_c * (v[worst] - centroid);
      const double fc = eval(xc);
      if (fc < fv[worst]) {
        v[worst] = xc;
        fv[worst] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t k = 0; k < m; ++k) {
        if (k == best) continue;
        v[k] = v[best] + cfg.sigma * (v[k] - v[best]);
        fv[k] = eval(v[k]);
      }
    }
    sort_vertices();
  }

  res.x = v[order.front()];
  res.value = fv[order.front()];
  res.function_evals = eval.evals;
  return res;
}

NmResult minimize_with_restarts(const ScalarFn& f, const Eigen::VectorXd& x0, const NmConfig& cfg, int restarts) {
  NmResult res = minimize(f, x0, cfg);
  NmConfig again = cfg;
  again.init_step.resize(0);
  for (int r = 0; r < restarts; ++r) {
    NmResult next = minimize(f, res.x, again);
    const bool improved = next.value < res.value - cfg.f_tol * (1.0 + std::abs(res.value));
    res.iterations += next.iterations;
    res.function_evals += next.function_evals;
    if (cfg.record_trace) {
      res.trace_value.insert(res.trace_value.end(), next.trace_value.begin(), next.trace_value.end());
      res.trace_x.insert(res.trace_x.end(), next.trace_x.begin(), next.trace_x.end());
    }
    if (next.value <= res.value) {
      res.x = std::move(next.x);
      res.value = next.value;
      res.converged = next.converged;
    }
    if (!improved) break;
  }
  return res;
}

ParamVector default_start(const Dataset& data, Layout layout) {
  const Eigen::MatrixXd x = data.x();
  if (layout == Layout::cmp) {
    if (!data.is_count() || data.response_dim() != 1)
      fail(ErrorCode::invalid_argument, "CMP start needs univariate count data");
    const Eigen::VectorXd target = data.y_count().col(0).cast<double>().array().log1p().matrix();
    CmpParams start;
    start.beta = x.colPivHouseholderQr().solve(target);
    start.nu = 1.0;
    return pack(start);
  }
  if (data.is_count()) fail(ErrorCode::invalid_argument, "truncated Gaussian start needs continuous data");
  const std::size_t d = data.response_dim();
  const Eigen::MatrixXd y = data.y_cont().array().exp().matrix();
  TruncGaussParams start;
  start.B = x.colPivHouseholderQr().solve(y).transpose();
  const auto dd = static_cast<Eigen::Index>(d);
  start.Lambda = Eigen::MatrixXd::Identity(dd, dd);
  if (data.rows() > data.covariates() + d) {
    const Eigen::MatrixXd resid = y - x * start.B.transpose();
    const Eigen::MatrixXd cov = resid.transpose() * resid / static_cast<double>(data.rows() - data.covariates());
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(dd, dd));
      if (prec.allFinite() && is_positive_definite(prec)) start.Lambda = 0.5 * (prec + prec.transpose());
    }
  }
  return pack(start);
}

FitResult fit_objective(const Objective& objective, const ParamVector& start, const FitOptions& opts) {
  if (start.size() != objective.parameter_count())
    fail(ErrorCode::dimension_mismatch, "starting vector does not match the objective");
  const bool log_nu = start.layout == Layout::cmp;
  const auto last = static_cast<Eigen::Index>(start.size()) - 1;
  if (log_nu && !(start.theta(last) > 0.0)) fail(ErrorCode::domain, "CMP start needs nu > 0");

  auto to_natural = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd theta = z;
    if (log_nu) theta(last) = std::exp(z(last));
    return theta;
  };
  Eigen::VectorXd z0 = start.theta;
  if (log_nu) z0(last) = std::log(start.theta(last));

  const ScalarFn f = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd theta = to_natural(z);
    try {
      return objective.value({theta.data(), static_cast<std::size_t>(theta.size())}, opts.exec);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::numerical || e.code() == ErrorCode::domain)
        return std::numeric_limits<double>::infinity();
      throw;
    }
  };
  const NmResult nm = minimize_with_restarts(f, z0, opts.nm, opts.restarts);

  FitResult out;
  out.theta_hat = start;
  out.theta_hat.theta = to_natural(nm.x);
  out.objective = objective.value(out.theta_hat.span(), opts.exec);
  out.iterations = nm.iterations;
  out.function_evals = nm.function_evals;
  out.converged = nm.converged;
  return out;
}

FitResult fit_tg_sm(const Dataset& data, const FitOptions& opts) {
  const TgModel model(data.response_dim());
  const Objective objective(ObjectiveTag::sm_continuous, model, data);
  return fit_objective(objective, default_start(data, Layout::truncated_gaussian), opts);
}

FitResult fit_cmp_gsm(const Dataset& data, const FitOptions& opts) {
  const CmpModel model;
  const Objective objective(ObjectiveTag::gsm_univariate, model, data);
  return fit_objective(objective, default_start(data, Layout::cmp), opts);
}

}  // namespace scorematch
