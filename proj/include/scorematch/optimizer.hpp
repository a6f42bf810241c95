#pragma once

#include "scorematch/core.hpp"
#include "scorematch/objective.hpp"

#include <functional>
#include <vector>

namespace scorematch {

struct NmConfig {
  double alpha = 1.0;  // reflection
  double gamma = 2.0;  // expansion
  double rho_c = 0.5;  // contraction
  double sigma = 0.5;  // shrink
  double f_tol = 1e-10;
  double x_tol = 1e-8;
  int max_iter = 5000;
  /// Per-coordinate simplex spread. Empty means 0.1 * (1 + |x0_k|).
  Eigen::VectorXd init_step;
  /// Keep the best value and best vertex after every iteration.
  bool record_trace = false;

  void validate(std::size_t dim) const;
};

struct NmResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;
  std::vector<double> trace_value;
  std::vector<Eigen::VectorXd> trace_x;
};

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// Derivative-free Nelder-Mead simplex minimization. Non-finite function
/// values are treated as +inf; ties between vertices go to the lowest index.
NmResult minimize(const ScalarFn& f, const Eigen::VectorXd& x0, const NmConfig& cfg = {});

struct FitResult {
  ParamVector theta_hat;
  double objective = 0.0;
  int iterations = 0;
  int function_evals = 0;
  bool converged = false;
};

struct FitOptions {
  NmConfig nm;
  /// Additional Nelder-Mead runs started from the previous optimum.
  int restarts = 2;
  Exec exec = Exec::parallel;
};

/// Closed-form starting values: least squares of log(1 + y) on x with nu = 1
/// for CMP; least squares of the untransformed responses for the truncated
/// Gaussian, with Lambda set to the inverse residual covariance (identity if
/// that is not positive definite).
ParamVector default_start(const Dataset& data, Layout layout);

/// Minimizes the empirical objective. CMP dispersion is searched on the log
/// scale and reported back on its natural scale.
FitResult fit_objective(const Objective& objective, const ParamVector& start, const FitOptions& opts = {});

/// Score matching fit of the log-transformed truncated Gaussian. `data`
/// holds the log-transformed responses.
FitResult fit_tg_sm(const Dataset& data, const FitOptions& opts = {});

/// Generalized score matching fit of univariate CMP regression.
FitResult fit_cmp_gsm(const Dataset& data, const FitOptions& opts = {});

/// Runs `minimize` plus restarts on an arbitrary function, returning the
/// combined counts.
NmResult minimize_with_restarts(const ScalarFn& f, const Eigen::VectorXd& x0, const NmConfig& cfg, int restarts);

}  // namespace scorematch
