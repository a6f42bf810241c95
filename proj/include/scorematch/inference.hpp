#pragma once

#include "scorematch/core.hpp"
#include "scorematch/objective.hpp"
#include "scorematch/parallel.hpp"
#include "scorematch/sampling.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace scorematch {

struct SandwichCovariance {
  Eigen::MatrixXd I_hat;      // -(1/n) sum H_i
  Eigen::MatrixXd J_hat;      // (1/n) sum (g_i g_i' + H_i)
  Eigen::MatrixXd sigma_hat;  // I^-1 + I^-1 J I^-1
  std::size_t n = 0;

  /// sqrt(sigma_hat(k, k) / n)
  Eigen::VectorXd asd() const;
};

inline constexpr double kMaxConditionNumber = 1e12;

/// Fills g_i(theta) for row i.
using RowGradientFn = std::function<void(std::size_t, std::span<const double>, std::span<double>)>;

/// Sandwich from per-row analytic gradients. Each H_i is the symmetrized
/// central difference of g_i with step 1e-5 (1 + |theta_k|).
SandwichCovariance sandwich_from_rows(std::size_t n, const Eigen::VectorXd& theta, const RowGradientFn& row_gradient,
                                      Exec exec = Exec::parallel);

SandwichCovariance sandwich(const ParamVector& theta_hat, const Objective& objective, Exec exec = Exec::parallel);

/// Assembles sigma_hat from given moment matrices; fails when I_hat is
/// singular or its condition number reaches 1e12.
SandwichCovariance sandwich_from_moments(Eigen::MatrixXd I_hat, Eigen::MatrixXd J_hat, std::size_t n);

enum class CiMethod { wald, bootstrap_percentile };
const char* ci_method_name(CiMethod m) noexcept;

struct CiRow {
  std::string parameter;
  double estimate = 0.0;
  double se = 0.0;
  double t_abs = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  CiMethod method = CiMethod::wald;
};
using CiTable = std::vector<CiRow>;

/// Standard normal quantile.
double normal_quantile(double p);

CiTable wald_table(const ParamVector& theta_hat, const Eigen::VectorXd& se, double level = 0.95);
CiTable wald_table(const ParamVector& theta_hat, const SandwichCovariance& cov, double level = 0.95);

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_type7(std::vector<double> values, double prob);

struct BootstrapOptions {
  int replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
  double max_failure_fraction = 0.05;
};

/// Draws one response set at the fixed design.
using SimulateFn = std::function<Dataset(RngStream&)>;
/// Refits and returns the flat estimate.
using RefitFn = std::function<Eigen::VectorXd(const Dataset&)>;

struct BootstrapResult {
  CiTable table;
  RowMatrix draws;  // successful replicates in replicate order
  std::vector<int> failed;
};

/// Parametric bootstrap. Replicate b draws from RngStream(seed, b); a
/// replicate fails when refit throws a library error or returns a
/// non-finite estimate. Too many failures abort with an error.
BootstrapResult bootstrap_percentile(const ParamVector& theta_hat, const SimulateFn& simulate, const RefitFn& refit,
                                     const BootstrapOptions& opts = {});

}  // namespace scorematch
