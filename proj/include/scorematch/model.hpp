#pragma once

#include "scorematch/core.hpp"

#include <limits>
#include <span>

namespace scorematch {

enum class ResponseType { continuous, count };

enum class ObjectiveTag { sm_continuous, gsm_univariate, gsm_multivariate };

/// One row of a dataset as seen by a model. Exactly one of the response spans
/// is non-empty.
struct Observation {
  std::span<const double> y_cont;
  std::span<const int> y_count;
  std::span<const double> x;
};

/// Unnormalized density p0(y) * p1~(y | x, theta). Implementations only ever
/// expose quantities in which the normalizing constant cancels.
///
/// Continuous models implement `log_unnorm` and `sample_derivatives`; count
/// models implement `log_unnorm` (count overload) and `forward_ratio`.
class ModelSpec {
 public:
  virtual ~ModelSpec() = default;

  virtual ResponseType response_type() const = 0;
  virtual std::size_t response_dim() const = 0;
  virtual std::size_t parameter_count(std::size_t covariates) const = 0;

  /// Throws `domain` when theta lies outside the parameter space.
  virtual void check_parameters(std::span<const double> theta) const;

  virtual double log_unnorm(std::span<const double> y, std::span<const double> x,
                            std::span<const double> theta) const;
  virtual double log_unnorm(std::span<const int> y, std::span<const double> x,
                            std::span<const double> theta) const;

  /// Writes d/dy_j log(p0 p1~) into `grad` and returns the Laplacian.
  virtual double sample_derivatives(std::span<const double> y, std::span<const double> x,
                                    std::span<const double> theta, std::span<double> grad) const;

  /// p(y^(j+)) / p(y) in [0, +inf]. Returns 0 when y^(j+) is outside the
  /// support, +inf when p(y) = 0 < p(y^(j+)).
  virtual double forward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                               std::span<const double> theta) const;

  /// p(y) / p(y^(j-)). +inf at y_j = 0 for every parameter value; otherwise
  /// the forward ratio evaluated at y^(j-).
  virtual double backward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                                std::span<const double> theta) const;

  /// Analytic d rho / d theta for one observation. Returns false when the
  /// model has no closed form, in which case callers fall back to finite
  /// differences.
  virtual bool rho_gradient(ObjectiveTag tag, const Observation& obs, std::span<const double> theta,
                            std::span<double> out) const;

  /// False on the boundary of the parameter space, where the analytic
  /// gradient is not used.
  virtual bool interior(std::span<const double> theta) const;
};

inline constexpr std::size_t kMaxTgDim = 16;

/// Log-transformed truncated Gaussian regression on the positive orthant:
/// log p = y~' 1 - (exp(y~) - Bx)' Lambda (exp(y~) - Bx) / 2.
class TgModel final : public ModelSpec {
 public:
  explicit TgModel(std::size_t d);

  ResponseType response_type() const override { return ResponseType::continuous; }
  std::size_t response_dim() const override { return d_; }
  std::size_t parameter_count(std::size_t covariates) const override;
  void check_parameters(std::span<const double> theta) const override;
  double log_unnorm(std::span<const double> y, std::span<const double> x,
                    std::span<const double> theta) const override;
  double sample_derivatives(std::span<const double> y, std::span<const double> x,
                            std::span<const double> theta, std::span<double> grad) const override;
  bool rho_gradient(ObjectiveTag tag, const Observation& obs, std::span<const double> theta,
                    std::span<double> out) const override;

 private:
  std::size_t d_;
};

/// Univariate Conway-Maxwell-Poisson regression, p1~(y) = lambda^y / (y!)^nu
/// with lambda = exp(x' beta). theta = (beta, nu).
class CmpModel final : public ModelSpec {
 public:
  ResponseType response_type() const override { return ResponseType::count; }
  std::size_t response_dim() const override { return 1; }
  std::size_t parameter_count(std::size_t covariates) const override { return covariates + 1; }
  void check_parameters(std::span<const double> theta) const override;
  double log_unnorm(std::span<const int> y, std::span<const double> x,
                    std::span<const double> theta) const override;
  double forward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                       std::span<const double> theta) const override;
  bool rho_gradient(ObjectiveTag tag, const Observation& obs, std::span<const double> theta,
                    std::span<double> out) const override;
  bool interior(std::span<const double> theta) const override;
};

struct TgEval {
  double log_unnorm = 0.0;
  Eigen::VectorXd grad_y;
  double laplacian = 0.0;
};

/// Log density (up to the constant), sample-space gradient and Laplacian of
/// the log-transformed truncated Gaussian at one row.
TgEval tg_eval(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& x, const TruncGaussParams& params);

/// lambda / (y+1)^nu, the CMP successor ratio p(y+1)/p(y).
double cmp_forward_ratio(int y, std::span<const double> x, const CmpParams& params);

/// x' beta, with a dimension check.
double linear_predictor(std::span<const double> x, std::span<const double> beta);

}  // namespace scorematch
