#pragma once

#include "scorematch/core.hpp"
#include "scorematch/model.hpp"
#include "scorematch/parallel.hpp"

namespace scorematch {

/// t(u) = 1 / (1 + u) on [0, +inf], with t(+inf) = 0.
double t_transform(double u);

/// 2 * laplacian + |grad|^2 of log(p0 p1~) for one continuous observation.
double rho_sm_generic(std::span<const double> y, std::span<const double> x, std::span<const double> theta,
                      const ModelSpec& model);

/// Closed form for the log-transformed truncated Gaussian with the
/// theta-independent constant d dropped.
double rho_sm_tg_closed(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& x, const TruncGaussParams& params);

double rho_gsm_univariate(int y, std::span<const double> x, std::span<const double> theta, const ModelSpec& model);

double rho_gsm_multivariate(std::span<const int> y, std::span<const double> x, std::span<const double> theta,
                            const ModelSpec& model);

struct Gradient {
  Eigen::VectorXd value;
  bool finite_difference = false;  // set when the analytic path was not used
};

/// Empirical score matching objective: a tag, a model and a dataset. Holds
/// references; the model and dataset must outlive it.
class Objective {
 public:
  Objective(ObjectiveTag tag, const ModelSpec& model, const Dataset& data);

  ObjectiveTag tag() const noexcept { return tag_; }
  const ModelSpec& model() const noexcept { return *model_; }
  const Dataset& data() const noexcept { return *data_; }
  std::size_t rows() const noexcept { return data_->rows(); }
  std::size_t parameter_count() const noexcept { return p_; }

  double row_value(std::size_t i, std::span<const double> theta) const;
  void row_gradient(std::size_t i, std::span<const double> theta, std::span<double> out) const;

  /// Mean of per-row rho, reduced by `pairwise_sum`.
  double value(std::span<const double> theta, Exec exec = Exec::parallel) const;
  Gradient gradient(std::span<const double> theta, Exec exec = Exec::parallel) const;

 private:
  void check_theta(std::span<const double> theta) const;
  Observation observation(std::size_t i) const;

  ObjectiveTag tag_;
  const ModelSpec* model_;
  const Dataset* data_;
  std::size_t p_;
};

double objective_value(const ParamVector& theta, const Objective& objective, Exec exec = Exec::parallel);
Gradient objective_gradient(const ParamVector& theta, const Objective& objective, Exec exec = Exec::parallel);

}  // namespace scorematch
