#pragma once

#include "scorematch/core.hpp"
#include "scorematch/optimizer.hpp"
#include "scorematch/parallel.hpp"

#include <optional>
#include <vector>

namespace scorematch {

/// How log Z(lambda, nu) is approximated. `hybrid` uses the asymptotic form
/// for rows with lambda > 10^nu and the truncated series otherwise.
enum class ZMode { truncated, asymptotic, hybrid };

const char* z_mode_name(ZMode m) noexcept;
ZMode parse_z_mode(const std::string& s);

struct AmleConfig {
  ZMode z_mode = ZMode::hybrid;
  /// Relative tail mass left out of the truncated series.
  double tail_bound = 1e-10;
  /// Holds nu at this value and fits beta only.
  std::optional<double> fixed_nu;
  NmConfig nm;
  int restarts = 2;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct LogZ {
  double value = 0.0;
  ZMode used = ZMode::truncated;  // never `hybrid`
};

/// True when the asymptotic form is considered accurate: lambda > 10^nu.
bool asymptotic_regime(double lambda, double nu) noexcept;

double log_z_truncated(double lambda, double nu, double tail_bound = 1e-10);
/// log of exp(nu lambda^(1/nu)) / (lambda^((nu-1)/(2nu)) (2 pi)^((nu-1)/2) sqrt(nu)).
double log_z_asymptotic(double lambda, double nu);

LogZ log_z_detail(double lambda, double nu, const AmleConfig& cfg);
double log_z(double lambda, double nu, const AmleConfig& cfg);

/// CMP log-likelihood sum_i [y_i log lambda_i - nu log y_i! - log Z_i] with
/// the configured approximation. `modes`, when given, receives the form used
/// per row.
double amle_loglik(const Dataset& data, const CmpParams& params, const AmleConfig& cfg,
                   std::vector<ZMode>* modes = nullptr);

struct AmleResult {
  FitResult fit;
  double loglik = 0.0;
  /// Inverse observed information in (beta, nu); the nu row and column are
  /// zero when nu is held fixed.
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  std::vector<ZMode> row_modes;
  std::size_t asymptotic_rows = 0;
};

/// Approximate maximum likelihood by Nelder-Mead on (beta, log nu).
AmleResult amle_fit(const Dataset& data, const AmleConfig& cfg = {});

}  // namespace scorematch
