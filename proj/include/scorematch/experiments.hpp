#pragma once

#include "scorematch/amle.hpp"
#include "scorematch/core.hpp"
#include "scorematch/inference.hpp"
#include "scorematch/optimizer.hpp"
#include "scorematch/sampling.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace scorematch {

enum class Setting { tg, cmp };
const char* setting_name(Setting s) noexcept;

/// Bivariate truncated Gaussian: vec(B) = (1, 0.4, -0.5, 0.2),
/// Lambda = (20, 10; 10, 30).
TruncGaussParams tg_truth();
/// CMP regression on six covariates with nu = 0.2564.
CmpParams cmp_truth();
ParamVector setting_truth(Setting s);

/// Stream ids at or above this value are reserved for design draws;
/// replicate streams use (n << 32) | r.
inline constexpr std::uint64_t kDesignStreamBit = std::uint64_t{1} << 63;
std::uint64_t replicate_stream(std::size_t n, std::size_t r) noexcept;

/// Intercept plus one standard normal covariate, frozen per (n, seed).
RowMatrix tg_design(std::size_t n, std::uint64_t master_seed);

/// Synthetic stand-in for the publication-count covariates: intercept,
/// gender ~ Bernoulli(0.46), married ~ Bernoulli(0.66), kid5 ~ Poisson(0.5)
/// capped at 3, phd ~ N(3.1, 0.98) clipped to [0.75, 4.62], and mentor from a
/// gamma-Poisson mixture with mean 8.8 and sd 9.5. kid5, phd and mentor are
/// centered and scaled by their sample moments.
RowMatrix cmp_design(std::size_t n, std::uint64_t master_seed);

RowMatrix setting_design(Setting s, std::size_t n, std::uint64_t master_seed);

/// Log-transformed responses drawn at the fixed design.
Dataset simulate_tg(const RowMatrix& x, const TruncGaussParams& params, RngStream& rng);

/// CMP responses at a fixed design; per-row tables are built once.
class CmpSimulator {
 public:
  CmpSimulator(RowMatrix x, const CmpParams& params);
  Dataset draw(RngStream& rng) const;
  const CmpDistTable& table(std::size_t i) const { return tables_[i]; }
  const RowMatrix& design() const noexcept { return x_; }

 private:
  RowMatrix x_;
  std::vector<CmpDistTable> tables_;
};

Dataset simulate_cmp(const RowMatrix& x, const CmpParams& params, RngStream& rng);

struct Estimate {
  Eigen::VectorXd theta;
  Eigen::VectorXd se;
  bool converged = false;
  double objective = 0.0;
  int iterations = 0;
  int function_evals = 0;
};

/// A point estimator with standard errors, as used by the Monte Carlo
/// driver and the bootstrap.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string name() const = 0;
  /// Extra key distinguishing configurations of one estimator.
  virtual std::string variant() const { return ""; }
  virtual Estimate estimate(const Dataset& data, Exec exec) const = 0;
};

/// Score matching on the log-transformed truncated Gaussian; sandwich SEs.
class SmEstimator final : public Estimator {
 public:
  explicit SmEstimator(FitOptions opts = {}) : opts_(std::move(opts)) {}
  std::string name() const override { return "sm"; }
  Estimate estimate(const Dataset& data, Exec exec) const override;

 private:
  FitOptions opts_;
};

/// Generalized score matching for CMP regression; sandwich SEs.
class GsmEstimator final : public Estimator {
 public:
  explicit GsmEstimator(FitOptions opts = {}) : opts_(std::move(opts)) {}
  std::string name() const override { return "gsm"; }
  Estimate estimate(const Dataset& data, Exec exec) const override;

 private:
  FitOptions opts_;
};

/// Approximate MLE; observed-information SEs.
class AmleEstimator final : public Estimator {
 public:
  explicit AmleEstimator(AmleConfig cfg = {}) : cfg_(std::move(cfg)) {}
  std::string name() const override { return "amle"; }
  std::string variant() const override { return z_mode_name(cfg_.z_mode); }
  Estimate estimate(const Dataset& data, Exec exec) const override;

 private:
  AmleConfig cfg_;
};

struct McRow {
  std::string setting;
  std::string estimator;
  std::string variant;
  std::size_t n = 0;
  std::string parameter;
  double truth = 0.0;
  double bias = 0.0;
  double sd = 0.0;  // 1/R normalization
  double asd = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  int replicates = 0;  // successful
  int failed = 0;
};

/// Raw per-replicate output for one (estimator, n) cell.
struct McCell {
  std::string estimator;
  std::string variant;
  std::size_t n = 0;
  RowMatrix theta;  // R x p, NaN rows for failures
  RowMatrix se;
  std::vector<char> ok;
};

struct McReport {
  std::vector<McRow> rows;
  std::vector<McCell> cells;

  /// Row for (estimator, variant, n, parameter), or nullptr.
  const McRow* find(const std::string& estimator, const std::string& variant, std::size_t n,
                    const std::string& parameter) const;
};

struct McOptions {
  double level = 0.95;
  Exec exec = Exec::parallel;
  double max_failure_fraction = 0.05;
};

/// Monte Carlo study. For each n the design is drawn once; replicate r
/// simulates from RngStream(master_seed, replicate_stream(n, r)) and every
/// estimator is applied to the same dataset. Replicates run in parallel and
/// are merged in replicate order.
McReport run_mc(Setting setting, const std::vector<const Estimator*>& estimators, const std::vector<std::size_t>& ns,
                int replicates, std::uint64_t master_seed, const McOptions& opts = {});

/// Summary statistics for one cell with known truth; exposed for testing.
std::vector<McRow> summarize_cell(const McCell& cell, const ParamVector& truth, double level, const std::string& setting);

/// Randomized PIT u_i = F(y_i - 1) + v_i (F(y_i) - F(y_i - 1)). With a null
/// `rng`, v_i = 0.5.
Eigen::VectorXd pit_values(const Dataset& data, const CmpParams& fitted, RngStream* rng);

/// Kolmogorov-Smirnov distance to Uniform(0, 1).
double ks_uniform_distance(const Eigen::VectorXd& u);

using CmpFitter = std::function<CmpParams(const Dataset&)>;

struct TrainTestResult {
  double mse = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

/// Shuffles rows with RngStream(split_seed, 0), fits on the first
/// round(train_frac * n) and scores the CMP mean on the rest.
TrainTestResult train_test_mse(const Dataset& data, std::uint64_t split_seed, double train_frac, const CmpFitter& fit);

/// Parametric bootstrap from a fitted model at the data's design.
BootstrapResult model_bootstrap(Setting model, const Estimator& estimator, const Dataset& data,
                                const ParamVector& theta_hat, const BootstrapOptions& opts);

}  // namespace scorematch
