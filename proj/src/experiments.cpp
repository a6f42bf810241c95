#include "scorematch/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace scorematch {

const char* setting_name(Setting s) noexcept { return s == Setting::tg ? "tg" : "cmp"; }

TruncGaussParams tg_truth() {
  TruncGaussParams t;
  t.B.resize(2, 2);
  t.B << 1.0, -0.5, 0.4, 0.2;
  t.Lambda.resize(2, 2);
  t.Lambda << 20.0, 10.0, 10.0, 30.0;
  return t;
}

CmpParams cmp_truth() {
  CmpParams c;
  c.beta.resize(6);
  c.beta << -0.3141, -0.0893, 0.0445, -0.0705, 0.0693, 0.0830;
  c.nu = 0.2564;
  return c;
}

ParamVector setting_truth(Setting s) { return s == Setting::tg ? pack(tg_truth()) : pack(cmp_truth()); }

std::uint64_t replicate_stream(std::size_t n, std::size_t r) noexcept {
  return (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint64_t>(r);
}

RowMatrix tg_design(std::size_t n, std::uint64_t master_seed) {
  if (n == 0) fail(ErrorCode::invalid_argument, "design needs n >= 1");
  RngStream rng(master_seed, kDesignStreamBit | static_cast<std::uint64_t>(n));
  RowMatrix x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
  }
  return x;
}

namespace {

void standardize(RowMatrix& x, Eigen::Index col) {
  const double mean = x.col(col).mean();
  const double sd = std::sqrt((x.col(col).array() - mean).square().sum() / static_cast<double>(x.rows()));
  if (sd > 0.0)
    x.col(col) = (x.col(col).array() - mean) / sd;
  else
    x.col(col).setZero();
}

}  // namespace

RowMatrix cmp_design(std::size_t n, std::uint64_t master_seed) {
  if (n == 0) fail(ErrorCode::invalid_argument, "design needs n >= 1");
  RngStream rng(master_seed, kDesignStreamBit | (std::uint64_t{1} << 62) | static_cast<std::uint64_t>(n));
  constexpr double mentor_mean = 8.8, mentor_sd = 9.5;
  const double shape = mentor_mean * mentor_mean / (mentor_sd * mentor_sd - mentor_mean);
  std::gamma_distribution<double> mentor_rate(shape, mentor_mean / shape);
  std::poisson_distribution<int> kids(0.5);
  RowMatrix x(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.uniform() < 0.46 ? 1.0 : 0.0;
    x(i, 2) = rng.uniform() < 0.66 ? 1.0 : 0.0;
    x(i, 3) = std::min(kids(rng), 3);
    x(i, 4) = std::clamp(3.1 + 0.98 * rng.normal(), 0.75, 4.62);
    std::poisson_distribution<int> mentor(mentor_rate(rng));
    x(i, 5) = mentor(rng);
  }
  for (Eigen::Index c = 3; c < 6; ++c) standardize(x, c);
  return x;
}

RowMatrix setting_design(Setting s, std::size_t n, std::uint64_t master_seed) {
  return s == Setting::tg ? tg_design(n, master_seed) : cmp_design(n, master_seed);
}

Dataset simulate_tg(const RowMatrix& x, const TruncGaussParams& params, RngStream& rng) {
  RowMatrix y = tg_sample(x, params, rng);
  y = y.array().log().matrix();
  return Dataset::continuous(x, std::move(y));
}

CmpSimulator::CmpSimulator(RowMatrix x, const CmpParams& params) : x_(std::move(x)) {
  if (static_cast<std::size_t>(params.beta.size()) != static_cast<std::size_t>(x_.cols()))
    fail(ErrorCode::dimension_mismatch, "beta length does not match the design");
  tables_.reserve(static_cast<std::size_t>(x_.rows()));
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    const double eta = x_.row(i).dot(params.beta.transpose());
    tables_.emplace_back(std::exp(eta), params.nu);
  }
}

Dataset CmpSimulator::draw(RngStream& rng) const {
  RowMatrixI y(x_.rows(), 1);
  for (Eigen::Index i = 0; i < x_.rows(); ++i) y(i, 0) = cmp_sample(tables_[static_cast<std::size_t>(i)], rng);
  return Dataset::counts(x_, std::move(y));
}

Dataset simulate_cmp(const RowMatrix& x, const CmpParams& params, RngStream& rng) {
  return CmpSimulator(x, params).draw(rng);
}

// ---------------------------------------------------------------------------

Estimate SmEstimator::estimate(const Dataset& data, Exec exec) const {
  FitOptions o = opts_;
  o.exec = exec;
  const FitResult fit = fit_tg_sm(data, o);
  const TgModel model(data.response_dim());
  const Objective objective(ObjectiveTag::sm_continuous, model, data);
  return {fit.theta_hat.theta, sandwich(fit.theta_hat, objective, exec).asd(), fit.converged,
          fit.objective, fit.iterations, fit.function_evals};
}

Estimate GsmEstimator::estimate(const Dataset& data, Exec exec) const {
  FitOptions o = opts_;
  o.exec = exec;
  const FitResult fit = fit_cmp_gsm(data, o);
  const CmpModel model;
  const Objective objective(ObjectiveTag::gsm_univariate, model, data);
  return {fit.theta_hat.theta, sandwich(fit.theta_hat, objective, exec).asd(), fit.converged,
          fit.objective, fit.iterations, fit.function_evals};
}

Estimate AmleEstimator::estimate(const Dataset& data, Exec exec) const {
  AmleConfig c = cfg_;
  c.exec = exec;
  const AmleResult res = amle_fit(data, c);
  return {res.fit.theta_hat.theta, res.se, res.fit.converged, res.fit.objective, res.fit.iterations,
          res.fit.function_evals};
}

// ---------------------------------------------------------------------------

const McRow* McReport::find(const std::string& estimator, const std::string& variant, std::size_t n,
                            const std::string& parameter) const {
  for (const McRow& r : rows)
    if (r.estimator == estimator && r.variant == variant && r.n == n && r.parameter == parameter) return &r;
  return nullptr;
}

std::vector<McRow> summarize_cell(const McCell& cell, const ParamVector& truth, double level, const std::string& setting) {
  const double z = normal_quantile(0.5 * (1.0 + level));
  const auto names = parameter_names(truth.layout, truth.response_dim, truth.covariates);
  const std::size_t reps = cell.ok.size();
  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < reps; ++r)
    if (cell.ok[r]) good.push_back(r);
  const double m = static_cast<double>(good.size());

  std::vector<McRow> out;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    McRow row;
    row.setting = setting;
    row.estimator = cell.estimator;
    row.variant = cell.variant;
    row.n = cell.n;
    row.parameter = names[k];
    row.truth = truth.theta(kk);
    row.replicates = static_cast<int>(good.size());
    row.failed = static_cast<int>(reps - good.size());
    if (!good.empty()) {
      std::vector<double> est, se;
      for (std::size_t r : good) {
        est.push_back(cell.theta(static_cast<Eigen::Index>(r), kk));
        se.push_back(cell.se(static_cast<Eigen::Index>(r), kk));
      }
      const double mean = pairwise_sum(est) / m;
      std::vector<double> sq(est.size());
      double covered = 0.0;
      for (std::size_t j = 0; j < est.size(); ++j) {
        sq[j] = (est[j] - mean) * (est[j] - mean);
        if (std::abs(est[j] - row.truth) <= z * se[j]) covered += 1.0;
      }
      row.bias = mean - row.truth;
      row.sd = std::sqrt(pairwise_sum(sq) / m);
      row.asd = pairwise_sum(se) / m;
      row.rmse = std::sqrt(row.bias * row.bias + row.sd * row.sd);
      row.coverage = covered / m;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.bias = row.sd = row.asd = row.rmse = row.coverage = nan;
    }
    out.push_back(row);
  }
  return out;
}

McReport run_mc(Setting setting, const std::vector<const Estimator*>& estimators, const std::vector<std::size_t>& ns,
                int replicates, std::uint64_t master_seed, const McOptions& opts) {
  if (replicates < 2) fail(ErrorCode::invalid_argument, "Monte Carlo needs at least 2 replicates");
  if (!(opts.level > 0.0 && opts.level < 1.0)) fail(ErrorCode::invalid_argument, "level must be in (0, 1)");
  const ParamVector truth = setting_truth(setting);
  const auto p = static_cast<Eigen::Index>(truth.size());
  const auto reps = static_cast<std::size_t>(replicates);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  McReport report;
  for (std::size_t n : ns) {
    const RowMatrix x = setting_design(setting, n, master_seed);
    std::unique_ptr<CmpSimulator> cmp_sim;
    if (setting == Setting::cmp) cmp_sim = std::make_unique<CmpSimulator>(x, cmp_truth());
    const TruncGaussParams tg = tg_truth();

    std::vector<McCell> cells(estimators.size());
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      cells[e].estimator = estimators[e]->name();
      cells[e].variant = estimators[e]->variant();
      cells[e].n = n;
      cells[e].theta = RowMatrix::Constant(static_cast<Eigen::Index>(reps), p, nan);
      cells[e].se = RowMatrix::Constant(static_cast<Eigen::Index>(reps), p, nan);
      cells[e].ok.assign(reps, 0);
    }

    for_each_index(
        reps, opts.exec,
        [&](std::size_t r) {
          RngStream rng(master_seed, replicate_stream(n, r));
          const Dataset data = setting == Setting::tg ? simulate_tg(x, tg, rng) : cmp_sim->draw(rng);
          for (std::size_t e = 0; e < estimators.size(); ++e) {
            try {
              const Estimate est = estimators[e]->estimate(data, Exec::serial);
              if (est.theta.size() != p || est.se.size() != p)
                fail(ErrorCode::internal, "estimator returned a wrong-length result");
              if (est.theta.allFinite() && est.se.allFinite()) {
                cells[e].theta.row(static_cast<Eigen::Index>(r)) = est.theta.transpose();
                cells[e].se.row(static_cast<Eigen::Index>(r)) = est.se.transpose();
                cells[e].ok[r] = 1;
              }
            } catch (const Error& err) {
              if (err.internal()) throw;
            }
          }
        },
        true);

    for (McCell& cell : cells) {
      const auto failed = static_cast<double>(std::count(cell.ok.begin(), cell.ok.end(), 0));
      if (failed > opts.max_failure_fraction * static_cast<double>(reps))
        fail(ErrorCode::numerical, cell.estimator + " failed in " + std::to_string(static_cast<long>(failed)) + " of " +
                                       std::to_string(reps) + " replicates at n = " + std::to_string(n));
      auto rows = summarize_cell(cell, truth, opts.level, setting_name(setting));
      report.rows.insert(report.rows.end(), rows.begin(), rows.end());
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd pit_values(const Dataset& data, const CmpParams& fitted, RngStream* rng) {
  if (!data.is_count() || data.response_dim() != 1) fail(ErrorCode::invalid_argument, "PIT needs univariate count data");
  if (static_cast<std::size_t>(fitted.beta.size()) != data.covariates())
    fail(ErrorCode::dimension_mismatch, "beta length does not match the covariates");
  const std::span<const double> beta(fitted.beta.data(), data.covariates());
  Eigen::VectorXd u(static_cast<Eigen::Index>(data.rows()));
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const CmpDistTable table(std::exp(linear_predictor(data.x_row(i), beta)), fitted.nu);
    const int y = data.y_count_row(i)[0];
    const double lo = table.cdf(y - 1), hi = table.cdf(y);
    const double v = rng ? rng->uniform() : 0.5;
    u(static_cast<Eigen::Index>(i)) = std::clamp(lo + v * (hi - lo), 0.0, 1.0);
  }
  return u;
}

double ks_uniform_distance(const Eigen::VectorXd& u) {
  if (u.size() == 0) fail(ErrorCode::invalid_argument, "KS distance of an empty sample");
  std::vector<double> s(u.data(), u.data() + u.size());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

TrainTestResult train_test_mse(const Dataset& data, std::uint64_t split_seed, double train_frac, const CmpFitter& fit) {
  if (!data.is_count() || data.response_dim() != 1)
    fail(ErrorCode::invalid_argument, "predictive evaluation needs univariate count data");
  if (!(train_frac > 0.0 && train_frac < 1.0)) fail(ErrorCode::invalid_argument, "train fraction must be in (0, 1)");
  const std::size_t n = data.rows();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) fail(ErrorCode::invalid_argument, "train/test split leaves an empty part");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng(split_seed, 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  const std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

  const CmpParams fitted = fit(data.subset(train));
  const std::span<const double> beta(fitted.beta.data(), static_cast<std::size_t>(fitted.beta.size()));
  std::vector<double> sq(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    const std::size_t i = test[k];
    const CmpDistTable table(std::exp(linear_predictor(data.x_row(i), beta)), fitted.nu);
    const double err = table.mean() - data.y_count_row(i)[0];
    sq[k] = err * err;
  }
  return {pairwise_sum(sq) / static_cast<double>(test.size()), train.size(), test.size()};
}

BootstrapResult model_bootstrap(Setting model, const Estimator& estimator, const Dataset& data,
                                const ParamVector& theta_hat, const BootstrapOptions& opts) {
  SimulateFn simulate;
  std::shared_ptr<CmpSimulator> cmp_sim;
  if (model == Setting::cmp) {
    cmp_sim = std::make_shared<CmpSimulator>(data.x(), unpack_cmp(theta_hat));
    simulate = [cmp_sim](RngStream& rng) { return cmp_sim->draw(rng); };
  } else {
    const TruncGaussParams params = unpack_tg(theta_hat);
    if (!is_positive_definite(params.Lambda))
      fail(ErrorCode::domain, "fitted precision matrix is not positive definite; cannot simulate");
    const RowMatrix x = data.x();
    simulate = [x, params](RngStream& rng) { return simulate_tg(x, params, rng); };
  }
  const RefitFn refit = [&](const Dataset& d) { return estimator.estimate(d, Exec::serial).theta; };
  return bootstrap_percentile(theta_hat, simulate, refit, opts);
}

}  // namespace scorematch
