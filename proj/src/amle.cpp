#include "scorematch/amle.hpp"
#include "scorematch/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace scorematch {

const char* z_mode_name(ZMode m) noexcept {
  switch (m) {
    case ZMode::truncated: return "truncated";
    case ZMode::asymptotic: return "asymptotic";
    case ZMode::hybrid: return "hybrid";
  }
  return "?";
}

ZMode parse_z_mode(const std::string& s) {
  if (s == "truncated") return ZMode::truncated;
  if (s == "asymptotic") return ZMode::asymptotic;
  if (s == "hybrid") return ZMode::hybrid;
  fail(ErrorCode::invalid_argument, "unknown z-mode '" + s + "' (expected truncated, asymptotic or hybrid)");
}

void AmleConfig::validate() const {
  if (!(tail_bound > 0.0 && tail_bound <= 1e-4)) fail(ErrorCode::invalid_argument, "tail bound must be in (0, 1e-4]");
  if (fixed_nu && !(*fixed_nu > 0.0 && std::isfinite(*fixed_nu)))
    fail(ErrorCode::invalid_argument, "fixed nu must be finite and > 0");
  if (restarts < 0) fail(ErrorCode::invalid_argument, "restarts must be >= 0");
}

bool asymptotic_regime(double lambda, double nu) noexcept { return std::log(lambda) > nu * std::numbers::ln10; }

namespace {

constexpr std::size_t kLogTableSize = 1 << 14;

const std::vector<double>& log_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kLogTableSize);
    for (std::size_t k = 1; k < kLogTableSize; ++k) t[k] = std::log(static_cast<double>(k));
    return t;
  }();
  return table;
}

inline double log_int(std::size_t k, const std::vector<double>& table) {
  return k < table.size() ? table[k] : std::log(static_cast<double>(k));
}

}  // namespace

double log_z_truncated(double lambda, double nu, double tail_bound) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorCode::domain, "lambda must be finite and > 0");
  if (!(nu >= 0.0) || !std::isfinite(nu)) fail(ErrorCode::domain, "nu must be finite and >= 0");
  if (nu == 0.0 && lambda >= 1.0) fail(ErrorCode::domain, "CMP series diverges for nu = 0 and lambda >= 1");
  const double log_lambda = std::log(lambda);
  // the terms peak near lambda^(1/nu); refuse series that long
  if (nu > 0.0 && log_lambda / nu > std::log(static_cast<double>(kMaxCmpSupport)))
    fail(ErrorCode::numerical, "truncated CMP series is too long");

  const auto& table = log_table();
  const double log_tol = std::log(tail_bound);
  double log_w = 0.0, run_max = 0.0, run_sum = 1.0;
  for (std::size_t y = 0;; ++y) {
    const double log_ratio = log_lambda - nu * log_int(y + 1, table);
    // the tail bound is at least the next term, so the exact test is only
    // needed once that term is already negligible
    if (log_ratio < 0.0 && log_w + log_ratio - run_max < log_tol + std::log(run_sum)) {
      const double log_tail = log_w + log_ratio - std::log1p(-std::exp(log_ratio));
      if (log_tail - (run_max + std::log(run_sum)) < log_tol) break;
    }
    if (y > 2 * kMaxCmpSupport) fail(ErrorCode::numerical, "truncated CMP series did not converge");
    log_w += log_ratio;
    if (log_w > run_max) {
      run_sum = run_sum * std::exp(run_max - log_w) + 1.0;
      run_max = log_w;
    } else {
      run_sum += std::exp(log_w - run_max);
    }
  }
  return run_max + std::log(run_sum);
}

double log_z_asymptotic(double lambda, double nu) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorCode::domain, "lambda must be finite and > 0");
  if (!(nu > 0.0) || !std::isfinite(nu)) fail(ErrorCode::domain, "asymptotic log Z needs nu > 0");
  const double log_lambda = std::log(lambda);
  if (log_lambda / nu > 700.0) fail(ErrorCode::numerical, "lambda^(1/nu) overflows");
  return nu * std::pow(lambda, 1.0 / nu) - (nu - 1.0) / (2.0 * nu) * log_lambda -
         0.5 * (nu - 1.0) * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(nu);
}

LogZ log_z_detail(double lambda, double nu, const AmleConfig& cfg) {
  ZMode mode = cfg.z_mode;
  if (mode == ZMode::hybrid) mode = asymptotic_regime(lambda, nu) ? ZMode::asymptotic : ZMode::truncated;
  if (mode == ZMode::asymptotic) return {log_z_asymptotic(lambda, nu), mode};
  return {log_z_truncated(lambda, nu, cfg.tail_bound), mode};
}

double log_z(double lambda, double nu, const AmleConfig& cfg) { return log_z_detail(lambda, nu, cfg).value; }

double amle_loglik(const Dataset& data, const CmpParams& params, const AmleConfig& cfg, std::vector<ZMode>* modes) {
  if (!data.is_count() || data.response_dim() != 1) fail(ErrorCode::invalid_argument, "AMLE needs univariate count data");
  if (static_cast<std::size_t>(params.beta.size()) != data.covariates())
    fail(ErrorCode::dimension_mismatch, "beta length does not match the covariates");
  const std::size_t n = data.rows();
  std::vector<double> terms(n);
  if (modes) modes->assign(n, ZMode::truncated);
  const std::span<const double> beta(params.beta.data(), data.covariates());
  for_each_index(n, cfg.exec, [&](std::size_t i) {
    const double eta = linear_predictor(data.x_row(i), beta);
    const int y = data.y_count_row(i)[0];
    const LogZ lz = log_z_detail(std::exp(eta), params.nu, cfg);
    terms[i] = y * eta - params.nu * std::lgamma(y + 1.0) - lz.value;
    if (modes) (*modes)[i] = lz.used;
  });
  const double total = pairwise_sum(terms);
  if (!std::isfinite(total)) fail(ErrorCode::numerical, "non-finite CMP log-likelihood");
  return total;
}

AmleResult amle_fit(const Dataset& data, const AmleConfig& cfg) {
  cfg.validate();
  if (!data.is_count() || data.response_dim() != 1) fail(ErrorCode::invalid_argument, "AMLE needs univariate count data");
  const std::size_t p_cov = data.covariates();
  if (p_cov < 1) fail(ErrorCode::invalid_argument, "AMLE needs at least one covariate");
  const double n = static_cast<double>(data.rows());
  const bool free_nu = !cfg.fixed_nu.has_value();

  // z = (beta, log nu) or just beta
  auto to_params = [&](const Eigen::VectorXd& z) {
    CmpParams prm;
    prm.beta = z.head(static_cast<Eigen::Index>(p_cov));
    prm.nu = free_nu ? std::exp(z(static_cast<Eigen::Index>(p_cov))) : *cfg.fixed_nu;
    return prm;
  };
  const ScalarFn f = [&](const Eigen::VectorXd& z) {
    try {
      return -amle_loglik(data, to_params(z), cfg) / n;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::numerical || e.code() == ErrorCode::domain)
        return std::numeric_limits<double>::infinity();
      throw;
    }
  };

  const CmpParams start = unpack_cmp(default_start(data, Layout::cmp));
  Eigen::VectorXd z0(static_cast<Eigen::Index>(p_cov + (free_nu ? 1 : 0)));
  z0.head(static_cast<Eigen::Index>(p_cov)) = start.beta;
  if (free_nu) z0(static_cast<Eigen::Index>(p_cov)) = std::log(start.nu);
  const NmResult nm = minimize_with_restarts(f, z0, cfg.nm, cfg.restarts);

  AmleResult out;
  const CmpParams fitted = to_params(nm.x);
  out.fit.theta_hat = pack(fitted);
  out.loglik = amle_loglik(data, fitted, cfg, &out.row_modes);
  out.fit.objective = -out.loglik / n;
  out.fit.iterations = nm.iterations;
  out.fit.function_evals = nm.function_evals;
  out.fit.converged = nm.converged;
  for (ZMode m : out.row_modes) out.asymptotic_rows += m == ZMode::asymptotic ? 1 : 0;

  // observed information of the negative log-likelihood in (beta, nu)
  const Eigen::Index q = static_cast<Eigen::Index>(p_cov) + (free_nu ? 1 : 0);
  const Eigen::VectorXd theta = out.fit.theta_hat.theta.head(q);
  auto negll = [&](const Eigen::VectorXd& t) {
    CmpParams prm;
    prm.beta = t.head(static_cast<Eigen::Index>(p_cov));
    prm.nu = free_nu ? t(static_cast<Eigen::Index>(p_cov)) : *cfg.fixed_nu;
    return -amle_loglik(data, prm, cfg);
  };
  Eigen::VectorXd h(q);
  for (Eigen::Index k = 0; k < q; ++k) h(k) = 1e-4 * (1.0 + std::abs(theta(k)));
  const double f0 = negll(theta);
  Eigen::MatrixXd info(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    Eigen::VectorXd t = theta;
    t(a) = theta(a) + h(a);
    const double up = negll(t);
    t(a) = theta(a) - h(a);
    const double down = negll(t);
    info(a, a) = (up - 2.0 * f0 + down) / (h(a) * h(a));
    for (Eigen::Index b = 0; b < a; ++b) {
      Eigen::VectorXd s = theta;
      double acc = 0.0;
      for (int sa : {1, -1})
        for (int sb : {1, -1}) {
          s(a) = theta(a) + sa * h(a);
          s(b) = theta(b) + sb * h(b);
          acc += sa * sb * negll(s);
        }
      info(a, b) = info(b, a) = acc / (4.0 * h(a) * h(b));
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) fail(ErrorCode::numerical, "AMLE observed information is not positive definite");
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  const auto p = static_cast<Eigen::Index>(p_cov + 1);
  out.covariance = Eigen::MatrixXd::Zero(p, p);
  out.covariance.topLeftCorner(q, q) = 0.5 * (inv + inv.transpose());
  out.se = out.covariance.diagonal().array().max(0.0).sqrt().matrix();
  return out;
}

}  // namespace scorematch
