#include "scorematch/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace scorematch {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) : seed_(master_seed), stream_(stream_id) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox4x32_10(ctr, key);
  ++block_;
  next_ = 0;
}

RngStream::result_type RngStream::operator()() {
  if (next_ >= 4) refill();
  return buffer_[static_cast<std::size_t>(next_++)];
}

double RngStream::uniform() {
  const std::uint64_t a = (*this)() >> 5;
  const std::uint64_t b = (*this)() >> 6;
  return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) * (1.0 / 9007199254740992.0);
}

double RngStream::normal() { return normal_(*this); }

// ---------------------------------------------------------------------------

MvnSampler::MvnSampler(const Eigen::MatrixXd& precision) {
  if (precision.rows() != precision.cols() || precision.rows() == 0)
    fail(ErrorCode::dimension_mismatch, "precision must be a non-empty square matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) fail(ErrorCode::domain, "precision matrix is not positive definite");
  lower_ = llt.matrixL();
}

Eigen::VectorXd MvnSampler::draw(const Eigen::VectorXd& mean, RngStream& rng) const {
  if (mean.size() != lower_.rows()) fail(ErrorCode::dimension_mismatch, "mean length does not match precision");
  Eigen::VectorXd eps(mean.size());
  for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = rng.normal();
  return mean + lower_.transpose().triangularView<Eigen::Upper>().solve(eps);
}

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision, RngStream& rng) {
  return MvnSampler(precision).draw(mean, rng);
}

RowMatrix tg_sample(const RowMatrix& x, const TruncGaussParams& params, RngStream& rng) {
  if (x.cols() != params.B.cols()) fail(ErrorCode::dimension_mismatch, "design columns do not match B");
  const MvnSampler sampler(params.Lambda);
  RowMatrix y(x.rows(), params.B.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd mean = params.B * x.row(i).transpose();
    long attempts = 0;
    while (true) {
      const Eigen::VectorXd draw = sampler.draw(mean, rng);
      if ((draw.array() > 0.0).all()) {
        y.row(i) = draw.transpose();
        break;
      }
      if (++attempts >= kMaxRejections)
        fail(ErrorCode::numerical, "tg_sample: acceptance probability below 1e-6 at row " + std::to_string(i));
    }
  }
  return y;
}

// ---------------------------------------------------------------------------

CmpDistTable::CmpDistTable(double lambda, double nu) : lambda_(lambda), nu_(nu) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorCode::domain, "CMP lambda must be finite and > 0");
  if (!(nu >= 0.0) || !std::isfinite(nu)) fail(ErrorCode::domain, "CMP nu must be finite and >= 0");
  if (nu == 0.0 && lambda >= 1.0) fail(ErrorCode::domain, "CMP series diverges for nu = 0 and lambda >= 1");
  const double log_lambda = std::log(lambda);
  if (nu > 0.0 && log_lambda / nu > 700.0) fail(ErrorCode::domain, "CMP lambda^(1/nu) overflows");

  const double log_tol = std::log(kCmpTailMass);
  std::vector<double> log_w{0.0};
  double run_max = 0.0, run_sum = 1.0;  // sum of exp(log_w - run_max)
  for (std::size_t y = 0;; ++y) {
    const double log_ratio = log_lambda - nu * std::log(static_cast<double>(y) + 1.0);
    if (log_ratio < 0.0) {
      // later ratios are no larger, so the tail is dominated by a geometric series
      const double r = std::exp(log_ratio);
      const double log_tail = log_w[y] + log_ratio - std::log1p(-r);
      const double log_partial = run_max + std::log(run_sum);
      if (log_tail - log_partial < log_tol) {
        tail_bound_ = std::exp(log_tail - log_partial);
        break;
      }
    }
    if (log_w.size() >= kMaxCmpSupport) fail(ErrorCode::numerical, "CMP table exceeds the support limit");
    const double next = log_w[y] + log_ratio;
    log_w.push_back(next);
    if (next > run_max) {
      run_sum = run_sum * std::exp(run_max - next) + 1.0;
      run_max = next;
    } else {
      run_sum += std::exp(next - run_max);
    }
  }
  log_z_ = run_max + std::log(run_sum);
  pmf_.resize(log_w.size());
  cdf_.resize(log_w.size());
  double acc = 0.0, mean = 0.0;
  for (std::size_t y = 0; y < log_w.size(); ++y) {
    pmf_[y] = std::exp(log_w[y] - log_z_);
    acc += pmf_[y];
    cdf_[y] = acc;
    mean += static_cast<double>(y) * pmf_[y];
  }
  mean_ = mean;
}

double CmpDistTable::pmf(int y) const noexcept {
  if (y < 0 || y > truncation()) return 0.0;
  return pmf_[static_cast<std::size_t>(y)];
}

double CmpDistTable::cdf(int y) const noexcept {
  if (y < 0) return 0.0;
  if (y > truncation()) return 1.0;
  return cdf_[static_cast<std::size_t>(y)];
}

CmpDistTable cmp_table(double lambda, double nu) { return CmpDistTable(lambda, nu); }

int cmp_sample(const CmpDistTable& table, RngStream& rng) {
  const double u = rng.uniform();
  const auto cdf = table.cdf_values();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return table.truncation();
  return static_cast<int>(it - cdf.begin());
}

double cmp_mean(const CmpDistTable& table) { return table.mean(); }

}  // namespace scorematch
