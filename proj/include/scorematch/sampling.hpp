#pragma once

#include "scorematch/core.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace scorematch {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. The master seed is the Philox key and the
/// stream id occupies the upper half of the counter, so every
/// (master_seed, stream_id) pair addresses a disjoint, reproducible sequence.
/// Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint32_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int next_ = 4;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draws from N(mean, precision^-1) through the Cholesky factor of the
/// precision: solve L' z = eps.
class MvnSampler {
 public:
  explicit MvnSampler(const Eigen::MatrixXd& precision);
  Eigen::VectorXd draw(const Eigen::VectorXd& mean, RngStream& rng) const;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.rows()); }

 private:
  Eigen::MatrixXd lower_;
};

Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision, RngStream& rng);

inline constexpr long kMaxRejections = 1'000'000;

/// Rejection sampling of N(B x_i, Lambda^-1) restricted to the open positive
/// orthant, one row per design row. Returns responses on the original scale.
RowMatrix tg_sample(const RowMatrix& x, const TruncGaussParams& params, RngStream& rng);

/// CMP(lambda, nu) probabilities on 0..K, with K extended until a geometric
/// bound certifies the remaining tail below 1e-12 of Z.
class CmpDistTable {
 public:
  CmpDistTable(double lambda, double nu);

  double lambda() const noexcept { return lambda_; }
  double nu() const noexcept { return nu_; }
  int truncation() const noexcept { return static_cast<int>(pmf_.size()) - 1; }
  double log_z() const noexcept { return log_z_; }
  /// Geometric upper bound on the omitted tail mass, relative to Z.
  double tail_bound() const noexcept { return tail_bound_; }

  double pmf(int y) const noexcept;
  /// P(Y <= y); 0 for y < 0.
  double cdf(int y) const noexcept;
  std::span<const double> cdf_values() const noexcept { return cdf_; }
  double mean() const noexcept { return mean_; }

 private:
  double lambda_;
  double nu_;
  double log_z_ = 0.0;
  double tail_bound_ = 0.0;
  double mean_ = 0.0;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

inline constexpr double kCmpTailMass = 1e-12;
/// Largest support a table may span; also caps the truncated log Z series.
inline constexpr std::size_t kMaxCmpSupport = 20'000'000;

CmpDistTable cmp_table(double lambda, double nu);
/// Inversion of the tabulated cdf.
int cmp_sample(const CmpDistTable& table, RngStream& rng);
double cmp_mean(const CmpDistTable& table);

}  // namespace scorematch
