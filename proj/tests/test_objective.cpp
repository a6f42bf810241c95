#include "doctest.h"
#include "oracles.hpp"
#include "scorematch/experiments.hpp"
#include "scorematch/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace scorematch;

namespace {

// Two independent CMP coordinates sharing one covariate row:
// theta = (beta_1, nu_1, beta_2, nu_2) with x = (1).
class PairCmpModel final : public ModelSpec {
 public:
  ResponseType response_type() const override { return ResponseType::count; }
  std::size_t response_dim() const override { return 2; }
  std::size_t parameter_count(std::size_t) const override { return 4; }
  double forward_ratio(std::span<const int> y, std::size_t j, std::span<const double> x,
                       std::span<const double> theta) const override {
    return std::exp(theta[2 * j] * x[0] - theta[2 * j + 1] * std::log(y[j] + 1.0));
  }
};

Dataset cmp_data(std::size_t n, const CmpParams& prm, std::uint64_t seed) {
  RngStream rng(seed, 0);
  const auto p = static_cast<Eigen::Index>(prm.beta.size());
  RowMatrix x(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k) x(i, k) = rng.normal();
  }
  RngStream draw(seed, 1);
  return simulate_cmp(x, prm, draw);
}

Dataset tg_data(std::size_t n, const TruncGaussParams& prm, std::uint64_t seed) {
  RngStream rng(seed, 0);
  RowMatrix x(static_cast<Eigen::Index>(n), prm.B.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < x.cols(); ++k) x(i, k) = rng.normal();
  }
  RngStream draw(seed, 1);
  return simulate_tg(x, prm, draw);
}

CmpParams one_cmp(double lambda, double nu) {
  CmpParams c;
  c.beta = Eigen::VectorXd::Constant(1, std::log(lambda));
  c.nu = nu;
  return c;
}

}  // namespace

TEST_SUITE("objective") {
  TEST_CASE("t transform") {
    CHECK(t_transform(0.0) == 1.0);
    CHECK(t_transform(1.0) == 0.5);
    CHECK(t_transform(std::numeric_limits<double>::infinity()) == 0.0);
    CHECK(t_transform(3.0) < t_transform(2.0));
    CHECK_THROWS_AS(t_transform(-1e-300), Error);
    CHECK_THROWS_AS(t_transform(std::numeric_limits<double>::quiet_NaN()), Error);
  }

  TEST_CASE("score matching examples at the origin") {
    TruncGaussParams prm;
    prm.B = Eigen::MatrixXd::Zero(2, 1);
    prm.Lambda = Eigen::MatrixXd::Identity(2, 2);
    const TgModel model(2);
    const ParamVector pv = pack(prm);
    const double y[] = {0.0, 0.0}, x[] = {1.0};
    CHECK(rho_sm_generic(y, x, pv.span(), model) == -8.0);
    CHECK(rho_sm_tg_closed(Eigen::Vector2d::Zero(), Eigen::VectorXd::Ones(1), prm) == -10.0);
    prm.Lambda.setZero();
    CHECK(rho_sm_tg_closed(Eigen::Vector2d(0.3, -1.2), Eigen::VectorXd::Ones(1), prm) == 0.0);
  }

  TEST_CASE("generic and closed score matching differ by d") {
    RngStream rng(21, 0);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t d = 1 + static_cast<std::size_t>(trial % 4);
      const auto dd = static_cast<Eigen::Index>(d);
      TruncGaussParams prm;
      prm.B.resize(dd, 2);
      for (Eigen::Index i = 0; i < prm.B.size(); ++i) prm.B.data()[i] = rng.normal();
      Eigen::MatrixXd a(dd, dd);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
      prm.Lambda = 0.5 * (a + a.transpose());  // any symmetric matrix
      Eigen::VectorXd y(dd), x(2);
      for (Eigen::Index j = 0; j < dd; ++j) y(j) = -2.0 + 4.0 * rng.uniform();
      x << 1.0, rng.normal();
      const TgModel model(d);
      const ParamVector pv = pack(prm);
      const double generic = rho_sm_generic({y.data(), d}, {x.data(), 2}, pv.span(), model);
      CHECK(std::abs(generic - rho_sm_tg_closed(y, x, prm) - static_cast<double>(d)) < 1e-9);
    }
  }

  TEST_CASE("non-finite derivative reports the row") {
    RowMatrix x = RowMatrix::Ones(2, 1);
    RowMatrix y(2, 1);
    y << 0.0, 800.0;
    const Dataset data = Dataset::continuous(x, y);
    const TgModel model(1);
    const Objective obj(ObjectiveTag::sm_continuous, model, data);
    const double theta[] = {0.0, 1.0};
    try {
      (void)obj.value(theta, Exec::serial);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
  }

  TEST_CASE("generalized score matching examples") {
    const CmpModel model;
    const double x1[] = {1.0};
    const ParamVector a = pack(one_cmp(1.0, 1.0));
    CHECK(rho_gsm_univariate(2, x1, a.span(), model) == doctest::Approx(0.5625 + 4.0 / 9.0 - 1.5).epsilon(1e-14));
    CHECK(rho_gsm_univariate(2, x1, a.span(), model) == doctest::Approx(-0.4930555555555556).epsilon(1e-14));
    const ParamVector b = pack(one_cmp(0.5, 1.0));
    CHECK(rho_gsm_univariate(0, x1, b.span(), model) == doctest::Approx(-8.0 / 9.0).epsilon(1e-14));

    // upper boundary: forward ratio is 0, so its t-term is 1
    const oracle::TruncatedCmpModel top(3);
    const double theta[] = {0.2, 0.7};
    const int three[] = {3};
    const double back = t_transform(top.backward_ratio(three, 0, x1, theta));
    CHECK(rho_gsm_univariate(3, x1, theta, top) == doctest::Approx(1.0 + back * back - 2.0).epsilon(1e-14));
  }

  TEST_CASE("multivariate collapses to univariate for d = 1") {
    RngStream rng(4, 4);
    const CmpModel model;
    for (int trial = 0; trial < 100; ++trial) {
      const double lambda = 0.2 + 2.0 * rng.uniform(), nu = 0.05 + 1.5 * rng.uniform();
      const CmpDistTable table(lambda, nu);
      const int y[] = {cmp_sample(table, rng)};
      const ParamVector pv = pack(one_cmp(lambda, nu));
      const double x1[] = {1.0};
      CHECK(rho_gsm_multivariate(y, x1, pv.span(), model) == rho_gsm_univariate(y[0], x1, pv.span(), model));
    }
  }

  TEST_CASE("independent coordinates add") {
    RngStream rng(6, 6);
    const PairCmpModel pair;
    const CmpModel single;
    const double x1[] = {1.0};
    for (int trial = 0; trial < 100; ++trial) {
      const double theta[] = {rng.normal() * 0.5, 0.1 + rng.uniform(), rng.normal() * 0.5, 0.1 + rng.uniform()};
      const int y[] = {static_cast<int>(rng() % 6), static_cast<int>(rng() % 6)};
      const double first[] = {theta[0], theta[1]}, second[] = {theta[2], theta[3]};
      const double sum = rho_gsm_univariate(y[0], x1, first, single) + rho_gsm_univariate(y[1], x1, second, single);
      CHECK(std::abs(rho_gsm_multivariate(y, x1, theta, pair) - sum) < 1e-12);
    }
    // at the origin every backward term vanishes
    const double theta[] = {0.3, 0.5, -0.2, 1.0};
    const int zeros[] = {0, 0};
    double expected = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double t = t_transform(pair.forward_ratio(zeros, j, x1, theta));
      expected += t * t - 2.0 * t;
    }
    CHECK(rho_gsm_multivariate(zeros, x1, theta, pair) == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("rho and its t-terms stay in range") {
    RngStream rng(9, 9);
    const CmpModel model;
    for (int trial = 0; trial < 2000; ++trial) {
      const double theta[] = {3.0 * rng.normal(), 3.0 * rng.uniform()};
      const double x1[] = {1.0};
      const int y = static_cast<int>(rng() % 50);
      const double rho = rho_gsm_univariate(y, x1, theta, model);
      CHECK(rho >= -1.0);
      CHECK(rho <= 2.0);
      const int yy[] = {y};
      const double tf = t_transform(model.forward_ratio(yy, 0, x1, theta));
      const double tb = t_transform(model.backward_ratio(yy, 0, x1, theta));
      CHECK((tf >= 0.0 && tf <= 1.0 && tb >= 0.0 && tb <= 1.0));
    }
  }

  TEST_CASE("objective value examples and invariances") {
    RowMatrix x = RowMatrix::Ones(3, 1);
    RowMatrixI y = RowMatrixI::Constant(3, 1, 2);
    const Dataset three = Dataset::counts(x, y);
    const CmpModel model;
    const Objective obj(ObjectiveTag::gsm_univariate, model, three);
    const ParamVector pv = pack(one_cmp(1.0, 1.0));
    CHECK(obj.value(pv.span()) == doctest::Approx(-0.4930555555555556).epsilon(1e-14));
    CHECK(objective_value(pv, obj) == obj.value(pv.span()));

    const Dataset data = cmp_data(200, cmp_truth(), 31);
    const Objective full(ObjectiveTag::gsm_univariate, model, data);
    const ParamVector truth = pack(cmp_truth());
    const double v = full.value(truth.span(), Exec::serial);
    CHECK(v == full.value(truth.span(), Exec::parallel));

    const std::size_t first[] = {0};
    const Dataset one = data.subset(first);
    const Objective single(ObjectiveTag::gsm_univariate, model, one);
    CHECK(single.value(truth.span()) == full.row_value(0, truth.span()));

    std::vector<std::size_t> twice;
    for (std::size_t i = 0; i < data.rows(); ++i) twice.push_back(i);
    for (std::size_t i = 0; i < data.rows(); ++i) twice.push_back(i);
    const Dataset dup = data.subset(twice);
    const Objective dobj(ObjectiveTag::gsm_univariate, model, dup);
    CHECK(std::abs(dobj.value(truth.span()) - v) < 1e-15);

    std::vector<std::size_t> perm(data.rows());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37 + 11) % perm.size();
    const Dataset shuffled = data.subset(perm);
    const Objective pobj(ObjectiveTag::gsm_univariate, model, shuffled);
    CHECK(std::abs(pobj.value(truth.span()) - v) < 1e-12);
  }

  TEST_CASE("objective rejects mismatched kinds") {
    const Dataset counts = cmp_data(10, cmp_truth(), 1);
    const TgModel tg(1);
    const CmpModel cmp;
    CHECK_THROWS_AS(Objective(ObjectiveTag::sm_continuous, tg, counts), Error);
    CHECK_THROWS_AS(Objective(ObjectiveTag::sm_continuous, cmp, counts), Error);
    const Objective ok(ObjectiveTag::gsm_univariate, cmp, counts);
    const double short_theta[] = {0.0, 1.0};
    CHECK_THROWS_AS(ok.value(short_theta), Error);
  }

  TEST_CASE("CMP gradient matches finite differences") {
    RngStream rng(41, 0);
    const CmpModel model;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      CmpParams prm;
      prm.beta.resize(3);
      prm.beta << 0.5 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal();
      prm.nu = 0.1 + 1.5 * rng.uniform();
      const Dataset data = cmp_data(40, prm, 100 + static_cast<std::uint64_t>(trial));
      const Objective obj(ObjectiveTag::gsm_univariate, model, data);
      // evaluate away from the generating value
      Eigen::VectorXd theta = pack(prm).theta;
      for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) += 0.1 * rng.normal();
      theta(3) = std::max(theta(3), 0.05);
      const Gradient g = obj.gradient({theta.data(), 4});
      CHECK_FALSE(g.finite_difference);
      const Eigen::VectorXd fd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& t) { return obj.value({t.data(), 4}, Exec::serial); }, theta);
      worst = std::max(worst, oracle::max_rel_error(g.value, fd));
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("TG gradient matches finite differences") {
    RngStream rng(43, 0);
    const TgModel model(2);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      TruncGaussParams prm = tg_truth();
      const Dataset data = tg_data(40, prm, 200 + static_cast<std::uint64_t>(trial));
      const Objective obj(ObjectiveTag::sm_continuous, model, data);
      Eigen::VectorXd theta = pack(prm).theta;
      for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) *= 1.0 + 0.3 * rng.normal();
      const Gradient g = obj.gradient({theta.data(), 7});
      CHECK_FALSE(g.finite_difference);
      const Eigen::VectorXd fd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& t) { return obj.value({t.data(), 7}, Exec::serial); }, theta);
      worst = std::max(worst, oracle::max_rel_error(g.value, fd));
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("gradient falls back to finite differences at nu = 0") {
    const CmpModel model;
    const Dataset data = cmp_data(30, one_cmp(0.5, 0.0), 5);
    const Objective obj(ObjectiveTag::gsm_univariate, model, data);
    const double theta[] = {std::log(0.5), 0.0};
    const Gradient g = obj.gradient(theta);
    CHECK(g.finite_difference);
    CHECK(g.value.allFinite());
  }

  TEST_CASE("gradient vanishes at a grid-located minimizer") {
    const CmpModel model;
    RowMatrix x = RowMatrix::Ones(300, 1);
    RngStream rng(12, 0);
    const Dataset data = simulate_cmp(x, one_cmp(std::exp(0.3), 0.7), rng);
    const Objective obj(ObjectiveTag::gsm_univariate, model, data);
    auto f = [&](double b) {
      const double t[] = {b, 0.7};
      return obj.value(t, Exec::serial);
    };
    double lo = -1.0, hi = 1.0, best = 0.0;
    for (int level = 0; level < 10; ++level) {
      const double step = (hi - lo) / 100.0;
      double best_v = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= 100; ++k) {
        const double b = lo + step * k;
        const double v = f(b);
        if (v < best_v) {
          best_v = v;
          best = b;
        }
      }
      lo = best - step;
      hi = best + step;
    }
    const double t[] = {best, 0.7};
    CHECK(std::abs(obj.gradient(t).value(0)) < 1e-6);
  }

  TEST_CASE("decomposition into a tractable part plus a constant") {
    const int k = 40;
    const double eta_q = 0.3, nu_q = 0.8;
    const double thetas[5][2] = {{0.3, 0.8}, {-0.5, 0.4}, {1.0, 1.5}, {0.0, 0.1}, {0.7, 2.5}};
    std::vector<double> gap;
    for (const auto& th : thetas)
      gap.push_back(oracle::full_gsm_divergence(eta_q, nu_q, th[0], th[1], k) -
                    oracle::tractable_gsm(eta_q, nu_q, th[0], th[1], k));
    for (double g : gap) CHECK(std::abs(g - gap[0]) < 1e-10);
  }

  TEST_CASE("population divergence is minimized only at the truth") {
    const int k = 40;
    const double nu = 0.2564;
    int arg = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
      const double b = -1.0 + 0.01 * i;
      const double v = oracle::full_gsm_divergence(0.3, nu, b, nu, k);
      if (v < best) {
        best = v;
        arg = i;
      }
    }
    CHECK(arg == 130);
    CHECK(best < 1e-8);
    CHECK(oracle::full_gsm_divergence(0.3, nu, 0.31, nu, k) > 1e-8);
  }
}
