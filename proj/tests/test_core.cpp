#include "doctest.h"
#include "scorematch/core.hpp"
#include "scorematch/parallel.hpp"
#include "scorematch/sampling.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

using namespace scorematch;

namespace {

Eigen::MatrixXd random_symmetric(Eigen::Index d, RngStream& rng) {
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("dataset validation") {
    RowMatrix x = RowMatrix::Ones(3, 2);
    RowMatrix y = RowMatrix::Zero(3, 1);
    CHECK_NOTHROW(Dataset::continuous(x, y));
    CHECK_THROWS_AS(Dataset::continuous(x, RowMatrix::Zero(2, 1)), Error);
    CHECK_THROWS_AS(Dataset::continuous(RowMatrix(0, 2), RowMatrix(0, 1)), Error);

    RowMatrix bad = x;
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Dataset::continuous(bad, y), Error);
    RowMatrix bad_y = y;
    bad_y(2, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Dataset::continuous(x, bad_y), Error);

    RowMatrixI counts(3, 1);
    counts << 0, 4, 2;
    const Dataset d = Dataset::counts(x, counts);
    CHECK(d.is_count());
    CHECK(d.rows() == 3);
    CHECK(d.covariates() == 2);
    CHECK(d.y_count_row(1)[0] == 4);
    CHECK_THROWS_AS(d.y_cont(), Error);
    counts(0, 0) = -1;
    CHECK_THROWS_AS(Dataset::counts(x, counts), Error);
  }

  TEST_CASE("dataset subset keeps rows in the given order") {
    RowMatrix x(3, 1);
    x << 1, 2, 3;
    RowMatrix y(3, 1);
    y << 10, 20, 30;
    const Dataset d = Dataset::continuous(x, y);
    const std::size_t pick[] = {2, 0, 2};
    const Dataset s = d.subset(pick);
    CHECK(s.rows() == 3);
    CHECK(s.x_row(0)[0] == 3.0);
    CHECK(s.y_cont_row(1)[0] == 10.0);
    const std::size_t out_of_range[] = {3};
    CHECK_THROWS_AS(d.subset(out_of_range), Error);
  }

  TEST_CASE("vech order is lower triangle by columns") {
    CHECK(vech_index(0, 0, 3) == 0);
    CHECK(vech_index(1, 0, 3) == 1);
    CHECK(vech_index(2, 0, 3) == 2);
    CHECK(vech_index(1, 1, 3) == 3);
    CHECK(vech_index(2, 1, 3) == 4);
    CHECK(vech_index(2, 2, 3) == 5);

    TruncGaussParams p;
    p.B = Eigen::MatrixXd::Zero(2, 1);
    p.Lambda.resize(2, 2);
    p.Lambda << 20, 10, 10, 30;
    const ParamVector v = pack(p);
    CHECK(v.theta(2) == 20.0);
    CHECK(v.theta(3) == 10.0);
    CHECK(v.theta(4) == 30.0);
  }

  TEST_CASE("pack and unpack round trip for every small shape") {
    RngStream rng(7, 0);
    for (std::size_t d : {1u, 2u, 3u})
      for (std::size_t p : {1u, 2u, 6u}) {
        CAPTURE(d);
        CAPTURE(p);
        TruncGaussParams tg;
        tg.B.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(p));
        for (Eigen::Index i = 0; i < tg.B.size(); ++i) tg.B.data()[i] = rng.normal();
        tg.Lambda = random_symmetric(static_cast<Eigen::Index>(d), rng);
        const ParamVector v = pack(tg);
        CHECK(v.size() == d * p + d * (d + 1) / 2);
        const TruncGaussParams back = unpack_tg(v);
        CHECK(back.B == tg.B);
        CHECK(back.Lambda == tg.Lambda);

        Eigen::VectorXd flat(static_cast<Eigen::Index>(tg_parameter_count(d, p)));
        for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = rng.normal();
        const ParamVector fv = make_param_vector(Layout::truncated_gaussian, d, p, flat);
        const TruncGaussParams u = unpack_tg(fv);
        CHECK(u.Lambda == u.Lambda.transpose());
        CHECK(pack(u).theta == flat);

        CmpParams cmp;
        cmp.beta.resize(static_cast<Eigen::Index>(p));
        for (Eigen::Index i = 0; i < cmp.beta.size(); ++i) cmp.beta(i) = rng.normal();
        cmp.nu = rng.uniform() * 2.0;
        const CmpParams cb = unpack_cmp(pack(cmp));
        CHECK(cb.beta == cmp.beta);
        CHECK(cb.nu == cmp.nu);
        Eigen::VectorXd cflat = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(p + 1), 0.1, 0.9);
        CHECK(pack(unpack_cmp(make_param_vector(Layout::cmp, 1, p, cflat))).theta == cflat);
      }
  }

  TEST_CASE("pack rejects an asymmetric precision and wrong lengths") {
    TruncGaussParams p;
    p.B = Eigen::MatrixXd::Zero(2, 2);
    p.Lambda.resize(2, 2);
    p.Lambda << 1, 0.5, 0.5 + 1e-9, 1;
    CHECK_THROWS_AS(pack(p), Error);
    p.Lambda(1, 0) = 0.5 + 1e-13;
    CHECK_NOTHROW(pack(p));
    CHECK_THROWS_AS(make_param_vector(Layout::cmp, 1, 3, Eigen::VectorXd::Zero(3)), Error);
    ParamVector wrong = pack(p);
    wrong.layout = Layout::cmp;
    CHECK_THROWS_AS(unpack_cmp(wrong), Error);
  }

  TEST_CASE("parameter names follow the packing order") {
    const auto tg = parameter_names(Layout::truncated_gaussian, 2, 2);
    const std::vector<std::string> expect_tg = {"B11", "B21", "B12", "B22", "Lambda11", "Lambda21", "Lambda22"};
    CHECK(tg == expect_tg);
    const auto cmp = parameter_names(Layout::cmp, 1, 2);
    const std::vector<std::string> expect_cmp = {"beta1", "beta2", "nu"};
    CHECK(cmp == expect_cmp);
  }

  TEST_CASE("cholesky and definiteness") {
    Eigen::MatrixXd m(2, 2);
    m << 20, 10, 10, 30;
    const Eigen::MatrixXd l = cholesky_lower(m);
    CHECK((l * l.transpose() - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(is_positive_definite(m));
    m(0, 1) = m(1, 0) = 40;
    CHECK_FALSE(is_positive_definite(m));
    CHECK_THROWS_AS(cholesky_lower(m), Error);
  }
}

TEST_SUITE("parallel") {
  TEST_CASE("pairwise sum") {
    CHECK(pairwise_sum(std::span<const double>()) == 0.0);
    std::vector<double> v(1000);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(pairwise_sum(v) == 500500.0);
    std::vector<double> tiny(1 << 20, 0.1);
    CHECK(std::abs(pairwise_sum(tiny) - 0.1 * (1 << 20)) < 1e-8);
  }

  TEST_CASE("serial and parallel loops write identical results") {
    std::vector<double> a(5000), b(5000);
    auto work = [](std::size_t i) { return std::sin(static_cast<double>(i)) * std::exp(-1e-4 * static_cast<double>(i)); };
    for_each_index(a.size(), Exec::serial, [&](std::size_t i) { a[i] = work(i); });
    for_each_index(b.size(), Exec::parallel, [&](std::size_t i) { b[i] = work(i); });
    CHECK(a == b);
    CHECK(pairwise_sum(a) == pairwise_sum(b));
    for_each_index(b.size(), Exec::parallel, [&](std::size_t i) { b[i] = work(i); }, true);
    CHECK(a == b);
  }

  TEST_CASE("the lowest failing index is rethrown") {
    for (Exec e : {Exec::serial, Exec::parallel}) {
      try {
        for_each_index(100, e, [](std::size_t i) {
          if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected a throw");
      } catch (const std::runtime_error& err) {
        CHECK(std::string(err.what()) == "17");
      }
    }
  }

  TEST_CASE("thread cap") {
    const int before = max_threads();
    set_max_threads(1);
    CHECK(max_threads() == 1);
    set_max_threads(before);
    CHECK(max_threads() == before);
  }
}
