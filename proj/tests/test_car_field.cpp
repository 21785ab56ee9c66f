#include <doctest.h>

#include "lsfm/car_field.hpp"
#include "lsfm/mouth_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <numbers>

using namespace lsfm;

namespace {

double dense_logdet(const Matrix& q) {
  Eigen::LLT<Matrix> llt(q);
  REQUIRE(llt.info() == Eigen::Success);
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

TEST_CASE("precision has degrees on the diagonal and -rho on edges") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  const CarStructure<double> car(g);
  const Matrix q = car.precision(0.7);
  for (int s = 0; s < g.n_sites(); ++s) {
    CHECK(q(s, s) == g.degree(s));
    for (int t = 0; t < g.n_sites(); ++t)
      if (t != s) CHECK(q(s, t) == (g.adjacency()(s, t) > 0 ? -0.7 : 0.0));
  }
}

TEST_CASE("conditional mean weights and variances follow from the precision") {
  for (int teeth : {1, 7})
    for (auto grid : {GridVariant::grid1, GridVariant::grid2, GridVariant::grid3}) {
      const MouthGraph g(teeth, 1, grid);
      const CarStructure<double> car(g);
      for (double rho : {0.0, 0.3, 0.95}) {
        const Matrix q = car.precision(rho);
        for (int s = 0; s < g.n_sites(); ++s) {
          CHECK(1.0 / q(s, s) == 1.0 / g.degree(s));
          for (int t : g.neighbors()[s]) CHECK(-q(s, t) / q(s, s) == rho / g.degree(s));
        }
      }
    }
}

TEST_CASE("log determinant from eigenvalues matches dense Cholesky") {
  for (auto grid : {GridVariant::grid1, GridVariant::grid2, GridVariant::grid3}) {
    const CarStructure<double> car(MouthGraph(7, 1, grid));
    for (double rho : {0.0, 0.1, 0.5, 0.9, 0.99, 0.999})
      CHECK(car.log_det(rho) == doctest::Approx(dense_logdet(car.precision(rho))).epsilon(1e-12));
  }
}

TEST_CASE("edge-list products match dense algebra") {
  const CarStructure<double> car(MouthGraph(7, 2, GridVariant::grid1));
  const Vector r = Vector::LinSpaced(car.size(), -1.0, 2.0).array().sin();
  for (double rho : {0.0, 0.6, 0.99}) {
    const Matrix q = car.precision(rho);
    CHECK((car.multiply(r, rho) - q * r).norm() < 1e-12);
    CHECK(car.quadratic_form(r, rho) == doctest::Approx(r.dot(q * r)).epsilon(1e-13));
    // 1'Q1 = (1 - rho) 1'M1
    const Vector one = Vector::Ones(car.size());
    CHECK(one.dot(q * one) == doctest::Approx((1 - rho) * car.total_degree()));
  }
}

TEST_CASE("CAR log density equals the dense Gaussian density") {
  const CarStructure<double> car(MouthGraph(3, 1, GridVariant::grid3));
  const Vector r = Vector::LinSpaced(car.size(), -0.5, 0.8);
  const double rho = 0.8, tau2 = 1.7;
  const Matrix cov = (car.precision(rho) / tau2).inverse();
  Eigen::LLT<Matrix> llt(cov);
  const double logdet_cov = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double dense = -0.5 * car.size() * std::log(2 * std::numbers::pi) - 0.5 * logdet_cov -
                       0.5 * r.dot(cov.inverse() * r);
  CHECK(car_log_density(r, rho, tau2, car) == doctest::Approx(dense).epsilon(1e-10));
}

TEST_CASE("rho outside [0, 1) is rejected") {
  const CarStructure<double> car(MouthGraph(2, 1, GridVariant::grid1));
  CHECK_THROWS_AS(car.precision(1.0), std::domain_error);
  CHECK_THROWS_AS(car.log_det(-0.1), std::domain_error);
  CHECK_NOTHROW(car.log_det(kRhoMax));
}

TEST_CASE("long double instantiation agrees with double") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  const CarStructure<double> d(g);
  const CarStructure<long double> ld(g);
  CHECK(static_cast<double>(ld.log_det(0.9L)) == doctest::Approx(d.log_det(0.9)).epsilon(1e-12));
}

TEST_CASE("canonical Gaussian sampler has mean Q^-1 b and covariance Q^-1") {
  const CarStructure<double> car(MouthGraph(1, 1, GridVariant::grid1));
  PrecisionGaussian<double> pg;
  pg.precision = car.precision(0.6);
  pg.precision.diagonal().array() += 0.5;
  pg.shift = Vector::LinSpaced(6, -1.0, 1.0);
  const Matrix cov = pg.precision.inverse();
  const Vector mean = cov * pg.shift;

  RngStream rng(3, 0);
  const int n = 40000;
  Vector sum = Vector::Zero(6);
  Matrix sq = Matrix::Zero(6, 6);
  for (int k = 0; k < n; ++k) {
    const Vector x = sample_precision_gaussian(pg, rng);
    sum += x;
    sq += x * x.transpose();
  }
  const Vector m = sum / n;
  const Matrix c = sq / n - m * m.transpose();
  for (int s = 0; s < 6; ++s) {
    const double se = std::sqrt(cov(s, s) / n);
    CHECK(std::abs(m(s) - mean(s)) < 4 * se);
    CHECK(c(s, s) == doctest::Approx(cov(s, s)).epsilon(0.05));
  }
}

TEST_CASE("non positive-definite precision raises a numerical error") {
  PrecisionGaussian<double> pg;
  pg.precision = Matrix::Identity(3, 3);
  pg.precision(1, 1) = -1.0;
  pg.shift = Vector::Zero(3);
  RngStream rng(1, 0);
  CHECK_THROWS_AS(sample_precision_gaussian(pg, rng), NumericalError);
}
