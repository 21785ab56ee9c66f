#include <doctest.h>

#include "lsfm/diagnostics.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace lsfm;
using namespace lsfm::testing;

TEST_CASE("influence weight agrees with the dense formula") {
  for (auto grid : {GridVariant::grid1, GridVariant::grid2, GridVariant::grid3}) {
    const MouthGraph g(7, 1, grid);
    const CarStructure<double> car(g);
    for (double rho : {0.0, 0.3, 0.9, 0.999})
      for (double tau2 : {0.25, 1.0, 4.0})
        for (double delta : {0.0, 0.1, 1.0, 25.0}) {
          const double w = influence_weight(rho, tau2, delta, car);
          const double d = dense_weight(rho, tau2, delta, car);
          CHECK(std::abs(w - d) <= 1e-10 * std::max(1.0, std::abs(d)));
        }
  }
}

TEST_CASE("influence weight is monotone in rho, tau2 and delta") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  const CarStructure<double> car(g);
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {0.0, 0.2, 0.5, 0.8, 0.95, 0.99}) {
    const double w = influence_weight(rho, 1.0, 1.0, car);
    CHECK(w < prev);
    prev = w;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double tau2 : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double w = influence_weight(0.9, tau2, 1.0, car);
    CHECK(w < prev);
    prev = w;
  }
  prev = 0.0;
  for (double delta : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const double w = influence_weight(0.9, 1.0, delta, car);
    CHECK(w > prev);
    prev = w;
  }
  CHECK(influence_weight(0.9, 1.0, 0.0, car) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(influence_weight(0.5, 0.0, 1.0, car), std::domain_error);
  CHECK_THROWS_AS(influence_weight(0.5, 1.0, -1.0, car), std::domain_error);
}

TEST_CASE("gap sites carry the largest site weights on the first grid") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  const CarStructure<double> car(g);
  for (double rho : {0.5, 0.9})
    for (double delta : {0.5, 2.0}) {
      const Vector k = scale_to_sum<double>(site_weights(rho, 1.0, delta, car), 42.0);
      CHECK(k.sum() == doctest::Approx(42.0));
      Index arg = 0;
      k.maxCoeff(&arg);
      CHECK(g.is_gap_site(static_cast<int>(arg)));
      double gap = 0, other = 0;
      int n_gap = 0;
      for (int s = 0; s < 42; ++s) {
        if (g.is_gap_site(s)) {
          gap += k(s);
          ++n_gap;
        } else {
          other += k(s);
        }
      }
      CHECK(gap / n_gap > other / (42 - n_gap));
    }
}

TEST_CASE("two-site path with independent sites") {
  const CarStructure<double> car(2, {{0, 1}});
  CHECK(influence_weight(0.0, 1.0, 1.0, car) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(dense_weight(0.0, 1.0, 1.0, car) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("centered data collapse to zero") {
  Dataset data = complete_gaussian(2, 2, 1, 2, 8);
  const CovarianceParameters params = random_parameters(data, 9);
  for (int j = 0; j < 2; ++j) data.y[j].setConstant(params.a(j));
  const CarStructure<double> car(*data.graph);
  CHECK(collapsed_response(data, params, car, 1).z == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("site weights with unit tau2 reproduce the collapsed sum") {
  const MouthGraph g(2, 1, GridVariant::grid2);
  const CarStructure<double> car(g);
  const double w = influence_weight(0.6, 2.0, 0.7, car);
  const Vector k = site_weights(0.6, 2.0, 0.7, car);
  Matrix a = car.precision(0.6);
  a.diagonal().array() += 0.7;
  const Vector dense = a.inverse() * car.precision(0.6) * Vector::Ones(12) / w;
  CHECK((k - dense).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collapsed posterior equals the dense joint Gaussian") {
  for (int J : {1, 2, 3}) {
    Dataset data = complete_gaussian(4, 2, 2, J, 100 + J);
    const CovarianceParameters params = random_parameters(data, 200 + J);
    const CarStructure<double> car(*data.graph);
    for (double prior_sd : {std::numeric_limits<double>::infinity(), 3.0}) {
      const BetaPosterior a = conjugate_beta_posterior(data, params, car, prior_sd);
      const BetaPosterior b = dense_gls_posterior(data, params, car, prior_sd);
      CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("collapsed posterior for one patient and for duplicated patients") {
  Dataset one = complete_gaussian(1, 2, 1, 1, 3);
  one.x(0, 0) = 1.0;
  CovarianceParameters params = random_parameters(one, 4);
  const CarStructure<double> car(*one.graph);
  const CollapsedResponse c = collapsed_response(one, params, car, 0);
  const BetaPosterior single = conjugate_beta_posterior(one, params, car);
  CHECK(single.mean(0) == doctest::Approx(c.z).epsilon(1e-12));
  CHECK(single.covariance(0, 0) == doctest::Approx(1.0 / c.w).epsilon(1e-12));
  CHECK(c.delta == doctest::Approx(params.tau2(0) / params.sigma2(0, 0)));

  Dataset two = one;
  two.x = Matrix::Ones(2, 1);
  two.patient_ids.push_back("p2");
  two.y[0].conservativeResize(2, Eigen::NoChange);
  two.y[0].row(1) = two.y[0].row(0);
  two.present.conservativeResize(2, Eigen::NoChange);
  two.present.row(1) = two.present.row(0);
  CovarianceParameters p2 = params;
  p2.sigma2 = Matrix::Constant(2, 1, params.sigma2(0, 0));
  p2.tau2 = Vector::Constant(2, params.tau2(0));
  p2.rho = Vector::Constant(2, params.rho(0));
  const BetaPosterior doubled = conjugate_beta_posterior(two, p2, car);
  CHECK(doubled.mean(0) == doctest::Approx(c.z).epsilon(1e-12));
  CHECK(doubled.covariance(0, 0) == doctest::Approx(0.5 / c.w).epsilon(1e-12));
}

TEST_CASE("collapsed posterior is invariant to patient order") {
  const Dataset data = complete_gaussian(6, 2, 2, 2, 17);
  const CovarianceParameters params = random_parameters(data, 18);
  const CarStructure<double> car(*data.graph);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Dataset shuffled = data;
  CovarianceParameters sp = params;
  for (int r = 0; r < 6; ++r) {
    const int i = perm[r];
    shuffled.x.row(r) = data.x.row(i);
    for (int j = 0; j < 2; ++j) shuffled.y[j].row(r) = data.y[j].row(i);
    shuffled.patient_ids[r] = data.patient_ids[i];
    sp.sigma2.row(r) = params.sigma2.row(i);
    sp.tau2(r) = params.tau2(i);
    sp.rho(r) = params.rho(i);
  }
  const BetaPosterior a = conjugate_beta_posterior(data, params, car);
  const BetaPosterior b = conjugate_beta_posterior(shuffled, sp, car);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collapsed response rejects incomplete or binary data") {
  Dataset data = complete_gaussian(3, 2, 1, 1, 1);
  const CovarianceParameters params = random_parameters(data, 2);
  const CarStructure<double> car(*data.graph);
  Dataset gapped = data;
  gapped.present(1, 0) = false;
  for (int s = 0; s < 6; ++s) gapped.y[0](1, s) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(collapsed_response(gapped, params, car, 1), DataError);
  CHECK_NOTHROW(collapsed_response(gapped, params, car, 0));
  CHECK_THROWS_AS(conjugate_beta_posterior(gapped, params, car), DataError);

  Dataset binary = data;
  binary.responses[0].kind = ResponseKind::binary;
  CHECK_THROWS_AS(collapsed_response(binary, params, car, 0), DataError);

  Dataset spatial = data;
  spatial.w = Matrix::Ones(12, 1);
  CHECK_THROWS_AS(conjugate_beta_posterior(spatial, params, car), DataError);
}

TEST_CASE("influence report: exact rows for complete patients, heuristic otherwise") {
  Dataset data = complete_gaussian(4, 2, 1, 1, 9);
  const CovarianceParameters params = random_parameters(data, 10);
  const CarStructure<double> car(*data.graph);
  PosteriorMeans means;
  means.a = Vector::Zero(2);
  means.b = Vector::Ones(2);
  means.a(1) = params.a(0);
  means.sigma2 = params.sigma2;
  means.tau2 = params.tau2;
  means.rho = params.rho;

  InfluenceReport r = influence_report(data, means, car);
  CHECK_FALSE(r.heuristic);
  for (int i = 0; i < 4; ++i) {
    const CollapsedResponse c = collapsed_response(data, params, car, i);
    CHECK(r.patients[i].w == doctest::Approx(c.w).epsilon(1e-12));
    REQUIRE(r.patients[i].z.has_value());
    CHECK(*r.patients[i].z == doctest::Approx(c.z).epsilon(1e-12));
  }
  CHECK(r.site_k.sum() == doctest::Approx(12.0));
  std::vector<double> rhos(params.rho.data(), params.rho.data() + 4);
  std::sort(rhos.begin(), rhos.end());
  CHECK(r.site_rho == doctest::Approx(0.5 * (rhos[1] + rhos[2])));

  r = influence_report(data, means, car, 0.9, 2.0);
  CHECK(r.site_rho == 0.9);
  CHECK(r.site_delta == 2.0);

  data.present(2, 1) = false;
  for (int s = 6; s < 12; ++s) data.y[0](2, s) = std::numeric_limits<double>::quiet_NaN();
  r = influence_report(data, means, car);
  CHECK(r.heuristic);
  CHECK_FALSE(r.patients[2].z.has_value());
  CHECK(r.patients[2].delta == doctest::Approx(params.tau2(2) / params.sigma2(2, 0)));
  CHECK(r.patients[2].w == doctest::Approx(influence_weight(params.rho(2), params.tau2(2), r.patients[2].delta, car)));

  const std::string csv = influence_csv(r);
  CHECK(csv.rfind("patient_id,w,z,delta\n", 0) == 0);
  CHECK(csv.find("\np3,") != std::string::npos);
  CHECK(site_weights_csv(r).rfind("site,k\n0,", 0) == 0);

  means.tau2.setZero();
  CHECK_THROWS_AS(influence_report(data, means, car), ConfigError);
}

TEST_CASE("DIC of a degenerate chain has no effective parameters") {
  const Dataset data = complete_gaussian(3, 2, 1, 1, 4);
  ChainOutput chain;
  chain.spatial = true;
  chain.n_iter = 10;
  chain.burn_in = 4;
  chain.means.mu = Matrix::Constant(3, 12, 0.2);
  chain.means.a = Vector::Constant(2, 0.1);
  chain.means.b = Vector::Ones(2);
  chain.means.sigma2 = Matrix::Constant(3, 1, 0.7);
  const double d = gaussian_deviance(data, chain.means.mu, chain.means.a.tail(1), chain.means.b.tail(1),
                                     chain.means.sigma2);
  chain.deviance.assign(4, 1e6);
  chain.deviance.resize(10, d);
  const DicResult r = dic(chain, data);
  CHECK(r.p_d == doctest::Approx(0.0).scale(1.0));
  CHECK(r.dic == doctest::Approx(d));

  double direct = 0;
  for (int i = 0; i < 3; ++i)
    for (int s = 0; s < 12; ++s) {
      const double e = data.y[0](i, s) - 0.3;
      direct += std::log(2 * std::numbers::pi * 0.7) + e * e / 0.7;
    }
  CHECK(d == doctest::Approx(direct).epsilon(1e-12));

  ChainOutput informative = chain;
  informative.informative_missing = true;
  CHECK_THROWS_AS(dic(informative, data), ConfigError);
  ChainOutput mean_reg = chain;
  mean_reg.mean_regression = true;
  CHECK_THROWS_AS(dic(mean_reg, data), ConfigError);
  const Dataset two = complete_gaussian(3, 2, 1, 2, 4);
  CHECK_THROWS_AS(dic(chain, two), ConfigError);
}

TEST_CASE("DIC prefers the generating grid over a sparser one") {
  int wins = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    DesignSpec d = simulation_design(2);
    d.n_patients = 50;
    RngStream rng(seed, 1);
    const Dataset data = generate_dataset(d, rng).data;
    Dataset other = data;
    other.graph = std::make_shared<const MouthGraph>(7, 1, GridVariant::grid2);
    FitConfig cfg = FitConfig::for_model(2);
    cfg.n_iter = 4000;
    cfg.burn_in = 1000;
    cfg.seed = seed;
    const double true_grid = dic(run_chain(cfg, data), data).dic;
    const double sparse_grid = dic(run_chain(cfg, other), other).dic;
    wins += true_grid < sparse_grid ? 1 : 0;
  }
  CHECK(wins > 5);
}

TEST_CASE("study metrics from replicate estimates") {
  Matrix est(4, 2);
  est << 0.1, 1.1, -0.1, 1.3, 0.2, 1.2, -0.2, 1.2;
  const Vector truth = (Vector(2) << 0.0, 1.0).finished();
  Matrix lower(4, 2), upper(4, 2);
  lower << -0.5, 0.5, -0.6, 0.1, 0.05, -0.1, -0.9, 0.4;
  upper << 0.7, 1.6, 0.4, 2.0, 0.4, 2.2, 0.5, 2.1;
  const StudyMetrics m = study_metrics(est, truth, &lower, &upper);
  CHECK(m.mse == doctest::Approx((0.01 + 0.01 + 0.01 + 0.09 + 0.04 + 0.04 + 0.04 + 0.04) / 8));
  CHECK_FALSE(m.relbias[0].has_value());
  CHECK(*m.relbias[1] == doctest::Approx(0.2));
  CHECK(*m.power[0] == doctest::Approx(0.25));
  CHECK(*m.power[1] == doctest::Approx(0.75));

  const StudyMetrics no_intervals = study_metrics(est, truth);
  CHECK_FALSE(no_intervals.power[1].has_value());
  CHECK_THROWS_AS(study_metrics(Matrix(0, 2), truth), std::invalid_argument);
  CHECK_THROWS_AS(study_metrics(est, Vector::Zero(3)), std::invalid_argument);
}
