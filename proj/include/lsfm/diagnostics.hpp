#pragma once

#include "lsfm/car_field.hpp"
#include "lsfm/model.hpp"
#include "lsfm/sampler.hpp"
#include "lsfm/types.hpp"

#include <Eigen/Cholesky>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lsfm {

/// Patient weight in the collapsed regression for beta:
/// w = tau^{-2} 1'[Q - Q (delta I + Q)^{-1} Q] 1, evaluated with one solve.
template <typename Scalar>
Scalar influence_weight(Scalar rho, Scalar tau2, Scalar delta, const CarStructure<Scalar>& car) {
  if (!(tau2 > Scalar(0))) throw std::domain_error("influence_weight: tau2 must be positive");
  if (!(delta >= Scalar(0))) throw std::domain_error("influence_weight: delta must be nonnegative");
  MatrixX<Scalar> a = car.precision(rho);
  const VectorX<Scalar> q1 = car.multiply(VectorX<Scalar>::Ones(car.size()), rho);
  a.diagonal().array() += delta;
  const VectorX<Scalar> x = a.llt().solve(q1);
  return (q1.sum() - q1.dot(x)) / tau2;
}

/// Site weights k = 1'Q(delta I + Q)^{-1} / w. Rows of the returned report
/// may be rescaled to sum to S for display.
template <typename Scalar>
VectorX<Scalar> site_weights(Scalar rho, Scalar tau2, Scalar delta, const CarStructure<Scalar>& car) {
  MatrixX<Scalar> a = car.precision(rho);
  const VectorX<Scalar> q1 = car.multiply(VectorX<Scalar>::Ones(car.size()), rho);
  a.diagonal().array() += delta;
  const VectorX<Scalar> x = a.llt().solve(q1);
  const Scalar w = (q1.sum() - q1.dot(x)) / tau2;
  return x / w;
}

template <typename Scalar>
VectorX<Scalar> scale_to_sum(const VectorX<Scalar>& k, Scalar total) {
  return k * (total / k.sum());
}

/// Covariance parameters the collapsed regression conditions on. Response
/// slopes and intercepts are indexed by response (no missingness slot).
struct CovarianceParameters {
  Vector a, b;    // J
  Matrix sigma2;  // N x J
  Vector tau2;    // N
  Vector rho;     // N

  double delta(int i) const;
};

struct CollapsedResponse {
  double w = 0;
  double z = 0;
  double delta = 0;
  Vector k;  // per site, unscaled
};

/// w_i, z_i and k_i for one patient with complete Gaussian data.
CollapsedResponse collapsed_response(const Dataset& data, const CovarianceParameters& params,
                                     const CarStructure<double>& car, int i);

struct BetaPosterior {
  Vector mean;
  Matrix covariance;
};

/// Gaussian posterior of beta with mu integrated out: a weighted regression
/// of z_i on x_i with weights w_i. `prior_sd` adds an N(0, prior_sd^2 I)
/// prior; infinity means flat.
BetaPosterior conjugate_beta_posterior(const Dataset& data, const CovarianceParameters& params,
                                       const CarStructure<double>& car,
                                       double prior_sd = std::numeric_limits<double>::infinity());

struct InfluenceRow {
  std::string patient_id;
  double w = 0;
  std::optional<double> z;  // only for patients with complete Gaussian data
  double delta = 0;
};

struct InfluenceReport {
  std::vector<InfluenceRow> patients;
  Vector site_k;  // scaled to sum to S
  double site_rho = 0, site_delta = 0;
  bool heuristic = false;  // approximated from posterior means
};

/// Influence diagnostics from posterior means: w_i at (rho_i, tau_i^2) with
/// delta_i = tau_i^2 / sigma_{i,ref}^2. Site weights are evaluated at
/// `site_rho`/`site_delta`, defaulting to the patient medians.
InfluenceReport influence_report(const Dataset& data, const PosteriorMeans& means,
                                 const CarStructure<double>& car,
                                 std::optional<double> site_rho = std::nullopt,
                                 std::optional<double> site_delta = std::nullopt);

std::string influence_csv(const InfluenceReport& report);
std::string site_weights_csv(const InfluenceReport& report);

struct DicResult {
  double dic = 0;
  double p_d = 0;
  double mean_deviance = 0;
  double deviance_at_mean = 0;
};

/// -2 log-likelihood of the Gaussian responses given (mu, a, b, sigma2).
double gaussian_deviance(const Dataset& data, const Matrix& mu, const Vector& a, const Vector& b,
                         const Matrix& sigma2);

/// DIC for a single continuous response fitted without informative
/// missingness, with the deviance conditional on mu.
DicResult dic(const ChainOutput& chain, const Dataset& data);

struct StudyMetrics {
  std::vector<std::optional<double>> power;    // per coefficient; empty without intervals
  double mse = 0;                               // (1/(pM)) sum (bhat - b)^2
  std::vector<std::optional<double>> relbias;  // absent for null coefficients
};

/// Replicate-level estimates (M x p posterior means) and optional 95%
/// interval endpoints for the coefficients.
StudyMetrics study_metrics(const Matrix& estimates, const Vector& truth,
                           const Matrix* lower = nullptr, const Matrix* upper = nullptr);

}  // namespace lsfm
