#include "lsfm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace lsfm {

double CovarianceParameters::delta(int i) const {
  double acc = 0.0;
  for (Index j = 0; j < b.size(); ++j) acc += b(j) * b(j) / sigma2(i, j);
  return tau2(i) * acc;
}

namespace {

void require_collapsible(const Dataset& data, const UnitMap& units, int i) {
  for (const auto& r : data.responses)
    if (r.kind != ResponseKind::continuous)
      throw DataError("collapsed response assumes all responses are Gaussian; '" + r.name +
                      "' is binary");
  for (int u = 0; u < units.n_units(); ++u)
    if (!data.present(i, u))
      throw DataError("collapsed response assumes no missing teeth; patient " +
                      data.patient_ids[i] + " is missing unit " + std::to_string(u));
}

}  // namespace

CollapsedResponse collapsed_response(const Dataset& data, const CovarianceParameters& params,
                                     const CarStructure<double>& car, int i) {
  const UnitMap units = data.unit_map();
  require_collapsible(data, units, i);
  CollapsedResponse out;
  out.delta = params.delta(i);
  out.w = influence_weight(params.rho(i), params.tau2(i), out.delta, car);
  out.k = site_weights(params.rho(i), params.tau2(i), out.delta, car);
  for (int j = 0; j < data.n_responses(); ++j) {
    const Vector centered = data.y[j].row(i).transpose().array() - params.a(j);
    out.z += params.b(j) / params.sigma2(i, j) * out.k.dot(centered);
  }
  return out;
}

BetaPosterior conjugate_beta_posterior(const Dataset& data, const CovarianceParameters& params,
                                       const CarStructure<double>& car, double prior_sd) {
  if (data.n_spatial_covariates() > 0)
    throw DataError("conjugate beta posterior assumes no spatial covariates");
  const int p = data.n_covariates();
  Matrix precision = Matrix::Zero(p, p);
  Vector shift = Vector::Zero(p);
  if (std::isfinite(prior_sd)) precision.diagonal().setConstant(1.0 / (prior_sd * prior_sd));
  for (int i = 0; i < data.n_patients(); ++i) {
    const CollapsedResponse c = collapsed_response(data, params, car, i);
    const auto xi = data.x.row(i).transpose();
    precision.noalias() += c.w * xi * xi.transpose();
    shift.noalias() += c.w * c.z * xi;
  }
  Eigen::FullPivLU<Matrix> lu(precision);
  if (lu.rank() < p) throw std::runtime_error("conjugate beta posterior: sum of w x x' is singular");
  BetaPosterior post;
  post.covariance = lu.inverse();
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  post.mean = post.covariance * shift;
  return post;
}

InfluenceReport influence_report(const Dataset& data, const PosteriorMeans& means,
                                 const CarStructure<double>& car, std::optional<double> site_rho,
                                 std::optional<double> site_delta) {
  const int n = data.n_patients();
  const int J = data.n_responses();
  const int ref = data.reference;
  if (means.tau2.size() != n || !(means.tau2.array() > 0.0).all())
    throw ConfigError("diagnose", "influence weights need a spatial fit with CAR variances");
  const UnitMap units = data.unit_map();
  bool all_gaussian = true;
  for (const auto& r : data.responses) all_gaussian = all_gaussian && r.kind == ResponseKind::continuous;

  CovarianceParameters params;
  params.a = means.a.tail(J);
  params.b = means.b.tail(J);
  params.sigma2 = means.sigma2;
  params.tau2 = means.tau2;
  params.rho = means.rho;

  InfluenceReport report;
  std::vector<double> rhos, deltas;
  for (int i = 0; i < n; ++i) {
    InfluenceRow row;
    row.patient_id = data.patient_ids[i];
    bool complete = all_gaussian;
    for (int u = 0; u < units.n_units() && complete; ++u) complete = data.present(i, u);
    if (complete) {
      const CollapsedResponse c = collapsed_response(data, params, car, i);
      row.w = c.w;
      row.z = c.z;
      row.delta = c.delta;
    } else {
      // Reference-response approximation: delta = tau^2 / sigma_ref^2 (b_ref = 1).
      row.delta = means.tau2(i) / means.sigma2(i, ref);
      row.w = influence_weight(means.rho(i), means.tau2(i), row.delta, car);
      report.heuristic = true;
    }
    rhos.push_back(means.rho(i));
    deltas.push_back(row.delta);
    report.patients.push_back(std::move(row));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  report.site_rho = site_rho.value_or(median(rhos));
  report.site_delta = site_delta.value_or(median(deltas));
  report.site_k = scale_to_sum<double>(site_weights(report.site_rho, 1.0, report.site_delta, car),
                                       static_cast<double>(car.size()));
  return report;
}

std::string influence_csv(const InfluenceReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "patient_id,w,z,delta\n";
  for (const auto& r : report.patients) {
    os << r.patient_id << ',' << r.w << ',';
    if (r.z) os << *r.z;
    os << ',' << r.delta << '\n';
  }
  return os.str();
}

std::string site_weights_csv(const InfluenceReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "site,k\n";
  for (Index s = 0; s < report.site_k.size(); ++s) os << s << ',' << report.site_k(s) << '\n';
  return os.str();
}

double gaussian_deviance(const Dataset& data, const Matrix& mu, const Vector& a, const Vector& b,
                         const Matrix& sigma2) {
  const UnitMap units = data.unit_map();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double loglik = 0.0;
  for (int j = 0; j < data.n_responses(); ++j) {
    for (int i = 0; i < data.n_patients(); ++i) {
      const double s2 = sigma2(i, j);
      for (int s = 0; s < data.n_sites(); ++s) {
        if (!data.site_present(units, i, s)) continue;
        const double r = data.y[j](i, s) - a(j) - b(j) * mu(i, s);
        loglik += -0.5 * (log_2pi + std::log(s2) + r * r / s2);
      }
    }
  }
  return -2.0 * loglik;
}

DicResult dic(const ChainOutput& chain, const Dataset& data) {
  if (chain.mean_regression || chain.informative_missing)
    throw ConfigError("dic", "DIC is only defined for spatial fits without informative missingness");
  if (data.n_responses() != 1 || data.responses[0].kind != ResponseKind::continuous)
    throw ConfigError("dic", "DIC is only defined for a single continuous response");
  const int J = data.n_responses();
  DicResult r;
  r.mean_deviance = chain.mean_deviance();
  r.deviance_at_mean = gaussian_deviance(data, chain.means.mu, chain.means.a.tail(J),
                                         chain.means.b.tail(J), chain.means.sigma2);
  r.p_d = r.mean_deviance - r.deviance_at_mean;
  r.dic = r.mean_deviance + r.p_d;
  return r;
}

StudyMetrics study_metrics(const Matrix& estimates, const Vector& truth, const Matrix* lower,
                           const Matrix* upper) {
  const Index m = estimates.rows();
  const Index p = estimates.cols();
  if (m < 1) throw std::invalid_argument("study_metrics: need at least one replicate");
  if (truth.size() != p) throw std::invalid_argument("study_metrics: dimension mismatch");
  StudyMetrics out;
  const Matrix err = estimates.rowwise() - truth.transpose();
  out.mse = err.squaredNorm() / static_cast<double>(p * m);
  for (Index j = 0; j < p; ++j) {
    if (truth(j) == 0.0) {
      out.relbias.emplace_back();
    } else {
      out.relbias.emplace_back(err.col(j).mean() / truth(j));
    }
    if (lower && upper) {
      long excl = 0;
      for (Index r = 0; r < m; ++r) excl += ((*lower)(r, j) > 0.0 || (*upper)(r, j) < 0.0) ? 1 : 0;
      out.power.emplace_back(static_cast<double>(excl) / static_cast<double>(m));
    } else {
      out.power.emplace_back();
    }
  }
  return out;
}

}  // namespace lsfm
