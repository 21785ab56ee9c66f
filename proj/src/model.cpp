#include "lsfm/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsfm {

std::string to_string(MissingGranularity g) {
  return g == MissingGranularity::tooth ? "tooth" : "site";
}

MissingGranularity parse_granularity(const std::string& text) {
  if (text == "tooth") return MissingGranularity::tooth;
  if (text == "site") return MissingGranularity::site;
  throw ConfigError("granularity", "expected 'tooth' or 'site', got '" + text + "'");
}

UnitMap::UnitMap(const MouthGraph& graph, MissingGranularity granularity)
    : granularity_(granularity) {
  const int n = graph.n_sites();
  unit_of_site_.resize(n);
  if (granularity == MissingGranularity::tooth) {
    z_ = tooth_average_map(graph);
    sites_.resize(graph.n_teeth());
    for (int s = 0; s < n; ++s) {
      unit_of_site_[s] = graph.tooth_of_site(s);
      sites_[unit_of_site_[s]].push_back(s);
    }
  } else {
    z_ = Matrix::Identity(n, n);
    sites_.resize(n);
    for (int s = 0; s < n; ++s) {
      unit_of_site_[s] = s;
      sites_[s] = {s};
    }
  }
  ztz_ = z_.transpose() * z_;
}

double UnitMap::unit_mean(int unit, const Eigen::Ref<const Vector>& mu) const {
  const auto& idx = sites_[unit];
  double acc = 0.0;
  for (int s : idx) acc += mu(s);
  return acc / static_cast<double>(idx.size());
}

int Dataset::observed_site_count(const UnitMap& units, int i) const {
  int count = 0;
  for (int u = 0; u < units.n_units(); ++u)
    if (present(i, u)) count += static_cast<int>(units.sites(u).size());
  return count;
}

void Dataset::validate() const {
  if (!graph) throw DataError("dataset has no mouth graph");
  const int n = n_patients();
  const int s_count = n_sites();
  const UnitMap units = unit_map();
  if (responses.empty()) throw DataError("dataset has no responses");
  if (reference < 0 || reference >= n_responses())
    throw DataError("reference response index out of range");
  if (static_cast<int>(y.size()) != n_responses())
    throw DataError("response matrices do not match the response list");
  if (static_cast<int>(patient_ids.size()) != n) throw DataError("patient id count mismatch");
  if (w.rows() != 0 && w.rows() != s_count)
    throw DataError("spatial covariates must have one row per site");
  if (present.rows() != n || present.cols() != units.n_units())
    throw DataError("missingness indicator has the wrong shape");
  if (!x.allFinite()) throw DataError("patient covariates contain non-finite values");
  if (!w.allFinite()) throw DataError("spatial covariates contain non-finite values");

  const char* unit_name = granularity == MissingGranularity::tooth ? "tooth" : "site";
  for (int j = 0; j < n_responses(); ++j) {
    const Matrix& yj = y[j];
    if (yj.rows() != n || yj.cols() != s_count)
      throw DataError("response '" + responses[j].name + "' has the wrong shape");
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < s_count; ++s) {
        const int u = units.unit_of_site(s);
        const double v = yj(i, s);
        std::ostringstream where;
        where << "patient " << patient_ids[i] << ", " << unit_name << ' ' << u << ", site " << s
              << ", response '" << responses[j].name << "'";
        if (present(i, u)) {
          if (!std::isfinite(v))
            throw DataError(std::string(unit_name) + " marked present but " + where.str() +
                            " has no value");
          if (responses[j].kind == ResponseKind::binary && v != 0.0 && v != 1.0)
            throw DataError("binary value must be 0 or 1 at " + where.str());
        } else if (!std::isnan(v)) {
          throw DataError(std::string(unit_name) + " marked missing but " + where.str() +
                          " has a value");
        }
      }
    }
  }
}

void standardize_columns(Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    m.col(c).array() -= mean;
    const double sd = std::sqrt(m.col(c).squaredNorm() / static_cast<double>(m.rows()));
    if (sd > 0.0) m.col(c) /= sd;
  }
}

ResponseScaling standardize_responses(Dataset& data) {
  ResponseScaling sc;
  for (int j = 0; j < data.n_responses(); ++j) {
    double center = 0.0, scale = 1.0;
    if (data.responses[j].kind == ResponseKind::continuous) {
      double sum = 0.0, sq = 0.0;
      long n = 0;
      for (Index k = 0; k < data.y[j].size(); ++k) {
        const double v = data.y[j](k);
        if (std::isnan(v)) continue;
        sum += v;
        sq += v * v;
        ++n;
      }
      if (n > 1) {
        center = sum / n;
        const double var = sq / n - center * center;
        if (var > 0.0) scale = 1.0 / std::sqrt(var);
      }
      data.y[j] = ((data.y[j].array() - center) * scale).matrix();
    }
    sc.center.push_back(center);
    sc.scale.push_back(scale);
  }
  return sc;
}

void PriorConfig::validate() const {
  if (!(w > 0.0)) throw ConfigError("prior.w", "must be positive");
  if (!(u > 0.0)) throw ConfigError("prior.u", "must be positive");
  if (!(v > 0.0)) throw ConfigError("prior.v", "must be positive");
}

ModelState ModelState::initial(const Dataset& data) {
  const int n = data.n_patients();
  const int s_count = data.n_sites();
  const int J = data.n_responses();
  const UnitMap units = data.unit_map();

  ModelState st;
  st.mu = Matrix::Zero(n, s_count);
  st.a = Vector::Zero(J + 1);
  st.b = Vector::Ones(J + 1);
  st.b(0) = 0.0;
  st.alpha = Vector::Zero(data.n_spatial_covariates());
  st.beta = Vector::Zero(data.n_covariates());
  st.sigma2 = Matrix::Ones(n, J);
  st.tau2 = Vector::Ones(n);
  st.rho = Vector::Constant(n, 0.5);
  st.hyper.c = Vector::Ones(J);
  st.hyper.d = Vector::Ones(J);
  st.latent.resize(J);

  for (int j = 0; j < J; ++j) {
    double sum = 0.0, sq = 0.0;
    long count = 0;
    for (Index k = 0; k < data.y[j].size(); ++k) {
      const double v = data.y[j](k);
      if (std::isnan(v)) continue;
      sum += v;
      sq += v * v;
      ++count;
    }
    const double mean = count > 0 ? sum / count : 0.0;
    if (data.responses[j].kind == ResponseKind::continuous) {
      st.a(j + 1) = mean;
      const double var = count > 1 ? sq / count - mean * mean : 1.0;
      st.sigma2.col(j).setConstant(std::max(var, 1e-3));
    } else {
      st.a(j + 1) = normal_quantile(std::clamp(mean, 0.02, 0.98));
      st.latent[j] = Matrix::Zero(n, s_count);
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < s_count; ++s)
          if (data.site_present(units, i, s)) st.latent[j](i, s) = data.y[j](i, s) > 0.5 ? 0.5 : -0.5;
    }
  }

  double missing = 0.0;
  st.latent_missing = Matrix::Zero(n, units.n_units());
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < units.n_units(); ++u) {
      const bool miss = !data.present(i, u);
      missing += miss ? 1.0 : 0.0;
      st.latent_missing(i, u) = miss ? 0.5 : -0.5;
    }
  const double frac = n > 0 ? missing / (static_cast<double>(n) * units.n_units()) : 0.0;
  st.a(0) = normal_quantile(std::clamp(frac, 0.01, 0.99));
  return st;
}

double response_correlation(double b_j, double b_l, double var_mu, double sigma2_j,
                            double sigma2_l) {
  if (!(var_mu >= 0.0) || !(sigma2_j > 0.0) || !(sigma2_l > 0.0))
    throw std::domain_error("response_correlation: variances must be positive");
  return b_j * b_l * var_mu / std::sqrt(b_j * b_j * var_mu + sigma2_j) /
         std::sqrt(b_l * b_l * var_mu + sigma2_l);
}

MarginalMoments marginal_moments(const ModelState& state, const Dataset& data,
                                 const CarStructure<double>& car, int i, int s) {
  const int J = data.n_responses();
  Eigen::LLT<Matrix> llt(car.precision(state.rho(i)));
  Vector e = Vector::Zero(car.size());
  e(s) = 1.0;
  const double q_ss = llt.solve(e)(s);

  double field_mean = data.x.row(i).dot(state.beta);
  if (data.n_spatial_covariates() > 0) field_mean += data.w.row(s).dot(state.alpha);

  MarginalMoments m;
  m.mean.resize(J);
  m.covariance.resize(J, J);
  for (int j = 0; j < J; ++j) {
    m.mean(j) = state.a(j + 1) + state.b(j + 1) * field_mean;
    for (int l = 0; l < J; ++l) {
      m.covariance(j, l) = state.b(j + 1) * state.b(l + 1) * state.tau2(i) * q_ss;
      if (j == l) m.covariance(j, l) += state.sigma2(i, j);
    }
  }
  return m;
}

double DesignSpec::patient_variance(int i) const {
  if (variance == VarianceRule::constant) return 1.0;
  // 1.5 * I(i odd) + 0.5 with 1-based patient numbering
  return (i + 1) % 2 == 1 ? 2.0 : 0.5;
}

DesignSpec simulation_design(int id) {
  DesignSpec d;
  d.id = id;
  d.beta = (Vector(6) << 0, 0, 0, 1, 2, 3).finished() / 20.0;
  d.responses = {{{"y", ResponseKind::continuous}, 1.0, 1.0}};
  switch (id) {
    case 1: d.rho = 0.0; d.b0 = 0.0; d.variance = VarianceRule::constant; break;
    case 2: d.rho = 0.9; d.b0 = 0.0; d.variance = VarianceRule::constant; break;
    case 3: d.rho = 0.9; d.b0 = 0.0; d.variance = VarianceRule::alternating; break;
    case 4: d.rho = 0.9; d.b0 = 1.0; d.variance = VarianceRule::constant; break;
    case 5: d.rho = 0.9; d.b0 = 1.0; d.variance = VarianceRule::alternating; break;
    case 6: d.rho = 0.5; d.b0 = 1.0; d.variance = VarianceRule::alternating; break;
    default: throw ConfigError("design", "must be between 1 and 6");
  }
  return d;
}

GeneratedData generate_dataset(const DesignSpec& design, RngStream& rng) {
  if (design.n_patients < 1) throw ConfigError("design.n_patients", "must be positive");
  if (design.responses.empty()) throw ConfigError("design", "needs at least one response");
  auto graph = std::make_shared<const MouthGraph>(design.teeth_per_quadrant, design.quadrants,
                                                  design.grid);
  const CarStructure<double> car(*graph);
  const UnitMap units(*graph, design.granularity);
  const int n = design.n_patients;
  const int s_count = graph->n_sites();
  const int p = static_cast<int>(design.beta.size());
  const int J = static_cast<int>(design.responses.size());

  GeneratedData out;
  Dataset& data = out.data;
  data.graph = graph;
  data.granularity = design.granularity;
  for (const auto& r : design.responses) data.responses.push_back(r.spec);
  data.reference = 0;
  data.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) data.x(i, k) = rng.normal();
  for (int k = 0; k < p; ++k) data.covariate_names.push_back("x" + std::to_string(k + 1));
  data.w.resize(s_count, 0);
  data.y.assign(J, Matrix::Constant(n, s_count, std::numeric_limits<double>::quiet_NaN()));
  data.present.resize(n, units.n_units());
  out.mu.resize(n, s_count);
  out.tau2.resize(n);

  const Matrix q = car.precision(design.rho);
  for (int i = 0; i < n; ++i) {
    data.patient_ids.push_back(std::to_string(i + 1));
    const double var = design.patient_variance(i);
    out.tau2(i) = var;
    const Vector mean = Vector::Constant(s_count, data.x.row(i).dot(design.beta));
    PrecisionGaussian<double> prior{q / var, car.multiply(mean, design.rho) / var};
    const Vector mu = sample_precision_gaussian(prior, rng);
    out.mu.row(i) = mu.transpose();

    for (int u = 0; u < units.n_units(); ++u) {
      const double latent = design.a0 + design.b0 * units.unit_mean(u, mu) + rng.normal();
      data.present(i, u) = !(latent > 0.0);
    }
    for (int j = 0; j < J; ++j) {
      const auto& r = design.responses[j];
      const double sd = r.spec.kind == ResponseKind::continuous ? std::sqrt(var) : 1.0;
      for (int s = 0; s < s_count; ++s) {
        const double v = r.a + r.b * mu(s) + sd * rng.normal();
        if (!data.present(i, units.unit_of_site(s))) continue;
        data.y[j](i, s) = r.spec.kind == ResponseKind::continuous ? v : (v > 0.0 ? 1.0 : 0.0);
      }
    }
  }
  return out;
}

}  // namespace lsfm
