#include "lsfm/sampler.hpp"

#include <cmath>
#include <numbers>

namespace lsfm {

ChainOutput fit_mean_regression(const Dataset& data, const FitConfig& config,
                                std::vector<std::string>* warnings) {
  config.validate();
  data.validate();
  const int ref = data.reference;
  if (data.responses[ref].kind != ResponseKind::continuous)
    throw ConfigError("model.variant", "mean regression needs a continuous reference response");

  const UnitMap units = data.unit_map();
  const int p = data.n_covariates();
  std::vector<int> kept;
  std::vector<double> means;
  for (int i = 0; i < data.n_patients(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (int s = 0; s < data.n_sites(); ++s) {
      if (!data.site_present(units, i, s)) continue;
      sum += data.y[ref](i, s);
      ++count;
    }
    if (count == 0) {
      if (warnings) warnings->push_back("patient " + data.patient_ids[i] + " has no observed sites; excluded");
      continue;
    }
    kept.push_back(i);
    means.push_back(sum / count);
  }
  const int n = static_cast<int>(kept.size());
  if (n == 0) throw DataError("no patient has observed sites");

  Matrix design(n, p + 1);
  Vector ybar(n);
  for (int r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    design.row(r).tail(p) = data.x.row(kept[r]);
    ybar(r) = means[r];
  }
  const Matrix xtx = design.transpose() * design;
  const Vector xty = design.transpose() * ybar;
  const double prior_prec = 1.0 / (config.prior.w * config.prior.w);

  RngStream rng(config.seed, kGlobalStream);
  double sigma2 = std::max(1e-6, (ybar.array() - ybar.mean()).square().sum() / std::max(1, n - 1));
  Vector coef = Vector::Zero(p + 1);

  ChainOutput out;
  out.mean_regression = true;
  out.n_iter = config.n_iter;
  out.burn_in = config.burn_in;
  out.thin = config.thin;
  const std::string resp = data.responses[ref].name;
  out.names.push_back("a[" + resp + "]");
  for (const auto& name : data.covariate_names) out.names.push_back("beta[" + name + "]");
  out.names.push_back("sigma2[" + resp + "]");
  const long retained = (config.n_iter - config.burn_in) / config.thin;
  out.draws.resize(retained, p + 2);

  const double log_2pi = std::log(2.0 * std::numbers::pi);
  long k = 0;
  for (long it = 1; it <= config.n_iter; ++it) {
    PrecisionGaussian<double> g;
    g.precision = xtx / sigma2;
    g.precision.diagonal().array() += prior_prec;
    g.shift = xty / sigma2;
    coef = sample_precision_gaussian(g, rng);
    const double sse = (ybar - design * coef).squaredNorm();
    sigma2 = inverse_gamma_draw(0.5 * n + config.prior.u, 0.5 * sse + config.prior.v, rng);
    out.deviance.push_back(n * (log_2pi + std::log(sigma2)) + sse / sigma2);

    if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0 || k >= retained) continue;
    out.draws.row(k).head(p + 1) = coef.transpose();
    out.draws(k, p + 1) = sigma2;
    out.iterations.push_back(it);
    ++k;
  }
  out.draws.conservativeResize(k, Eigen::NoChange);
  out.summary = summarize_draws(out.names, out.draws);

  const Vector col_means = out.draws.colwise().mean().transpose();
  const int J = data.n_responses();
  out.means.a = Vector::Zero(J + 1);
  out.means.b = Vector::Zero(J + 1);
  out.means.a(ref + 1) = col_means(0);
  out.means.b(ref + 1) = 1.0;
  out.means.beta = col_means.segment(1, p);
  out.means.alpha = Vector::Zero(0);
  out.means.sigma2 = Matrix::Constant(data.n_patients(), J, col_means(p + 1));
  out.means.tau2 = Vector::Zero(data.n_patients());
  out.means.rho = Vector::Zero(data.n_patients());
  return out;
}

}  // namespace lsfm
