#include "lsfm/sampler.hpp"

#include "lsfm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lsfm {

std::string to_string(VariancePooling v) {
  return v == VariancePooling::pooled ? "pooled" : "per_patient";
}

void FitConfig::validate() const {
  if (n_iter < 1) throw ConfigError("fit.n_iter", "must be positive");
  if (burn_in < 0 || burn_in >= n_iter) throw ConfigError("fit.burn_in", "must be in [0, n_iter)");
  if (thin < 1) throw ConfigError("fit.thin", "must be positive");
  if (threads < 1) throw ConfigError("threads", "must be positive");
  if (!(rho_concentration > 0.0))
    throw ConfigError("sampler.rho_concentration", "must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw ConfigError("sampler.target_acceptance", "must lie in (0, 1)");
  if (!(initial_proposal_sd > 0.0)) throw ConfigError("sampler.proposal_sd", "must be positive");
  prior.validate();
}

void FitConfig::apply_model(int model) {
  mean_regression = false;
  switch (model) {
    case 1: mean_regression = true; spatial = false; informative_missing = false;
            variances = VariancePooling::pooled; break;
    case 2: spatial = true; informative_missing = false; variances = VariancePooling::pooled; break;
    case 3: spatial = true; informative_missing = false; variances = VariancePooling::per_patient; break;
    case 4: spatial = true; informative_missing = true; variances = VariancePooling::pooled; break;
    case 5: spatial = true; informative_missing = true; variances = VariancePooling::per_patient; break;
    default: throw ConfigError("model.variant", "must be between 1 and 5");
  }
}

FitConfig FitConfig::for_model(int model) {
  FitConfig c;
  c.apply_model(model);
  return c;
}

const ParameterSummary* ChainOutput::try_find(const std::string& name) const {
  for (const auto& s : summary)
    if (s.name == name) return &s;
  return nullptr;
}

const ParameterSummary& ChainOutput::find(const std::string& name) const {
  if (const auto* s = try_find(name)) return *s;
  throw std::out_of_range("no parameter named '" + name + "' in chain output");
}

Vector ChainOutput::column(const std::string& name) const {
  for (size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return draws.col(static_cast<Index>(k));
  throw std::out_of_range("no parameter named '" + name + "' in chain output");
}

double ChainOutput::mean_deviance() const {
  double acc = 0.0;
  long n = 0;
  for (size_t t = static_cast<size_t>(burn_in); t < deviance.size(); ++t) {
    acc += deviance[t];
    ++n;
  }
  return n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

namespace {

double type7_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<ParameterSummary> summarize_draws(const std::vector<std::string>& names,
                                              const Matrix& draws) {
  std::vector<ParameterSummary> out;
  out.reserve(names.size());
  const Index n = draws.rows();
  for (size_t k = 0; k < names.size(); ++k) {
    const auto col = draws.col(static_cast<Index>(k));
    ParameterSummary s;
    s.name = names[k];
    if (n > 0) {
      s.mean = col.mean();
      s.sd = n > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
      std::vector<double> v(col.data(), col.data() + n);
      std::sort(v.begin(), v.end());
      s.q025 = type7_quantile(v, 0.025);
      s.q50 = type7_quantile(v, 0.5);
      s.q975 = type7_quantile(v, 0.975);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double rho_log_acceptance(double current, double proposal, double log_target_current,
                          double log_target_proposal, double concentration) {
  const double k = concentration;
  const double forward = log_beta_density(proposal, k * current, k * (1.0 - current));
  const double backward = log_beta_density(current, k * proposal, k * (1.0 - proposal));
  return log_target_proposal - log_target_current + backward - forward;
}

// ---------------------------------------------------------------------------

GibbsSampler::GibbsSampler(const Dataset& data, FitConfig config)
    : data_(data),
      config_(std::move(config)),
      car_(*data.graph),
      units_(*data.graph, data.granularity),
      global_rng_(config_.seed, kGlobalStream) {
  config_.validate();
  data_.validate();
  const int n = data_.n_patients();
  const int J = data_.n_responses();

  state_ = config_.initial_state ? *config_.initial_state : ModelState::initial(data_);
  pooled_ = config_.pooled_prior.value_or(
      PooledPrior{config_.prior.u, config_.prior.v, config_.prior.u, config_.prior.v, 1.0, 1.0});

  for (int j = 0; j < J; ++j)
    if (data_.responses[j].kind == ResponseKind::binary) state_.sigma2.col(j).setOnes();
  state_.b(data_.reference + 1) = 1.0;
  if (!config_.informative_missing) state_.b(0) = 0.0;
  if (!config_.spatial) {
    state_.rho.setZero();
  } else {
    state_.rho = state_.rho.cwiseMax(kRhoMin).cwiseMin(kRhoMax);
  }
  if (config_.variances == VariancePooling::pooled) {
    for (int i = 1; i < n; ++i) {
      state_.sigma2.row(i) = state_.sigma2.row(0);
      state_.tau2(i) = state_.tau2(0);
      state_.rho(i) = state_.rho(0);
    }
    state_.hyper.c.setConstant(pooled_.c);
    state_.hyper.d.setConstant(pooled_.d);
    state_.hyper.e = pooled_.e;
    state_.hyper.f = pooled_.f;
    state_.hyper.g = pooled_.g;
    state_.hyper.h = pooled_.h;
  }

  observed_counts_.resize(n);
  patient_rng_.reserve(n);
  for (int i = 0; i < n; ++i) {
    observed_counts_[i] = data_.observed_site_count(units_, i);
    patient_rng_.emplace_back(config_.seed, patient_stream(static_cast<std::uint64_t>(i)));
  }
  rho_proposed_.assign(n, 0);
  rho_accepted_.assign(n, 0);

  if (config_.variances == VariancePooling::per_patient) {
    const double sd = std::log(config_.initial_proposal_sd);
    for (int j = 0; j < J; ++j) {
      if (data_.responses[j].kind != ResponseKind::continuous) continue;
      scales_.push_back({"c[" + data_.responses[j].name + "]", sd});
      scales_.push_back({"d[" + data_.responses[j].name + "]", sd});
    }
    scales_.push_back({"e", sd});
    scales_.push_back({"f", sd});
    if (config_.spatial) {
      scales_.push_back({"g", sd});
      scales_.push_back({"h", sd});
    }
  }
}

double GibbsSampler::response_value(int j, int i, int s) const {
  return data_.responses[j].kind == ResponseKind::continuous ? data_.y[j](i, s)
                                                             : state_.latent[j](i, s);
}

Vector GibbsSampler::field_mean(int i) const {
  Vector m = data_.omega_times(i, state_.beta);
  if (data_.n_spatial_covariates() > 0) m += data_.w * state_.alpha;
  return m;
}

Vector GibbsSampler::residual(int i) const {
  return state_.mu.row(i).transpose() - field_mean(i);
}

void GibbsSampler::update_binary_latents(int i, RngStream& rng) {
  for (int j = 0; j < data_.n_responses(); ++j) {
    if (data_.responses[j].kind != ResponseKind::binary) continue;
    const double a = state_.a(j + 1), b = state_.b(j + 1);
    for (int s = 0; s < data_.n_sites(); ++s) {
      if (!data_.site_present(units_, i, s)) continue;
      const TruncSide side = data_.y[j](i, s) > 0.5 ? TruncSide::above0 : TruncSide::below0;
      state_.latent[j](i, s) = truncated_normal(a + b * state_.mu(i, s), 1.0, side, rng);
    }
  }
}

void GibbsSampler::update_missing_latents(int i, RngStream& rng) {
  if (!config_.informative_missing) return;
  const Vector mu = state_.mu.row(i).transpose();
  for (int u = 0; u < units_.n_units(); ++u) {
    const double mean = state_.a(0) + state_.b(0) * units_.unit_mean(u, mu);
    const TruncSide side = data_.present(i, u) ? TruncSide::below0 : TruncSide::above0;
    state_.latent_missing(i, u) = truncated_normal(mean, 1.0, side, rng);
  }
}

PrecisionGaussian<double> GibbsSampler::mu_conditional(int i) const {
  const int n_sites = data_.n_sites();
  const double tau2 = state_.tau2(i);
  const double rho = state_.rho(i);

  PrecisionGaussian<double> g;
  g.precision = (-rho / tau2) * car_.adjacency();
  g.precision.diagonal() += car_.degrees() / tau2;
  g.shift = car_.multiply(field_mean(i), rho) / tau2;

  for (int j = 0; j < data_.n_responses(); ++j) {
    const double a = state_.a(j + 1), b = state_.b(j + 1), s2 = state_.sigma2(i, j);
    for (int s = 0; s < n_sites; ++s) {
      if (!data_.site_present(units_, i, s)) continue;
      g.precision(s, s) += b * b / s2;
      g.shift(s) += b * (response_value(j, i, s) - a) / s2;
    }
  }
  if (config_.informative_missing) {
    const double a0 = state_.a(0), b0 = state_.b(0);
    if (units_.granularity() == MissingGranularity::site) {
      g.precision.diagonal().array() += b0 * b0;
    } else {
      g.precision.noalias() += (b0 * b0) * units_.ztz();
    }
    for (int u = 0; u < units_.n_units(); ++u) {
      const auto& sites = units_.sites(u);
      const double weight = 1.0 / static_cast<double>(sites.size());
      const double v = b0 * (state_.latent_missing(i, u) - a0) * weight;
      for (int s : sites) g.shift(s) += v;
    }
  }
  return g;
}

void GibbsSampler::update_mu(int i, RngStream& rng) {
  try {
    state_.mu.row(i) = sample_precision_gaussian(mu_conditional(i), rng).transpose();
  } catch (const NumericalError& e) {
    throw NumericalError("mu[" + data_.patient_ids[i] + "]", e.detail());
  }
}

std::pair<double, double> GibbsSampler::sigma2_conditional(int i, int j) const {
  const double a = state_.a(j + 1), b = state_.b(j + 1);
  double ss = 0.0;
  for (int s = 0; s < data_.n_sites(); ++s) {
    if (!data_.site_present(units_, i, s)) continue;
    const double r = data_.y[j](i, s) - a - b * state_.mu(i, s);
    ss += r * r;
  }
  return {0.5 * observed_counts_[i] + state_.hyper.c(j), 0.5 * ss + state_.hyper.d(j)};
}

void GibbsSampler::update_sigma2(int i, RngStream& rng) {
  for (int j = 0; j < data_.n_responses(); ++j) {
    if (data_.responses[j].kind != ResponseKind::continuous) continue;
    const auto [shape, scale] = sigma2_conditional(i, j);
    state_.sigma2(i, j) = inverse_gamma_draw(shape, scale, rng);
  }
}

std::pair<double, double> GibbsSampler::tau2_conditional(int i) const {
  const Vector r = residual(i);
  return {0.5 * data_.n_sites() + state_.hyper.e,
          0.5 * car_.quadratic_form(r, state_.rho(i)) + state_.hyper.f};
}

void GibbsSampler::update_tau2(int i, RngStream& rng) {
  const auto [shape, scale] = tau2_conditional(i);
  state_.tau2(i) = inverse_gamma_draw(shape, scale, rng);
}

bool GibbsSampler::metropolis_rho(double& rho, const std::function<double(double)>& log_target,
                                  RngStream& rng) const {
  const double k = config_.rho_concentration;
  const double proposal = beta_draw(k * rho, k * (1.0 - rho), rng);
  // The uniform is always consumed so the stream advances identically.
  const double log_u = std::log(rng.uniform());
  if (!(proposal >= kRhoMin && proposal <= kRhoMax)) return false;
  const double log_ratio = rho_log_acceptance(rho, proposal, log_target(rho), log_target(proposal), k);
  if (log_u < log_ratio) {
    rho = proposal;
    return true;
  }
  return false;
}

bool GibbsSampler::update_rho(int i, RngStream& rng) {
  if (!config_.spatial) return false;
  const Vector r = residual(i);
  const double tau2 = state_.tau2(i);
  auto target = [&](double rho) {
    return car_log_density(r, rho, tau2, car_) +
           log_beta_density(rho, state_.hyper.g, state_.hyper.h);
  };
  double rho = state_.rho(i);
  const bool accepted = metropolis_rho(rho, target, rng);
  state_.rho(i) = rho;
  if (post_burn_in_) {
    ++rho_proposed_[i];
    rho_accepted_[i] += accepted ? 1 : 0;
  }
  return accepted;
}

void GibbsSampler::update_pooled_sigma2(RngStream& rng) {
  for (int j = 0; j < data_.n_responses(); ++j) {
    if (data_.responses[j].kind != ResponseKind::continuous) continue;
    double shape = state_.hyper.c(j), scale = state_.hyper.d(j);
    for (int i = 0; i < data_.n_patients(); ++i) {
      const auto [sh, sc] = sigma2_conditional(i, j);
      shape += sh - state_.hyper.c(j);
      scale += sc - state_.hyper.d(j);
    }
    state_.sigma2.col(j).setConstant(inverse_gamma_draw(shape, scale, rng));
  }
}

void GibbsSampler::update_pooled_tau2(RngStream& rng) {
  double shape = state_.hyper.e, scale = state_.hyper.f;
  for (int i = 0; i < data_.n_patients(); ++i) {
    shape += 0.5 * data_.n_sites();
    scale += 0.5 * car_.quadratic_form(residual(i), state_.rho(i));
  }
  state_.tau2.setConstant(inverse_gamma_draw(shape, scale, rng));
}

bool GibbsSampler::update_pooled_rho(RngStream& rng) {
  if (!config_.spatial) return false;
  const int n = data_.n_patients();
  std::vector<Vector> residuals(n);
  for (int i = 0; i < n; ++i) residuals[i] = residual(i);
  auto target = [&](double rho) {
    double acc = log_beta_density(rho, state_.hyper.g, state_.hyper.h);
    for (int i = 0; i < n; ++i) acc += car_log_density(residuals[i], rho, state_.tau2(i), car_);
    return acc;
  };
  double rho = state_.rho(0);
  const bool accepted = metropolis_rho(rho, target, rng);
  state_.rho.setConstant(rho);
  if (post_burn_in_) {
    ++pooled_rho_proposed_;
    pooled_rho_accepted_ += accepted ? 1 : 0;
  }
  return accepted;
}

PrecisionGaussian<double> GibbsSampler::coefficient_conditional(int j) const {
  const double prior_prec = 1.0 / (config_.prior.w * config_.prior.w);
  const bool reference = j == data_.reference;
  const int dim = reference ? 1 : 2;
  PrecisionGaussian<double> g{Matrix::Identity(dim, dim) * prior_prec, Vector::Zero(dim)};
  for (int i = 0; i < data_.n_patients(); ++i) {
    const double inv = 1.0 / state_.sigma2(i, j);
    for (int s = 0; s < data_.n_sites(); ++s) {
      if (!data_.site_present(units_, i, s)) continue;
      const double y = response_value(j, i, s);
      const double mu = state_.mu(i, s);
      if (reference) {
        g.precision(0, 0) += inv;
        g.shift(0) += (y - mu) * inv;
      } else {
        g.precision(0, 0) += inv;
        g.precision(0, 1) += mu * inv;
        g.precision(1, 1) += mu * mu * inv;
        g.shift(0) += y * inv;
        g.shift(1) += mu * y * inv;
      }
    }
  }
  if (!reference) g.precision(1, 0) = g.precision(0, 1);
  return g;
}

PrecisionGaussian<double> GibbsSampler::missingness_conditional() const {
  const double prior_prec = 1.0 / (config_.prior.w * config_.prior.w);
  PrecisionGaussian<double> g{Matrix::Identity(2, 2) * prior_prec, Vector::Zero(2)};
  for (int i = 0; i < data_.n_patients(); ++i) {
    const Vector mu = state_.mu.row(i).transpose();
    for (int u = 0; u < units_.n_units(); ++u) {
      const double z = units_.unit_mean(u, mu);
      const double y = state_.latent_missing(i, u);
      g.precision(0, 0) += 1.0;
      g.precision(0, 1) += z;
      g.precision(1, 1) += z * z;
      g.shift(0) += y;
      g.shift(1) += z * y;
    }
  }
  g.precision(1, 0) = g.precision(0, 1);
  return g;
}

void GibbsSampler::update_coefficients(RngStream& rng) {
  for (int j = 0; j < data_.n_responses(); ++j) {
    const Vector draw = sample_precision_gaussian(coefficient_conditional(j), rng);
    state_.a(j + 1) = draw(0);
    if (j != data_.reference) state_.b(j + 1) = draw(1);
  }
  if (config_.informative_missing) {
    const Vector draw = sample_precision_gaussian(missingness_conditional(), rng);
    state_.a(0) = draw(0);
    state_.b(0) = draw(1);
  }
}

PrecisionGaussian<double> GibbsSampler::alpha_conditional() const {
  const int q = data_.n_spatial_covariates();
  const double prior_prec = 1.0 / (config_.prior.w * config_.prior.w);
  PrecisionGaussian<double> g{Matrix::Identity(q, q) * prior_prec, Vector::Zero(q)};
  if (q == 0) return g;
  const Matrix& w = data_.w;
  const Matrix wmw = w.transpose() * car_.degrees().asDiagonal() * w;
  const Matrix wdw = w.transpose() * car_.adjacency() * w;
  for (int i = 0; i < data_.n_patients(); ++i) {
    const double rho = state_.rho(i), tau2 = state_.tau2(i);
    g.precision += (wmw - rho * wdw) / tau2;
    const Vector centered = state_.mu.row(i).transpose() - data_.omega_times(i, state_.beta);
    g.shift += w.transpose() * car_.multiply(centered, rho) / tau2;
  }
  return g;
}

void GibbsSampler::update_alpha(RngStream& rng) {
  if (data_.n_spatial_covariates() == 0) return;
  state_.alpha = sample_precision_gaussian(alpha_conditional(), rng);
}

PrecisionGaussian<double> GibbsSampler::beta_conditional() const {
  const int p = data_.n_covariates();
  const double prior_prec = 1.0 / (config_.prior.w * config_.prior.w);
  PrecisionGaussian<double> g{Matrix::Identity(p, p) * prior_prec, Vector::Zero(p)};
  const Vector& m = car_.degrees();
  const bool has_w = data_.n_spatial_covariates() > 0;
  const Vector w_alpha = has_w ? Vector(data_.w * state_.alpha) : Vector::Zero(data_.n_sites());
  for (int i = 0; i < data_.n_patients(); ++i) {
    // 1'Q(rho) = (1 - rho) m'
    const double scale = (1.0 - state_.rho(i)) / state_.tau2(i);
    const auto xi = data_.x.row(i).transpose();
    g.precision.noalias() += (scale * car_.total_degree()) * xi * xi.transpose();
    const double centered = m.dot(state_.mu.row(i).transpose() - w_alpha);
    g.shift.noalias() += (scale * centered) * xi;
  }
  return g;
}

void GibbsSampler::update_beta(RngStream& rng) {
  if (data_.n_covariates() == 0) return;
  state_.beta = sample_precision_gaussian(beta_conditional(), rng);
}

void GibbsSampler::update_hyperparameters(RngStream& rng, bool adapt) {
  if (config_.variances != VariancePooling::per_patient) return;
  const int n = data_.n_patients();
  const double u = config_.prior.u, v = config_.prior.v;
  if (adapt) ++adaptation_steps_;
  const double step = adapt ? std::pow(static_cast<double>(adaptation_steps_), -0.6) : 0.0;

  size_t next = 0;
  auto random_walk = [&](double& value, const auto& log_target) {
    ProposalScale& sc = scales_[next++];
    const double proposal = value * std::exp(std::exp(sc.log_sd) * rng.normal());
    const double log_u = std::log(rng.uniform());
    double log_ratio = log_target(proposal) - log_target(value) + std::log(proposal) - std::log(value);
    if (!std::isfinite(log_ratio)) log_ratio = -std::numeric_limits<double>::infinity();
    const bool accepted = log_u < log_ratio;
    if (accepted) value = proposal;
    if (adapt) {
      sc.log_sd += step * ((accepted ? 1.0 : 0.0) - config_.target_acceptance);
    } else {
      ++sc.proposed;
      sc.accepted += accepted ? 1 : 0;
    }
  };

  // Gamma(shape, rate) population of precisions: sufficient statistics.
  auto gamma_population = [&](double sum_log, double sum, double shape, double rate) {
    return n * (shape * std::log(rate) - std::lgamma(shape)) + (shape - 1.0) * sum_log - rate * sum;
  };

  for (int j = 0; j < data_.n_responses(); ++j) {
    if (data_.responses[j].kind != ResponseKind::continuous) continue;
    double sum_log = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double prec = 1.0 / state_.sigma2(i, j);
      sum_log += std::log(prec);
      sum += prec;
    }
    double& c = state_.hyper.c(j);
    double& d = state_.hyper.d(j);
    random_walk(c, [&](double x) {
      return gamma_population(sum_log, sum, x, d) + log_gamma_density(x, u, v);
    });
    random_walk(d, [&](double x) {
      return gamma_population(sum_log, sum, c, x) + log_gamma_density(x, u, v);
    });
  }

  {
    double sum_log = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double prec = 1.0 / state_.tau2(i);
      sum_log += std::log(prec);
      sum += prec;
    }
    double& e = state_.hyper.e;
    double& f = state_.hyper.f;
    random_walk(e, [&](double x) {
      return gamma_population(sum_log, sum, x, f) + log_gamma_density(x, u, v);
    });
    random_walk(f, [&](double x) {
      return gamma_population(sum_log, sum, e, x) + log_gamma_density(x, u, v);
    });
  }

  if (config_.spatial) {
    double sum_log = 0.0, sum_log1m = 0.0;
    for (int i = 0; i < n; ++i) {
      sum_log += std::log(state_.rho(i));
      sum_log1m += std::log1p(-state_.rho(i));
    }
    double& g = state_.hyper.g;
    double& h = state_.hyper.h;
    auto beta_population = [&](double a, double b) {
      return n * (std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)) + (a - 1.0) * sum_log +
             (b - 1.0) * sum_log1m;
    };
    random_walk(g, [&](double x) { return beta_population(x, h) + log_gamma_density(x, u, v); });
    random_walk(h, [&](double x) { return beta_population(g, x) + log_gamma_density(x, u, v); });
  }
}

void GibbsSampler::patient_blocks(int i, long /*iteration*/) {
  RngStream& rng = patient_rng_[i];
  update_binary_latents(i, rng);
  update_missing_latents(i, rng);
  update_mu(i, rng);
  if (config_.variances == VariancePooling::per_patient) {
    if (!config_.hold.variances) {
      update_sigma2(i, rng);
      update_tau2(i, rng);
    }
    if (config_.spatial && !config_.hold.rho) update_rho(i, rng);
  }
}

void GibbsSampler::sweep(long iteration) {
  post_burn_in_ = iteration > config_.burn_in;
  if (post_burn_in_) adaptation_frozen_ = true;
  std::string block = "patient blocks";
  try {
    parallel_for(data_.n_patients(), config_.threads,
                 [&](int i) { patient_blocks(i, iteration); });
    if (config_.variances == VariancePooling::pooled) {
      block = "pooled variances";
      if (!config_.hold.variances) {
        update_pooled_sigma2(global_rng_);
        update_pooled_tau2(global_rng_);
      }
      block = "rho";
      if (config_.spatial && !config_.hold.rho) update_pooled_rho(global_rng_);
    }
    block = "coefficients";
    if (!config_.hold.coefficients) update_coefficients(global_rng_);
    block = "alpha";
    if (!config_.hold.alpha) update_alpha(global_rng_);
    block = "beta";
    update_beta(global_rng_);
    block = "hyperparameters";
    if (!config_.hold.hyper) update_hyperparameters(global_rng_, !post_burn_in_);
  } catch (const NumericalError& e) {
    throw e.at_iteration(iteration);
  } catch (const std::domain_error& e) {
    throw NumericalError(block, e.what(), iteration);
  }
  check_finite(iteration);
}

void GibbsSampler::check_finite(long iteration) const {
  auto check = [&](bool ok, const char* block) {
    if (!ok) throw NumericalError(block, "non-finite value after update", iteration);
  };
  check(state_.mu.allFinite(), "mu");
  check(state_.a.allFinite() && state_.b.allFinite(), "coefficients");
  check(state_.alpha.allFinite(), "alpha");
  check(state_.beta.allFinite(), "beta");
  check(state_.sigma2.allFinite() && state_.tau2.allFinite(), "variances");
  check(state_.rho.allFinite(), "rho");
}

double GibbsSampler::deviance() const {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double loglik = 0.0;
  for (int i = 0; i < data_.n_patients(); ++i) {
    for (int j = 0; j < data_.n_responses(); ++j) {
      const double a = state_.a(j + 1), b = state_.b(j + 1);
      const bool continuous = data_.responses[j].kind == ResponseKind::continuous;
      const double s2 = state_.sigma2(i, j);
      for (int s = 0; s < data_.n_sites(); ++s) {
        if (!data_.site_present(units_, i, s)) continue;
        const double mean = a + b * state_.mu(i, s);
        if (continuous) {
          const double r = data_.y[j](i, s) - mean;
          loglik += -0.5 * (log_2pi + std::log(s2) + r * r / s2);
        } else {
          loglik += normal_log_cdf(data_.y[j](i, s) > 0.5 ? mean : -mean);
        }
      }
    }
    if (config_.informative_missing) {
      const Vector mu = state_.mu.row(i).transpose();
      for (int u = 0; u < units_.n_units(); ++u) {
        const double eta = state_.a(0) + state_.b(0) * units_.unit_mean(u, mu);
        loglik += normal_log_cdf(data_.present(i, u) ? -eta : eta);
      }
    }
  }
  return -2.0 * loglik;
}

// ---------------------------------------------------------------------------

namespace {

struct ParameterLayout {
  std::vector<std::string> names;

  ParameterLayout(const Dataset& data, const FitConfig& cfg) {
    const int J = data.n_responses();
    if (cfg.informative_missing) {
      names.push_back("a[missing]");
      names.push_back("b[missing]");
    }
    for (int j = 0; j < J; ++j) names.push_back("a[" + data.responses[j].name + "]");
    for (int j = 0; j < J; ++j)
      if (j != data.reference) names.push_back("b[" + data.responses[j].name + "]");
    for (const auto& n : data.spatial_covariate_names) names.push_back("alpha[" + n + "]");
    for (const auto& n : data.covariate_names) names.push_back("beta[" + n + "]");
    if (cfg.variances == VariancePooling::pooled) {
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous)
          names.push_back("sigma2[" + data.responses[j].name + "]");
      names.push_back("tau2");
      if (cfg.spatial) names.push_back("rho");
    } else {
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous)
          for (const auto& id : data.patient_ids)
            names.push_back("sigma2[" + data.responses[j].name + "][" + id + "]");
      for (const auto& id : data.patient_ids) names.push_back("tau2[" + id + "]");
      if (cfg.spatial)
        for (const auto& id : data.patient_ids) names.push_back("rho[" + id + "]");
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous) {
          names.push_back("c[" + data.responses[j].name + "]");
          names.push_back("d[" + data.responses[j].name + "]");
        }
      for (const char* h : {"e", "f"}) names.push_back(h);
      if (cfg.spatial)
        for (const char* h : {"g", "h"}) names.push_back(h);
    }
  }

  static void collect(const Dataset& data, const FitConfig& cfg, const ModelState& st,
                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    Index k = 0;
    const int J = data.n_responses();
    const int n = data.n_patients();
    if (cfg.informative_missing) {
      out(k++) = st.a(0);
      out(k++) = st.b(0);
    }
    for (int j = 0; j < J; ++j) out(k++) = st.a(j + 1);
    for (int j = 0; j < J; ++j)
      if (j != data.reference) out(k++) = st.b(j + 1);
    for (Index c = 0; c < st.alpha.size(); ++c) out(k++) = st.alpha(c);
    for (Index c = 0; c < st.beta.size(); ++c) out(k++) = st.beta(c);
    if (cfg.variances == VariancePooling::pooled) {
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous) out(k++) = st.sigma2(0, j);
      out(k++) = st.tau2(0);
      if (cfg.spatial) out(k++) = st.rho(0);
    } else {
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous)
          for (int i = 0; i < n; ++i) out(k++) = st.sigma2(i, j);
      for (int i = 0; i < n; ++i) out(k++) = st.tau2(i);
      if (cfg.spatial)
        for (int i = 0; i < n; ++i) out(k++) = st.rho(i);
      for (int j = 0; j < J; ++j)
        if (data.responses[j].kind == ResponseKind::continuous) {
          out(k++) = st.hyper.c(j);
          out(k++) = st.hyper.d(j);
        }
      out(k++) = st.hyper.e;
      out(k++) = st.hyper.f;
      if (cfg.spatial) {
        out(k++) = st.hyper.g;
        out(k++) = st.hyper.h;
      }
    }
  }
};

}  // namespace

ChainOutput run_chain(const FitConfig& config, const Dataset& data) {
  if (config.mean_regression) return fit_mean_regression(data, config);

  GibbsSampler sampler(data, config);
  const ParameterLayout layout(data, config);
  const long retained = (config.n_iter - config.burn_in) / config.thin;

  ChainOutput out;
  out.spatial = config.spatial;
  out.informative_missing = config.informative_missing;
  out.variances = config.variances;
  out.n_iter = config.n_iter;
  out.burn_in = config.burn_in;
  out.thin = config.thin;
  out.names = layout.names;
  out.draws.resize(retained, static_cast<Index>(layout.names.size()));
  out.iterations.reserve(retained);
  out.deviance.reserve(config.n_iter);

  const ModelState& st = sampler.state();
  PosteriorMeans acc;
  acc.mu = Matrix::Zero(st.mu.rows(), st.mu.cols());
  Matrix mu_m2 = acc.mu;
  acc.a = Vector::Zero(st.a.size());
  acc.b = Vector::Zero(st.b.size());
  acc.alpha = Vector::Zero(st.alpha.size());
  acc.beta = Vector::Zero(st.beta.size());
  acc.sigma2 = Matrix::Zero(st.sigma2.rows(), st.sigma2.cols());
  acc.tau2 = Vector::Zero(st.tau2.size());
  acc.rho = Vector::Zero(st.rho.size());

  long kept = 0;
  for (long it = 1; it <= config.n_iter; ++it) {
    sampler.sweep(it);
    out.deviance.push_back(sampler.deviance());
    if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0 || kept >= retained)
      continue;
    ParameterLayout::collect(data, config, st, out.draws.row(kept));
    out.iterations.push_back(it);
    ++kept;
    const Matrix delta = st.mu - acc.mu;
    acc.mu += delta / static_cast<double>(kept);
    mu_m2 += delta.cwiseProduct(st.mu - acc.mu);
    acc.a += st.a;
    acc.b += st.b;
    acc.alpha += st.alpha;
    acc.beta += st.beta;
    acc.sigma2 += st.sigma2;
    acc.tau2 += st.tau2;
    acc.rho += st.rho;
  }
  out.draws.conservativeResize(kept, Eigen::NoChange);
  if (kept > 0) {
    const double inv = 1.0 / static_cast<double>(kept);
    acc.a *= inv;
    acc.b *= inv;
    acc.alpha *= inv;
    acc.beta *= inv;
    acc.sigma2 *= inv;
    acc.tau2 *= inv;
    acc.rho *= inv;
    acc.mu_sd = kept > 1 ? Matrix((mu_m2 / static_cast<double>(kept - 1)).cwiseSqrt())
                         : Matrix::Zero(mu_m2.rows(), mu_m2.cols());
  }
  out.means = std::move(acc);
  out.summary = summarize_draws(out.names, out.draws);

  auto rate = [](long accepted, long proposed) {
    return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed)
                        : std::numeric_limits<double>::quiet_NaN();
  };
  if (config.spatial && !config.hold.rho) {
    if (config.variances == VariancePooling::pooled) {
      out.acceptance.emplace_back("rho",
                                  rate(sampler.pooled_rho_accepted(), sampler.pooled_rho_proposed()));
    } else {
      for (int i = 0; i < data.n_patients(); ++i)
        out.acceptance.emplace_back("rho[" + data.patient_ids[i] + "]",
                                    rate(sampler.rho_accepted(i), sampler.rho_proposed(i)));
    }
  }
  if (!config.hold.hyper)
    for (const auto& sc : sampler.proposal_scales())
      out.acceptance.emplace_back(sc.name, rate(sc.accepted, sc.proposed));
  for (auto& s : out.summary)
    for (const auto& [name, r] : out.acceptance)
      if (s.name == name) s.acceptance = r;
  return out;
}

}  // namespace lsfm
