#pragma once

#include "lsfm/car_field.hpp"
#include "lsfm/model.hpp"
#include "lsfm/stochastic.hpp"
#include "lsfm/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lsfm {

enum class VariancePooling { pooled, per_patient };

std::string to_string(VariancePooling v);

// Lower end of the sampled rho range when the spatial term is on. The Beta
// random-walk proposal degenerates as rho -> 0, so the chain lives on
// [kRhoMin, kRhoMax].
inline constexpr double kRhoMin = 1e-3;

/// Fixed prior parameters used when variances are pooled across patients:
/// sigma_j^{-2} ~ Gamma(c, d), tau^{-2} ~ Gamma(e, f), rho ~ Beta(g, h).
struct PooledPrior {
  double c, d, e, f;
  double g = 1.0, h = 1.0;
};

// Blocks frozen at their initial value; used by oracle checks.
struct BlockHolds {
  bool variances = false;
  bool rho = false;
  bool coefficients = false;  // a_j, b_j
  bool alpha = false;
  bool hyper = false;
};

struct FitConfig {
  long n_iter = 20000;
  long burn_in = 5000;
  long thin = 1;
  std::uint64_t seed = 1;
  int threads = 1;

  bool mean_regression = false;  // model 1: regression on patient means
  bool spatial = true;
  bool informative_missing = true;
  VariancePooling variances = VariancePooling::per_patient;

  PriorConfig prior;
  std::optional<PooledPrior> pooled_prior;  // defaults to Gamma(u, v) and Beta(1, 1)
  double rho_concentration = 50.0;
  double target_acceptance = 0.40;
  double initial_proposal_sd = 0.5;  // hyperparameter random walk, log scale

  BlockHolds hold;
  std::optional<ModelState> initial_state;

  void validate() const;

  /// Variant switches for the five analysis models:
  /// 1 mean regression, 2 spatial pooled, 3 spatial per-patient variances,
  /// 4 spatial pooled + informative missing, 5 full model.
  static FitConfig for_model(int model);
  void apply_model(int model);
};

struct ParameterSummary {
  std::string name;
  double mean = 0, sd = 0, q025 = 0, q50 = 0, q975 = 0;
  double acceptance = std::numeric_limits<double>::quiet_NaN();

  bool excludes_zero() const { return q025 > 0.0 || q975 < 0.0; }
};

struct PosteriorMeans {
  Matrix mu, mu_sd;  // N x S
  Vector a, b;       // J+1, index 0 = missingness
  Vector alpha, beta;
  Matrix sigma2;     // N x J
  Vector tau2, rho;  // N
};

struct ChainOutput {
  bool mean_regression = false;
  bool spatial = false;
  bool informative_missing = false;
  VariancePooling variances = VariancePooling::pooled;
  long n_iter = 0, burn_in = 0, thin = 1;

  std::vector<std::string> names;
  std::vector<long> iterations;  // iteration index of each retained draw
  Matrix draws;                  // retained x parameters
  std::vector<ParameterSummary> summary;
  PosteriorMeans means;
  std::vector<double> deviance;  // one entry per iteration, burn-in included
  std::vector<std::pair<std::string, double>> acceptance;  // post burn-in

  const ParameterSummary& find(const std::string& name) const;
  const ParameterSummary* try_find(const std::string& name) const;
  Vector column(const std::string& name) const;
  // Mean deviance over post burn-in iterations.
  double mean_deviance() const;
};

/// Equal-tail summaries (type-7 quantiles) of each column of `draws`.
std::vector<ParameterSummary> summarize_draws(const std::vector<std::string>& names,
                                              const Matrix& draws);

/// log of the Metropolis-Hastings ratio for the Beta random-walk on rho,
/// proposal Beta(k*rho, k*(1-rho)), including the Hastings correction.
double rho_log_acceptance(double current, double proposal, double log_target_current,
                          double log_target_proposal, double concentration);

/// The MCMC engine. Per-patient blocks draw from per-patient substreams so
/// output does not depend on the thread count.
class GibbsSampler {
 public:
  GibbsSampler(const Dataset& data, FitConfig config);

  const ModelState& state() const { return state_; }
  ModelState& state() { return state_; }
  const Dataset& data() const { return data_; }
  const FitConfig& config() const { return config_; }
  const CarStructure<double>& car() const { return car_; }
  const UnitMap& units() const { return units_; }

  // Per-patient blocks.
  void update_binary_latents(int i, RngStream& rng);
  void update_missing_latents(int i, RngStream& rng);
  PrecisionGaussian<double> mu_conditional(int i) const;
  void update_mu(int i, RngStream& rng);
  void update_sigma2(int i, RngStream& rng);
  void update_tau2(int i, RngStream& rng);
  bool update_rho(int i, RngStream& rng);

  // Pooled-variance blocks.
  void update_pooled_sigma2(RngStream& rng);
  void update_pooled_tau2(RngStream& rng);
  bool update_pooled_rho(RngStream& rng);

  // Global blocks.
  PrecisionGaussian<double> coefficient_conditional(int response) const;
  PrecisionGaussian<double> missingness_conditional() const;
  void update_coefficients(RngStream& rng);
  PrecisionGaussian<double> alpha_conditional() const;
  void update_alpha(RngStream& rng);
  PrecisionGaussian<double> beta_conditional() const;
  void update_beta(RngStream& rng);
  void update_hyperparameters(RngStream& rng, bool adapt);

  // Shape and scale of the inverse-gamma conditional of sigma2_ij.
  std::pair<double, double> sigma2_conditional(int i, int j) const;
  std::pair<double, double> tau2_conditional(int i) const;

  /// One full sweep: latents, mu, variances, rho, (a, b), alpha, beta,
  /// hyperparameters. `iteration` is 1-based.
  void sweep(long iteration);

  double deviance() const;

  // Residual mu_i - W alpha - Omega_i beta.
  Vector residual(int i) const;
  Vector field_mean(int i) const;
  double response_value(int j, int i, int s) const;

  struct ProposalScale {
    std::string name;
    double log_sd;
    long proposed = 0, accepted = 0;  // post burn-in only
  };
  const std::vector<ProposalScale>& proposal_scales() const { return scales_; }
  long rho_proposed(int i) const { return rho_proposed_[i]; }
  long rho_accepted(int i) const { return rho_accepted_[i]; }
  long pooled_rho_proposed() const { return pooled_rho_proposed_; }
  long pooled_rho_accepted() const { return pooled_rho_accepted_; }
  bool hyper_adaptation_frozen() const { return adaptation_frozen_; }

 private:
  bool metropolis_rho(double& rho, const std::function<double(double)>& log_target,
                      RngStream& rng) const;
  void patient_blocks(int i, long iteration);
  void check_finite(long iteration) const;

  const Dataset& data_;
  FitConfig config_;
  CarStructure<double> car_;
  UnitMap units_;
  ModelState state_;
  PooledPrior pooled_;
  std::vector<int> observed_counts_;
  std::vector<RngStream> patient_rng_;
  RngStream global_rng_;
  std::vector<ProposalScale> scales_;
  std::vector<long> rho_proposed_, rho_accepted_;
  long pooled_rho_proposed_ = 0, pooled_rho_accepted_ = 0;
  long adaptation_steps_ = 0;
  bool adaptation_frozen_ = false;
  bool post_burn_in_ = false;
};

/// Runs the chain described by `config` (model 1 is routed to
/// fit_mean_regression) and collects retained draws and summaries.
ChainOutput run_chain(const FitConfig& config, const Dataset& data);

/// Bayesian linear regression of patient mean responses on covariates
/// (with an intercept), Gibbs on (coefficients, sigma^2) under
/// N(0, w^2) and sigma^{-2} ~ Gamma(u, v) priors. Uses the reference
/// response; patients without observed sites are dropped.
ChainOutput fit_mean_regression(const Dataset& data, const FitConfig& config,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace lsfm
