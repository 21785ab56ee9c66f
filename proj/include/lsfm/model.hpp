#pragma once

#include "lsfm/car_field.hpp"
#include "lsfm/mouth_graph.hpp"
#include "lsfm/stochastic.hpp"
#include "lsfm/types.hpp"

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace lsfm {

enum class ResponseKind { continuous, binary };

struct ResponseSpec {
  std::string name;
  ResponseKind kind = ResponseKind::continuous;
};

/// Granularity of the missingness process: whole teeth (six sites at once)
/// or individual sites.
enum class MissingGranularity { tooth, site };

std::string to_string(MissingGranularity g);
MissingGranularity parse_granularity(const std::string& text);

/// Missingness units and the map Z whose row u averages the latent field
/// over the sites of unit u. For tooth granularity Z is the tooth-average
/// map; for site granularity Z = I.
class UnitMap {
 public:
  UnitMap(const MouthGraph& graph, MissingGranularity granularity);

  MissingGranularity granularity() const { return granularity_; }
  int n_units() const { return static_cast<int>(sites_.size()); }
  int unit_of_site(int site) const { return unit_of_site_[site]; }
  const std::vector<int>& sites(int unit) const { return sites_[unit]; }
  const Matrix& z() const { return z_; }
  // Z'Z, the missingness contribution to the latent-field precision (per b0^2).
  const Matrix& ztz() const { return ztz_; }
  // Z_u' mu
  double unit_mean(int unit, const Eigen::Ref<const Vector>& mu) const;

 private:
  MissingGranularity granularity_;
  std::vector<int> unit_of_site_;
  std::vector<std::vector<int>> sites_;
  Matrix z_;
  Matrix ztz_;
};

/// Observed data for N patients on a shared mouth graph.
///
/// Responses are stored per type as N x S matrices: continuous values, or
/// 0/1 for binary types. Sites on missing units hold NaN. `present(i, u)`
/// is true when unit u of patient i was observed.
struct Dataset {
  std::shared_ptr<const MouthGraph> graph;
  MissingGranularity granularity = MissingGranularity::tooth;
  std::vector<ResponseSpec> responses;
  int reference = 0;  // response whose slope is fixed at 1
  std::vector<std::string> patient_ids;
  std::vector<std::string> covariate_names;
  std::vector<std::string> spatial_covariate_names;
  Matrix x;  // N x p
  Matrix w;  // S x q, q may be 0
  std::vector<Matrix> y;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> present;  // N x U

  int n_patients() const { return static_cast<int>(x.rows()); }
  int n_sites() const { return graph->n_sites(); }
  int n_responses() const { return static_cast<int>(responses.size()); }
  int n_covariates() const { return static_cast<int>(x.cols()); }
  int n_spatial_covariates() const { return static_cast<int>(w.cols()); }

  UnitMap unit_map() const { return UnitMap(*graph, granularity); }
  bool site_present(const UnitMap& units, int i, int s) const {
    return present(i, units.unit_of_site(s));
  }
  int observed_site_count(const UnitMap& units, int i) const;

  // Omega_i beta = (X_i' beta) 1_S
  Vector omega_times(int i, const Vector& beta) const {
    return Vector::Constant(n_sites(), x.row(i).dot(beta));
  }

  /// Throws DataError when the all-or-nothing rule is violated: every
  /// response is observed at every site of a present unit and absent at
  /// every site of a missing one.
  void validate() const;
};

void standardize_columns(Matrix& m);

/// Per-response affine transform applied before fitting; value = raw*scale+shift.
struct ResponseScaling {
  std::vector<double> center;
  std::vector<double> scale;
};

/// Centers and scales each continuous response over its observed values.
/// Binary responses are left untouched (center 0, scale 1).
ResponseScaling standardize_responses(Dataset& data);

struct PriorConfig {
  double w = 10.0;  // prior sd of intercepts, slopes, alpha, beta
  double u = 0.1;   // Gamma(u, v) hyperprior shape
  double v = 0.1;   // Gamma(u, v) hyperprior rate
  void validate() const;
};

struct Hyperparameters {
  Vector c;  // per response; unused for binary types
  Vector d;
  double e = 1.0, f = 1.0;
  double g = 1.0, h = 1.0;
};

/// Every sampled quantity. Index 0 of `a` and `b` is the missingness probit;
/// index j+1 is response j.
struct ModelState {
  Matrix mu;      // N x S
  Vector a, b;    // J+1
  Vector alpha;   // q
  Vector beta;    // p
  Matrix sigma2;  // N x J (fixed at 1 for binary types)
  Vector tau2;    // N
  Vector rho;     // N
  Hyperparameters hyper;
  std::vector<Matrix> latent;  // J entries, N x S for binary types, empty otherwise
  Matrix latent_missing;       // N x U

  static ModelState initial(const Dataset& data);
};

/// Cor(y_j(s), y_l(s)) for a single latent factor.
double response_correlation(double b_j, double b_l, double var_mu, double sigma2_j,
                            double sigma2_l);

struct MarginalMoments {
  Vector mean;      // J
  Matrix covariance;  // J x J
};

/// First two moments of the responses at site s of patient i after
/// integrating out the latent field.
MarginalMoments marginal_moments(const ModelState& state, const Dataset& data,
                                 const CarStructure<double>& car, int i, int s);

enum class VarianceRule { constant, alternating };

struct ResponseTruth {
  ResponseSpec spec;
  double a = 1.0;
  double b = 1.0;
};

/// Data-generating configuration for one simulation design.
struct DesignSpec {
  int id = 1;
  double rho = 0.0;
  double b0 = 0.0;
  double a0 = -1.0;
  VarianceRule variance = VarianceRule::constant;
  int n_patients = 50;
  int teeth_per_quadrant = 7;
  int quadrants = 1;
  GridVariant grid = GridVariant::grid1;
  MissingGranularity granularity = MissingGranularity::site;
  Vector beta;
  std::vector<ResponseTruth> responses;

  /// sigma_i^2 = tau_i^2 for patient i (0-based).
  double patient_variance(int i) const;
  int n_sites() const { return 6 * teeth_per_quadrant * quadrants; }
};

/// One of the six simulation designs with its published constants.
DesignSpec simulation_design(int id);

struct GeneratedData {
  Dataset data;
  Matrix mu;            // true latent field
  Vector tau2;          // true per-patient CAR variance
};

GeneratedData generate_dataset(const DesignSpec& design, RngStream& rng);

}  // namespace lsfm
