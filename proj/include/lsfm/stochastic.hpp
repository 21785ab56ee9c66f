#pragma once

#include <cstdint>
#include <random>

namespace lsfm {

/// Seeded random stream. The pair (seed, stream_id) fully determines the
/// sequence; distinct stream ids give independent-quality substreams.
/// Single owner: never share one stream between threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double uniform();  // open interval (0, 1)
  double normal();   // standard normal
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Substream ids used by the sampler and the study harness.
constexpr std::uint64_t kGlobalStream = 0;
constexpr std::uint64_t patient_stream(std::uint64_t patient) { return patient + 1; }

enum class TruncSide { below0, above0 };

double normal_draw(double mean, double sd, RngStream& rng);

/// N(mean, sd^2) conditioned on the half-line (-inf, 0) or (0, inf).
/// Inverse-CDF for moderate truncation points, exponential rejection in the
/// far tail; stable for |mean|/sd well beyond 8.
double truncated_normal(double mean, double sd, TruncSide side, RngStream& rng);

double gamma_draw(double shape, double rate, RngStream& rng);
// 1 / Gamma(shape, rate = scale)
double inverse_gamma_draw(double shape, double scale, RngStream& rng);
double beta_draw(double a, double b, RngStream& rng);

double normal_cdf(double x);
double normal_log_cdf(double x);
double normal_quantile(double p);

double log_gamma_density(double x, double shape, double rate);
double log_beta_density(double x, double a, double b);

}  // namespace lsfm
