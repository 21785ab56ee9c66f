#include "lsfm/stochastic.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lsfm {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream),
                       static_cast<std::uint32_t>(stream >> 32), 0x5eedU};
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::domain_error(std::string(what) + " must be positive and finite, got " +
                            std::to_string(v));
}

constexpr double kTailCut = 4.0;

// Standard normal truncated to (lower, inf).
double standard_truncated_above(double lower, RngStream& rng) {
  if (lower <= 0.0) {
    const double p_lo = normal_cdf(lower);
    const double z = normal_quantile(p_lo + rng.uniform() * (1.0 - p_lo));
    return z > lower ? z : std::nextafter(lower, std::numeric_limits<double>::infinity());
  }
  if (lower < kTailCut) {
    // Upper-tail inversion keeps precision when Phi(lower) is close to 1.
    const double z = -normal_quantile(rng.uniform() * normal_cdf(-lower));
    return z > lower ? z : std::nextafter(lower, std::numeric_limits<double>::infinity());
  }
  // Exponential rejection with the optimal rate (Robert, 1995).
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(rng.uniform()) / rate;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  auto seq = make_seed_seq(seed, stream_id);
  engine_.seed(seq);
}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double normal_draw(double mean, double sd, RngStream& rng) {
  if (!(sd >= 0.0)) throw std::domain_error("normal_draw: sd must be nonnegative");
  return mean + sd * rng.normal();
}

double truncated_normal(double mean, double sd, TruncSide side, RngStream& rng) {
  require_positive(sd, "truncated_normal sd");
  if (side == TruncSide::above0) {
    return mean + sd * standard_truncated_above(-mean / sd, rng);
  }
  // X < 0  <=>  -X > 0 with -X ~ N(-mean, sd^2)
  return -(-mean + sd * standard_truncated_above(mean / sd, rng));
}

double gamma_draw(double shape, double rate, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng.engine());
}

double inverse_gamma_draw(double shape, double scale, RngStream& rng) {
  return 1.0 / gamma_draw(shape, scale, rng);
}

double beta_draw(double a, double b, RngStream& rng) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double x = gamma_draw(a, 1.0, rng);
  const double y = gamma_draw(b, 1.0, rng);
  const double sum = x + y;
  if (!(sum > 0.0)) return a >= b ? 1.0 : 0.0;
  return x / sum;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_log_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the lower tail.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * M_PI) + std::log1p(-1.0 / x2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0, 1]");
  }
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_beta_density(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

}  // namespace lsfm
