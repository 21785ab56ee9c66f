#pragma once

#include "lsfm/model.hpp"
#include "lsfm/sampler.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lsfm {

/// Which designs and analysis models to run, and at what scale. The desk
/// defaults (20 replicates of 4000 iterations) keep the full grid runnable
/// on one core; `paper_scale()` restores 100 replicates of 20000.
struct StudyPlan {
  std::vector<int> designs{1, 2, 3, 4, 5, 6};
  std::vector<int> models{1, 2, 3, 4, 5};
  int replicates = 20;
  std::uint64_t seed = 1;
  long n_iter = 4000;
  long burn_in = 1000;
  int threads = 1;
  PriorConfig prior;
  // Optional (design, model) whitelist; empty runs the full cross product.
  std::vector<std::pair<int, int>> cells;

  void paper_scale();
  void validate() const;
  bool includes(int design, int model) const;
};

inline constexpr int kStudyCoefficients = 6;

struct MetricsRow {
  int design = 0;
  int model = 0;
  int n_ok = 0;
  int n_failed = 0;
  std::optional<double> power_b0;  // models with informative missingness only
  std::vector<std::optional<double>> power_beta = std::vector<std::optional<double>>(kStudyCoefficients);
  std::optional<double> mse100;
  std::optional<double> relbias6;

  bool operator==(const MetricsRow&) const = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  const MetricsRow* find(int design, int model) const;
  bool operator==(const MetricsTable&) const = default;
};

/// Substream of the data generator for replicate r of design d.
std::uint64_t replicate_stream(int design, int replicate);
/// Chain seed for one (design, replicate, model) fit.
std::uint64_t chain_seed(std::uint64_t base, int design, int replicate, int model);

/// Replicate-level outcome of one fit.
struct ReplicateFit {
  bool ok = false;
  std::string error;
  Vector beta_mean;
  std::vector<bool> beta_excludes_zero;
  std::optional<bool> b0_excludes_zero;
};

ReplicateFit fit_replicate(const Dataset& data, int model, const StudyPlan& plan, std::uint64_t seed);

using StudyProgress = std::function<void(int design, int model, int replicate, const ReplicateFit&)>;

MetricsTable run_study(const StudyPlan& plan, const StudyProgress& progress = {});

std::string metrics_csv(const MetricsTable& table);
MetricsTable parse_metrics_csv(const std::string& text);
std::string format_metrics_table(const MetricsTable& table);

}  // namespace lsfm
