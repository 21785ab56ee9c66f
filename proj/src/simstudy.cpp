#include "lsfm/simstudy.hpp"

#include "lsfm/csv.hpp"
#include "lsfm/diagnostics.hpp"
#include "lsfm/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace lsfm {

void StudyPlan::paper_scale() {
  replicates = 100;
  n_iter = 20000;
  burn_in = 5000;
}

void StudyPlan::validate() const {
  if (replicates < 1) throw ConfigError("study.replicates", "must be at least 1");
  if (n_iter < 1) throw ConfigError("fit.n_iter", "must be positive");
  if (burn_in < 0 || burn_in >= n_iter) throw ConfigError("fit.burn_in", "must be in [0, n_iter)");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
  for (int d : designs)
    if (d < 1 || d > 6) throw ConfigError("study.designs", "designs are numbered 1 to 6");
  for (int m : models)
    if (m < 1 || m > 5) throw ConfigError("study.models", "models are numbered 1 to 5");
  prior.validate();
}

bool StudyPlan::includes(int design, int model) const {
  if (cells.empty()) return true;
  return std::find(cells.begin(), cells.end(), std::make_pair(design, model)) != cells.end();
}

const MetricsRow* MetricsTable::find(int design, int model) const {
  for (const auto& r : rows)
    if (r.design == design && r.model == model) return &r;
  return nullptr;
}

std::uint64_t replicate_stream(int design, int replicate) {
  return (std::uint64_t{1} << 48) | (static_cast<std::uint64_t>(design) << 32) |
         static_cast<std::uint64_t>(replicate);
}

std::uint64_t chain_seed(std::uint64_t base, int design, int replicate, int model) {
  // splitmix64 finalizer over the packed cell index.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (1 + (static_cast<std::uint64_t>(design) << 40 |
                                                         static_cast<std::uint64_t>(replicate) << 8 |
                                                         static_cast<std::uint64_t>(model)));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ReplicateFit fit_replicate(const Dataset& data, int model, const StudyPlan& plan, std::uint64_t seed) {
  ReplicateFit out;
  try {
    FitConfig cfg = FitConfig::for_model(model);
    cfg.n_iter = plan.n_iter;
    cfg.burn_in = plan.burn_in;
    cfg.seed = seed;
    cfg.prior = plan.prior;
    const ChainOutput chain = run_chain(cfg, data);
    out.beta_mean = chain.means.beta;
    for (const auto& name : data.covariate_names)
      out.beta_excludes_zero.push_back(chain.find("beta[" + name + "]").excludes_zero());
    if (cfg.informative_missing) out.b0_excludes_zero = chain.find("b[missing]").excludes_zero();
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

MetricsTable run_study(const StudyPlan& plan, const StudyProgress& progress) {
  plan.validate();
  struct Job {
    int design, model, replicate;
  };
  std::vector<Job> jobs;
  for (int d : plan.designs)
    for (int m : plan.models)
      if (plan.includes(d, m))
        for (int r = 0; r < plan.replicates; ++r) jobs.push_back({d, m, r});

  std::vector<ReplicateFit> fits(jobs.size());
  // Replicate data depend only on (seed, design, replicate); regenerate per
  // job so jobs stay independent.
  parallel_for(static_cast<int>(jobs.size()), plan.threads, [&](int k) {
    const Job& job = jobs[k];
    RngStream rng(plan.seed, replicate_stream(job.design, job.replicate));
    const GeneratedData gen = generate_dataset(simulation_design(job.design), rng);
    fits[k] = fit_replicate(gen.data, job.model,
                            plan, chain_seed(plan.seed, job.design, job.replicate, job.model));
    if (progress && plan.threads == 1) progress(job.design, job.model, job.replicate, fits[k]);
  });

  MetricsTable table;
  size_t k = 0;
  while (k < jobs.size()) {
    const int d = jobs[k].design, m = jobs[k].model;
    const DesignSpec spec = simulation_design(d);
    const int p = static_cast<int>(spec.beta.size());
    std::vector<const ReplicateFit*> ok;
    MetricsRow row;
    row.design = d;
    row.model = m;
    for (; k < jobs.size() && jobs[k].design == d && jobs[k].model == m; ++k) {
      if (fits[k].ok) ok.push_back(&fits[k]);
      else ++row.n_failed;
    }
    row.n_ok = static_cast<int>(ok.size());
    if (!ok.empty()) {
      Matrix est(row.n_ok, p);
      std::vector<int> excl(p, 0);
      int b0_excl = 0;
      bool has_b0 = false;
      for (int r = 0; r < row.n_ok; ++r) {
        est.row(r) = ok[r]->beta_mean.transpose();
        for (int j = 0; j < p; ++j) excl[j] += ok[r]->beta_excludes_zero[j] ? 1 : 0;
        if (ok[r]->b0_excludes_zero) {
          has_b0 = true;
          b0_excl += *ok[r]->b0_excludes_zero ? 1 : 0;
        }
      }
      const StudyMetrics sm = study_metrics(est, spec.beta);
      for (int j = 0; j < p && j < kStudyCoefficients; ++j)
        row.power_beta[j] = static_cast<double>(excl[j]) / row.n_ok;
      if (has_b0) row.power_b0 = static_cast<double>(b0_excl) / row.n_ok;
      row.mse100 = 100.0 * sm.mse;
      row.relbias6 = sm.relbias[p - 1];
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

const char* kMetricsHeader =
    "design,model,n_ok,n_failed,power_b0,power_beta1,power_beta2,power_beta3,power_beta4,"
    "power_beta5,power_beta6,mse100,relbias6";

std::optional<double> optional_field(const std::string& s, long line) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, "metric", line);
}

std::string fixed(const std::optional<double>& x, int digits) {
  if (!x) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *x);
  return buf;
}

}  // namespace

std::string metrics_csv(const MetricsTable& table) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& r : table.rows) {
    os << r.design << ',' << r.model << ',' << r.n_ok << ',' << r.n_failed << ','
       << format_optional(r.power_b0);
    for (const auto& pw : r.power_beta) os << ',' << format_optional(pw);
    os << ',' << format_optional(r.mse100) << ',' << format_optional(r.relbias6) << '\n';
  }
  return os.str();
}

MetricsTable parse_metrics_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  std::ostringstream expected;
  for (size_t c = 0; c < t.header.size(); ++c) expected << (c ? "," : "") << t.header[c];
  if (expected.str() != kMetricsHeader) throw DataError("unexpected metrics header", 1);
  MetricsTable table;
  for (size_t k = 0; k < t.rows.size(); ++k) {
    const auto& f = t.rows[k];
    const long line = t.line_numbers[k];
    MetricsRow r;
    r.design = static_cast<int>(parse_long(f[0], "design", line));
    r.model = static_cast<int>(parse_long(f[1], "model", line));
    r.n_ok = static_cast<int>(parse_long(f[2], "n_ok", line));
    r.n_failed = static_cast<int>(parse_long(f[3], "n_failed", line));
    r.power_b0 = optional_field(f[4], line);
    for (int j = 0; j < kStudyCoefficients; ++j) r.power_beta[j] = optional_field(f[5 + j], line);
    r.mse100 = optional_field(f[11], line);
    r.relbias6 = optional_field(f[12], line);
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::string format_metrics_table(const MetricsTable& table) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-6s %-5s %5s %6s %6s %6s %6s %6s %6s %8s %8s  %s\n", "Design",
                "Model", "b0", "beta1", "beta2", "beta3", "beta4", "beta5", "beta6", "100*MSE",
                "RelBias6", "ok/failed");
  os << buf;
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%-6d %-5d %5s %6s %6s %6s %6s %6s %6s %8s %8s  %d/%d\n",
                  r.design, r.model, fixed(r.power_b0, 2).c_str(), fixed(r.power_beta[0], 2).c_str(),
                  fixed(r.power_beta[1], 2).c_str(), fixed(r.power_beta[2], 2).c_str(),
                  fixed(r.power_beta[3], 2).c_str(), fixed(r.power_beta[4], 2).c_str(),
                  fixed(r.power_beta[5], 2).c_str(), fixed(r.mse100, 3).c_str(),
                  fixed(r.relbias6, 3).c_str(), r.n_ok, r.n_failed);
    os << buf;
  }
  return os.str();
}

}  // namespace lsfm
