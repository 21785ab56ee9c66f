#include "lsfm/commands.hpp"

#include "lsfm/chain_io.hpp"
#include "lsfm/csv.hpp"
#include "lsfm/dataset_io.hpp"
#include "lsfm/diagnostics.hpp"
#include "lsfm/simstudy.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <sstream>

namespace lsfm {

namespace fs = std::filesystem;

namespace {

fs::path require_path(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw ConfigError(key, "a path is required");
  return fs::path(v);
}

void write_manifest(const RunConfig& cfg, const fs::path& out, const std::string& sub) {
  write_atomic(out / "manifest.cfg", cfg.manifest(sub));
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = require_path(cfg, "out");
  const DesignSpec design = design_spec(cfg);
  const long seed = cfg.get_long("seed");
  if (seed < 0) throw ConfigError("seed", "must be nonnegative");
  RngStream rng(static_cast<std::uint64_t>(seed), kGlobalStream);
  const GeneratedData gen = generate_dataset(design, rng);
  save_dataset(gen.data, out, &gen, &design);
  write_atomic(out / "graph_edges.csv", edge_list_csv(*gen.data.graph));
  write_atomic(out / "graph_sites.csv", site_metadata_csv(*gen.data.graph));
  write_manifest(cfg, out, "simulate");
  log << "simulated design " << design.id << ": " << gen.data.n_patients() << " patients, "
      << gen.data.n_sites() << " sites -> " << out.string() << '\n';
}

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = require_path(cfg, "out");
  const FitConfig fc = fit_config(cfg);
  Dataset data = load_dataset(require_path(cfg, "data"));
  ResponseScaling scaling;
  prepare_dataset(cfg, data, &scaling);

  std::vector<std::string> warnings;
  const ChainOutput chain =
      fc.mean_regression ? fit_mean_regression(data, fc, &warnings) : run_chain(fc, data);

  write_chain(chain, data, out);
  if (cfg.get_switch("model.standardize_responses")) {
    std::ostringstream os;
    os << "response,center,scale\n";
    for (int j = 0; j < data.n_responses(); ++j)
      os << data.responses[j].name << ',' << format_double(scaling.center[j]) << ','
         << format_double(scaling.scale[j]) << '\n';
    write_atomic(out / "scaling.csv", os.str());
  }
  if (!warnings.empty()) {
    std::string text;
    for (const auto& w : warnings) text += w + '\n';
    write_atomic(out / "warnings.txt", text);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
  }
  write_manifest(cfg, out, "fit");

  log << "fitted model " << cfg.get("model.variant") << " (" << chain.draws.rows()
      << " retained draws) -> " << out.string() << '\n';
  for (const auto& s : chain.summary) {
    if (s.name.rfind("beta[", 0) != 0 && s.name != "b[missing]") continue;
    log << "  " << s.name << ": mean " << s.mean << ", 95% [" << s.q025 << ", " << s.q975 << "]"
        << (s.excludes_zero() ? " *" : "") << '\n';
  }
}

void cmd_diagnose(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = require_path(cfg, "out");
  const fs::path chain_dir = require_path(cfg, "chain");
  Dataset data = load_dataset(require_path(cfg, "data"));
  prepare_dataset(cfg, data);
  const ChainOutput chain = read_chain(chain_dir);
  if (chain.mean_regression || !chain.spatial)
    throw ConfigError("chain", "influence diagnostics need a fit with the spatial term on");
  if (chain.means.mu.rows() != data.n_patients() || chain.means.mu.cols() != data.n_sites())
    throw ConfigError("chain", "chain does not match the dataset dimensions");

  const CarStructure<double> car(*data.graph);
  const InfluenceReport report = influence_report(data, chain.means, car,
                                                  cfg.get_optional_double("diagnose.site_rho"),
                                                  cfg.get_optional_double("diagnose.site_delta"));
  std::ostringstream meta;
  meta << "heuristic=" << (report.heuristic ? "yes" : "no") << '\n'
       << "site_rho=" << format_double(report.site_rho) << '\n'
       << "site_delta=" << format_double(report.site_delta) << '\n';

  std::optional<DicResult> d;
  const std::string& mode = cfg.get("diagnose.dic");
  if (mode == "on") {
    d = dic(chain, data);
  } else if (mode == "auto") {
    try {
      d = dic(chain, data);
    } catch (const ConfigError& e) {
      meta << "dic=unsupported (" << e.what() << ")\n";
    }
  }

  write_atomic(out / "influence.csv", influence_csv(report));
  write_atomic(out / "site_weights.csv", site_weights_csv(report));
  if (d) {
    std::ostringstream os;
    os << "dic,p_d,mean_deviance,deviance_at_mean\n"
       << format_double(d->dic) << ',' << format_double(d->p_d) << ','
       << format_double(d->mean_deviance) << ',' << format_double(d->deviance_at_mean) << '\n';
    write_atomic(out / "dic.csv", os.str());
    if (d->p_d < 0) log << "warning: negative p_D (" << d->p_d << "); the chain may be poorly mixed\n";
  }
  write_atomic(out / "diagnostics.cfg", meta.str());
  write_manifest(cfg, out, "diagnose");
  log << "influence for " << report.patients.size() << " patients"
      << (report.heuristic ? " (posterior-mean approximation)" : "");
  if (d) log << "; DIC " << d->dic << " (p_D " << d->p_d << ")";
  log << " -> " << out.string() << '\n';
}

void cmd_sim_study(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = require_path(cfg, "out");
  const StudyPlan plan = study_plan(cfg);
  const bool verbose = cfg.get_long("verbosity") > 0;
  const MetricsTable table = run_study(plan, [&](int d, int m, int r, const ReplicateFit& f) {
    if (verbose)
      log << "design " << d << " model " << m << " replicate " << r + 1 << ": "
          << (f.ok ? "ok" : "failed: " + f.error) << '\n';
  });
  const std::string text = format_metrics_table(table);
  write_atomic(out / "metrics.csv", metrics_csv(table));
  write_atomic(out / "metrics.txt", text);
  write_manifest(cfg, out, "sim-study");
  log << text;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent spatial factor model for site-level periodontal data", "lsfm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  struct Options {
    std::string config, out, data, chain, preset;
    long seed = -1;
    int threads = 0;
    bool paper_scale = false;
    int verbose = 0;
    std::vector<std::string> pairs;
  } opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "config file of key=value lines");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("--threads", opt.threads, "worker threads");
    sub->add_option("--preset", opt.preset, "sensitivity preset r<1-3>-uv<0.1|0.0001>-w<10|1000>-g<1-3>");
    sub->add_flag("-v,--verbose", opt.verbose, "more progress output");
    sub->add_option("pairs", opt.pairs, "key=value overrides");
  };
  auto* simulate = app.add_subcommand("simulate", "generate a dataset from a simulation design");
  auto* fit = app.add_subcommand("fit", "fit a model variant to a dataset");
  auto* diagnose = app.add_subcommand("diagnose", "influence weights and DIC for a fitted chain");
  auto* study = app.add_subcommand("sim-study", "run the simulation study");
  for (auto* sub : {simulate, fit, diagnose, study}) add_common(sub);
  for (auto* sub : {fit, diagnose}) sub->add_option("--data", opt.data, "dataset directory");
  diagnose->add_option("--chain", opt.chain, "directory written by fit");
  study->add_flag("--paper-scale", opt.paper_scale, "100 replicates of 20000 iterations");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();

  try {
    // Layers: defaults, then (for diagnose) the fit manifest, then the
    // config file, then flags and key=value pairs.
    auto overlay = [&](RunConfig& cfg) {
      if (!opt.config.empty()) cfg.load_file(opt.config);
      if (!opt.preset.empty()) cfg.set("preset", opt.preset);
      for (const auto& p : opt.pairs) cfg.assign(p);
      if (!opt.out.empty()) cfg.set("out", opt.out);
      if (!opt.data.empty()) cfg.set("data", opt.data);
      if (!opt.chain.empty()) cfg.set("chain", opt.chain);
      if (opt.seed >= 0) cfg.set("seed", std::to_string(opt.seed));
      if (opt.threads > 0) cfg.set("threads", std::to_string(opt.threads));
      if (opt.paper_scale) cfg.set("study.paper_scale", "on");
      if (opt.verbose > 0) cfg.set("verbosity", std::to_string(opt.verbose));
    };
    RunConfig cfg;
    overlay(cfg);
    if (name == "diagnose" && !cfg.get("chain").empty()) {
      const fs::path manifest = fs::path(cfg.get("chain")) / "manifest.cfg";
      if (fs::exists(manifest)) {
        RunConfig layered;
        layered.load_file(manifest);
        layered.set("out", "");
        overlay(layered);
        cfg = layered;
      }
    }
    if (name == "simulate") cmd_simulate(cfg, out);
    else if (name == "fit") cmd_fit(cfg, out);
    else if (name == "diagnose") cmd_diagnose(cfg, out);
    else cmd_sim_study(cfg, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace lsfm
