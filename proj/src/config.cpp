#include "lsfm/config.hpp"

#include "lsfm/csv.hpp"

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#ifndef LSFM_VERSION
#define LSFM_VERSION "0.0.0"
#endif

namespace lsfm {

namespace {

enum class KeyKind { integer, real, optional_real, text, on_off, tri_state, int_list };

struct KeySpec {
  const char* key;
  const char* default_value;
  KeyKind kind;
};

// tri_state: auto | on | off
const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", "1", KeyKind::integer},
      {"threads", "1", KeyKind::integer},
      {"verbosity", "0", KeyKind::integer},
      {"data", "", KeyKind::text},
      {"out", "", KeyKind::text},
      {"chain", "", KeyKind::text},
      {"fit.n_iter", "20000", KeyKind::integer},
      {"fit.burn_in", "5000", KeyKind::integer},
      {"fit.thin", "1", KeyKind::integer},
      {"model.variant", "5", KeyKind::integer},
      {"model.spatial", "auto", KeyKind::tri_state},
      {"model.informative_missing", "auto", KeyKind::tri_state},
      {"model.patient_variances", "auto", KeyKind::text},
      {"model.reference", "", KeyKind::text},
      {"model.grid", "", KeyKind::text},
      {"model.standardize_responses", "off", KeyKind::on_off},
      {"model.spatial_covariates", "file", KeyKind::text},
      {"prior.u", "0.1", KeyKind::real},
      {"prior.v", "0.1", KeyKind::real},
      {"prior.w", "10", KeyKind::real},
      {"sampler.rho_concentration", "50", KeyKind::real},
      {"sampler.target_acceptance", "0.4", KeyKind::real},
      {"sampler.proposal_sd", "0.5", KeyKind::real},
      {"design.id", "1", KeyKind::integer},
      {"design.n_patients", "50", KeyKind::integer},
      {"design.teeth_per_quadrant", "7", KeyKind::integer},
      {"design.quadrants", "1", KeyKind::integer},
      {"design.grid", "grid1", KeyKind::text},
      {"design.granularity", "site", KeyKind::text},
      {"design.rho", "", KeyKind::optional_real},
      {"design.b0", "", KeyKind::optional_real},
      {"design.a0", "", KeyKind::optional_real},
      {"design.responses", "", KeyKind::text},
      {"study.designs", "1,2,3,4,5,6", KeyKind::int_list},
      {"study.models", "1,2,3,4,5", KeyKind::int_list},
      {"study.replicates", "20", KeyKind::integer},
      {"study.n_iter", "4000", KeyKind::integer},
      {"study.burn_in", "1000", KeyKind::integer},
      {"study.paper_scale", "off", KeyKind::on_off},
      {"diagnose.dic", "auto", KeyKind::tri_state},
      {"diagnose.site_rho", "", KeyKind::optional_real},
      {"diagnose.site_delta", "", KeyKind::optional_real},
  };
  return specs;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a = {
      {"design", "design.id"}, {"variant", "model.variant"}, {"grid", "model.grid"}};
  return a;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : key_specs())
    if (key == s.key) return &s;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_long_text(const std::string& v, long& out) {
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && p == v.data() + v.size();
}

bool parse_double_text(const std::string& v, double& out) {
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && p == v.data() + v.size() && std::isfinite(out);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

void check_value(const KeySpec& spec, const std::string& value) {
  const std::string key = spec.key;
  switch (spec.kind) {
    case KeyKind::integer: {
      long v;
      if (!parse_long_text(value, v)) throw ConfigError(key, "expected an integer, got '" + value + "'");
      break;
    }
    case KeyKind::real: {
      double v;
      if (!parse_double_text(value, v)) throw ConfigError(key, "expected a number, got '" + value + "'");
      break;
    }
    case KeyKind::optional_real: {
      double v;
      if (!value.empty() && !parse_double_text(value, v))
        throw ConfigError(key, "expected a number, got '" + value + "'");
      break;
    }
    case KeyKind::on_off:
      if (value != "on" && value != "off") throw ConfigError(key, "expected on or off, got '" + value + "'");
      break;
    case KeyKind::tri_state:
      if (value != "on" && value != "off" && value != "auto")
        throw ConfigError(key, "expected auto, on or off, got '" + value + "'");
      break;
    case KeyKind::int_list:
      for (const auto& item : split(value, ',')) {
        long v;
        if (!parse_long_text(item, v)) throw ConfigError(key, "expected a comma-separated integer list");
      }
      break;
    case KeyKind::text:
      break;
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& s : key_specs()) values_[s.key] = defaults_[s.key] = s.default_value;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : key_specs()) k.push_back(s.key);
    k.push_back("preset");
    return k;
  }();
  return keys;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (auto it = aliases().find(key); it != aliases().end()) key = it->second;
  if (key == "preset") {
    apply_preset(value);
    return;
  }
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError(key, "unknown configuration key");
  check_value(*spec, value);
  values_[key] = value;
}

void RunConfig::assign(const std::string& pair) {
  const auto eq = pair.find('=');
  if (eq == std::string::npos) throw ConfigError(pair, "expected key=value");
  set(pair.substr(0, eq), pair.substr(eq + 1));
}

void RunConfig::load_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line, source + " line " + std::to_string(n) + ": expected key=value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const DataError&) {
    throw ConfigError("config", "cannot read " + path.string());
  }
  load_text(text, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown configuration key");
  return it->second;
}

bool RunConfig::is_default(const std::string& key) const { return get(key) == defaults_.at(key); }

long RunConfig::get_long(const std::string& key) const {
  long v = 0;
  if (!parse_long_text(get(key), v)) throw ConfigError(key, "expected an integer");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0;
  if (!parse_double_text(get(key), v)) throw ConfigError(key, "expected a number");
  return v;
}

std::optional<double> RunConfig::get_optional_double(const std::string& key) const {
  if (get(key).empty()) return std::nullopt;
  return get_double(key);
}

bool RunConfig::get_switch(const std::string& key) const { return get(key) == "on"; }

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split(get(key), ',')) {
    long v;
    if (!parse_long_text(item, v)) throw ConfigError(key, "expected a comma-separated integer list");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  return os.str();
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::manifest(const std::string& subcommand) const {
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(hash()));
  std::ostringstream os;
  os << "# lsfm run manifest\n"
     << "# subcommand=" << subcommand << '\n'
     << "# version=" << version_string() << '\n'
     << "# config_hash=" << hash_hex << '\n'
     << "# seed=" << get("seed") << '\n';
  if (!preset_.empty()) os << "# preset=" << preset_ << " (expanded below)\n";
  os << canonical();
  return os.str();
}

void RunConfig::apply_preset(const std::string& name) {
  for (const auto& [k, v] : sensitivity_preset(name)) set(k, v);
  preset_ = name;
}

std::map<std::string, std::string> sensitivity_preset(const std::string& name) {
  const auto parts = split(name, '-');
  auto bad = [&] {
    return ConfigError("preset", "expected r{1,2,3}-uv{0.1,0.0001}-w{10,1000}-g{1,2,3}, got '" +
                                     name + "'");
  };
  if (parts.size() != 4) throw bad();
  const std::set<std::string> refs{"1", "2", "3"}, uvs{"0.1", "0.0001"}, ws{"10", "1000"},
      grids{"1", "2", "3"};
  auto strip = [&](const std::string& p, const std::string& prefix, const std::set<std::string>& ok) {
    if (p.rfind(prefix, 0) != 0) throw bad();
    const std::string v = p.substr(prefix.size());
    if (!ok.count(v)) throw bad();
    return v;
  };
  std::map<std::string, std::string> out;
  out["model.reference"] = strip(parts[0], "r", refs);
  const std::string uv = strip(parts[1], "uv", uvs);
  out["prior.u"] = uv;
  out["prior.v"] = uv;
  out["prior.w"] = strip(parts[2], "w", ws);
  out["model.grid"] = "grid" + strip(parts[3], "g", grids);
  return out;
}

std::vector<std::string> sensitivity_preset_names() {
  std::vector<std::string> out;
  for (const char* r : {"1", "2", "3"})
    for (const char* uv : {"0.1", "0.0001"})
      for (const char* w : {"10", "1000"})
        for (const char* g : {"1", "2", "3"})
          out.push_back(std::string("r") + r + "-uv" + uv + "-w" + w + "-g" + g);
  return out;
}

FitConfig fit_config(const RunConfig& cfg) {
  const long variant = cfg.get_long("model.variant");
  if (variant < 1 || variant > 5) throw ConfigError("model.variant", "must be between 1 and 5");
  FitConfig fc = FitConfig::for_model(static_cast<int>(variant));
  fc.n_iter = cfg.get_long("fit.n_iter");
  fc.burn_in = cfg.get_long("fit.burn_in");
  fc.thin = cfg.get_long("fit.thin");
  const long seed = cfg.get_long("seed");
  if (seed < 0) throw ConfigError("seed", "must be nonnegative");
  fc.seed = static_cast<std::uint64_t>(seed);
  fc.threads = static_cast<int>(cfg.get_long("threads"));
  if (variant != 1) {
    if (cfg.get("model.spatial") != "auto") fc.spatial = cfg.get_switch("model.spatial");
    if (cfg.get("model.informative_missing") != "auto")
      fc.informative_missing = cfg.get_switch("model.informative_missing");
    const std::string& pv = cfg.get("model.patient_variances");
    if (pv == "pooled") fc.variances = VariancePooling::pooled;
    else if (pv == "per_patient" || pv == "per-patient") fc.variances = VariancePooling::per_patient;
    else if (pv != "auto")
      throw ConfigError("model.patient_variances", "expected auto, pooled or per_patient");
  }
  fc.prior.u = cfg.get_double("prior.u");
  fc.prior.v = cfg.get_double("prior.v");
  fc.prior.w = cfg.get_double("prior.w");
  fc.rho_concentration = cfg.get_double("sampler.rho_concentration");
  fc.target_acceptance = cfg.get_double("sampler.target_acceptance");
  fc.initial_proposal_sd = cfg.get_double("sampler.proposal_sd");
  fc.validate();
  return fc;
}

DesignSpec design_spec(const RunConfig& cfg) {
  const long id = cfg.get_long("design.id");
  if (id < 1 || id > 6) throw ConfigError("design.id", "must be between 1 and 6");
  DesignSpec d = simulation_design(static_cast<int>(id));
  d.n_patients = static_cast<int>(cfg.get_long("design.n_patients"));
  if (d.n_patients < 1) throw ConfigError("design.n_patients", "must be positive");
  d.teeth_per_quadrant = static_cast<int>(cfg.get_long("design.teeth_per_quadrant"));
  if (d.teeth_per_quadrant < 1) throw ConfigError("design.teeth_per_quadrant", "must be positive");
  d.quadrants = static_cast<int>(cfg.get_long("design.quadrants"));
  if (d.quadrants != 1 && d.quadrants != 2 && d.quadrants != 4)
    throw ConfigError("design.quadrants", "must be 1, 2 or 4");
  try {
    d.grid = parse_grid_variant(cfg.get("design.grid"));
    d.granularity = parse_granularity(cfg.get("design.granularity"));
  } catch (const ConfigError& e) {
    const std::string key = e.key() == "graph.grid" ? "design.grid" : "design.granularity";
    throw ConfigError(key, e.what());
  }
  if (auto v = cfg.get_optional_double("design.rho")) {
    if (*v < 0.0 || *v >= 1.0) throw ConfigError("design.rho", "must be in [0, 1)");
    d.rho = *v;
  }
  if (auto v = cfg.get_optional_double("design.b0")) d.b0 = *v;
  if (auto v = cfg.get_optional_double("design.a0")) d.a0 = *v;
  const std::string& resp = cfg.get("design.responses");
  if (!resp.empty()) {
    d.responses.clear();
    for (const auto& item : split(resp, ',')) {
      // name[:kind[:a[:b]]]
      const auto f = split(item, ':');
      ResponseTruth t;
      t.spec.name = f[0];
      if (t.spec.name.empty()) throw ConfigError("design.responses", "empty response name");
      if (f.size() > 1) {
        if (f[1] == "binary") t.spec.kind = ResponseKind::binary;
        else if (f[1] != "continuous") throw ConfigError("design.responses", "unknown kind '" + f[1] + "'");
      }
      if (f.size() > 2 && !parse_double_text(f[2], t.a)) throw ConfigError("design.responses", "bad intercept");
      if (f.size() > 3 && !parse_double_text(f[3], t.b)) throw ConfigError("design.responses", "bad slope");
      if (f.size() > 4) throw ConfigError("design.responses", "expected name:kind:a:b");
      d.responses.push_back(t);
    }
  }
  return d;
}

StudyPlan study_plan(const RunConfig& cfg) {
  StudyPlan plan;
  plan.designs = cfg.get_int_list("study.designs");
  plan.models = cfg.get_int_list("study.models");
  plan.replicates = static_cast<int>(cfg.get_long("study.replicates"));
  plan.n_iter = cfg.get_long("study.n_iter");
  plan.burn_in = cfg.get_long("study.burn_in");
  if (cfg.get_switch("study.paper_scale")) plan.paper_scale();
  const long seed = cfg.get_long("seed");
  if (seed < 0) throw ConfigError("seed", "must be nonnegative");
  plan.seed = static_cast<std::uint64_t>(seed);
  plan.threads = static_cast<int>(cfg.get_long("threads"));
  plan.prior.u = cfg.get_double("prior.u");
  plan.prior.v = cfg.get_double("prior.v");
  plan.prior.w = cfg.get_double("prior.w");
  try {
    plan.validate();
  } catch (const ConfigError& e) {
    if (e.key() == "fit.n_iter" || e.key() == "fit.burn_in")
      throw ConfigError(e.key() == "fit.n_iter" ? "study.n_iter" : "study.burn_in",
                        "must satisfy 0 <= burn_in < n_iter");
    throw;
  }
  return plan;
}

void prepare_dataset(const RunConfig& cfg, Dataset& data, ResponseScaling* scaling) {
  const std::string& ref = cfg.get("model.reference");
  if (!ref.empty()) {
    int found = -1;
    for (int j = 0; j < data.n_responses(); ++j)
      if (data.responses[j].name == ref) found = j;
    long idx;
    if (found < 0 && parse_long_text(ref, idx) && idx >= 1 && idx <= data.n_responses())
      found = static_cast<int>(idx - 1);
    if (found < 0) throw ConfigError("model.reference", "no response named or numbered '" + ref + "'");
    data.reference = found;
  }
  const std::string& grid = cfg.get("model.grid");
  if (!grid.empty()) {
    GridVariant g;
    try {
      g = parse_grid_variant(grid);
    } catch (const ConfigError& e) {
      throw ConfigError("model.grid", e.what());
    }
    data.graph = std::make_shared<const MouthGraph>(data.graph->teeth_per_quadrant(),
                                                    data.graph->n_quadrants(), g);
  }
  const std::string& sc = cfg.get("model.spatial_covariates");
  if (sc == "none") {
    data.w.resize(data.n_sites(), 0);
    data.spatial_covariate_names.clear();
  } else if (sc == "standard") {
    data.spatial_covariate_names.clear();
    data.w = standard_spatial_covariates(*data.graph, &data.spatial_covariate_names);
  } else if (sc != "file") {
    throw ConfigError("model.spatial_covariates", "expected file, standard or none");
  }
  if (cfg.get_switch("model.standardize_responses")) {
    const ResponseScaling s = standardize_responses(data);
    if (scaling) *scaling = s;
  }
}

std::string version_string() {
  return std::string("lsfm ") + LSFM_VERSION + " (eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
         std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION) + ")";
}

}  // namespace lsfm
