#pragma once

#include "lsfm/model.hpp"
#include "lsfm/sampler.hpp"
#include "lsfm/simstudy.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lsfm {

/// Flat, dotted key=value run configuration. Every key has a default;
/// unknown keys and unparsable values raise ConfigError naming the key.
/// Later assignments override earlier ones, so a config file followed by
/// command-line pairs gives flags precedence.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  // Parses "key=value" (one assignment).
  void assign(const std::string& pair);
  // Reads a config file: key=value lines, '#' comments, blank lines.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& source = "config");

  const std::string& get(const std::string& key) const;
  bool is_default(const std::string& key) const;
  long get_long(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  bool get_switch(const std::string& key) const;  // on/off
  std::vector<int> get_int_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& preset() const { return preset_; }

  /// Canonical key=value text (sorted) and its FNV-1a hash.
  std::string canonical() const;
  std::uint64_t hash() const;

  /// Manifest text: comment header (version, hash, seed, preset) followed by
  /// the canonical assignments. Feeding it back reproduces the run.
  std::string manifest(const std::string& subcommand) const;

  static const std::vector<std::string>& known_keys();

 private:
  void apply_preset(const std::string& name);
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> defaults_;
  std::string preset_;
};

/// Expands a sensitivity preset "r<ref>-uv<u=v>-w<w>-g<grid>" with
/// ref in {1,2,3}, u=v in {0.1, 0.0001}, w in {10, 1000}, grid in {1,2,3}.
std::map<std::string, std::string> sensitivity_preset(const std::string& name);
std::vector<std::string> sensitivity_preset_names();

FitConfig fit_config(const RunConfig& cfg);
DesignSpec design_spec(const RunConfig& cfg);
StudyPlan study_plan(const RunConfig& cfg);

/// Applies the model.* data options (reference response, grid override,
/// response standardization, spatial covariates) to a loaded dataset.
void prepare_dataset(const RunConfig& cfg, Dataset& data, ResponseScaling* scaling = nullptr);

std::string version_string();

}  // namespace lsfm
