#pragma once

#include "lsfm/model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace lsfm {

/// On-disk dataset layout (one directory):
///   dataset.cfg     graph and response declarations (key=value)
///   responses.csv   patient_id,tooth,site,response_name,value
///   patients.csv    patient_id,<covariates...>
///   teeth.csv       patient_id,tooth,present   (tooth granularity)
///   sites.csv       patient_id,site,present    (site granularity)
///   spatial.csv     site,<covariates...>       (optional)
///   truth.csv / truth_mu.csv                   (optional, simulated data only)
/// Teeth and sites are 0-based global indices of the mouth graph.
struct DatasetFiles {
  static constexpr const char* header = "dataset.cfg";
  static constexpr const char* responses = "responses.csv";
  static constexpr const char* patients = "patients.csv";
  static constexpr const char* teeth = "teeth.csv";
  static constexpr const char* sites = "sites.csv";
  static constexpr const char* spatial = "spatial.csv";
  static constexpr const char* truth = "truth.csv";
  static constexpr const char* truth_mu = "truth_mu.csv";
};

/// Serializes `data` (and the generating truth, when given) into `dir`.
/// Files are written atomically; output is byte-stable for equal inputs.
void save_dataset(const Dataset& data, const std::filesystem::path& dir,
                  const GeneratedData* truth = nullptr, const DesignSpec* design = nullptr);

/// Loads and validates a dataset directory. Errors carry the offending file
/// and row (DataError).
Dataset load_dataset(const std::filesystem::path& dir);

/// Simple key=value reader used for dataset.cfg and truth files.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace lsfm
