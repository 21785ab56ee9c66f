#include "lsfm/dataset_io.hpp"

#include "lsfm/csv.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace lsfm {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string kind_name(ResponseKind k) { return k == ResponseKind::binary ? "binary" : "continuous"; }

}  // namespace

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_text(path));
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path.filename().string() + ": expected key=value", n);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void save_dataset(const Dataset& data, const fs::path& dir, const GeneratedData* truth,
                  const DesignSpec* design) {
  data.validate();
  const MouthGraph& g = *data.graph;
  const UnitMap units = data.unit_map();
  const int n = data.n_patients();

  std::ostringstream cfg;
  cfg << "graph.teeth_per_quadrant=" << g.teeth_per_quadrant() << '\n'
      << "graph.quadrants=" << g.n_quadrants() << '\n'
      << "graph.grid=" << to_string(g.grid()) << '\n'
      << "missing.granularity=" << to_string(data.granularity) << '\n'
      << "responses=";
  for (int j = 0; j < data.n_responses(); ++j)
    cfg << (j ? "," : "") << data.responses[j].name << ':' << kind_name(data.responses[j].kind);
  cfg << '\n' << "reference=" << data.responses[data.reference].name << '\n';

  std::ostringstream resp;
  resp << "patient_id,tooth,site,response_name,value\n";
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < data.n_sites(); ++s) {
      if (!data.site_present(units, i, s)) continue;
      for (int j = 0; j < data.n_responses(); ++j)
        resp << data.patient_ids[i] << ',' << g.tooth_of_site(s) << ',' << s << ','
             << data.responses[j].name << ',' << format_double(data.y[j](i, s)) << '\n';
    }

  std::ostringstream pat;
  pat << "patient_id";
  for (const auto& c : data.covariate_names) pat << ',' << c;
  pat << '\n';
  for (int i = 0; i < n; ++i) {
    pat << data.patient_ids[i];
    for (int k = 0; k < data.n_covariates(); ++k) pat << ',' << format_double(data.x(i, k));
    pat << '\n';
  }

  const bool by_tooth = data.granularity == MissingGranularity::tooth;
  std::ostringstream status;
  status << (by_tooth ? "patient_id,tooth,present\n" : "patient_id,site,present\n");
  for (int i = 0; i < n; ++i)
    for (int u = 0; u < units.n_units(); ++u)
      status << data.patient_ids[i] << ',' << u << ',' << (data.present(i, u) ? 1 : 0) << '\n';

  write_atomic(dir / DatasetFiles::header, cfg.str());
  write_atomic(dir / DatasetFiles::responses, resp.str());
  write_atomic(dir / DatasetFiles::patients, pat.str());
  write_atomic(dir / (by_tooth ? DatasetFiles::teeth : DatasetFiles::sites), status.str());

  if (data.n_spatial_covariates() > 0) {
    std::ostringstream sp;
    sp << "site";
    for (const auto& c : data.spatial_covariate_names) sp << ',' << c;
    sp << '\n';
    for (int s = 0; s < data.n_sites(); ++s) {
      sp << s;
      for (int k = 0; k < data.n_spatial_covariates(); ++k) sp << ',' << format_double(data.w(s, k));
      sp << '\n';
    }
    write_atomic(dir / DatasetFiles::spatial, sp.str());
  }

  if (truth) {
    std::ostringstream mu;
    mu << "patient_id,site,mu\n";
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < data.n_sites(); ++s)
        mu << data.patient_ids[i] << ',' << s << ',' << format_double(truth->mu(i, s)) << '\n';
    write_atomic(dir / DatasetFiles::truth_mu, mu.str());
  }
  if (design) {
    std::ostringstream t;
    t << "parameter,value\n"
      << "design," << design->id << '\n'
      << "rho," << format_double(design->rho) << '\n'
      << "a[missing]," << format_double(design->a0) << '\n'
      << "b[missing]," << format_double(design->b0) << '\n';
    for (const auto& r : design->responses) {
      t << "a[" << r.spec.name << "]," << format_double(r.a) << '\n';
      t << "b[" << r.spec.name << "]," << format_double(r.b) << '\n';
    }
    for (Index k = 0; k < design->beta.size(); ++k)
      t << "beta[" << data.covariate_names[k] << "]," << format_double(design->beta(k)) << '\n';
    write_atomic(dir / DatasetFiles::truth, t.str());
  }
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const auto cfg = read_key_values(dir / DatasetFiles::header);
  auto get = [&](const std::string& key) {
    auto it = cfg.find(key);
    if (it == cfg.end()) throw DataError(std::string(DatasetFiles::header) + ": missing key " + key);
    return it->second;
  };
  auto get_int = [&](const std::string& key) {
    return static_cast<int>(parse_long(get(key), key, 0));
  };

  Dataset data;
  try {
    data.graph = std::make_shared<const MouthGraph>(get_int("graph.teeth_per_quadrant"),
                                                    get_int("graph.quadrants"),
                                                    parse_grid_variant(get("graph.grid")));
    data.granularity = parse_granularity(get("missing.granularity"));
  } catch (const ConfigError& e) {
    throw DataError(std::string(DatasetFiles::header) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string(DatasetFiles::header) + ": " + e.what());
  }
  const MouthGraph& g = *data.graph;
  {
    std::istringstream in(get("responses"));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      const auto colon = item.find(':');
      ResponseSpec r;
      r.name = trim(item.substr(0, colon));
      const std::string kind = colon == std::string::npos ? "continuous" : trim(item.substr(colon + 1));
      if (kind == "continuous") r.kind = ResponseKind::continuous;
      else if (kind == "binary") r.kind = ResponseKind::binary;
      else throw DataError(std::string(DatasetFiles::header) + ": unknown response kind '" + kind + "'");
      data.responses.push_back(r);
    }
  }
  if (data.responses.empty()) throw DataError(std::string(DatasetFiles::header) + ": no responses");
  std::map<std::string, int> response_index;
  for (int j = 0; j < data.n_responses(); ++j) response_index[data.responses[j].name] = j;
  {
    const std::string ref = cfg.count("reference") ? cfg.at("reference") : data.responses[0].name;
    auto it = response_index.find(ref);
    if (it == response_index.end())
      throw DataError(std::string(DatasetFiles::header) + ": unknown reference response '" + ref + "'");
    data.reference = it->second;
  }

  // Patients and covariates.
  const CsvTable pat = read_csv(dir / DatasetFiles::patients);
  if (pat.column("patient_id") != 0)
    throw DataError(std::string(DatasetFiles::patients) + ": first column must be patient_id", 1);
  const int n = static_cast<int>(pat.rows.size());
  if (n == 0) throw DataError(std::string(DatasetFiles::patients) + ": no patients");
  const int p = static_cast<int>(pat.header.size()) - 1;
  data.covariate_names.assign(pat.header.begin() + 1, pat.header.end());
  data.x.resize(n, p);
  std::map<std::string, int> patient_index;
  for (int i = 0; i < n; ++i) {
    const auto& row = pat.rows[i];
    const long line = pat.line_numbers[i];
    if (!patient_index.emplace(row[0], i).second)
      throw DataError(std::string(DatasetFiles::patients) + ": duplicate patient '" + row[0] + "'", line);
    data.patient_ids.push_back(row[0]);
    for (int k = 0; k < p; ++k) {
      data.x(i, k) = parse_double(row[k + 1], data.covariate_names[k], line);
      if (!std::isfinite(data.x(i, k)))
        throw DataError(std::string(DatasetFiles::patients) + ": non-finite covariate", line);
    }
  }
  auto patient_of = [&](const std::string& id, const char* file, long line) {
    auto it = patient_index.find(id);
    if (it == patient_index.end())
      throw DataError(std::string(file) + ": unknown patient '" + id + "'", line);
    return it->second;
  };

  // Unit status.
  const UnitMap units = data.unit_map();
  const bool by_tooth = data.granularity == MissingGranularity::tooth;
  const char* status_file = by_tooth ? DatasetFiles::teeth : DatasetFiles::sites;
  const char* unit_col = by_tooth ? "tooth" : "site";
  data.present.setConstant(n, units.n_units(), false);
  Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic> status_line =
      Eigen::Array<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, units.n_units());
  {
    const CsvTable st = read_csv(dir / status_file);
    const int c_pid = st.require_column("patient_id");
    const int c_unit = st.require_column(unit_col);
    const int c_present = st.require_column("present");
    for (size_t r = 0; r < st.rows.size(); ++r) {
      const long line = st.line_numbers[r];
      const int i = patient_of(st.rows[r][c_pid], status_file, line);
      const long u = parse_long(st.rows[r][c_unit], unit_col, line);
      if (u < 0 || u >= units.n_units())
        throw DataError(std::string(status_file) + ": " + unit_col + " " + std::to_string(u) +
                            " out of range",
                        line);
      const std::string& pr = st.rows[r][c_present];
      if (pr != "0" && pr != "1")
        throw DataError(std::string(status_file) + ": present must be 0 or 1", line);
      if (status_line(i, u) != 0)
        throw DataError(std::string(status_file) + ": duplicate status for patient " +
                            data.patient_ids[i] + " " + unit_col + " " + std::to_string(u),
                        line);
      status_line(i, u) = line;
      data.present(i, u) = pr == "1";
    }
    for (int i = 0; i < n; ++i)
      for (int u = 0; u < units.n_units(); ++u)
        if (status_line(i, u) == 0)
          throw DataError(std::string(status_file) + ": no status for patient " + data.patient_ids[i] +
                          " " + unit_col + " " + std::to_string(u));
  }

  // Responses.
  const int S = g.n_sites();
  data.y.assign(data.n_responses(), Matrix::Constant(n, S, std::numeric_limits<double>::quiet_NaN()));
  {
    const CsvTable rt = read_csv(dir / DatasetFiles::responses);
    const int c_pid = rt.require_column("patient_id");
    const int c_tooth = rt.require_column("tooth");
    const int c_site = rt.require_column("site");
    const int c_name = rt.require_column("response_name");
    const int c_value = rt.require_column("value");
    for (size_t r = 0; r < rt.rows.size(); ++r) {
      const auto& row = rt.rows[r];
      const long line = rt.line_numbers[r];
      const std::string where = std::string(DatasetFiles::responses) + ": ";
      const int i = patient_of(row[c_pid], DatasetFiles::responses, line);
      const long s = parse_long(row[c_site], "site", line);
      const long t = parse_long(row[c_tooth], "tooth", line);
      if (s < 0 || s >= S) throw DataError(where + "site out of range", line);
      if (t != g.tooth_of_site(static_cast<int>(s)))
        throw DataError(where + "site " + std::to_string(s) + " does not belong to tooth " +
                            std::to_string(t),
                        line);
      auto it = response_index.find(row[c_name]);
      if (it == response_index.end())
        throw DataError(where + "unknown response '" + row[c_name] + "'", line);
      const int j = it->second;
      const double v = parse_double(row[c_value], "value", line);
      if (!std::isfinite(v)) throw DataError(where + "non-finite value", line);
      if (data.responses[j].kind == ResponseKind::binary && v != 0.0 && v != 1.0)
        throw DataError(where + "binary response must be 0 or 1", line);
      if (!data.site_present(units, i, static_cast<int>(s)))
        throw DataError(where + "patient " + data.patient_ids[i] + " tooth " + std::to_string(t) +
                            " is marked missing but has a " + row[c_name] + " value",
                        line);
      if (!std::isnan(data.y[j](i, s)))
        throw DataError(where + "duplicate value for patient " + data.patient_ids[i] + " site " +
                            std::to_string(s) + " " + row[c_name],
                        line);
      data.y[j](i, s) = v;
    }
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < S; ++s) {
        if (!data.site_present(units, i, s)) continue;
        for (int j = 0; j < data.n_responses(); ++j)
          if (std::isnan(data.y[j](i, s)))
            throw DataError(std::string(status_file) + ": patient " + data.patient_ids[i] +
                                " tooth " + std::to_string(g.tooth_of_site(s)) +
                                " is marked present but site " + std::to_string(s) + " has no " +
                                data.responses[j].name + " value",
                            status_line(i, units.unit_of_site(s)));
      }
  }

  // Optional spatial covariates.
  data.w.resize(S, 0);
  if (fs::exists(dir / DatasetFiles::spatial)) {
    const CsvTable sp = read_csv(dir / DatasetFiles::spatial);
    if (sp.column("site") != 0)
      throw DataError(std::string(DatasetFiles::spatial) + ": first column must be site", 1);
    const int q = static_cast<int>(sp.header.size()) - 1;
    data.spatial_covariate_names.assign(sp.header.begin() + 1, sp.header.end());
    data.w.resize(S, q);
    std::vector<bool> seen(S, false);
    for (size_t r = 0; r < sp.rows.size(); ++r) {
      const long line = sp.line_numbers[r];
      const long s = parse_long(sp.rows[r][0], "site", line);
      if (s < 0 || s >= S || seen[s])
        throw DataError(std::string(DatasetFiles::spatial) + ": bad or duplicate site", line);
      seen[s] = true;
      for (int k = 0; k < q; ++k) data.w(s, k) = parse_double(sp.rows[r][k + 1], "covariate", line);
    }
    for (int s = 0; s < S; ++s)
      if (!seen[s])
        throw DataError(std::string(DatasetFiles::spatial) + ": no row for site " + std::to_string(s));
  }

  data.validate();
  return data;
}

}  // namespace lsfm
