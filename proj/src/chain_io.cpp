#include "lsfm/chain_io.hpp"

#include "lsfm/csv.hpp"
#include "lsfm/dataset_io.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace lsfm {

namespace fs = std::filesystem;

std::string draws_csv(const ChainOutput& chain) {
  std::string out = "iteration,parameter,value\n";
  out.reserve(out.size() + static_cast<size_t>(chain.draws.size()) * 32);
  for (Index r = 0; r < chain.draws.rows(); ++r) {
    const std::string it = std::to_string(chain.iterations[r]) + ',';
    for (Index c = 0; c < chain.draws.cols(); ++c) {
      out += it;
      out += chain.names[c];
      out += ',';
      out += format_double(chain.draws(r, c));
      out += '\n';
    }
  }
  return out;
}

std::string summary_csv(const ChainOutput& chain) {
  std::ostringstream os;
  os << "parameter,mean,sd,q2.5,q50,q97.5,acceptance_rate\n";
  for (const auto& s : chain.summary) {
    os << s.name << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ','
       << format_double(s.q025) << ',' << format_double(s.q50) << ',' << format_double(s.q975) << ',';
    if (!std::isnan(s.acceptance)) os << format_double(s.acceptance);
    os << '\n';
  }
  return os.str();
}

std::string deviance_csv(const ChainOutput& chain) {
  std::ostringstream os;
  os << "iteration,deviance\n";
  for (size_t t = 0; t < chain.deviance.size(); ++t)
    os << t + 1 << ',' << format_double(chain.deviance[t]) << '\n';
  return os.str();
}

std::string mu_summary_csv(const ChainOutput& chain, const Dataset& data) {
  std::ostringstream os;
  os << "patient_id,site,mean,sd\n";
  const Matrix& m = chain.means.mu;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index s = 0; s < m.cols(); ++s)
      os << data.patient_ids[i] << ',' << s << ',' << format_double(m(i, s)) << ','
         << format_double(chain.means.mu_sd(i, s)) << '\n';
  return os.str();
}

namespace {

void put_block(std::ostringstream& os, const char* name, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      os << name << ',' << r << ',' << c << ',' << format_double(m(r, c)) << '\n';
}

void put_block(std::ostringstream& os, const char* name, const Vector& v) {
  for (Index r = 0; r < v.size(); ++r) os << name << ',' << r << ",0," << format_double(v(r)) << '\n';
}

}  // namespace

std::string posterior_means_csv(const ChainOutput& chain) {
  std::ostringstream os;
  os << "block,row,col,value\n";
  const PosteriorMeans& m = chain.means;
  put_block(os, "a", m.a);
  put_block(os, "b", m.b);
  put_block(os, "alpha", m.alpha);
  put_block(os, "beta", m.beta);
  put_block(os, "sigma2", m.sigma2);
  put_block(os, "tau2", m.tau2);
  put_block(os, "rho", m.rho);
  put_block(os, "mu", m.mu);
  put_block(os, "mu_sd", m.mu_sd);
  return os.str();
}

void write_chain(const ChainOutput& chain, const Dataset& data, const fs::path& dir) {
  std::ostringstream cfg;
  cfg << "mean_regression=" << (chain.mean_regression ? "on" : "off") << '\n'
      << "spatial=" << (chain.spatial ? "on" : "off") << '\n'
      << "informative_missing=" << (chain.informative_missing ? "on" : "off") << '\n'
      << "patient_variances=" << to_string(chain.variances) << '\n'
      << "n_iter=" << chain.n_iter << '\n'
      << "burn_in=" << chain.burn_in << '\n'
      << "thin=" << chain.thin << '\n';
  write_atomic(dir / "draws.csv", draws_csv(chain));
  write_atomic(dir / "summary.csv", summary_csv(chain));
  write_atomic(dir / "deviance.csv", deviance_csv(chain));
  write_atomic(dir / "mu_summary.csv", mu_summary_csv(chain, data));
  write_atomic(dir / "posterior_means.csv", posterior_means_csv(chain));
  write_atomic(dir / "chain.cfg", cfg.str());
}

ChainOutput read_chain(const fs::path& dir) {
  ChainOutput out;
  const auto cfg = read_key_values(dir / "chain.cfg");
  auto flag = [&](const char* k) { return cfg.count(k) && cfg.at(k) == "on"; };
  auto num = [&](const char* k) { return cfg.count(k) ? parse_long(cfg.at(k), k, 0) : 0L; };
  out.mean_regression = flag("mean_regression");
  out.spatial = flag("spatial");
  out.informative_missing = flag("informative_missing");
  out.variances = cfg.count("patient_variances") && cfg.at("patient_variances") == "per_patient"
                      ? VariancePooling::per_patient
                      : VariancePooling::pooled;
  out.n_iter = num("n_iter");
  out.burn_in = num("burn_in");
  out.thin = num("thin");

  {
    const CsvTable t = read_csv(dir / "draws.csv");
    std::map<std::string, Index> col;
    std::vector<std::vector<double>> rows;
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const long it = parse_long(t.rows[r][0], "iteration", t.line_numbers[r]);
      if (out.iterations.empty() || out.iterations.back() != it) {
        out.iterations.push_back(it);
        rows.emplace_back();
      }
      auto [pos, fresh] = col.emplace(t.rows[r][1], static_cast<Index>(out.names.size()));
      if (fresh) out.names.push_back(t.rows[r][1]);
      auto& row = rows.back();
      if (static_cast<size_t>(pos->second) >= row.size()) row.resize(pos->second + 1);
      row[pos->second] = parse_double(t.rows[r][2], "value", t.line_numbers[r]);
    }
    out.draws.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.names.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != out.names.size())
        throw DataError("draws.csv: iteration " + std::to_string(out.iterations[r]) + " is incomplete");
      for (size_t c = 0; c < rows[r].size(); ++c) out.draws(r, c) = rows[r][c];
    }
  }
  {
    const CsvTable t = read_csv(dir / "summary.csv");
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const long line = t.line_numbers[r];
      ParameterSummary s;
      s.name = row[0];
      s.mean = parse_double(row[1], "mean", line);
      s.sd = parse_double(row[2], "sd", line);
      s.q025 = parse_double(row[3], "q2.5", line);
      s.q50 = parse_double(row[4], "q50", line);
      s.q975 = parse_double(row[5], "q97.5", line);
      if (!row[6].empty()) s.acceptance = parse_double(row[6], "acceptance_rate", line);
      out.summary.push_back(s);
    }
  }
  {
    const CsvTable t = read_csv(dir / "deviance.csv");
    for (size_t r = 0; r < t.rows.size(); ++r)
      out.deviance.push_back(parse_double(t.rows[r][1], "deviance", t.line_numbers[r]));
  }
  {
    const CsvTable t = read_csv(dir / "posterior_means.csv");
    std::map<std::string, std::vector<std::tuple<long, long, double>>> blocks;
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const long line = t.line_numbers[r];
      blocks[t.rows[r][0]].emplace_back(parse_long(t.rows[r][1], "row", line),
                                        parse_long(t.rows[r][2], "col", line),
                                        parse_double(t.rows[r][3], "value", line));
    }
    auto matrix = [&](const char* name) {
      const auto& entries = blocks[name];
      long rows = 0, cols = 0;
      for (const auto& [r, c, v] : entries) {
        rows = std::max(rows, r + 1);
        cols = std::max(cols, c + 1);
      }
      Matrix m = Matrix::Zero(rows, cols);
      for (const auto& [r, c, v] : entries) m(r, c) = v;
      return m;
    };
    auto vector = [&](const char* name) -> Vector {
      const Matrix m = matrix(name);
      return m.cols() == 0 ? Vector(0) : Vector(m.col(0));
    };
    PosteriorMeans& m = out.means;
    m.a = vector("a");
    m.b = vector("b");
    m.alpha = vector("alpha");
    m.beta = vector("beta");
    m.sigma2 = matrix("sigma2");
    m.tau2 = vector("tau2");
    m.rho = vector("rho");
    m.mu = matrix("mu");
    m.mu_sd = matrix("mu_sd");
  }
  return out;
}

}  // namespace lsfm
