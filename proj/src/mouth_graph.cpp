#include "lsfm/mouth_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lsfm {

namespace {

constexpr int offset(Side side, Position pos) {
  return (side == Side::buccal ? 0 : 3) + static_cast<int>(pos);
}

}  // namespace

MouthGraph::MouthGraph(int n_teeth_per_quadrant, int n_quadrants, GridVariant grid)
    : teeth_per_quadrant_(n_teeth_per_quadrant), n_quadrants_(n_quadrants), grid_(grid) {
  if (n_teeth_per_quadrant < 1)
    throw ConfigError("graph.teeth_per_quadrant", "must be at least 1");
  if (n_quadrants != 1 && n_quadrants != 2 && n_quadrants != 4)
    throw ConfigError("graph.quadrants", "must be 1, 2 or 4");

  n_teeth_ = teeth_per_quadrant_ * n_quadrants_;
  const int n = n_teeth_ * kSitesPerTooth;
  labels_.reserve(n);
  for (int q = 0; q < n_quadrants_; ++q) {
    for (int k = 0; k < teeth_per_quadrant_; ++k) {
      const int tooth = q * teeth_per_quadrant_ + k;
      for (Side side : {Side::buccal, Side::lingual})
        for (Position pos : {Position::mesial, Position::mid, Position::distal})
          labels_.push_back({tooth, k + 1, q, q < 2 ? Jaw::maxilla : Jaw::mandible, side, pos});
    }
  }
  neighbors_.assign(n, {});
  gap_.assign(n, 0);

  for (int t = 0; t < n_teeth_; ++t) {
    auto site = [&](Side s, Position p) { return site_index(t, s, p); };
    if (grid_ == GridVariant::grid3) {
      const int first = first_site_of_tooth(t);
      for (int a = 0; a < kSitesPerTooth; ++a)
        for (int b = a + 1; b < kSitesPerTooth; ++b) add_edge(first + a, first + b);
    } else {
      for (Side s : {Side::buccal, Side::lingual}) {
        add_edge(site(s, Position::mesial), site(s, Position::mid));
        add_edge(site(s, Position::mid), site(s, Position::distal));
      }
      if (grid_ == GridVariant::grid1) {
        add_edge(site(Side::buccal, Position::mesial), site(Side::lingual, Position::mesial));
        add_edge(site(Side::buccal, Position::distal), site(Side::lingual, Position::distal));
      }
    }
  }

  // Interproximal links, identical for all grid variants.
  auto link_gap = [&](int a, int b) {
    add_edge(a, b);
    gap_[a] = gap_[b] = 1;
  };
  for (int q = 0; q < n_quadrants_; ++q) {
    for (int k = 0; k + 1 < teeth_per_quadrant_; ++k) {
      const int t = q * teeth_per_quadrant_ + k;
      for (Side s : {Side::buccal, Side::lingual})
        link_gap(site_index(t, s, Position::distal), site_index(t + 1, s, Position::mesial));
    }
  }
  // Central incisors of the two quadrants of a jaw meet at the midline.
  for (int q = 0; q + 1 < n_quadrants_; q += 2) {
    const int left = q * teeth_per_quadrant_;
    const int right = (q + 1) * teeth_per_quadrant_;
    for (Side s : {Side::buccal, Side::lingual})
      link_gap(site_index(left, s, Position::mesial), site_index(right, s, Position::mesial));
  }

  std::sort(edges_.begin(), edges_.end());
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

void MouthGraph::add_edge(int a, int b) {
  if (a > b) std::swap(a, b);
  edges_.emplace_back(a, b);
  neighbors_[a].push_back(b);
  neighbors_[b].push_back(a);
}

int MouthGraph::site_index(int tooth, Side side, Position pos) const {
  return first_site_of_tooth(tooth) + offset(side, pos);
}

bool MouthGraph::is_gap_site(int site) const { return gap_[site] != 0; }

Vector MouthGraph::degrees() const {
  Vector m(n_sites());
  for (int s = 0; s < n_sites(); ++s) m(s) = degree(s);
  return m;
}

Matrix MouthGraph::adjacency() const {
  Matrix d = Matrix::Zero(n_sites(), n_sites());
  for (const auto& [a, b] : edges_) d(a, b) = d(b, a) = 1.0;
  return d;
}

MouthGraph build_mouth_graph(int n_teeth_per_quadrant, int n_quadrants, GridVariant grid) {
  return MouthGraph(n_teeth_per_quadrant, n_quadrants, grid);
}

std::string to_string(GridVariant grid) {
  switch (grid) {
    case GridVariant::grid1: return "grid1";
    case GridVariant::grid2: return "grid2";
    case GridVariant::grid3: return "grid3";
  }
  return "grid?";
}

GridVariant parse_grid_variant(const std::string& text) {
  if (text == "1" || text == "grid1") return GridVariant::grid1;
  if (text == "2" || text == "grid2") return GridVariant::grid2;
  if (text == "3" || text == "grid3") return GridVariant::grid3;
  throw ConfigError("graph.grid", "unknown grid variant '" + text + "'");
}

Matrix tooth_average_map(const MouthGraph& graph) {
  Matrix z = Matrix::Zero(graph.n_teeth(), graph.n_sites());
  for (int t = 0; t < graph.n_teeth(); ++t)
    z.row(t).segment(graph.first_site_of_tooth(t), MouthGraph::kSitesPerTooth)
        .setConstant(1.0 / MouthGraph::kSitesPerTooth);
  return z;
}

Matrix standard_spatial_covariates(const MouthGraph& graph, std::vector<std::string>* names) {
  const int n = graph.n_sites();
  std::vector<Vector> cols;
  std::vector<std::string> labels;
  auto push = [&](const std::string& name, auto&& indicator) {
    Vector c(n);
    for (int s = 0; s < n; ++s) c(s) = indicator(s) ? 1.0 : 0.0;
    const double mean = c.mean();
    const double sd = std::sqrt((c.array() - mean).square().sum() / n);
    if (sd <= 0.0) return;
    cols.push_back((c.array() - mean) / sd);
    labels.push_back(name);
  };
  push("gap", [&](int s) { return graph.is_gap_site(s); });
  push("maxilla", [&](int s) { return graph.label(s).jaw == Jaw::maxilla; });
  for (int k = 2; k <= graph.teeth_per_quadrant(); ++k)
    push("tooth" + std::to_string(k), [&](int s) { return graph.label(s).tooth_number == k; });

  Matrix w(n, static_cast<Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) w.col(static_cast<Index>(c)) = cols[c];
  if (names) *names = labels;
  return w;
}

std::string to_string(Jaw jaw) { return jaw == Jaw::maxilla ? "maxilla" : "mandible"; }
std::string to_string(Side side) { return side == Side::buccal ? "buccal" : "lingual"; }
std::string to_string(Position pos) {
  switch (pos) {
    case Position::mesial: return "mesial";
    case Position::mid: return "mid";
    case Position::distal: return "distal";
  }
  return "";
}

std::string edge_list_csv(const MouthGraph& graph) {
  std::ostringstream os;
  os << "site_a,site_b\n";
  for (const auto& [a, b] : graph.edges()) os << a << ',' << b << '\n';
  return os.str();
}

std::string site_metadata_csv(const MouthGraph& graph) {
  std::ostringstream os;
  os << "site,tooth,jaw,side,position\n";
  for (int s = 0; s < graph.n_sites(); ++s) {
    const auto& l = graph.label(s);
    os << s << ',' << l.tooth << ',' << to_string(l.jaw) << ',' << to_string(l.side) << ','
       << to_string(l.position) << '\n';
  }
  return os.str();
}

}  // namespace lsfm
