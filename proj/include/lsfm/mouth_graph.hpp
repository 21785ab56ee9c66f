#pragma once

#include "lsfm/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lsfm {

enum class GridVariant { grid1 = 1, grid2 = 2, grid3 = 3 };

enum class Jaw { maxilla, mandible };
enum class Side { buccal, lingual };
// Position along the tooth, mesial being the end facing the midline.
enum class Position { mesial, mid, distal };

struct SiteLabel {
  int tooth;              // global tooth index
  int tooth_number;       // 1 = central incisor ... n_teeth_per_quadrant
  int quadrant;
  Jaw jaw;
  Side side;
  Position position;
};

using Edge = std::pair<int, int>;

/// Site adjacency for one mouth (or a subset of quadrants).
///
/// Sites are numbered tooth by tooth; each tooth owns six consecutive
/// sites ordered buccal mesial/mid/distal then lingual mesial/mid/distal.
/// Teeth are numbered quadrant by quadrant from the midline outward.
/// Quadrants 0,1 form the maxilla and 2,3 the mandible; the two jaws never
/// share an edge.
class MouthGraph {
 public:
  static constexpr int kSitesPerTooth = 6;

  MouthGraph(int n_teeth_per_quadrant, int n_quadrants, GridVariant grid);

  int n_sites() const { return static_cast<int>(labels_.size()); }
  int n_teeth() const { return n_teeth_; }
  int n_quadrants() const { return n_quadrants_; }
  int teeth_per_quadrant() const { return teeth_per_quadrant_; }
  GridVariant grid() const { return grid_; }

  // Each undirected edge once, with first < second, sorted.
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  int degree(int site) const { return static_cast<int>(neighbors_[site].size()); }
  Vector degrees() const;
  Matrix adjacency() const;

  const SiteLabel& label(int site) const { return labels_[site]; }
  int tooth_of_site(int site) const { return labels_[site].tooth; }
  int first_site_of_tooth(int tooth) const { return tooth * kSitesPerTooth; }

  // Site lies at an interproximal gap shared with a neighbouring tooth.
  bool is_gap_site(int site) const;

  int site_index(int tooth, Side side, Position pos) const;

 private:
  void add_edge(int a, int b);

  int teeth_per_quadrant_;
  int n_quadrants_;
  int n_teeth_;
  GridVariant grid_;
  std::vector<SiteLabel> labels_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<char> gap_;
};

MouthGraph build_mouth_graph(int n_teeth_per_quadrant, int n_quadrants, GridVariant grid);

GridVariant parse_grid_variant(const std::string& text);

/// Row t averages the six sites of tooth t (T x S, entries 1/6).
Matrix tooth_average_map(const MouthGraph& graph);

/// Indicator covariates for the spatial mean: gap site, maxilla, and tooth
/// numbers 2..n (tooth 1 is the reference), each standardized to mean 0 and
/// variance 1. Columns that are constant on this graph are dropped.
Matrix standard_spatial_covariates(const MouthGraph& graph, std::vector<std::string>* names = nullptr);

std::string to_string(GridVariant grid);
std::string to_string(Jaw jaw);
std::string to_string(Side side);
std::string to_string(Position pos);

/// CSV exports: "site_a,site_b" per edge and
/// "site,tooth,jaw,side,position" per site.
std::string edge_list_csv(const MouthGraph& graph);
std::string site_metadata_csv(const MouthGraph& graph);

}  // namespace lsfm
