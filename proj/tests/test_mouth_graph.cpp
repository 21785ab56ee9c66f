#include <doctest.h>

#include "lsfm/mouth_graph.hpp"

#include <algorithm>
#include <set>

using namespace lsfm;

TEST_CASE("one quadrant has 42 sites in six-site teeth") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  CHECK(g.n_sites() == 42);
  CHECK(g.n_teeth() == 7);
  for (int s = 0; s < g.n_sites(); ++s) CHECK(g.tooth_of_site(s) == s / 6);
  CHECK(g.label(0).side == Side::buccal);
  CHECK(g.label(0).position == Position::mesial);
  CHECK(g.label(5).side == Side::lingual);
  CHECK(g.label(5).position == Position::distal);
  CHECK(g.site_index(3, Side::lingual, Position::mid) == 3 * 6 + 4);
}

TEST_CASE("edge counts per grid variant") {
  // Per tooth: grid1 has two paths plus two cross links, grid2 the paths
  // only, grid3 a 6-clique. Every variant adds 2 links per adjacent pair.
  CHECK(MouthGraph(7, 1, GridVariant::grid1).edges().size() == 7 * 6 + 6 * 2);
  CHECK(MouthGraph(7, 1, GridVariant::grid2).edges().size() == 7 * 4 + 6 * 2);
  CHECK(MouthGraph(7, 1, GridVariant::grid3).edges().size() == 7 * 15 + 6 * 2);
  CHECK(MouthGraph(1, 1, GridVariant::grid1).edges().size() == 6);
}

TEST_CASE("grid2 edges are a subset of grid1, grid1 of grid3") {
  auto as_set = [](const MouthGraph& g) { return std::set<Edge>(g.edges().begin(), g.edges().end()); };
  const auto e1 = as_set(MouthGraph(7, 2, GridVariant::grid1));
  const auto e2 = as_set(MouthGraph(7, 2, GridVariant::grid2));
  const auto e3 = as_set(MouthGraph(7, 2, GridVariant::grid3));
  for (const auto& e : e2) CHECK(e1.count(e) == 1);
  for (const auto& e : e1) CHECK(e3.count(e) == 1);
}

TEST_CASE("edges are sorted, unique and consistent with neighbour lists") {
  for (auto grid : {GridVariant::grid1, GridVariant::grid2, GridVariant::grid3}) {
    const MouthGraph g(7, 4, grid);
    const auto& e = g.edges();
    for (size_t k = 0; k < e.size(); ++k) {
      CHECK(e[k].first < e[k].second);
      if (k > 0) CHECK(e[k - 1] < e[k]);
    }
    long total = 0;
    for (int s = 0; s < g.n_sites(); ++s) {
      CHECK(g.degree(s) > 0);
      total += g.degree(s);
    }
    CHECK(total == 2 * static_cast<long>(e.size()));
    const Matrix a = g.adjacency();
    CHECK(a.isApprox(a.transpose()));
    CHECK(a.diagonal().isZero());
    CHECK(a.rowwise().sum().isApprox(g.degrees()));
  }
}

TEST_CASE("full mouth: jaws never connect, midline links within each jaw") {
  const MouthGraph g(7, 4, GridVariant::grid1);
  CHECK(g.n_sites() == 168);
  for (const auto& [a, b] : g.edges()) CHECK(g.label(a).jaw == g.label(b).jaw);
  // Central incisors of quadrants 0 and 1 share buccal and lingual mesial links.
  const int left = g.site_index(0, Side::buccal, Position::mesial);
  const int right = g.site_index(7, Side::buccal, Position::mesial);
  const auto& nb = g.neighbors()[left];
  CHECK(std::find(nb.begin(), nb.end(), right) != nb.end());
  // No link from maxilla central incisor to mandible central incisor.
  const int lower = g.site_index(14, Side::buccal, Position::mesial);
  CHECK(std::find(nb.begin(), nb.end(), lower) == nb.end());
}

TEST_CASE("gap sites are the interproximal ends") {
  const MouthGraph g(7, 1, GridVariant::grid1);
  // First tooth mesial ends face the midline with no neighbour in one quadrant.
  CHECK_FALSE(g.is_gap_site(g.site_index(0, Side::buccal, Position::mesial)));
  CHECK(g.is_gap_site(g.site_index(0, Side::buccal, Position::distal)));
  CHECK(g.is_gap_site(g.site_index(3, Side::lingual, Position::mesial)));
  CHECK_FALSE(g.is_gap_site(g.site_index(3, Side::lingual, Position::mid)));
  CHECK_FALSE(g.is_gap_site(g.site_index(6, Side::lingual, Position::distal)));
}

TEST_CASE("invalid shapes are configuration errors") {
  CHECK_THROWS_AS(MouthGraph(7, 3, GridVariant::grid1), ConfigError);
  CHECK_THROWS_AS(MouthGraph(0, 1, GridVariant::grid1), ConfigError);
  try {
    MouthGraph(7, 5, GridVariant::grid1);
  } catch (const ConfigError& e) {
    CHECK(e.key() == "graph.quadrants");
  }
}

TEST_CASE("grid names parse both ways") {
  CHECK(parse_grid_variant("1") == GridVariant::grid1);
  CHECK(parse_grid_variant("grid3") == GridVariant::grid3);
  CHECK(parse_grid_variant(to_string(GridVariant::grid2)) == GridVariant::grid2);
  CHECK_THROWS_AS(parse_grid_variant("grid4"), ConfigError);
}

TEST_CASE("tooth average map rows average six sites") {
  const MouthGraph g(3, 1, GridVariant::grid1);
  const Matrix z = tooth_average_map(g);
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 18);
  CHECK(z.rowwise().sum().isApprox(Vector::Ones(3)));
  CHECK(z(1, 6) == doctest::Approx(1.0 / 6));
  CHECK(z(1, 0) == 0.0);
}

TEST_CASE("standard spatial covariates are standardized") {
  const MouthGraph g(7, 4, GridVariant::grid1);
  std::vector<std::string> names;
  const Matrix w = standard_spatial_covariates(g, &names);
  CHECK(w.rows() == 168);
  CHECK(static_cast<size_t>(w.cols()) == names.size());
  CHECK(names.front() == "gap");
  for (Index c = 0; c < w.cols(); ++c) {
    CHECK(w.col(c).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w.col(c).squaredNorm() / w.rows() == doctest::Approx(1.0));
  }
}

TEST_CASE("graph CSV exports") {
  const MouthGraph g(2, 1, GridVariant::grid1);
  const std::string edges = edge_list_csv(g);
  CHECK(edges.rfind("site_a,site_b\n", 0) == 0);
  CHECK(std::count(edges.begin(), edges.end(), '\n') == static_cast<long>(g.edges().size()) + 1);
  const std::string sites = site_metadata_csv(g);
  CHECK(sites.rfind("site,tooth,jaw,side,position\n", 0) == 0);
  CHECK(std::count(sites.begin(), sites.end(), '\n') == g.n_sites() + 1);
}
