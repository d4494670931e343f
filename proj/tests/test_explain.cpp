#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ebtree/errors.hpp"
#include "ebtree/explain.hpp"
#include "ebtree/stitching.hpp"
#include "ebtree/testkit.hpp"
#include "fixtures.hpp"

using namespace ebtree;
using fixtures::pt;

TEST_SUITE("explain") {
  TEST_CASE("explanation follows the path to c6") {
    const auto t = fixtures::ten_node_tree();
    const auto e = explain_prediction(t, pt("q", "?", {6.5, 3.2}));
    CHECK(e.query_id == "q");
    CHECK(e.predicted_label == "C");
    REQUIRE(e.path_points.size() == 4);
    const std::vector<NodeId> expected{0, 1, 3, 6};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(e.path_points[i].node_id == expected[i]);
      CHECK(e.path_points[i].distance == e.path.steps[i].distance);
    }
    CHECK(e.path_points[0].source_ref == "img/a0.png");
    CHECK(e.path_points[0].point_id == "a0");
    CHECK(e.path_points[3].distance == doctest::Approx(std::sqrt(0.29)));
    CHECK(e.family_parent == 3u);
    CHECK(e.family_children.empty());
  }

  TEST_CASE("explanation exposes a mislabeled final node and its family") {
    const auto t = fixtures::ten_node_tree();
    const auto e = explain_prediction(t, pt("q", "?", {2.2, 6.5}));
    CHECK(e.predicted_label == "B");
    REQUIRE(e.path_points.size() == 3);
    CHECK(e.path_points.back().node_id == 8);
    CHECK(e.path_points.back().label == "B");
    CHECK(e.path_points.back().truth_label == "C");
    CHECK(e.family_parent == 2u);
    CHECK(e.family_children == std::vector<NodeId>{9});
  }

  TEST_CASE("root-only explanation has no family parent") {
    BoundaryTree t(2);
    t.insert(std::nullopt, pt("r", "A", {0, 0}), "A");
    const auto e = explain_prediction(t, pt("q", "?", {1, 1}));
    CHECK_FALSE(e.family_parent.has_value());
    CHECK(e.path_points.size() == 1);
  }

  TEST_CASE("boundary pairs ordered by principal component of edge midpoints") {
    const auto t = fixtures::ten_node_tree();
    const auto seg = boundary_projection(t, "A", "B");
    CHECK(seg.class_a == "A");
    CHECK(seg.class_b == "B");
    REQUIRE(seg.pairs.size() == 4);

    // Closed-form leading eigenvector of the 2x2 midpoint covariance.
    const std::vector<std::pair<double, double>> mids{{2, 0}, {4, 1.5}, {-3.5, 6}, {2.5, 7}};
    double mx = 0, my = 0;
    for (auto [x, y] : mids) {
      mx += x / 4;
      my += y / 4;
    }
    double sxx = 0, syy = 0, sxy = 0;
    for (auto [x, y] : mids) {
      sxx += (x - mx) * (x - mx);
      syy += (y - my) * (y - my);
      sxy += (x - mx) * (y - my);
    }
    const double lambda = 0.5 * (sxx + syy) + std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
    double ax = sxy, ay = lambda - sxx;
    const double norm = std::hypot(ax, ay);
    ax /= norm;
    ay /= norm;
    if ((std::abs(ax) >= std::abs(ay) ? ax : ay) < 0) {
      ax = -ax;
      ay = -ay;
    }
    const std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}, {3, 1}, {5, 7}, {9, 8}};
    std::vector<std::pair<double, std::pair<NodeId, NodeId>>> expected;
    for (std::size_t i = 0; i < 4; ++i) {
      expected.push_back({(mids[i].first - mx) * ax + (mids[i].second - my) * ay, pairs[i]});
    }
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(seg.pairs[i].node_a == expected[i].second.first);
      CHECK(seg.pairs[i].node_b == expected[i].second.second);
      CHECK(std::abs(seg.pairs[i].ordering_coordinate - expected[i].first) <= 1e-9);
      CHECK(t.node(seg.pairs[i].node_a).label == "A");
      CHECK(t.node(seg.pairs[i].node_b).label == "B");
    }
    const auto mis = std::find_if(seg.pairs.begin(), seg.pairs.end(), [](const BoundaryPair& p) { return p.node_a == 9; });
    REQUIRE(mis != seg.pairs.end());
    CHECK(mis->b_mislabeled);
    CHECK_FALSE(mis->a_mislabeled);
    CHECK(mis->edge_length == doctest::Approx(std::sqrt(5.0)));
  }

  TEST_CASE("boundary pairs ordered by distance to the class plane") {
    const auto t = fixtures::ten_node_tree();
    const std::vector<Hyperplane> planes{make_hyperplane("A", {1, 0}, 0)};
    const auto seg = boundary_projection(t, "A", "B", ProjectionOrder::kBoundaryDistance, planes);
    REQUIRE(seg.pairs.size() == 4);
    const std::vector<NodeId> a_nodes{0, 5, 9, 3};
    const std::vector<double> coords{0, 2, 3, 4};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(seg.pairs[i].node_a == a_nodes[i]);
      CHECK(seg.pairs[i].ordering_coordinate == coords[i]);
    }
    CHECK(export_dot(t, seg) == fixtures::read_file(fixtures::golden_dir() / "boundary_ab.dot"));
    CHECK_THROWS_AS(boundary_projection(t, "B", "A", ProjectionOrder::kBoundaryDistance, planes), MissingPlaneError);
  }

  TEST_CASE("swapping the classes swaps the pair roles") {
    const auto t = fixtures::ten_node_tree();
    const auto ab = boundary_projection(t, "A", "C");
    const auto ba = boundary_projection(t, "C", "A");
    REQUIRE(ab.pairs.size() == ba.pairs.size());
    std::vector<std::pair<NodeId, NodeId>> x, y;
    for (const auto& p : ab.pairs) x.emplace_back(p.node_a, p.node_b);
    for (const auto& p : ba.pairs) y.emplace_back(p.node_b, p.node_a);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
  }

  TEST_CASE("classes without a shared edge give an empty segment") {
    const auto t = fixtures::ten_node_tree();
    const auto seg = boundary_projection(t, "A", "Z");
    CHECK(seg.pairs.empty());
    CHECK(export_dot(t, seg) == "digraph boundary {\n}\n");
  }

  TEST_CASE("every pair on a testkit tree crosses the requested boundary") {
    testkit::SyntheticSpec spec;
    spec.num_classes = 4;
    spec.points_per_class = 150;
    spec.temperature = 4.0;
    spec.cluster_separation = 3.0;
    const auto g = testkit::generate(spec);
    const auto t = build_eb_tree(g.dataset, g.predictions, BuildConfig{}).tree;
    std::size_t total = 0;
    const auto& classes = g.dataset.classes();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      for (std::size_t j = i + 1; j < classes.size(); ++j) {
        const auto seg = boundary_projection(t, classes[i], classes[j]);
        for (std::size_t k = 0; k < seg.pairs.size(); ++k) {
          const auto& a = t.node(seg.pairs[k].node_a);
          const auto& b = t.node(seg.pairs[k].node_b);
          CHECK(a.label == classes[i]);
          CHECK(b.label == classes[j]);
          CHECK((a.parent == b.node_id || b.parent == a.node_id));
          if (k > 0) CHECK(seg.pairs[k - 1].ordering_coordinate <= seg.pairs[k].ordering_coordinate);
        }
        total += seg.pairs.size();
      }
    }
    // Every edge crosses some boundary, so the segments partition the edges.
    CHECK(total == t.size() - 1);
  }

  TEST_CASE("DOT export matches the golden files") {
    const auto t = fixtures::ten_node_tree();
    CHECK(export_dot(t) == fixtures::read_file(fixtures::golden_dir() / "tree10.dot"));
    // Route through the mislabeled b8 to a9.
    const auto e = explain_prediction(t, pt("q", "?", {2.5, 7.5}));
    REQUIRE(e.path.final_node == 9);
    CHECK(export_dot(t, &e) == fixtures::read_file(fixtures::golden_dir() / "tree10_path.dot"));
  }

  TEST_CASE("DOT labels are escaped") {
    BoundaryTree t(2);
    t.insert(std::nullopt, pt("say \"hi\"", "A", {0, 0}), "A");
    CHECK(export_dot(t).find(R"(label="say \"hi\"/A")") != std::string::npos);
  }
}
