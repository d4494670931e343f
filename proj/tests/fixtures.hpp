#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ebtree/core.hpp"
#include "ebtree/random.hpp"

namespace fixtures {

inline ebtree::EmbeddedPoint pt(std::string id, std::string label, ebtree::Vector v, std::string ref = "") {
  return ebtree::EmbeddedPoint{std::move(id), std::move(label), std::move(v), std::move(ref)};
}

/// Hand-built ten-node tree over three classes in the plane. Node labels are
/// the model's predictions; n4 and n8 carry a different ground truth.
///
///   n0 A (0,0)
///   +- n1 B (4,0)
///   |  +- n3 A (4,3)
///   |  |  +- n6 C (7,3)
///   |  +- n4 C (6,-2)   truth A
///   +- n2 C (0,4)
///      +- n5 A (-2,6)
///      |  +- n7 B (-5,6)
///      +- n8 B (2,6)    truth C
///         +- n9 A (3,8)
inline ebtree::BoundaryTree ten_node_tree() {
  ebtree::BoundaryTree t(2);
  t.insert(std::nullopt, pt("a0", "A", {0, 0}, "img/a0.png"), "A");
  t.insert(0, pt("b1", "B", {4, 0}), "B");
  t.insert(0, pt("c2", "C", {0, 4}), "C");
  t.insert(1, pt("a3", "A", {4, 3}), "A");
  t.insert(1, pt("c4", "A", {6, -2}), "C");
  t.insert(2, pt("a5", "A", {-2, 6}), "A");
  t.insert(3, pt("c6", "C", {7, 3}), "C");
  t.insert(5, pt("b7", "B", {-5, 6}), "B");
  t.insert(2, pt("b8", "C", {2, 6}), "B");
  t.insert(8, pt("a9", "A", {3, 8}), "A");
  return t;
}

inline std::filesystem::path golden_dir() { return std::filesystem::path(EBTREE_TEST_DATA_DIR) / "golden"; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Random point on the probability simplex: softmax of standard-normal logits.
inline ebtree::Vector random_softmax(ebtree::Rng& rng, std::size_t dim, double scale = 1.0) {
  ebtree::Vector v(dim);
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(scale * rng.normal());
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

}  // namespace fixtures
