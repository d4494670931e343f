#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ebtree/config.hpp"

namespace ebtree {

using Vector = std::vector<double>;
using NodeId = std::size_t;

/// One sample in the classifier's transformed space. By convention the
/// embedding is the softmax output, but any finite real vector is accepted.
struct EmbeddedPoint {
  std::string id;
  std::string label;
  Vector embedding;
  std::string source_ref;

  bool operator==(const EmbeddedPoint&) const = default;
};

/// Orders labels numerically when every label is a non-negative integer,
/// lexicographically otherwise. Softmax component i belongs to the i-th class
/// in this order.
std::vector<std::string> sorted_class_order(std::vector<std::string> labels);

/// An ordered, validated collection of points sharing one dimension.
///
/// Construction checks dimension >= 2, uniform length, finite components and
/// unique ids. It does not require two classes: a stream of a single unseen
/// class is a valid dataset. Training operations check class counts themselves.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(std::vector<EmbeddedPoint> points);

  const std::vector<EmbeddedPoint>& points() const noexcept { return points_; }
  const EmbeddedPoint& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const LabeledDataset& other) const { return points_ == other.points_; }

 private:
  std::vector<EmbeddedPoint> points_;
  std::size_t dimension_ = 0;
  std::vector<std::string> classes_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// The reference model's predicted label per dataset point, index-aligned.
using Predictions = std::vector<std::string>;

/// A tree node. `label` is the class the node votes for (the reference model's
/// prediction for its point); `point.label` keeps the ground truth.
struct TreeNode {
  NodeId node_id = 0;
  EmbeddedPoint point;
  std::string label;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;

  bool is_mislabeled() const { return point.label != label; }
};

class BoundaryTree {
 public:
  explicit BoundaryTree(std::size_t dimension, BuildConfig config = {});

  /// Appends a node. The first insertion must be the root (no parent); every
  /// later node needs a parent with a different label.
  NodeId insert(std::optional<NodeId> parent, EmbeddedPoint point, std::string label);

  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  NodeId root() const noexcept { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const BuildConfig& config() const noexcept { return config_; }
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string value) { provenance_ = std::move(value); }

 private:
  std::size_t dimension_;
  BuildConfig config_;
  std::string provenance_;
  std::vector<TreeNode> nodes_;
};

struct PathStep {
  NodeId node_id;
  double distance;
};

struct TraversalPath {
  std::vector<PathStep> steps;
  NodeId final_node = 0;
  std::string predicted_label;
  std::size_t distance_evaluations = 0;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Greedy descent from the root. At each node the query is compared with the
/// node and its children; the walk stops when the node itself is closest
/// (exact ties keep the node, tied children resolve to the lowest node_id).
///
/// With a non-zero `max_children` in the tree's config a full node may not be
/// the stopping point and the walk always descends from it, so distances are
/// only guaranteed to decrease strictly in the default unbounded mode.
TraversalPath traverse(const BoundaryTree& tree, std::span<const double> query);

struct Classification {
  std::string label;
  TraversalPath path;
};

Classification classify(const BoundaryTree& tree, std::span<const double> query);

/// Checks the edge-crossing and connectivity invariants. Returns an empty
/// string when the tree is well formed, a description of the first problem otherwise.
std::string check_tree_invariants(const BoundaryTree& tree);

}  // namespace ebtree
