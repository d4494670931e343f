#include "ebtree/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "ebtree/errors.hpp"

namespace ebtree {

std::string_view to_string(DistanceMode mode) {
  return mode == DistanceMode::kOwn ? "own" : "min_all";
}

DistanceMode distance_mode_from_string(std::string_view text) {
  if (text == "own") return DistanceMode::kOwn;
  if (text == "min_all") return DistanceMode::kMinAll;
  throw ValidationError("unknown distance mode '" + std::string(text) + "' (expected own|min_all)");
}

void MarginFitConfig::validate() const {
  if (!(c > 0.0)) throw ValidationError("margin C must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("margin tolerance must be positive");
  if (max_iters == 0) throw ValidationError("margin max_iters must be at least 1");
}

void LshConfig::validate() const {
  if (num_tables == 0) throw ValidationError("LSH table count must be at least 1");
  if (hashes_per_table == 0) throw ValidationError("LSH hashes per table must be at least 1");
  if (!(bucket_width > 0.0) || !std::isfinite(bucket_width)) {
    throw ValidationError("LSH bucket width must be positive");
  }
  if (segments == 0) throw ValidationError("LSH segment count must be at least 1");
}

void BuildConfig::validate() const {
  if (k == 0) throw ValidationError("k must be at least 1");
  lsh.validate();
  margin.validate();
}

namespace {

std::optional<unsigned long long> parse_index(const std::string& s) {
  if (s.empty()) return std::nullopt;
  unsigned long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::vector<std::string> sorted_class_order(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const bool numeric = std::all_of(labels.begin(), labels.end(),
                                   [](const std::string& s) { return parse_index(s).has_value(); });
  if (numeric) {
    std::stable_sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return *parse_index(a) < *parse_index(b);
    });
  }
  return labels;
}

LabeledDataset::LabeledDataset(std::vector<EmbeddedPoint> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  dimension_ = points_.front().embedding.size();
  if (dimension_ < 2) throw DimensionError("embedding dimension must be at least 2");
  std::vector<std::string> labels;
  labels.reserve(points_.size());
  by_id_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (p.embedding.size() != dimension_) {
      throw DimensionError("point '" + p.id + "' has dimension " + std::to_string(p.embedding.size()) +
                           ", expected " + std::to_string(dimension_));
    }
    for (double v : p.embedding) {
      if (!std::isfinite(v)) throw ValidationError("point '" + p.id + "' has a non-finite component");
    }
    if (!by_id_.emplace(p.id, i).second) throw ValidationError("duplicate point id '" + p.id + "'");
    labels.push_back(p.label);
  }
  classes_ = sorted_class_order(std::move(labels));
}

std::optional<std::size_t> LabeledDataset::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

BoundaryTree::BoundaryTree(std::size_t dimension, BuildConfig config)
    : dimension_(dimension), config_(std::move(config)) {}

NodeId BoundaryTree::insert(std::optional<NodeId> parent, EmbeddedPoint point, std::string label) {
  if (point.embedding.size() != dimension_) {
    throw DimensionError("node dimension " + std::to_string(point.embedding.size()) +
                         " does not match tree dimension " + std::to_string(dimension_));
  }
  if (nodes_.empty()) {
    if (parent) throw ValidationError("the first node must be the root");
  } else {
    if (!parent) throw ValidationError("only the first node may be the root");
    if (*parent >= nodes_.size()) throw ValidationError("unknown parent node");
    if (nodes_[*parent].label == label) {
      throw ValidationError("edge would not cross a boundary: parent and child share label '" + label + "'");
    }
  }
  const NodeId id = nodes_.size();
  nodes_.push_back(TreeNode{id, std::move(point), std::move(label), parent, {}});
  if (parent) nodes_[*parent].children.push_back(id);
  return id;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("distance between vectors of length " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

TraversalPath traverse(const BoundaryTree& tree, std::span<const double> query) {
  if (query.size() != tree.dimension()) {
    throw DimensionError("query dimension " + std::to_string(query.size()) + " does not match tree dimension " +
                         std::to_string(tree.dimension()));
  }
  if (tree.empty()) throw EmptyInputError("cannot traverse an empty tree");

  const std::size_t cap = tree.config().max_children;
  TraversalPath path;
  NodeId at = tree.root();
  double at_distance = euclidean_distance(query, tree.node(at).point.embedding);
  path.distance_evaluations = 1;
  path.steps.push_back({at, at_distance});

  for (;;) {
    const TreeNode& node = tree.node(at);
    if (node.children.empty()) break;
    const bool may_stop = cap == 0 || node.children.size() < cap;

    std::optional<NodeId> best_child;
    double best_distance = 0.0;
    for (NodeId child : node.children) {
      const double d = euclidean_distance(query, tree.node(child).point.embedding);
      ++path.distance_evaluations;
      if (!best_child || d < best_distance || (d == best_distance && child < *best_child)) {
        best_child = child;
        best_distance = d;
      }
    }
    if (may_stop && !(best_distance < at_distance)) break;
    at = *best_child;
    at_distance = best_distance;
    path.steps.push_back({at, at_distance});
  }

  path.final_node = at;
  path.predicted_label = tree.node(at).label;
  return path;
}

Classification classify(const BoundaryTree& tree, std::span<const double> query) {
  TraversalPath path = traverse(tree, query);
  std::string label = path.predicted_label;
  return {std::move(label), std::move(path)};
}

std::string check_tree_invariants(const BoundaryTree& tree) {
  const auto nodes = tree.nodes();
  if (nodes.empty()) return "tree has no nodes";
  if (nodes[0].parent) return "root has a parent";
  std::vector<int> seen_as_child(nodes.size(), 0);
  for (const auto& n : nodes) {
    if (n.point.embedding.size() != tree.dimension()) return "node " + std::to_string(n.node_id) + " has wrong dimension";
    if (n.node_id != 0) {
      if (!n.parent || *n.parent >= nodes.size()) return "node " + std::to_string(n.node_id) + " has no valid parent";
      if (*n.parent >= n.node_id) return "node " + std::to_string(n.node_id) + " precedes its parent";
      if (nodes[*n.parent].label == n.label) {
        return "edge " + std::to_string(*n.parent) + "->" + std::to_string(n.node_id) + " does not cross a boundary";
      }
      const auto& siblings = nodes[*n.parent].children;
      if (std::find(siblings.begin(), siblings.end(), n.node_id) == siblings.end()) {
        return "node " + std::to_string(n.node_id) + " missing from its parent's children";
      }
    }
    for (NodeId c : n.children) {
      if (c >= nodes.size()) return "dangling child id";
      if (++seen_as_child[c] > 1) return "node " + std::to_string(c) + " has two parents";
      if (nodes[c].parent != n.node_id) return "child/parent links disagree at node " + std::to_string(c);
    }
  }
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.point.id).second) return "point '" + n.point.id + "' appears twice";
  }
  return {};
}

}  // namespace ebtree
