#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebtree/core.hpp"
#include "ebtree/margin.hpp"

namespace ebtree {

struct PathPoint {
  NodeId node_id = 0;
  std::string point_id;
  std::string label;        // node label (model prediction)
  std::string truth_label;  // ground truth of the training point
  std::string source_ref;
  double distance = 0.0;
};

/// A prediction together with the route that produced it and the final
/// node's neighbourhood (parent and children) to compare against.
struct Explanation {
  std::string query_id;
  std::string predicted_label;
  TraversalPath path;
  std::vector<PathPoint> path_points;
  std::optional<NodeId> family_parent;
  std::vector<NodeId> family_children;
};

Explanation explain_prediction(const BoundaryTree& tree, const EmbeddedPoint& query);

struct BoundaryPair {
  NodeId node_a = 0;  // labelled class_a
  NodeId node_b = 0;  // labelled class_b
  double edge_length = 0.0;
  double ordering_coordinate = 0.0;
  bool a_mislabeled = false;  // ground truth differs from the node label
  bool b_mislabeled = false;
};

struct BoundarySegment {
  std::string class_a;
  std::string class_b;
  std::vector<BoundaryPair> pairs;
};

enum class ProjectionOrder {
  kPrincipalComponent,  // edge midpoints projected on their first principal axis
  kBoundaryDistance,    // distance of the class_a endpoint to class_a's plane
};

/// Every tree edge joining class_a and class_b, oriented (class_a node,
/// class_b node) and arranged along the boundary. An empty segment is valid.
/// kBoundaryDistance needs the plane for class_a in `planes`.
BoundarySegment boundary_projection(const BoundaryTree& tree, const std::string& class_a, const std::string& class_b,
                                    ProjectionOrder order = ProjectionOrder::kPrincipalComponent,
                                    std::span<const Hyperplane> planes = {});

/// Graphviz DOT for the tree. With an explanation, edges and nodes on its
/// path are drawn in red.
std::string export_dot(const BoundaryTree& tree, const Explanation* highlight = nullptr);

/// DOT for just the edges of one boundary segment, in segment order.
std::string export_dot(const BoundaryTree& tree, const BoundarySegment& segment);

}  // namespace ebtree
