#include "ebtree/explain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "ebtree/errors.hpp"

namespace ebtree {

Explanation explain_prediction(const BoundaryTree& tree, const EmbeddedPoint& query) {
  Explanation e;
  e.query_id = query.id;
  e.path = traverse(tree, query.embedding);
  e.predicted_label = e.path.predicted_label;
  e.path_points.reserve(e.path.steps.size());
  for (const auto& step : e.path.steps) {
    const TreeNode& n = tree.node(step.node_id);
    e.path_points.push_back({n.node_id, n.point.id, n.label, n.point.label, n.point.source_ref, step.distance});
  }
  const TreeNode& final_node = tree.node(e.path.final_node);
  e.family_parent = final_node.parent;
  e.family_children = final_node.children;
  return e;
}

namespace {

// First principal axis of the rows, sign fixed so the largest-magnitude
// component is positive.
Eigen::VectorXd principal_axis(const Eigen::MatrixXd& rows) {
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd axis = solver.eigenvectors().col(cov.cols() - 1);
  Eigen::Index arg = 0;
  axis.cwiseAbs().maxCoeff(&arg);
  if (axis(arg) < 0) axis = -axis;
  return axis;
}

}  // namespace

BoundarySegment boundary_projection(const BoundaryTree& tree, const std::string& class_a, const std::string& class_b,
                                    ProjectionOrder order, std::span<const Hyperplane> planes) {
  BoundarySegment seg{class_a, class_b, {}};
  for (const auto& n : tree.nodes()) {
    if (!n.parent) continue;
    const TreeNode& p = tree.node(*n.parent);
    const TreeNode* a = nullptr;
    const TreeNode* b = nullptr;
    if (p.label == class_a && n.label == class_b) {
      a = &p;
      b = &n;
    } else if (p.label == class_b && n.label == class_a) {
      a = &n;
      b = &p;
    } else {
      continue;
    }
    BoundaryPair pair;
    pair.node_a = a->node_id;
    pair.node_b = b->node_id;
    pair.edge_length = euclidean_distance(a->point.embedding, b->point.embedding);
    pair.a_mislabeled = a->is_mislabeled();
    pair.b_mislabeled = b->is_mislabeled();
    seg.pairs.push_back(pair);
  }
  if (seg.pairs.empty()) return seg;

  if (order == ProjectionOrder::kBoundaryDistance) {
    const Hyperplane* plane = find_plane(planes, class_a);
    if (plane == nullptr) throw MissingPlaneError("no hyperplane for class '" + class_a + "'");
    for (auto& pair : seg.pairs) {
      pair.ordering_coordinate = distance_to_boundary(tree.node(pair.node_a).point.embedding, *plane);
    }
  } else {
    const auto dim = static_cast<Eigen::Index>(tree.dimension());
    Eigen::MatrixXd mids(static_cast<Eigen::Index>(seg.pairs.size()), dim);
    for (std::size_t i = 0; i < seg.pairs.size(); ++i) {
      const auto& ea = tree.node(seg.pairs[i].node_a).point.embedding;
      const auto& eb = tree.node(seg.pairs[i].node_b).point.embedding;
      for (Eigen::Index d = 0; d < dim; ++d) {
        mids(static_cast<Eigen::Index>(i), d) = 0.5 * (ea[static_cast<std::size_t>(d)] + eb[static_cast<std::size_t>(d)]);
      }
    }
    if (seg.pairs.size() > 1) {
      const Eigen::VectorXd axis = principal_axis(mids);
      const Eigen::RowVectorXd mean = mids.colwise().mean();
      for (std::size_t i = 0; i < seg.pairs.size(); ++i) {
        seg.pairs[i].ordering_coordinate = (mids.row(static_cast<Eigen::Index>(i)) - mean).dot(axis.transpose());
      }
    }
  }
  std::stable_sort(seg.pairs.begin(), seg.pairs.end(), [](const BoundaryPair& x, const BoundaryPair& y) {
    if (x.ordering_coordinate != y.ordering_coordinate) return x.ordering_coordinate < y.ordering_coordinate;
    return std::pair(x.node_a, x.node_b) < std::pair(y.node_a, y.node_b);
  });
  return seg;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

void node_statement(std::ostringstream& out, const TreeNode& n, bool highlighted) {
  out << "  n" << n.node_id << " [label=\"" << dot_escape(n.point.id) << '/' << dot_escape(n.label) << '"';
  if (highlighted) out << ", color=red";
  out << "];\n";
}

}  // namespace

std::string export_dot(const BoundaryTree& tree, const Explanation* highlight) {
  std::set<NodeId> on_path;
  std::set<std::pair<NodeId, NodeId>> path_edges;
  if (highlight != nullptr) {
    const auto& steps = highlight->path.steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      on_path.insert(steps[i].node_id);
      if (i > 0) path_edges.emplace(steps[i - 1].node_id, steps[i].node_id);
    }
  }

  std::ostringstream out;
  out << "digraph ebtree {\n";
  for (const auto& n : tree.nodes()) node_statement(out, n, on_path.contains(n.node_id));
  for (const auto& n : tree.nodes()) {
    for (NodeId c : n.children) {
      out << "  n" << n.node_id << " -> n" << c;
      if (path_edges.contains({n.node_id, c})) out << " [color=red]";
      out << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string export_dot(const BoundaryTree& tree, const BoundarySegment& segment) {
  std::set<NodeId> nodes;
  for (const auto& p : segment.pairs) {
    nodes.insert(p.node_a);
    nodes.insert(p.node_b);
  }
  std::ostringstream out;
  out << "digraph boundary {\n";
  for (NodeId id : nodes) node_statement(out, tree.node(id), false);
  for (const auto& p : segment.pairs) {
    const TreeNode& a = tree.node(p.node_a);
    const bool a_is_parent = a.parent != p.node_b;
    const NodeId from = a_is_parent ? p.node_a : p.node_b;
    const NodeId to = a_is_parent ? p.node_b : p.node_a;
    out << "  n" << from << " -> n" << to << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace ebtree
