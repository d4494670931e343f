#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ebtree/config.hpp"
#include "ebtree/core.hpp"

namespace ebtree {

/// One one-vs-all separator w.x + b = 0. margin caches 2/||w||.
struct Hyperplane {
  std::string class_id;
  Vector w;
  double b = 0.0;
  double margin = 0.0;
  bool converged = true;

  double norm() const;
  double decision(std::span<const double> x) const;
};

/// Builds a plane and fills in the cached margin. Throws DegenerateHyperplaneError for w = 0.
Hyperplane make_hyperplane(std::string class_id, Vector w, double b);

/// Result of a single soft-margin fit.
struct BinaryFit {
  Vector w;
  double b = 0.0;
  double objective = 0.0;  // 1/2 ||w||^2 + C * sum hinge
  bool converged = false;
  std::size_t iterations = 0;
  /// Primal objective of every iterate the solver accepted as its new best, in order.
  std::vector<double> accepted_objectives;
};

/// Primal soft-margin objective for a given (w, b).
double hinge_objective(std::span<const Vector> xs, std::span<const int> ys, std::span<const double> w, double b,
                       double c);

/// Soft-margin linear SVM with an unregularized bias, solved in the dual by
/// pairwise coordinate ascent (maximal-violating pair with second-order
/// selection). Stops when the KKT violation gap drops below cfg.tolerance or
/// after cfg.max_iters pair updates; in the latter case the best iterate seen is
/// returned with converged = false. ys must be +1/-1 with both signs present.
BinaryFit fit_binary(std::span<const Vector> xs, std::span<const int> ys, const MarginFitConfig& cfg);

/// One plane per class in `labels` (index-aligned with the dataset), class vs rest.
std::vector<Hyperplane> fit_one_vs_all(const LabeledDataset& dataset, std::span<const std::string> labels,
                                       const MarginFitConfig& cfg);
std::vector<Hyperplane> fit_one_vs_all(const LabeledDataset& dataset, const MarginFitConfig& cfg);

/// |w.x + b| / ||w||
double distance_to_boundary(std::span<const double> x, const Hyperplane& plane);

struct RankedPoint {
  std::size_t index = 0;  // position in the dataset
  double boundary_distance = 0.0;
  std::size_t rank = 0;

  bool operator==(const RankedPoint&) const = default;
};

/// Ascending boundary distance, ties by point id. `labels` selects each point's
/// own plane (normally the reference model's predictions).
std::vector<RankedPoint> sort_by_boundary_distance(const LabeledDataset& dataset, std::span<const std::string> labels,
                                                   std::span<const Hyperplane> planes,
                                                   DistanceMode mode = DistanceMode::kOwn);
std::vector<RankedPoint> sort_by_boundary_distance(const LabeledDataset& dataset, std::span<const Hyperplane> planes,
                                                   DistanceMode mode = DistanceMode::kOwn);

const Hyperplane* find_plane(std::span<const Hyperplane> planes, const std::string& class_id);

}  // namespace ebtree
