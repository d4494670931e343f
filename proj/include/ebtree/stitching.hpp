#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebtree/config.hpp"
#include "ebtree/core.hpp"
#include "ebtree/lsh.hpp"
#include "ebtree/margin.hpp"

namespace ebtree {

/// Second most likely class for `point`.
///
/// When the embedding looks like a probability vector over `class_order`
/// (non-negative, sums to 1 within 1e-3, one component per class) this is the
/// class of the second-largest component. Otherwise it is the class, other than
/// `own_label`, whose one-vs-all plane is nearest. Ties go to the
/// lexicographically smaller label.
std::string second_closest_class(const EmbeddedPoint& point, const std::string& own_label,
                                 std::span<const std::string> class_order, std::span<const Hyperplane> planes);

/// Ranks not yet processed, in ascending rank order.
class RankedQueue {
 public:
  explicit RankedQueue(std::size_t n = 0);

  bool empty() const noexcept { return remaining_ == 0; }
  std::size_t size() const noexcept { return remaining_; }
  bool contains(std::size_t rank) const { return rank < present_.size() && present_[rank]; }
  std::size_t front() const;
  std::size_t remove_first();
  void remove(std::size_t rank);

 private:
  std::vector<bool> present_;
  std::size_t head_ = 0;
  std::size_t remaining_ = 0;
};

struct ConstructionState {
  const LabeledDataset* dataset = nullptr;
  const Predictions* predictions = nullptr;
  std::vector<Hyperplane> planes;
  std::vector<std::string> class_order;
  std::vector<RankedPoint> ranked;
  RankedQueue queue;
  SegmentedIndex index;
  BoundaryTree tree{0};
  std::size_t current = 0;  // rank of the most recently inserted point

  const EmbeddedPoint& point_at(std::size_t rank) const { return (*dataset)[ranked[rank].index]; }
  const std::string& label_at(std::size_t rank) const { return (*predictions)[ranked[rank].index]; }
};

struct Candidate {
  std::size_t rank = 0;
  bool from_neighbors = false;  // false when taken from the queue head
};

/// Picks the next point to process and consumes it from the queue and index.
/// Queries the segment holding `current`'s original rank for k neighbours and
/// returns the first one predicted as current's second-closest class, falling
/// back to the queue head.
Candidate get_candidate(ConstructionState& state, const BuildConfig& cfg);

/// Final node of the greedy traversal for `embedding`.
NodeId find_parent(const BoundaryTree& tree, std::span<const double> embedding);

struct StitchStep {
  Candidate candidate;
  NodeId parent = 0;
  bool inserted = false;
};

struct BuildResult {
  BoundaryTree tree{0};
  std::vector<std::string> warnings;
  std::size_t neighbor_picks = 0;
  std::size_t fallback_picks = 0;
  std::size_t discarded = 0;
};

/// Step-wise driver for the stitching construction; build_eb_tree runs it to completion.
class BoundaryStitcher {
 public:
  BoundaryStitcher(const LabeledDataset& dataset, const Predictions& predictions, std::vector<Hyperplane> planes,
                   BuildConfig cfg);

  bool done() const noexcept { return state_.queue.empty(); }
  StitchStep step();
  const ConstructionState& state() const noexcept { return state_; }
  const BuildConfig& config() const noexcept { return cfg_; }
  BuildResult finish() &&;

 private:
  BuildConfig cfg_;
  ConstructionState state_;
  BuildResult stats_;
};

BuildResult build_eb_tree(const LabeledDataset& dataset, const Predictions& predictions,
                          std::span<const Hyperplane> planes, const BuildConfig& cfg);

/// Fits the one-vs-all planes on the predicted labels with cfg.margin first.
BuildResult build_eb_tree(const LabeledDataset& dataset, const Predictions& predictions, const BuildConfig& cfg);

/// Classic boundary tree: stream points in a seeded shuffle, keep those the
/// current tree misclassifies.
BuildResult build_basic_boundary_tree(const LabeledDataset& dataset, const Predictions& predictions,
                                      std::uint64_t shuffle_seed);

struct FidelityReport {
  double macro_f = 0.0;
  double micro_f = 0.0;
  std::size_t evaluated = 0;
};

/// Macro/micro F-measure of `predicted` against `reference` (same length).
FidelityReport f_measure(std::span<const std::string> predicted, std::span<const std::string> reference);

/// F-measure of the tree's labels against the reference model's predictions.
FidelityReport fidelity(const BoundaryTree& tree, const LabeledDataset& evaluation, const Predictions& reference);

/// Fraction of points whose tree label differs from the dataset's ground-truth label.
double error_rate(const BoundaryTree& tree, const LabeledDataset& evaluation);

/// Stable 64-bit fingerprint of a dataset, its predictions and a build config, as hex.
std::string build_fingerprint(const LabeledDataset& dataset, const Predictions& predictions, const BuildConfig& cfg);

}  // namespace ebtree
