#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebtree/core.hpp"

namespace ebtree {

enum class NoveltyStatistic {
  kTotalVariation,  // half L1
  kSymmetricKl,
};

std::string_view to_string(NoveltyStatistic stat);
NoveltyStatistic novelty_statistic_from_string(std::string_view text);

struct NoveltyConfig {
  double threshold = 0.01;
  std::size_t min_support = 5;
  double temperature = 1.0;
  NoveltyStatistic statistic = NoveltyStatistic::kTotalVariation;

  void validate() const;
};

/// Softmax over negative distances to a node's family {N, parent(N), children(N)}.
struct LocalDistribution {
  std::vector<NodeId> family;
  std::vector<double> probs;
};

/// N first, then its parent if any, then its children in order.
std::vector<NodeId> node_family(const BoundaryTree& tree, NodeId node);

LocalDistribution local_distribution(const BoundaryTree& tree, NodeId node, std::span<const double> point,
                                     double temperature = 1.0);

double distribution_distance(const LocalDistribution& a, const LocalDistribution& b, NoveltyStatistic stat);

/// A(S, z): mean distance from z's distribution to each member's. Throws
/// InsufficientSupportError for an empty S.
double nonconformity(std::span<const LocalDistribution> members, const LocalDistribution& z, NoveltyStatistic stat);

/// alpha_i = A(S \ {i}, i) for every member; 0 for a single-member cohort.
std::vector<double> leave_one_out_alphas(std::span<const LocalDistribution> members, NoveltyStatistic stat);

/// Training points whose traversal ends at one node, with cached distributions
/// over that node's family and their leave-one-out scores.
struct NodeCohort {
  NodeId node_id = 0;
  std::vector<std::size_t> members;  // dataset indices
  std::vector<LocalDistribution> distributions;
  std::vector<double> alphas;

  std::size_t support() const noexcept { return members.size(); }
};

class CohortIndex {
 public:
  CohortIndex() = default;
  CohortIndex(std::vector<NodeCohort> cohorts, NoveltyConfig cfg, std::size_t training_size)
      : cohorts_(std::move(cohorts)), cfg_(cfg), training_size_(training_size) {}

  const NodeCohort& at(NodeId node) const { return cohorts_.at(node); }
  std::span<const NodeCohort> cohorts() const noexcept { return cohorts_; }
  const NoveltyConfig& config() const noexcept { return cfg_; }
  std::size_t training_size() const noexcept { return training_size_; }

 private:
  std::vector<NodeCohort> cohorts_;  // indexed by node id; may be empty
  NoveltyConfig cfg_;
  std::size_t training_size_ = 0;
};

CohortIndex route_training_points(const BoundaryTree& tree, const LabeledDataset& training,
                                  const NoveltyConfig& cfg = {});

struct ConformalScore {
  double p_value = 0.0;
  double alpha = 0.0;
};

/// p = |{j : alpha_j >= alpha_z}| / |D_N|.
ConformalScore p_value(const NodeCohort& cohort, const LocalDistribution& z, NoveltyStatistic stat);

struct NoveltyVerdict {
  std::string point_id;
  NodeId final_node = 0;
  std::string predicted_label;
  double p_value = 0.0;
  double alpha = 0.0;
  bool is_novel = false;
  std::size_t support = 0;
  bool insufficient_support = false;
};

struct DetectionReport {
  std::vector<NoveltyVerdict> verdicts;
  std::size_t flagged = 0;
  std::size_t insufficient = 0;
  /// Point-to-point distance and distribution comparisons performed.
  std::size_t distance_evaluations = 0;
  /// Comparisons a detector scanning the full training set would make.
  std::size_t baseline_evaluations = 0;
  double savings_ratio = 0.0;
};

DetectionReport detect_stream(const BoundaryTree& tree, const CohortIndex& cohorts, const LabeledDataset& stream,
                              const NoveltyConfig& cfg);

}  // namespace ebtree
