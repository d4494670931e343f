#include "ebtree/novelty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebtree/errors.hpp"

namespace ebtree {

std::string_view to_string(NoveltyStatistic stat) {
  return stat == NoveltyStatistic::kTotalVariation ? "tv" : "skl";
}

NoveltyStatistic novelty_statistic_from_string(std::string_view text) {
  if (text == "tv") return NoveltyStatistic::kTotalVariation;
  if (text == "skl") return NoveltyStatistic::kSymmetricKl;
  throw ValidationError("unknown statistic '" + std::string(text) + "' (expected tv|skl)");
}

void NoveltyConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
}

std::vector<NodeId> node_family(const BoundaryTree& tree, NodeId node) {
  const TreeNode& n = tree.node(node);
  std::vector<NodeId> family{node};
  if (n.parent) family.push_back(*n.parent);
  family.insert(family.end(), n.children.begin(), n.children.end());
  return family;
}

LocalDistribution local_distribution(const BoundaryTree& tree, NodeId node, std::span<const double> point,
                                     double temperature) {
  LocalDistribution dist;
  dist.family = node_family(tree, node);
  std::vector<double> d(dist.family.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = euclidean_distance(point, tree.node(dist.family[i]).point.embedding);
  const double nearest = *std::min_element(d.begin(), d.end());
  dist.probs.resize(d.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    dist.probs[i] = std::exp(-(d[i] - nearest) / temperature);
    total += dist.probs[i];
  }
  for (double& p : dist.probs) p /= total;
  return dist;
}

double distribution_distance(const LocalDistribution& a, const LocalDistribution& b, NoveltyStatistic stat) {
  if (a.probs.size() != b.probs.size()) throw DimensionError("distributions are over different families");
  double s = 0.0;
  if (stat == NoveltyStatistic::kTotalVariation) {
    for (std::size_t i = 0; i < a.probs.size(); ++i) s += std::abs(a.probs[i] - b.probs[i]);
    return 0.5 * s;
  }
  constexpr double kFloor = 1e-300;
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    const double p = std::max(a.probs[i], kFloor);
    const double q = std::max(b.probs[i], kFloor);
    s += (p - q) * std::log(p / q);
  }
  return s;
}

double nonconformity(std::span<const LocalDistribution> members, const LocalDistribution& z, NoveltyStatistic stat) {
  if (members.empty()) throw InsufficientSupportError("nonconformity needs at least one cohort member");
  double sum = 0.0;
  for (const auto& m : members) sum += distribution_distance(z, m, stat);
  return sum / static_cast<double>(members.size());
}

std::vector<double> leave_one_out_alphas(std::span<const LocalDistribution> members, NoveltyStatistic stat) {
  const std::size_t m = members.size();
  std::vector<double> alphas(m, 0.0);
  if (m < 2) return alphas;
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) sum += distribution_distance(members[i], members[j], stat);
    }
    alphas[i] = sum / static_cast<double>(m - 1);
  }
  return alphas;
}

CohortIndex route_training_points(const BoundaryTree& tree, const LabeledDataset& training, const NoveltyConfig& cfg) {
  cfg.validate();
  std::vector<NodeCohort> cohorts(tree.size());
  for (NodeId n = 0; n < tree.size(); ++n) cohorts[n].node_id = n;
  for (std::size_t i = 0; i < training.size(); ++i) {
    const auto& x = training[i].embedding;
    const NodeId node = traverse(tree, x).final_node;
    cohorts[node].members.push_back(i);
    cohorts[node].distributions.push_back(local_distribution(tree, node, x, cfg.temperature));
  }
  for (auto& c : cohorts) c.alphas = leave_one_out_alphas(c.distributions, cfg.statistic);
  return CohortIndex(std::move(cohorts), cfg, training.size());
}

ConformalScore p_value(const NodeCohort& cohort, const LocalDistribution& z, NoveltyStatistic stat) {
  if (cohort.members.empty()) throw InsufficientSupportError("cohort is empty");
  ConformalScore score;
  score.alpha = nonconformity(cohort.distributions, z, stat);
  const auto at_least = std::count_if(cohort.alphas.begin(), cohort.alphas.end(),
                                      [&](double a) { return a >= score.alpha; });
  score.p_value = static_cast<double>(at_least) / static_cast<double>(cohort.members.size());
  return score;
}

DetectionReport detect_stream(const BoundaryTree& tree, const CohortIndex& cohorts, const LabeledDataset& stream,
                              const NoveltyConfig& cfg) {
  cfg.validate();
  DetectionReport report;
  report.verdicts.reserve(stream.size());
  for (const auto& point : stream.points()) {
    const TraversalPath path = traverse(tree, point.embedding);
    report.distance_evaluations += path.distance_evaluations;

    const NodeCohort& cohort = cohorts.at(path.final_node);
    NoveltyVerdict v;
    v.point_id = point.id;
    v.final_node = path.final_node;
    v.predicted_label = path.predicted_label;
    v.support = cohort.support();
    v.insufficient_support = v.support < std::max<std::size_t>(cfg.min_support, 1);
    if (v.support > 0) {
      const LocalDistribution z = local_distribution(tree, path.final_node, point.embedding, cfg.temperature);
      const ConformalScore s = p_value(cohort, z, cfg.statistic);
      // The family's point distances were already computed by the traversal:
      // N and its children on the last step, the parent on the one before.
      report.distance_evaluations += cohort.support();
      v.p_value = s.p_value;
      v.alpha = s.alpha;
    }
    v.is_novel = v.insufficient_support || v.p_value < cfg.threshold;
    report.flagged += v.is_novel;
    report.insufficient += v.insufficient_support;
    report.verdicts.push_back(std::move(v));
  }
  report.baseline_evaluations = cohorts.training_size() * stream.size();
  if (report.baseline_evaluations > 0) {
    report.savings_ratio =
        1.0 - static_cast<double>(report.distance_evaluations) / static_cast<double>(report.baseline_evaluations);
  }
  return report;
}

}  // namespace ebtree
