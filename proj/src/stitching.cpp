#include "ebtree/stitching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numeric>
#include <set>

#include "ebtree/errors.hpp"
#include "ebtree/random.hpp"

namespace ebtree {

namespace {

bool is_probability_vector(std::span<const double> v, std::size_t class_count) {
  if (v.size() != class_count) return false;
  double sum = 0.0;
  for (double x : v) {
    if (x < 0.0) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= 1e-3;
}

void check_predictions(const LabeledDataset& dataset, const Predictions& predictions) {
  if (predictions.size() != dataset.size()) {
    throw ValidationError("predictions cover " + std::to_string(predictions.size()) + " of " +
                          std::to_string(dataset.size()) + " points");
  }
  if (dataset.empty()) throw EmptyInputError("cannot build a tree from an empty dataset");
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 1099511628211ULL;
    }
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 1469598103934665603ULL;
};

}  // namespace

std::string second_closest_class(const EmbeddedPoint& point, const std::string& own_label,
                                 std::span<const std::string> class_order, std::span<const Hyperplane> planes) {
  if (class_order.size() < 2) throw DegenerateDataError("second-closest class needs at least two classes");

  if (is_probability_vector(point.embedding, class_order.size())) {
    std::vector<std::size_t> idx(class_order.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (point.embedding[a] != point.embedding[b]) return point.embedding[a] > point.embedding[b];
      return class_order[a] < class_order[b];
    });
    return class_order[idx[1]];
  }

  const Hyperplane* best = nullptr;
  double best_distance = 0.0;
  for (const auto& plane : planes) {
    if (plane.class_id == own_label) continue;
    const double d = distance_to_boundary(point.embedding, plane);
    if (best == nullptr || d < best_distance || (d == best_distance && plane.class_id < best->class_id)) {
      best = &plane;
      best_distance = d;
    }
  }
  if (best == nullptr) throw DegenerateDataError("no foreign hyperplane to compare against");
  return best->class_id;
}

RankedQueue::RankedQueue(std::size_t n) : present_(n, true), remaining_(n) {}

std::size_t RankedQueue::front() const {
  if (empty()) throw EmptyQueueError("queue is empty");
  std::size_t h = head_;
  while (!present_[h]) ++h;
  return h;
}

std::size_t RankedQueue::remove_first() {
  if (empty()) throw EmptyQueueError("queue is empty");
  while (!present_[head_]) ++head_;
  present_[head_] = false;
  --remaining_;
  return head_;
}

void RankedQueue::remove(std::size_t rank) {
  if (!contains(rank)) throw ValidationError("rank " + std::to_string(rank) + " is not queued");
  present_[rank] = false;
  --remaining_;
}

Candidate get_candidate(ConstructionState& state, const BuildConfig& cfg) {
  if (state.queue.empty()) throw EmptyQueueError("no candidates left");

  const EmbeddedPoint& current = state.point_at(state.current);
  const auto neighbors = state.index.query(state.index.segment_of(state.current), current.embedding, cfg.k);
  if (!neighbors.empty()) {
    const std::string expected =
        second_closest_class(current, state.label_at(state.current), state.class_order, state.planes);
    for (const auto& n : neighbors) {
      if (n.key != state.current && state.label_at(n.key) == expected) {
        state.queue.remove(n.key);
        state.index.remove(n.key);
        return {n.key, true};
      }
    }
  }

  const std::size_t head = state.queue.remove_first();
  state.index.remove(head);
  return {head, false};
}

NodeId find_parent(const BoundaryTree& tree, std::span<const double> embedding) {
  return traverse(tree, embedding).final_node;
}

BoundaryStitcher::BoundaryStitcher(const LabeledDataset& dataset, const Predictions& predictions,
                                   std::vector<Hyperplane> planes, BuildConfig cfg)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.baseline = false;
  check_predictions(dataset, predictions);

  state_.dataset = &dataset;
  state_.predictions = &predictions;
  state_.planes = std::move(planes);
  state_.class_order = sorted_class_order({predictions.begin(), predictions.end()});
  {
    std::vector<std::string> all(predictions.begin(), predictions.end());
    for (const auto& p : dataset.points()) all.push_back(p.label);
    auto order = sorted_class_order(std::move(all));
    // Softmax components line up with the full class list, not just the predicted classes.
    if (order.size() == dataset.dimension()) state_.class_order = std::move(order);
  }
  state_.ranked = sort_by_boundary_distance(dataset, predictions, state_.planes, cfg_.distance_mode);

  std::vector<Vector> in_rank_order;
  in_rank_order.reserve(state_.ranked.size());
  for (const auto& r : state_.ranked) in_rank_order.push_back(dataset[r.index].embedding);
  state_.index = build_segmented(in_rank_order, cfg_.lsh);
  state_.queue = RankedQueue(state_.ranked.size());

  state_.tree = BoundaryTree(dataset.dimension(), cfg_);
  state_.current = state_.queue.remove_first();
  state_.index.remove(state_.current);
  state_.tree.insert(std::nullopt, state_.point_at(state_.current), state_.label_at(state_.current));
}

StitchStep BoundaryStitcher::step() {
  StitchStep out;
  out.candidate = get_candidate(state_, cfg_);
  (out.candidate.from_neighbors ? stats_.neighbor_picks : stats_.fallback_picks)++;

  const EmbeddedPoint& child = state_.point_at(out.candidate.rank);
  const std::string& child_label = state_.label_at(out.candidate.rank);
  out.parent = find_parent(state_.tree, child.embedding);
  if (state_.tree.node(out.parent).label != child_label) {
    state_.tree.insert(out.parent, child, child_label);
    state_.current = out.candidate.rank;
    out.inserted = true;
  } else {
    ++stats_.discarded;
  }
  return out;
}

BuildResult BoundaryStitcher::finish() && {
  while (!done()) step();
  stats_.tree = std::move(state_.tree);
  stats_.tree.set_provenance(build_fingerprint(*state_.dataset, *state_.predictions, cfg_));
  return std::move(stats_);
}

BuildResult build_eb_tree(const LabeledDataset& dataset, const Predictions& predictions,
                          std::span<const Hyperplane> planes, const BuildConfig& cfg) {
  check_predictions(dataset, predictions);
  BoundaryStitcher stitcher(dataset, predictions, {planes.begin(), planes.end()}, cfg);
  return std::move(stitcher).finish();
}

BuildResult build_eb_tree(const LabeledDataset& dataset, const Predictions& predictions, const BuildConfig& cfg) {
  cfg.validate();
  check_predictions(dataset, predictions);
  if (sorted_class_order({predictions.begin(), predictions.end()}).size() < 2) {
    BuildConfig c = cfg;
    c.baseline = false;
    BuildResult result;
    result.tree = BoundaryTree(dataset.dimension(), c);
    result.tree.insert(std::nullopt, dataset[0], predictions[0]);
    result.tree.set_provenance(build_fingerprint(dataset, predictions, c));
    result.discarded = dataset.size() - 1;
    result.warnings.push_back("reference predictions contain a single class; the tree has one node");
    return result;
  }
  const auto planes = fit_one_vs_all(dataset, predictions, cfg.margin);
  BuildResult result = build_eb_tree(dataset, predictions, planes, cfg);
  for (const auto& p : planes) {
    if (!p.converged) result.warnings.push_back("margin fit for class '" + p.class_id + "' hit max_iters");
  }
  return result;
}

BuildResult build_basic_boundary_tree(const LabeledDataset& dataset, const Predictions& predictions,
                                      std::uint64_t shuffle_seed) {
  check_predictions(dataset, predictions);
  BuildConfig cfg;
  cfg.baseline = true;
  cfg.seed = shuffle_seed;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  BuildResult result;
  result.tree = BoundaryTree(dataset.dimension(), cfg);
  result.tree.insert(std::nullopt, dataset[order[0]], predictions[order[0]]);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& p = dataset[order[i]];
    const NodeId parent = find_parent(result.tree, p.embedding);
    if (result.tree.node(parent).label != predictions[order[i]]) {
      result.tree.insert(parent, p, predictions[order[i]]);
    } else {
      ++result.discarded;
    }
  }
  if (sorted_class_order({predictions.begin(), predictions.end()}).size() < 2) {
    result.warnings.push_back("reference predictions contain a single class; the tree has one node");
  }
  result.tree.set_provenance(build_fingerprint(dataset, predictions, cfg));
  return result;
}

FidelityReport f_measure(std::span<const std::string> predicted, std::span<const std::string> reference) {
  if (predicted.size() != reference.size()) throw ValidationError("prediction and reference counts differ");
  if (predicted.empty()) throw EmptyInputError("empty evaluation set");

  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> per_class;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == reference[i]) {
      ++per_class[predicted[i]].tp;
      ++agree;
    } else {
      ++per_class[predicted[i]].fp;
      ++per_class[reference[i]].fn;
    }
  }
  double sum_f = 0.0;
  for (const auto& [cls, c] : per_class) {
    const double denom = 2.0 * c.tp + c.fp + c.fn;
    sum_f += denom > 0 ? 2.0 * c.tp / denom : 0.0;
  }
  FidelityReport r;
  r.macro_f = sum_f / static_cast<double>(per_class.size());
  r.micro_f = static_cast<double>(agree) / static_cast<double>(predicted.size());
  r.evaluated = predicted.size();
  return r;
}

FidelityReport fidelity(const BoundaryTree& tree, const LabeledDataset& evaluation, const Predictions& reference) {
  if (reference.size() != evaluation.size()) throw ValidationError("reference predictions do not cover the evaluation set");
  if (evaluation.empty()) throw EmptyInputError("empty evaluation set");
  std::vector<std::string> predicted;
  predicted.reserve(evaluation.size());
  for (const auto& p : evaluation.points()) predicted.push_back(traverse(tree, p.embedding).predicted_label);
  return f_measure(predicted, reference);
}

double error_rate(const BoundaryTree& tree, const LabeledDataset& evaluation) {
  if (evaluation.empty()) throw EmptyInputError("empty evaluation set");
  std::size_t wrong = 0;
  for (const auto& p : evaluation.points()) wrong += traverse(tree, p.embedding).predicted_label != p.label;
  return static_cast<double>(wrong) / static_cast<double>(evaluation.size());
}

std::string build_fingerprint(const LabeledDataset& dataset, const Predictions& predictions, const BuildConfig& cfg) {
  Fnv1a h;
  h.u64(dataset.size());
  h.u64(dataset.dimension());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& p = dataset[i];
    h.str(p.id);
    h.str(p.label);
    h.str(i < predictions.size() ? predictions[i] : std::string{});
    h.str(p.source_ref);
    for (double v : p.embedding) h.f64(v);
  }
  h.u64(cfg.k);
  h.u64(cfg.lsh.num_tables);
  h.u64(cfg.lsh.hashes_per_table);
  h.f64(cfg.lsh.bucket_width);
  h.u64(cfg.lsh.seed);
  h.u64(cfg.lsh.segments);
  h.f64(cfg.margin.c);
  h.u64(cfg.margin.max_iters);
  h.f64(cfg.margin.tolerance);
  h.u64(cfg.margin.seed);
  h.str(std::string(to_string(cfg.distance_mode)));
  h.u64(cfg.max_children);
  h.u64(cfg.seed);
  h.u64(cfg.baseline ? 1 : 0);
  return h.hex();
}

}  // namespace ebtree
