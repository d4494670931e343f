#include "ebtree/lsh.hpp"

#include <algorithm>
#include <cmath>

#include "ebtree/errors.hpp"
#include "ebtree/random.hpp"

namespace ebtree {

std::size_t LshIndex::SignatureHash::operator()(const Signature& s) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::int64_t v : s) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

LshIndex::LshIndex(std::size_t dimension, LshConfig config)
    : dimension_(dimension), config_(config), tables_(config.num_tables) {
  config_.validate();
  const std::size_t hashes = config_.num_tables * config_.hashes_per_table;
  Rng rng(config_.seed);
  projections_.resize(hashes * dimension_);
  offsets_.resize(hashes);
  for (std::size_t h = 0; h < hashes; ++h) {
    for (std::size_t d = 0; d < dimension_; ++d) projections_[h * dimension_ + d] = rng.normal();
    offsets_[h] = rng.uniform(0.0, config_.bucket_width);
  }
}

LshIndex::Signature LshIndex::signature(std::span<const double> v, std::size_t table) const {
  Signature sig(config_.hashes_per_table);
  for (std::size_t m = 0; m < config_.hashes_per_table; ++m) {
    const std::size_t h = table * config_.hashes_per_table + m;
    const double* g = projections_.data() + h * dimension_;
    double proj = offsets_[h];
    for (std::size_t d = 0; d < dimension_; ++d) proj += v[d] * g[d];
    sig[m] = static_cast<std::int64_t>(std::floor(proj / config_.bucket_width));
  }
  return sig;
}

void LshIndex::add(PointKey key, std::span<const double> v) {
  if (v.size() != dimension_) throw DimensionError("indexed vector has the wrong dimension");
  if (vectors_.contains(key)) throw ValidationError("key " + std::to_string(key) + " is already indexed");
  vectors_.emplace(key, Vector(v.begin(), v.end()));
  for (std::size_t t = 0; t < tables_.size(); ++t) tables_[t][signature(v, t)].push_back(key);
  ++live_;
}

std::vector<Neighbor> LshIndex::query(std::span<const double> q, std::size_t k) const {
  if (q.size() != dimension_) throw DimensionError("query has the wrong dimension");
  if (k == 0) throw ValidationError("k must be at least 1");
  if (live_ == 0) return {};

  std::vector<PointKey> candidates;
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    auto it = tables_[t].find(signature(q, t));
    if (it == tables_[t].end()) continue;
    for (PointKey key : it->second) {
      if (!tombstones_.contains(key)) candidates.push_back(key);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<Neighbor> out;
  out.reserve(candidates.size());
  for (PointKey key : candidates) out.push_back({key, euclidean_distance(q, vectors_.at(key))});
  auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.key < b.key;
  };
  if (out.size() > k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), by_distance);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), by_distance);
  }
  return out;
}

void LshIndex::remove(PointKey key) {
  if (!vectors_.contains(key) || tombstones_.contains(key)) {
    throw NotIndexedError("key " + std::to_string(key) + " is not indexed");
  }
  tombstones_.insert(key);
  --live_;
}

bool LshIndex::contains(PointKey key) const { return vectors_.contains(key) && !tombstones_.contains(key); }

std::vector<std::pair<LshIndex::Signature, std::vector<PointKey>>> LshIndex::table_contents(std::size_t table) const {
  std::vector<std::pair<Signature, std::vector<PointKey>>> out(tables_.at(table).begin(), tables_.at(table).end());
  std::sort(out.begin(), out.end());
  return out;
}

LshIndex build_index(std::size_t dimension, std::span<const std::pair<PointKey, Vector>> points, const LshConfig& cfg) {
  LshIndex index(dimension, cfg);
  for (const auto& [key, v] : points) index.add(key, v);
  return index;
}

SegmentedIndex::SegmentedIndex(std::vector<std::size_t> bounds, std::vector<LshIndex> indexes)
    : bounds_(std::move(bounds)), indexes_(std::move(indexes)) {}

std::size_t SegmentedIndex::segment_of(std::size_t rank) const {
  if (bounds_.size() < 2 || rank >= bounds_.back()) throw ValidationError("rank outside the segmented range");
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), rank);
  return static_cast<std::size_t>(it - bounds_.begin()) - 1;
}

std::vector<Neighbor> SegmentedIndex::query(std::size_t segment, std::span<const double> q, std::size_t k) const {
  return indexes_.at(segment).query(q, k);
}

void SegmentedIndex::remove(std::size_t rank) { indexes_.at(segment_of(rank)).remove(rank); }

std::vector<std::size_t> segment_bounds(std::size_t n, std::size_t segments) {
  if (n == 0) throw EmptyInputError("cannot segment an empty queue");
  if (segments == 0) throw ValidationError("segment count must be at least 1");
  const std::size_t s = std::min(segments, n);
  std::vector<std::size_t> bounds(s + 1);
  for (std::size_t i = 0; i <= s; ++i) bounds[i] = i * n / s;
  return bounds;
}

SegmentedIndex build_segmented(std::span<const Vector> vectors, const LshConfig& cfg) {
  cfg.validate();
  auto bounds = segment_bounds(vectors.size(), cfg.segments);
  const std::size_t dim = vectors.front().size();
  std::vector<LshIndex> indexes;
  indexes.reserve(bounds.size() - 1);
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    LshConfig seg_cfg = cfg;
    seg_cfg.seed = cfg.seed * 1000003ULL + s;
    LshIndex index(dim, seg_cfg);
    for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r) index.add(r, vectors[r]);
    indexes.push_back(std::move(index));
  }
  return SegmentedIndex(std::move(bounds), std::move(indexes));
}

}  // namespace ebtree
