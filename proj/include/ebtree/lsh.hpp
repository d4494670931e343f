#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ebtree/config.hpp"
#include "ebtree/core.hpp"

namespace ebtree {

using PointKey = std::size_t;

struct Neighbor {
  PointKey key;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Euclidean LSH over p-stable (Gaussian) projections:
///   h(v) = floor((v.g + u) / w),  g ~ N(0, I),  u ~ U[0, w)
/// with M such hashes concatenated per table and L tables. Queries rank the
/// union of colliding buckets by exact distance, so LSH misses lower recall
/// but never corrupt the order.
class LshIndex {
 public:
  using Signature = std::vector<std::int64_t>;

  LshIndex(std::size_t dimension, LshConfig config);

  void add(PointKey key, std::span<const double> v);

  /// Up to k live colliding entries, ascending by (distance, key).
  std::vector<Neighbor> query(std::span<const double> q, std::size_t k) const;

  /// Tombstones `key`. Throws NotIndexedError for unknown or already removed keys.
  void remove(PointKey key);

  bool contains(PointKey key) const;
  std::size_t size() const noexcept { return live_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const LshConfig& config() const noexcept { return config_; }

  Signature signature(std::span<const double> v, std::size_t table) const;

  /// Table contents as (signature, keys) sorted by signature; for inspection and tests.
  std::vector<std::pair<Signature, std::vector<PointKey>>> table_contents(std::size_t table) const;

 private:
  struct SignatureHash {
    std::size_t operator()(const Signature& s) const noexcept;
  };
  using Table = std::unordered_map<Signature, std::vector<PointKey>, SignatureHash>;

  std::size_t dimension_;
  LshConfig config_;
  std::vector<double> projections_;  // [table][hash][dim]
  std::vector<double> offsets_;      // [table][hash]
  std::vector<Table> tables_;
  std::unordered_map<PointKey, Vector> vectors_;
  std::unordered_set<PointKey> tombstones_;
  std::size_t live_ = 0;
};

LshIndex build_index(std::size_t dimension, std::span<const std::pair<PointKey, Vector>> points, const LshConfig& cfg);

/// Contiguous rank segments over a sorted queue, one LshIndex per segment.
/// Keys are ranks. Segment i covers [bounds[i], bounds[i+1]).
class SegmentedIndex {
 public:
  SegmentedIndex() = default;
  SegmentedIndex(std::vector<std::size_t> bounds, std::vector<LshIndex> indexes);

  std::size_t segment_of(std::size_t rank) const;
  std::size_t segment_count() const noexcept { return indexes_.size(); }
  const std::vector<std::size_t>& bounds() const noexcept { return bounds_; }
  const LshIndex& segment(std::size_t s) const { return indexes_.at(s); }

  std::vector<Neighbor> query(std::size_t segment, std::span<const double> q, std::size_t k) const;
  void remove(std::size_t rank);

 private:
  std::vector<std::size_t> bounds_;
  std::vector<LshIndex> indexes_;
};

/// Near-equal partition bounds: bounds[i] = floor(i * n / S). S is clamped to n.
std::vector<std::size_t> segment_bounds(std::size_t n, std::size_t segments);

/// `vectors` in rank order. Each segment gets its own seed derived from cfg.seed.
SegmentedIndex build_segmented(std::span<const Vector> vectors, const LshConfig& cfg);

}  // namespace ebtree
