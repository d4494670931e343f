#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ebtree {

/// Which hyperplane a point's boundary distance is measured against.
enum class DistanceMode {
  kOwn,     // the one-vs-all plane of the point's own class
  kMinAll,  // the nearest of all class planes
};

std::string_view to_string(DistanceMode mode);
DistanceMode distance_mode_from_string(std::string_view text);

struct MarginFitConfig {
  double c = 10.0;
  std::size_t max_iters = 2'000'000;
  double tolerance = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// p-stable Euclidean LSH parameters.
struct LshConfig {
  std::size_t num_tables = 8;
  std::size_t hashes_per_table = 4;
  double bucket_width = 1.0;
  std::uint64_t seed = 0;
  std::size_t segments = 16;

  void validate() const;
};

struct BuildConfig {
  std::size_t k = 32;
  LshConfig lsh;
  MarginFitConfig margin;
  DistanceMode distance_mode = DistanceMode::kOwn;
  std::size_t max_children = 0;  // 0 = unbounded
  std::uint64_t seed = 0;
  bool baseline = false;  // true when the tree came from the plain boundary-tree builder

  void validate() const;
};

}  // namespace ebtree
