#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ebtree/core.hpp"

namespace ebtree::testkit {

/// Gaussian clusters in a low-dimensional raw space. Neighbouring class
/// centres are `cluster_separation` apart: on a circle in the first two raw
/// axes when raw_dimension < num_classes, on scaled unit axes otherwise.
struct SyntheticSpec {
  std::size_t num_classes = 3;
  std::size_t points_per_class = 100;
  std::size_t raw_dimension = 2;
  double cluster_separation = 4.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  double temperature = 1.0;

  void validate() const;
};

struct RawDataset {
  std::vector<Vector> x;
  std::vector<int> y;
};

/// Multinomial logistic model over the raw space; stands in for the classifier
/// whose softmax output becomes the embedding.
struct ReferenceModel {
  std::size_t num_classes = 0;
  std::size_t raw_dimension = 0;
  std::vector<double> weights;  // [class][raw_dimension]
  std::vector<double> bias;     // [class]
  double temperature = 1.0;

  Vector probabilities(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
};

std::vector<Vector> class_centers(const SyntheticSpec& spec);

/// `per_class` draws for each listed class, interleaved by class.
RawDataset sample_raw(const SyntheticSpec& spec, std::span<const int> classes, std::size_t per_class,
                      std::uint64_t seed);

/// L2-regularised maximum likelihood by Newton's method.
ReferenceModel fit_reference_model(const RawDataset& raw, std::size_t num_classes, double temperature = 1.0);

struct EmbeddedData {
  LabeledDataset dataset;
  Predictions predictions;
};

/// Softmax embeddings, ground-truth labels and the model's predictions. Ids are
/// `id_prefix` followed by a zero-padded index.
EmbeddedData embed(const ReferenceModel& model, const RawDataset& raw, std::string_view id_prefix = "p");

struct Generated {
  RawDataset raw;
  ReferenceModel model;
  LabeledDataset dataset;
  Predictions predictions;
};

Generated generate(const SyntheticSpec& spec);

// Oracles. These deliberately share no code with the library paths they check.

/// Indices of the k nearest points, ties by index.
std::vector<std::size_t> brute_knn(std::span<const Vector> points, std::span<const double> query, std::size_t k);

/// Label of the tree node nearest to the query, ties by node id.
std::string brute_1nn_classify(const BoundaryTree& tree, std::span<const double> query);

/// Exact hard-margin separator.
struct ExactSvm {
  Vector w;
  double b = 0.0;
  double objective = 0.0;  // 1/2 ||w||^2
};

/// Enumerates active sets of up to dimension + 1 points, solves each
/// equality-constrained problem, and keeps the feasible one with the smallest
/// norm. Returns nullopt when the data are not linearly separable. Intended for
/// at most ~25 points.
std::optional<ExactSvm> exact_small_svm(std::span<const Vector> xs, std::span<const int> ys);

}  // namespace ebtree::testkit
