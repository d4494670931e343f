#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ebtree/core.hpp"
#include "ebtree/explain.hpp"
#include "ebtree/novelty.hpp"

namespace ebtree::io {

/// Embedding CSV: header `id,label[,pred][,source_ref],d0,...,d{D-1}`.
/// Without a `pred` column the labels double as predictions.
struct EmbeddingFile {
  LabeledDataset dataset;
  Predictions predictions;
  bool has_predictions = false;
};

EmbeddingFile parse_embeddings(std::istream& in);
EmbeddingFile load_embeddings(const std::filesystem::path& path);

/// Writes the `pred` column always and `source_ref` only when some point has one.
/// Floats use 17 significant digits.
void write_embeddings(std::ostream& out, const LabeledDataset& dataset, const Predictions& predictions);
void save_embeddings(const std::filesystem::path& path, const LabeledDataset& dataset, const Predictions& predictions);

inline constexpr int kTreeFormatVersion = 1;

/// Canonical tree document: sorted keys, two-space indent, floats with 17
/// significant digits. Loading and re-serialising reproduces the same bytes.
std::string tree_to_json(const BoundaryTree& tree);
BoundaryTree tree_from_json(const std::string& text);
void save_tree(const std::filesystem::path& path, const BoundaryTree& tree);
BoundaryTree load_tree(const std::filesystem::path& path);

/// Single-line JSON records.
std::string explanation_record(const Explanation& e);
std::string classification_record(const std::string& id, const TraversalPath& path);
std::string verdict_record(const NoveltyVerdict& v);
std::string segment_record(const BoundaryTree& tree, const BoundarySegment& segment);

/// 17-significant-digit decimal form used by every writer.
std::string format_double(double v);

}  // namespace ebtree::io
