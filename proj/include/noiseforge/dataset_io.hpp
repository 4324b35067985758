#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noiseforge/common.hpp"

namespace noiseforge {

/// Dense row-major float32 matrix of per-sample embeddings. Construction
/// validates shape and rejects non-finite values.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_samples, std::size_t dim, std::vector<float> data);

  std::size_t n_samples() const noexcept { return n_samples_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<float>& data() const noexcept { return data_; }

  /// Copies the given rows, in order, into a new matrix.
  FeatureMatrix gather(std::span<const std::size_t> rows) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t n_samples_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

struct LabelVector {
  std::vector<ClassId> labels;
  std::size_t n_classes = 0;

  LabelVector() = default;
  LabelVector(std::vector<ClassId> labels, std::size_t n_classes);

  std::size_t size() const noexcept { return labels.size(); }
  ClassId operator[](std::size_t i) const noexcept { return labels[i]; }
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

/// Features paired with clean labels (the clean set being corrupted).
class LabeledDataset {
 public:
  LabeledDataset(FeatureMatrix features, LabelVector clean_labels);

  const FeatureMatrix& features() const noexcept { return features_; }
  const LabelVector& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t n_classes() const noexcept { return labels_.n_classes; }
  std::span<const std::size_t> per_class_counts() const noexcept {
    return counts_;
  }

 private:
  FeatureMatrix features_;
  LabelVector labels_;
  std::vector<std::size_t> counts_;
};

/// Human-annotated subset: each sample carries both its clean and its
/// observed (noisy) label. sample_indices point into a parent dataset when
/// the subset was loaded against one, and are empty when self-contained.
struct NoisySubset {
  std::vector<std::size_t> sample_indices;
  FeatureMatrix features;
  LabelVector clean_labels;
  LabelVector noisy_labels;

  NoisySubset(std::vector<std::size_t> sample_indices, FeatureMatrix features,
              LabelVector clean_labels, LabelVector noisy_labels);

  std::size_t size() const noexcept { return clean_labels.size(); }
  std::size_t n_classes() const noexcept { return clean_labels.n_classes; }
  std::size_t disagreements() const noexcept;
  /// The subset's features grouped by clean label.
  LabeledDataset clean_dataset() const;
};

/// Header plus rows of non-negative integers, as parsed from a CSV file.
struct IntegerTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::uint64_t>> rows;
};

/// Parses a UTF-8, LF-terminated CSV of unsigned integers with a header row.
IntegerTable read_integer_csv(const std::filesystem::path& path);

FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const FeatureMatrix& m, const std::filesystem::path& path);

/// Reads an `index,label` CSV. Rows may appear in any order; the index
/// column must cover 0..N-1 exactly once.
LabelVector read_labels(const std::filesystem::path& path, std::size_t n_classes);
void write_labels(const LabelVector& labels, const std::filesystem::path& path);

/// Largest label + 1 over an `index,label` or `index,clean_label,...` CSV.
std::size_t infer_class_count(const std::filesystem::path& path);

/// Reads an `index,clean_label,noisy_label` CSV whose rows line up with
/// `features` (index i is row i of the matrix).
NoisySubset read_noisy_subset(const std::filesystem::path& path,
                              std::size_t n_classes, const FeatureMatrix& features);

/// Same CSV, but the index column refers to rows of a parent feature matrix;
/// the subset's features are gathered from it in ascending index order.
NoisySubset read_noisy_subset_from_parent(const std::filesystem::path& path,
                                          std::size_t n_classes,
                                          const FeatureMatrix& parent);

/// Clean and noisy label columns of a subset CSV, ordered by index. Needs no
/// features; the index column only has to be unique.
std::pair<LabelVector, LabelVector> read_subset_labels(const std::filesystem::path& path,
                                                       std::size_t n_classes);

void write_noisy_subset(const NoisySubset& subset, const std::filesystem::path& path);

}  // namespace noiseforge
