#pragma once

// Shared domain types for the structure refining pipeline.
//
// Index conventions: examples are rows (0..n-1), labeling functions (LFs) are
// columns (0..m-1). LF indices are 0-based everywhere, including files and
// reports. Votes are encoded as -1 (negative), 0 (abstain), +1 (positive).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lfrefine {

// Errors are split by who is at fault; the CLI maps them to exit codes.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vote = std::int8_t;
inline constexpr Vote kNegative = -1;
inline constexpr Vote kAbstain = 0;
inline constexpr Vote kPositive = 1;

enum class Metric { accuracy, f1_positive };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& name);

struct TaskConfig {
  std::string task_name = "task";
  std::pair<std::string, std::string> label_names{"negative", "positive"};
  double class_prior = 0.5;  // P(y = +1)
  Metric metric = Metric::accuracy;

  void validate() const;
};

// Row-major dense matrix of doubles. Used for moments and similarity storage.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  // Square submatrix keeping the listed rows and columns in the given order.
  Matrix select(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class VoteMatrix {
 public:
  VoteMatrix() = default;
  // votes is row-major n x m.
  VoteMatrix(std::size_t n, std::vector<std::string> lf_names, std::vector<Vote> votes);

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return names_.size(); }
  const std::vector<std::string>& lf_names() const noexcept { return names_; }

  Vote operator()(std::size_t example, std::size_t lf) const { return votes_[example * m() + lf]; }
  std::span<const Vote> row(std::size_t example) const {
    return {votes_.data() + example * m(), m()};
  }
  const std::vector<Vote>& raw() const noexcept { return votes_; }

  VoteMatrix select_columns(std::span<const std::size_t> columns) const;

  bool operator==(const VoteMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<Vote> votes_;
};

// Gold labels, possibly partial. labels[x] is meaningful only where present[x].
struct GoldLabels {
  std::vector<Vote> labels;
  std::vector<bool> present;

  static GoldLabels complete(std::vector<Vote> labels);

  std::size_t size() const noexcept { return labels.size(); }
  bool is_complete() const;
  std::size_t labeled_count() const;
  void validate() const;

  bool operator==(const GoldLabels&) const = default;
};

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::vector<std::string> lf_names, std::vector<std::vector<double>> vectors);

  std::size_t m() const noexcept { return names_.size(); }
  std::size_t dim() const noexcept { return vectors_.empty() ? 0 : vectors_.front().size(); }
  const std::vector<std::string>& lf_names() const noexcept { return names_; }
  const std::vector<std::vector<double>>& vectors() const noexcept { return vectors_; }
  const std::vector<double>& vector(std::size_t i) const { return vectors_[i]; }

  EmbeddingSet select(std::span<const std::size_t> indices) const;

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> vectors_;
};

enum class SimilarityKind { cosine, agreement, double_fault };

std::string to_string(SimilarityKind kind);
SimilarityKind similarity_kind_from_string(const std::string& name);

class SimilarityMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-9;

  SimilarityMatrix() = default;
  // Validates the invariants of the given kind.
  SimilarityMatrix(SimilarityKind kind, Matrix values);

  SimilarityKind kind() const noexcept { return kind_; }
  std::size_t m() const noexcept { return values_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const noexcept { return values_; }

  // Row/column restriction, as used to build the survivor matrix.
  SimilarityMatrix restrict_to(std::span<const std::size_t> indices) const;

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  SimilarityKind kind_ = SimilarityKind::cosine;
  Matrix values_;
};

using Edge = std::pair<std::size_t, std::size_t>;  // first < second

// Result of structure refinement. All indices are original LF indices.
struct DependencyStructure {
  std::vector<std::size_t> removed;    // in removal order
  std::vector<std::size_t> survivors;  // ascending
  std::optional<Edge> anchors;
  std::vector<Edge> edges;             // in selection order

  // All m LFs kept, no edges.
  static DependencyStructure independent(std::size_t m);

  void validate(std::size_t m) const;

  bool operator==(const DependencyStructure&) const = default;
};

// Largest edge count a structure over `survivors` LFs can carry once the two
// anchors are excluded: (s-2)(s-3)/2, and 0 below four survivors.
std::size_t max_edges(std::size_t survivors);

struct LabelModelParams {
  std::vector<std::size_t> survivors;        // original LF index per parameter slot
  std::vector<double> accuracy_moment;       // estimate of E[lambda_i * y]
  std::vector<double> propensity;            // P(lambda_i != 0)
  std::vector<double> conditional_accuracy;  // P(lambda_i = y | lambda_i != 0)
  std::vector<double> weight;                // log-odds of conditional accuracy
  double class_prior = 0.5;
  std::vector<std::vector<std::size_t>> components;  // original indices, sorted

  std::size_t size() const noexcept { return survivors.size(); }
};

struct PosteriorLabels {
  std::vector<double> p_positive;
  std::vector<Vote> hard;
  std::vector<double> score;  // log-odds

  std::size_t size() const noexcept { return p_positive.size(); }
};

struct Bundle {
  VoteMatrix votes;
  EmbeddingSet embeddings;
  std::optional<GoldLabels> gold;
  TaskConfig config;
};

// Checks cross-type alignment and returns the bundle unchanged on success.
Bundle validate_bundle(VoteMatrix votes, EmbeddingSet embeddings,
                       std::optional<GoldLabels> gold, TaskConfig config);

}  // namespace lfrefine
