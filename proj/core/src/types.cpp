#include "lfrefine/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace lfrefine {

namespace {

void check_unique_names(const std::vector<std::string>& names, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) {
      throw ValidationError(std::string("duplicate LF name in ") + what + ": '" + name + "'");
    }
  }
}

}  // namespace

std::string to_string(Metric metric) {
  return metric == Metric::accuracy ? "accuracy" : "f1-positive";
}

Metric metric_from_string(const std::string& name) {
  if (name == "accuracy") return Metric::accuracy;
  if (name == "f1-positive" || name == "f1_positive" || name == "f1") return Metric::f1_positive;
  throw ValidationError("unknown metric '" + name + "'");
}

void TaskConfig::validate() const {
  if (!(class_prior > 0.0 && class_prior < 1.0)) {
    throw ValidationError("class_prior must lie in (0, 1)");
  }
  if (label_names.first == label_names.second) {
    throw ValidationError("label_names must be distinct");
  }
}

Matrix Matrix::select(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), indices.size());
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = 0; b < indices.size(); ++b) {
      out(a, b) = (*this)(indices[a], indices[b]);
    }
  }
  return out;
}

VoteMatrix::VoteMatrix(std::size_t n, std::vector<std::string> lf_names, std::vector<Vote> votes)
    : n_(n), names_(std::move(lf_names)), votes_(std::move(votes)) {
  if (votes_.size() != n_ * names_.size()) {
    throw ValidationError("dimension mismatch: vote buffer holds " + std::to_string(votes_.size()) +
                          " cells, expected n*m = " + std::to_string(n_ * names_.size()));
  }
  check_unique_names(names_, "votes");
  for (std::size_t k = 0; k < votes_.size(); ++k) {
    const Vote v = votes_[k];
    if (v < -1 || v > 1) {
      throw ValidationError("out-of-range vote " + std::to_string(int{v}) + " at example " +
                            std::to_string(k / names_.size()) + ", LF " +
                            std::to_string(k % names_.size()));
    }
  }
}

VoteMatrix VoteMatrix::select_columns(std::span<const std::size_t> columns) const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (auto c : columns) names.push_back(names_.at(c));
  std::vector<Vote> out;
  out.reserve(n_ * columns.size());
  for (std::size_t x = 0; x < n_; ++x) {
    for (auto c : columns) out.push_back((*this)(x, c));
  }
  return VoteMatrix(n_, std::move(names), std::move(out));
}

GoldLabels GoldLabels::complete(std::vector<Vote> labels) {
  GoldLabels gold;
  gold.present.assign(labels.size(), true);
  gold.labels = std::move(labels);
  gold.validate();
  return gold;
}

bool GoldLabels::is_complete() const {
  return std::all_of(present.begin(), present.end(), [](bool p) { return p; });
}

std::size_t GoldLabels::labeled_count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
}

void GoldLabels::validate() const {
  if (labels.size() != present.size()) {
    throw ValidationError("gold labels and coverage flags differ in length");
  }
  for (std::size_t x = 0; x < labels.size(); ++x) {
    if (present[x] && labels[x] != kNegative && labels[x] != kPositive) {
      throw ValidationError("gold label at example " + std::to_string(x) + " is not -1 or 1");
    }
  }
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> lf_names,
                           std::vector<std::vector<double>> vectors)
    : names_(std::move(lf_names)), vectors_(std::move(vectors)) {
  if (names_.size() != vectors_.size()) {
    throw ValidationError("dimension mismatch: " + std::to_string(vectors_.size()) +
                          " embedding vectors for " + std::to_string(names_.size()) + " LF names");
  }
  check_unique_names(names_, "embeddings");
  const std::size_t d = dim();
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    const auto& v = vectors_[i];
    if (v.size() != d || d == 0) {
      throw ValidationError("dimension mismatch: embedding '" + names_[i] + "' has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(d));
    }
    bool nonzero = false;
    for (double x : v) {
      if (!std::isfinite(x)) throw ValidationError("non-finite value in embedding '" + names_[i] + "'");
      nonzero = nonzero || x != 0.0;
    }
    if (!nonzero) throw ValidationError("zero embedding vector for LF '" + names_[i] + "'");
  }
}

EmbeddingSet EmbeddingSet::select(std::span<const std::size_t> indices) const {
  std::vector<std::string> names;
  std::vector<std::vector<double>> vecs;
  for (auto i : indices) {
    names.push_back(names_.at(i));
    vecs.push_back(vectors_.at(i));
  }
  return EmbeddingSet(std::move(names), std::move(vecs));
}

std::string to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::cosine: return "cosine";
    case SimilarityKind::agreement: return "agreement";
    case SimilarityKind::double_fault: return "double_fault";
  }
  return "unknown";
}

SimilarityKind similarity_kind_from_string(const std::string& name) {
  if (name == "cosine") return SimilarityKind::cosine;
  if (name == "agreement") return SimilarityKind::agreement;
  if (name == "double_fault" || name == "double-fault") return SimilarityKind::double_fault;
  throw ValidationError("unknown similarity kind '" + name + "'");
}

SimilarityMatrix::SimilarityMatrix(SimilarityKind kind, Matrix values)
    : kind_(kind), values_(std::move(values)) {
  const std::size_t m = values_.rows();
  if (values_.cols() != m) throw ValidationError("similarity matrix must be square");
  const double lo = kind_ == SimilarityKind::cosine ? -1.0 : 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (kind_ == SimilarityKind::cosine && values_(i, i) != 1.0) {
      throw ValidationError("cosine similarity diagonal must be exactly 1");
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double v = values_(i, j);
      if (!std::isfinite(v) || v < lo || v > 1.0) {
        std::ostringstream msg;
        msg << to_string(kind_) << " entry (" << i << "," << j << ") = " << v << " outside [" << lo
            << ", 1]";
        throw ValidationError(msg.str());
      }
      if (std::abs(v - values_(j, i)) > kSymmetryTolerance) {
        throw ValidationError("similarity matrix is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
      }
    }
  }
}

SimilarityMatrix SimilarityMatrix::restrict_to(std::span<const std::size_t> indices) const {
  for (auto i : indices) {
    if (i >= m()) throw ValidationError("restriction index out of range");
  }
  return SimilarityMatrix(kind_, values_.select(indices));
}

DependencyStructure DependencyStructure::independent(std::size_t m) {
  DependencyStructure s;
  s.survivors.resize(m);
  for (std::size_t i = 0; i < m; ++i) s.survivors[i] = i;
  return s;
}

std::size_t max_edges(std::size_t survivors) {
  if (survivors < 4) return 0;
  return (survivors - 2) * (survivors - 3) / 2;
}

void DependencyStructure::validate(std::size_t m) const {
  std::vector<int> seen(m, 0);
  for (auto i : removed) {
    if (i >= m) throw ValidationError("removed index " + std::to_string(i) + " out of range");
    if (seen[i]++) throw ValidationError("index " + std::to_string(i) + " listed twice");
  }
  for (auto i : survivors) {
    if (i >= m) throw ValidationError("survivor index " + std::to_string(i) + " out of range");
    if (seen[i]++) throw ValidationError("index " + std::to_string(i) + " is both removed and surviving");
  }
  if (removed.size() + survivors.size() != m) {
    throw ValidationError("removed and survivors do not cover all " + std::to_string(m) + " LFs");
  }
  if (!std::is_sorted(survivors.begin(), survivors.end())) {
    throw ValidationError("survivors must be ascending");
  }
  auto surviving = [&](std::size_t i) {
    return std::binary_search(survivors.begin(), survivors.end(), i);
  };
  if (anchors) {
    const auto [a, b] = *anchors;
    if (a >= b || !surviving(a) || !surviving(b)) {
      throw ValidationError("anchors must be two distinct surviving LFs");
    }
  }
  std::vector<Edge> sorted = edges;
  for (const auto& [a, b] : edges) {
    if (a >= b) throw ValidationError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") must satisfy first < second");
    if (!surviving(a) || !surviving(b)) throw ValidationError("edge touches a removed LF");
    if (anchors && (a == anchors->first || a == anchors->second || b == anchors->first ||
                    b == anchors->second)) {
      throw ValidationError("edge touches an anchor");
    }
  }
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("duplicate edge");
  }
  if (edges.size() > max_edges(survivors.size())) {
    throw ValidationError("edge count exceeds (s-2)(s-3)/2");
  }
}

Bundle validate_bundle(VoteMatrix votes, EmbeddingSet embeddings, std::optional<GoldLabels> gold,
                       TaskConfig config) {
  config.validate();
  if (embeddings.m() != votes.m()) {
    throw ValidationError("dimension mismatch (LF axis): votes have m=" + std::to_string(votes.m()) +
                          ", embeddings have " + std::to_string(embeddings.m()));
  }
  for (std::size_t i = 0; i < votes.m(); ++i) {
    if (votes.lf_names()[i] != embeddings.lf_names()[i]) {
      throw ValidationError("inconsistent lf_names at column " + std::to_string(i) + ": votes '" +
                            votes.lf_names()[i] + "' vs embeddings '" +
                            embeddings.lf_names()[i] + "'");
    }
  }
  if (gold) {
    gold->validate();
    if (gold->size() != votes.n()) {
      throw ValidationError("dimension mismatch (example axis): votes have n=" +
                            std::to_string(votes.n()) + ", gold has " +
                            std::to_string(gold->size()));
    }
  }
  return Bundle{std::move(votes), std::move(embeddings), std::move(gold), std::move(config)};
}

}  // namespace lfrefine
