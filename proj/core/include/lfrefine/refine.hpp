#pragma once

// Greedy structure refinement over an LF similarity matrix.
//
// LaRe repeatedly takes the most similar remaining pair and removes its
// larger-indexed member. CosGen then fixes the least similar surviving pair as
// independent anchors and adds edges between the most similar remaining pairs,
// one pair at a time. Every argmax/argmin skips the diagonal and breaks ties
// toward the lexicographically smallest (i, j) with i < j.

#include <cstddef>
#include <optional>
#include <vector>

#include "lfrefine/types.hpp"

namespace lfrefine {

struct RefineParams {
  std::optional<std::size_t> removal_count;
  std::optional<double> removal_rate;  // in [0, 1)
  std::optional<std::size_t> edge_count;
  std::optional<double> edge_rate;  // fraction of max_edges(survivors), in [0, 1]

  static RefineParams counts(std::size_t m_r, std::size_t m_e);
  static RefineParams rates(double removal_rate, double edge_rate);

  // Resolved m_r for m LFs. Validates that exactly one of count/rate is set.
  std::size_t resolve_removals(std::size_t m) const;
  // Resolved m_e for the given survivor count.
  std::size_t resolve_edges(std::size_t survivors) const;
};

// round-half-to-even(rate * m).
std::size_t resolve_removal_count(double rate, std::size_t m);

struct RemovalResult {
  std::vector<std::size_t> removed;    // removal order
  std::vector<std::size_t> survivors;  // ascending
};

RemovalResult lare(const SimilarityMatrix& similarity, std::size_t m_r);

struct EdgeResult {
  Edge anchors;
  std::vector<Edge> edges;  // selection order, indices local to the input matrix
};

EdgeResult cosgen(const SimilarityMatrix& survivor_similarity, std::size_t m_e);

// LaRe, restriction to survivors, CosGen. Reports original LF indices.
DependencyStructure refine_pipeline(const SimilarityMatrix& similarity, const RefineParams& params);

// Same contract, driven by vote agreement instead of embeddings.
DependencyStructure empirical_structure(const SimilarityMatrix& agreement,
                                        const RefineParams& params);

}  // namespace lfrefine
