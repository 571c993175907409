#pragma once

// Pairwise LF-by-LF matrices: embedding cosine, vote agreement and
// double-fault rate, plus a rank-correlation diagnostic between two of them.

#include "lfrefine/types.hpp"

namespace lfrefine {

// M[i][j] = <e_i, e_j> / (|e_i| |e_j|), diagonal exactly 1.
SimilarityMatrix cosine_matrix(const EmbeddingSet& embeddings);

// Fraction of co-voted examples on which two LFs agree. 0 when they never co-vote.
SimilarityMatrix agreement_matrix(const VoteMatrix& votes);

// Number of co-voted examples per pair (diagonal = per-LF coverage count).
Matrix covote_counts(const VoteMatrix& votes);

enum class DoubleFaultNorm {
  examples,  // divide by n
  covotes,   // divide by the pair's co-vote count
};

// Rate at which both LFs vote and both are wrong.
SimilarityMatrix double_fault_matrix(const VoteMatrix& votes, const GoldLabels& gold,
                                     DoubleFaultNorm norm = DoubleFaultNorm::examples);

// Spearman correlation over the strict upper triangles of two equally sized
// matrices. Ties get average ranks. Requires m >= 3.
double matrix_rank_correlation(const SimilarityMatrix& a, const SimilarityMatrix& b);

}  // namespace lfrefine
