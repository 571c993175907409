#pragma once

// Structure-aware label model.
//
// Accuracies come from the triplet method of moments: for conditionally
// independent LFs i, j, k, E[l_i l_j] = a_i a_j, so
// |a_i| = sqrt(|E[l_i l_j] E[l_i l_k] / E[l_j l_k]|). Only triplets with no
// declared edge among their three pairs are used. Inference sums weighted votes
// per connected component of the dependency graph, averaging within each
// component so correlated LFs count once.
//
// Abstention is treated as independent of the label, which gives
// P(l_i = y | l_i != 0) = (1 + a_i / beta_i) / 2.

#include <cstddef>
#include <vector>

#include "lfrefine/types.hpp"

namespace lfrefine {

enum class ComponentMode {
  average,  // mean of weighted votes among the component's voters
  best,     // only the highest-weight voting LF of the component speaks
};

struct FitOptions {
  double eps = 1e-3;  // floor on |E[l_j l_k]| for a usable triplet
  ComponentMode mode = ComponentMode::average;
};

inline constexpr double kMinConditionalAccuracy = 0.01;
inline constexpr double kMaxConditionalAccuracy = 0.99;

// (1/n) sum_x l_i(x) l_j(x) over the listed columns. Diagonal is coverage.
Matrix second_moments(const VoteMatrix& votes, const std::vector<std::size_t>& columns);
Matrix second_moments(const VoteMatrix& votes);

// Accuracy moments per survivor (in structure.survivors order). `moments` is
// the second-moment matrix over the survivors in that order.
std::vector<double> triplet_accuracies(const Matrix& moments, const DependencyStructure& structure,
                                       double eps = 1e-3);

// Connected components of (survivors, edges), each sorted, ordered by first member.
std::vector<std::vector<std::size_t>> dependency_components(const DependencyStructure& structure);

LabelModelParams fit(const VoteMatrix& votes, const DependencyStructure& structure,
                     const TaskConfig& config, const FitOptions& options = {});

PosteriorLabels predict(const LabelModelParams& params, const VoteMatrix& votes,
                        ComponentMode mode = ComponentMode::average);

// Sign of the vote sum; ties go to the positive class iff class_prior >= 0.5.
PosteriorLabels majority_vote(const VoteMatrix& votes, const TaskConfig& config);
PosteriorLabels majority_vote(const VoteMatrix& votes, const std::vector<std::size_t>& columns,
                              const TaskConfig& config);

// Median wall-clock seconds of fit + predict over `runs` repetitions.
double fit_timer(const VoteMatrix& votes, const DependencyStructure& structure,
                 const TaskConfig& config, int runs = 3);

double logistic(double score);

}  // namespace lfrefine
