#pragma once

// Synthetic datasets with planted LF accuracies, correlated groups and
// clustered embeddings.
//
// Generative model, per example x and group g:
//   y(x)      = +1 with probability class_prior, else -1
//   z_g(x)    = y(x) flipped with probability 1 - accuracy_g
//   member i of g votes z_g(x) with probability rho_g, otherwise its own
//   independent copy of y(x) flipped with probability 1 - accuracy_g, and
//   abstains with probability 1 - coverage_g.
// Every draw is keyed by (seed, stream, group/LF, example), see random.hpp.
// Since each vote is correct with probability accuracy_g whichever branch it
// takes, a_i = coverage_g (2 accuracy_g - 1).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "lfrefine/types.hpp"

namespace lfrefine {

struct SynthGroup {
  std::size_t size = 1;
  double accuracy = 0.75;  // in (0.5, 1)
  double coverage = 1.0;   // in (0, 1]
  double rho = 0.0;        // probability a member copies the shared latent vote
  // Explicit center, or empty to draw a random unit-norm center.
  std::vector<double> center;
  double embedding_noise = 0.05;  // per-coordinate standard deviation
};

struct SynthSpec {
  std::size_t n = 1000;
  double class_prior = 0.5;
  std::size_t dim = 16;
  std::vector<SynthGroup> groups;
  std::uint64_t seed = 0;

  std::size_t lf_count() const;
  void validate() const;
};

struct SynthData {
  VoteMatrix votes;
  GoldLabels gold;
  EmbeddingSet embeddings;
  DependencyStructure planted;            // within-group edges, nothing removed
  std::vector<double> accuracy_moments;   // planted a_i
  std::vector<std::size_t> group_of;      // group index per LF
};

SynthData generate(const SynthSpec& spec);

// Closed-form E[l_i l_j] under the generative model (diagonal = coverage).
Matrix planted_second_moments(const SynthSpec& spec);

struct RedundantData {
  EmbeddingSet embeddings;
  VoteMatrix votes;
  // source_of[i] = original LF a column was cloned from; nullopt for originals.
  std::vector<std::optional<std::size_t>> source_of;
};

// Appends `copies` near-duplicates of every LF after the originals: copy c of
// LF i lands at column m*(c+1) + i.
RedundantData inject_redundancy(const EmbeddingSet& embeddings, const VoteMatrix& votes,
                                std::size_t copies, double embedding_noise, double vote_flip,
                                std::uint64_t seed);

}  // namespace lfrefine
