#include "lfrefine/synth.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "lfrefine/parallel.hpp"
#include "lfrefine/random.hpp"

namespace lfrefine {

namespace {

// Stream tags. Changing any of these changes every generated dataset.
enum Stream : std::uint64_t {
  kLabelStream = 1,
  kLatentStream = 2,
  kCopyStream = 3,
  kFlipStream = 4,
  kAbstainStream = 5,
  kCenterStream = 6,
  kEmbeddingStream = 7,
  kCloneEmbeddingStream = 8,
  kCloneFlipStream = 9,
};

std::string lf_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lf_%02zu", i);
  return buf;
}

std::vector<double> group_center(const SynthSpec& spec, std::size_t g) {
  const auto& group = spec.groups[g];
  if (!group.center.empty()) return group.center;
  std::vector<double> c(spec.dim);
  double norm = 0.0;
  for (std::size_t k = 0; k < spec.dim; ++k) {
    c[k] = rng::normal(spec.seed, kCenterStream, g, k);
    norm += c[k] * c[k];
  }
  norm = std::sqrt(norm);
  for (auto& v : c) v /= norm;
  return c;
}

}  // namespace

std::size_t SynthSpec::lf_count() const {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size;
  return total;
}

void SynthSpec::validate() const {
  if (n == 0) throw ValidationError("synthetic spec needs n >= 1");
  if (!(class_prior > 0.0 && class_prior < 1.0)) throw ValidationError("class_prior must lie in (0, 1)");
  if (dim == 0) throw ValidationError("embedding dim must be at least 1");
  if (lf_count() < 3) throw ValidationError("synthetic spec needs at least 3 LFs in total");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    const std::string where = "group " + std::to_string(g) + ": ";
    if (group.size == 0) throw ValidationError(where + "size must be at least 1");
    if (!(group.accuracy > 0.5 && group.accuracy < 1.0)) throw ValidationError(where + "accuracy must lie in (0.5, 1)");
    if (!(group.coverage > 0.0 && group.coverage <= 1.0)) throw ValidationError(where + "coverage must lie in (0, 1]");
    if (!(group.rho >= 0.0 && group.rho <= 1.0)) throw ValidationError(where + "rho must lie in [0, 1]");
    if (!(group.embedding_noise >= 0.0)) throw ValidationError(where + "embedding noise must be >= 0");
    if (!group.center.empty() && group.center.size() != dim) {
      throw ValidationError(where + "center dimension differs from dim");
    }
  }
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t m = spec.lf_count();
  const std::size_t n = spec.n;
  const std::uint64_t seed = spec.seed;

  std::vector<std::size_t> group_of;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    group_of.insert(group_of.end(), spec.groups[g].size, g);
  }

  std::vector<Vote> labels(n);
  std::vector<Vote> cells(n * m);
  parallel_for(n, [&](std::size_t x) {
    const Vote y = rng::uniform(seed, kLabelStream, x) < spec.class_prior ? kPositive : kNegative;
    labels[x] = y;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t g = group_of[i];
      const auto& group = spec.groups[g];
      Vote vote;
      if (rng::uniform(seed, kCopyStream, i, x) < group.rho) {
        const bool latent_flip = rng::uniform(seed, kLatentStream, g, x) < 1.0 - group.accuracy;
        vote = latent_flip ? static_cast<Vote>(-y) : y;
      } else {
        const bool flip = rng::uniform(seed, kFlipStream, i, x) < 1.0 - group.accuracy;
        vote = flip ? static_cast<Vote>(-y) : y;
      }
      if (rng::uniform(seed, kAbstainStream, i, x) < 1.0 - group.coverage) vote = kAbstain;
      cells[x * m + i] = vote;
    }
  });

  std::vector<std::string> names;
  for (std::size_t i = 0; i < m; ++i) names.push_back(lf_name(i));

  std::vector<std::vector<double>> centers;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) centers.push_back(group_center(spec, g));
  std::vector<std::vector<double>> vectors(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& group = spec.groups[group_of[i]];
    vectors[i] = centers[group_of[i]];
    for (std::size_t k = 0; k < spec.dim; ++k) {
      vectors[i][k] += group.embedding_noise * rng::normal(seed, kEmbeddingStream, i, k);
    }
  }

  SynthData data{
      VoteMatrix(n, names, std::move(cells)),
      GoldLabels::complete(std::move(labels)),
      EmbeddingSet(names, std::move(vectors)),
      DependencyStructure::independent(m),
      {},
      group_of,
  };
  for (std::size_t i = 0; i < m; ++i) {
    const auto& group = spec.groups[group_of[i]];
    data.accuracy_moments.push_back(group.coverage * (2.0 * group.accuracy - 1.0));
    for (std::size_t j = i + 1; j < m; ++j) {
      if (group_of[i] == group_of[j]) data.planted.edges.emplace_back(i, j);
    }
  }
  return data;
}

Matrix planted_second_moments(const SynthSpec& spec) {
  spec.validate();
  std::vector<const SynthGroup*> group_of;
  for (const auto& g : spec.groups) group_of.insert(group_of.end(), g.size, &g);
  const std::size_t m = group_of.size();
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& gi = *group_of[i];
    out(i, i) = gi.coverage;
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& gj = *group_of[j];
      const double ci = 2.0 * gi.accuracy - 1.0;
      const double cj = 2.0 * gj.accuracy - 1.0;
      double value;
      if (&gi == &gj) {
        // Both members copy the latent vote with probability rho^2 and then
        // agree surely; otherwise at least one vote is independent given y.
        const double rho2 = gi.rho * gi.rho;
        value = gi.coverage * gi.coverage * (rho2 + (1.0 - rho2) * ci * ci);
      } else {
        value = gi.coverage * gj.coverage * ci * cj;
      }
      out(i, j) = out(j, i) = value;
    }
  }
  return out;
}

RedundantData inject_redundancy(const EmbeddingSet& embeddings, const VoteMatrix& votes,
                                std::size_t copies, double embedding_noise, double vote_flip,
                                std::uint64_t seed) {
  if (copies < 1) throw ValidationError("inject_redundancy needs copies >= 1");
  if (embeddings.m() != votes.m()) throw ValidationError("dimension mismatch (LF axis) between embeddings and votes");
  if (!(embedding_noise >= 0.0)) throw ValidationError("embedding noise must be >= 0");
  if (!(vote_flip >= 0.0 && vote_flip <= 1.0)) throw ValidationError("vote flip probability must lie in [0, 1]");
  const std::size_t m = votes.m();
  const std::size_t total = m * (copies + 1);
  const std::size_t n = votes.n();

  std::unordered_set<std::string> used(votes.lf_names().begin(), votes.lf_names().end());
  std::vector<std::string> names = votes.lf_names();
  std::vector<std::vector<double>> vectors = embeddings.vectors();
  std::vector<std::optional<std::size_t>> source_of(m);
  for (std::size_t c = 1; c <= copies; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t column = m * c + i;
      std::string name = votes.lf_names()[i] + "_dup" + std::to_string(c);
      while (!used.insert(name).second) name += "_";
      names.push_back(std::move(name));
      auto v = embeddings.vector(i);
      for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] += embedding_noise * rng::normal(seed, kCloneEmbeddingStream, column, k);
      }
      vectors.push_back(std::move(v));
      source_of.emplace_back(i);
    }
  }

  std::vector<Vote> cells(n * total);
  parallel_for(n, [&](std::size_t x) {
    for (std::size_t col = 0; col < total; ++col) {
      Vote v = votes(x, col % m);
      if (col >= m && v != kAbstain && rng::uniform(seed, kCloneFlipStream, col, x) < vote_flip) {
        v = static_cast<Vote>(-v);
      }
      cells[x * total + col] = v;
    }
  });

  return RedundantData{EmbeddingSet(names, std::move(vectors)),
                       VoteMatrix(n, names, std::move(cells)), std::move(source_of)};
}

}  // namespace lfrefine
