#include "lfrefine/refine.hpp"

#include <cmath>

namespace lfrefine {

namespace {

struct Pick {
  std::size_t i = 0;
  std::size_t j = 0;
  bool found = false;
};

// Scans i < j in row-major order; strict comparison keeps the first (i.e.
// lexicographically smallest) pair among equal values.
template <typename Better, typename Usable>
Pick scan(const Matrix& values, Better better, Usable usable) {
  Pick best;
  double best_value = 0.0;
  const std::size_t m = values.rows();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!usable(i, j)) continue;
      const double v = values(i, j);
      if (!best.found || better(v, best_value)) {
        best = {i, j, true};
        best_value = v;
      }
    }
  }
  return best;
}

DependencyStructure run_pipeline(const SimilarityMatrix& similarity, const RefineParams& params) {
  const std::size_t m = similarity.m();
  const std::size_t m_r = params.resolve_removals(m);
  auto removal = lare(similarity, m_r);
  const std::size_t m_e = params.resolve_edges(removal.survivors.size());
  const auto restricted = similarity.restrict_to(removal.survivors);
  auto generated = cosgen(restricted, m_e);

  DependencyStructure out;
  out.removed = std::move(removal.removed);
  out.survivors = std::move(removal.survivors);
  const auto& s = out.survivors;
  out.anchors = Edge{s[generated.anchors.first], s[generated.anchors.second]};
  out.edges.reserve(generated.edges.size());
  for (const auto& [a, b] : generated.edges) out.edges.emplace_back(s[a], s[b]);
  return out;
}

std::size_t round_half_even(double value) {
  const double lower = std::floor(value);
  const double frac = value - lower;
  const bool up = frac > 0.5 || (frac == 0.5 && std::fmod(lower, 2.0) != 0.0);
  return static_cast<std::size_t>(up ? lower + 1.0 : lower);
}

}  // namespace

RefineParams RefineParams::counts(std::size_t m_r, std::size_t m_e) {
  RefineParams p;
  p.removal_count = m_r;
  p.edge_count = m_e;
  return p;
}

RefineParams RefineParams::rates(double removal_rate, double edge_rate) {
  RefineParams p;
  p.removal_rate = removal_rate;
  p.edge_rate = edge_rate;
  return p;
}

std::size_t resolve_removal_count(double rate, std::size_t m) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("removal rate must lie in [0, 1)");
  return round_half_even(rate * static_cast<double>(m));
}

std::size_t RefineParams::resolve_removals(std::size_t m) const {
  if (removal_count.has_value() == removal_rate.has_value()) {
    throw ValidationError("set exactly one of removal count (m_r) and removal rate");
  }
  const std::size_t m_r = removal_count ? *removal_count : resolve_removal_count(*removal_rate, m);
  if (m_r >= m) {
    throw ValidationError("m_r = " + std::to_string(m_r) + " must be below m = " + std::to_string(m));
  }
  return m_r;
}

std::size_t RefineParams::resolve_edges(std::size_t survivors) const {
  if (edge_count.has_value() == edge_rate.has_value()) {
    throw ValidationError("set exactly one of edge count (m_e) and edge rate");
  }
  const std::size_t limit = max_edges(survivors);
  if (edge_count) {
    if (*edge_count > limit) {
      throw ValidationError("m_e = " + std::to_string(*edge_count) + " exceeds (m'-2)(m'-3)/2 = " +
                            std::to_string(limit) + " for " + std::to_string(survivors) +
                            " surviving LFs");
    }
    return *edge_count;
  }
  if (!(*edge_rate >= 0.0 && *edge_rate <= 1.0)) throw ValidationError("edge rate must lie in [0, 1]");
  return round_half_even(*edge_rate * static_cast<double>(limit));
}

RemovalResult lare(const SimilarityMatrix& similarity, std::size_t m_r) {
  const std::size_t m = similarity.m();
  if (m_r >= m) {
    throw ValidationError("m_r = " + std::to_string(m_r) + " must be below m = " + std::to_string(m));
  }
  Matrix work = similarity.values();
  std::vector<bool> removed(m, false);
  RemovalResult out;
  for (std::size_t t = 0; t < m_r; ++t) {
    const Pick pick = scan(
        work, [](double v, double best) { return v > best; },
        [&](std::size_t i, std::size_t j) { return !removed[i] && !removed[j]; });
    const std::size_t k = pick.j;  // larger index of the pair
    out.removed.push_back(k);
    removed[k] = true;
    for (std::size_t c = 0; c < m; ++c) {
      work(k, c) = 0.0;
      work(c, k) = 0.0;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!removed[i]) out.survivors.push_back(i);
  }
  return out;
}

EdgeResult cosgen(const SimilarityMatrix& survivor_similarity, std::size_t m_e) {
  const std::size_t m = survivor_similarity.m();
  if (m < 2) throw ValidationError("CosGen needs at least 2 surviving LFs, got " + std::to_string(m));
  if (m_e > max_edges(m)) {
    throw ValidationError("m_e = " + std::to_string(m_e) + " exceeds (m'-2)(m'-3)/2 = " +
                          std::to_string(max_edges(m)));
  }
  Matrix work = survivor_similarity.values();
  const Pick anchor = scan(
      work, [](double v, double best) { return v < best; },
      [](std::size_t, std::size_t) { return true; });
  EdgeResult out;
  out.anchors = {anchor.i, anchor.j};

  std::vector<bool> is_anchor(m, false);
  is_anchor[anchor.i] = is_anchor[anchor.j] = true;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t a : {anchor.i, anchor.j}) {
      work(a, c) = 0.0;
      work(c, a) = 0.0;
    }
  }
  // Pairs already turned into edges stay excluded even though their zeroed
  // entry could still be the maximum when the remaining values are negative.
  std::vector<bool> taken(m * m, false);
  for (std::size_t t = 0; t < m_e; ++t) {
    const Pick pick = scan(
        work, [](double v, double best) { return v > best; },
        [&](std::size_t i, std::size_t j) {
          return !is_anchor[i] && !is_anchor[j] && !taken[i * m + j];
        });
    out.edges.emplace_back(pick.i, pick.j);
    taken[pick.i * m + pick.j] = true;
    work(pick.i, pick.j) = 0.0;
    work(pick.j, pick.i) = 0.0;
  }
  return out;
}

DependencyStructure refine_pipeline(const SimilarityMatrix& similarity, const RefineParams& params) {
  if (similarity.kind() != SimilarityKind::cosine) {
    throw ValidationError("refine_pipeline expects a cosine similarity matrix");
  }
  return run_pipeline(similarity, params);
}

DependencyStructure empirical_structure(const SimilarityMatrix& agreement,
                                        const RefineParams& params) {
  if (agreement.kind() != SimilarityKind::agreement) {
    throw ValidationError("empirical_structure expects an agreement matrix");
  }
  return run_pipeline(agreement, params);
}

}  // namespace lfrefine
