#include "lfrefine/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfrefine/parallel.hpp"

namespace lfrefine {

namespace {

// Pairs (i, j) with i < j in row-major order, for parallel pair loops.
std::vector<Edge> upper_pairs(std::size_t m) {
  std::vector<Edge> pairs;
  pairs.reserve(m * (m - (m > 0)) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

void mirror_fill(Matrix& out, const std::vector<Edge>& pairs, const std::vector<double>& values) {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out(pairs[p].first, pairs[p].second) = values[p];
    out(pairs[p].second, pairs[p].first) = values[p];
  }
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    // Ranks are 1-based; a tie run [start, end) shares the mean rank.
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
    start = end;
  }
  return ranks;
}

}  // namespace

SimilarityMatrix cosine_matrix(const EmbeddingSet& embeddings) {
  const std::size_t m = embeddings.m();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& v = embeddings.vector(i);
    norms[i] = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (!(norms[i] > 0.0)) {
      throw ValidationError("zero-norm embedding for LF '" + embeddings.lf_names()[i] + "'");
    }
  }
  const auto pairs = upper_pairs(m);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const auto& a = embeddings.vector(i);
    const auto& b = embeddings.vector(j);
    const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    values[p] = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
  });
  Matrix out(m, m);
  mirror_fill(out, pairs, values);
  for (std::size_t i = 0; i < m; ++i) out(i, i) = 1.0;
  return SimilarityMatrix(SimilarityKind::cosine, std::move(out));
}

Matrix covote_counts(const VoteMatrix& votes) {
  const std::size_t m = votes.m();
  Matrix counts(m, m);
  for (std::size_t x = 0; x < votes.n(); ++x) {
    const auto row = votes.row(x);
    for (std::size_t i = 0; i < m; ++i) {
      if (row[i] == kAbstain) continue;
      for (std::size_t j = i; j < m; ++j) {
        if (row[j] != kAbstain) counts(i, j) += 1.0;
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) counts(j, i) = counts(i, j);
  }
  return counts;
}

SimilarityMatrix agreement_matrix(const VoteMatrix& votes) {
  const std::size_t m = votes.m();
  const auto pairs = upper_pairs(m);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    std::size_t covotes = 0;
    std::size_t agree = 0;
    for (std::size_t x = 0; x < votes.n(); ++x) {
      const Vote a = votes(x, i);
      const Vote b = votes(x, j);
      if (a == kAbstain || b == kAbstain) continue;
      ++covotes;
      agree += a == b;
    }
    values[p] = static_cast<double>(agree) / static_cast<double>(std::max<std::size_t>(1, covotes));
  });
  Matrix out(m, m);
  mirror_fill(out, pairs, values);
  for (std::size_t i = 0; i < m; ++i) out(i, i) = 1.0;
  return SimilarityMatrix(SimilarityKind::agreement, std::move(out));
}

SimilarityMatrix double_fault_matrix(const VoteMatrix& votes, const GoldLabels& gold,
                                     DoubleFaultNorm norm) {
  if (gold.size() != votes.n() || !gold.is_complete()) {
    throw ValidationError("double-fault matrix needs gold labels for all " +
                          std::to_string(votes.n()) + " examples");
  }
  const std::size_t m = votes.m();
  const std::size_t n = votes.n();
  std::vector<Edge> pairs;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    std::size_t faults = 0;
    std::size_t covotes = 0;
    for (std::size_t x = 0; x < n; ++x) {
      const Vote a = votes(x, i);
      const Vote b = votes(x, j);
      if (a == kAbstain || b == kAbstain) continue;
      ++covotes;
      faults += a != gold.labels[x] && b != gold.labels[x];
    }
    const std::size_t denom = norm == DoubleFaultNorm::examples ? n : covotes;
    values[p] = static_cast<double>(faults) / static_cast<double>(std::max<std::size_t>(1, denom));
  });
  Matrix out(m, m);
  mirror_fill(out, pairs, values);
  return SimilarityMatrix(SimilarityKind::double_fault, std::move(out));
}

double matrix_rank_correlation(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  if (a.m() != b.m()) throw ValidationError("rank correlation needs matrices of equal size");
  if (a.m() < 3) throw ValidationError("rank correlation needs m >= 3 (at least 3 pairs)");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < a.m(); ++i) {
    for (std::size_t j = i + 1; j < a.m(); ++j) {
      xs.push_back(a(i, j));
      ys.push_back(b(i, j));
    }
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double count = static_cast<double>(rx.size());
  const double mean = (count + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mean) * (ry[k] - mean);
    sxx += (rx[k] - mean) * (rx[k] - mean);
    syy += (ry[k] - mean) * (ry[k] - mean);
  }
  // A constant side has no ranking information.
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace lfrefine
