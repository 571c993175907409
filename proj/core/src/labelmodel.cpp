#include "lfrefine/labelmodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "lfrefine/parallel.hpp"

namespace lfrefine {

namespace {

double median(std::vector<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

// Position of each original LF index inside structure.survivors.
std::vector<std::size_t> local_index(const DependencyStructure& structure, std::size_t m) {
  std::vector<std::size_t> local(m, structure.survivors.size());
  for (std::size_t k = 0; k < structure.survivors.size(); ++k) local[structure.survivors[k]] = k;
  return local;
}

std::size_t max_index(const DependencyStructure& structure) {
  std::size_t m = 0;
  for (auto i : structure.survivors) m = std::max(m, i + 1);
  for (auto i : structure.removed) m = std::max(m, i + 1);
  return m;
}

}  // namespace

double logistic(double score) {
  if (score >= 0.0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

Matrix second_moments(const VoteMatrix& votes, const std::vector<std::size_t>& columns) {
  if (votes.n() == 0) throw ValidationError("second moments need at least one example");
  const std::size_t k = columns.size();
  for (auto c : columns) {
    if (c >= votes.m()) throw ValidationError("moment column " + std::to_string(c) + " out of range");
  }
  Matrix out(k, k);
  const double inv_n = 1.0 / static_cast<double>(votes.n());
  parallel_for(k, [&](std::size_t a) {
    for (std::size_t b = a; b < k; ++b) {
      long long sum = 0;
      for (std::size_t x = 0; x < votes.n(); ++x) {
        sum += votes(x, columns[a]) * votes(x, columns[b]);
      }
      out(a, b) = static_cast<double>(sum) * inv_n;
    }
  });
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) out(b, a) = out(a, b);
  }
  return out;
}

Matrix second_moments(const VoteMatrix& votes) {
  std::vector<std::size_t> all(votes.m());
  std::iota(all.begin(), all.end(), 0);
  return second_moments(votes, all);
}

std::vector<double> triplet_accuracies(const Matrix& moments, const DependencyStructure& structure,
                                       double eps) {
  const std::size_t m = structure.survivors.size();
  if (m < 3) throw ValidationError("triplet method needs at least 3 LFs, got " + std::to_string(m));
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  if (moments.rows() != m || moments.cols() != m) {
    throw ValidationError("moment matrix does not match the survivor count");
  }
  const auto local = local_index(structure, max_index(structure));
  std::vector<bool> linked(m * m, false);
  for (const auto& [a, b] : structure.edges) {
    const std::size_t i = local.at(a);
    const std::size_t j = local.at(b);
    if (i >= m || j >= m) throw ValidationError("edge endpoint is not a survivor");
    linked[i * m + j] = linked[j * m + i] = true;
  }

  std::vector<std::optional<double>> estimate(m);
  parallel_for(m, [&](std::size_t i) {
    std::vector<double> per_triplet;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i || linked[i * m + j]) continue;
      for (std::size_t k = j + 1; k < m; ++k) {
        if (k == i || linked[i * m + k] || linked[j * m + k]) continue;
        const double denom = moments(j, k);
        if (std::abs(denom) < eps) continue;
        per_triplet.push_back(std::sqrt(std::abs(moments(i, j) * moments(i, k) / denom)));
      }
    }
    if (!per_triplet.empty()) estimate[i] = median(std::move(per_triplet));
  });

  std::vector<double> found;
  for (const auto& e : estimate) {
    if (e) found.push_back(*e);
  }
  const double fallback = found.empty() ? 0.5 : median(found);

  std::vector<double> accuracy(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = moments(i, i);
    const double raw = estimate[i].value_or(fallback);
    accuracy[i] = std::clamp(raw, 0.02 * beta, 0.98 * beta);
  }
  return accuracy;
}

std::vector<std::vector<std::size_t>> dependency_components(const DependencyStructure& structure) {
  const std::size_t m = structure.survivors.size();
  const auto local = local_index(structure, max_index(structure));
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [a, b] : structure.edges) {
    const std::size_t ra = find(local.at(a));
    const std::size_t rb = find(local.at(b));
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::vector<std::size_t>> by_root(m);
  for (std::size_t k = 0; k < m; ++k) by_root[find(k)].push_back(structure.survivors[k]);
  std::vector<std::vector<std::size_t>> components;
  for (auto& c : by_root) {
    if (!c.empty()) components.push_back(std::move(c));
  }
  // survivors are ascending, so each component is already sorted.
  std::sort(components.begin(), components.end(),
            [](const auto& x, const auto& y) { return x.front() < y.front(); });
  return components;
}

LabelModelParams fit(const VoteMatrix& votes, const DependencyStructure& structure,
                     const TaskConfig& config, const FitOptions& options) {
  config.validate();
  structure.validate(votes.m());
  const Matrix moments = second_moments(votes, structure.survivors);
  const auto accuracy = triplet_accuracies(moments, structure, options.eps);

  LabelModelParams params;
  params.survivors = structure.survivors;
  params.class_prior = config.class_prior;
  params.components = dependency_components(structure);
  const std::size_t m = structure.survivors.size();
  params.accuracy_moment = accuracy;
  params.propensity.resize(m);
  params.conditional_accuracy.resize(m);
  params.weight.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = moments(i, i);
    params.propensity[i] = beta;
    if (beta == 0.0) {
      params.conditional_accuracy[i] = 0.5;
      params.weight[i] = 0.0;
      continue;
    }
    const double p = std::clamp((1.0 + accuracy[i] / std::max(beta, options.eps)) / 2.0,
                                kMinConditionalAccuracy, kMaxConditionalAccuracy);
    params.conditional_accuracy[i] = p;
    params.weight[i] = std::log(p / (1.0 - p));
  }
  return params;
}

PosteriorLabels predict(const LabelModelParams& params, const VoteMatrix& votes,
                        ComponentMode mode) {
  for (auto c : params.survivors) {
    if (c >= votes.m()) throw ValidationError("fitted LF index " + std::to_string(c) + " exceeds vote columns");
  }
  std::vector<std::size_t> slot(votes.m(), params.size());
  for (std::size_t k = 0; k < params.size(); ++k) slot[params.survivors[k]] = k;

  const double prior = std::log(params.class_prior / (1.0 - params.class_prior));
  PosteriorLabels out;
  out.p_positive.resize(votes.n());
  out.hard.resize(votes.n());
  out.score.resize(votes.n());
  parallel_for(votes.n(), [&](std::size_t x) {
    double score = prior;
    for (const auto& component : params.components) {
      double sum = 0.0;
      std::size_t voters = 0;
      double best_weight = 0.0;
      double best_term = 0.0;
      for (auto lf : component) {
        const Vote v = votes(x, lf);
        if (v == kAbstain) continue;
        const double w = params.weight[slot[lf]];
        const double term = static_cast<double>(v) * w;
        if (voters == 0 || w > best_weight) {
          best_weight = w;
          best_term = term;
        }
        sum += term;
        ++voters;
      }
      if (voters == 0) continue;
      score += mode == ComponentMode::average ? sum / static_cast<double>(voters) : best_term;
    }
    out.score[x] = score;
    out.p_positive[x] = logistic(score);
    out.hard[x] = out.p_positive[x] >= 0.5 ? kPositive : kNegative;
  });
  return out;
}

PosteriorLabels majority_vote(const VoteMatrix& votes, const std::vector<std::size_t>& columns,
                              const TaskConfig& config) {
  const Vote tie = config.class_prior >= 0.5 ? kPositive : kNegative;
  PosteriorLabels out;
  out.p_positive.resize(votes.n());
  out.hard.resize(votes.n());
  out.score.resize(votes.n());
  for (std::size_t x = 0; x < votes.n(); ++x) {
    int positive = 0;
    int cast = 0;
    for (auto c : columns) {
      const Vote v = votes(x, c);
      if (v == kAbstain) continue;
      ++cast;
      positive += v == kPositive;
    }
    const int sum = 2 * positive - cast;
    const double p = cast == 0 ? 0.5 : static_cast<double>(positive) / cast;
    out.p_positive[x] = p;
    out.hard[x] = sum > 0 ? kPositive : (sum < 0 ? kNegative : tie);
    const double bounded = std::clamp(p, 1e-6, 1.0 - 1e-6);
    out.score[x] = std::log(bounded / (1.0 - bounded));
  }
  return out;
}

PosteriorLabels majority_vote(const VoteMatrix& votes, const TaskConfig& config) {
  std::vector<std::size_t> all(votes.m());
  std::iota(all.begin(), all.end(), 0);
  return majority_vote(votes, all, config);
}

double fit_timer(const VoteMatrix& votes, const DependencyStructure& structure,
                 const TaskConfig& config, int runs) {
  runs = std::max(1, runs);
  std::vector<double> seconds;
  for (int r = 0; r < runs; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const auto params = fit(votes, structure, config);
    const auto posteriors = predict(params, votes);
    const auto stop = std::chrono::steady_clock::now();
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
    if (posteriors.size() != votes.n()) throw RuntimeError("prediction size mismatch");
  }
  return median(std::move(seconds));
}

}  // namespace lfrefine
