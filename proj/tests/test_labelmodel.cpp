#include <doctest.h>

#include <cmath>
#include <random>

#include "lfrefine/labelmodel.hpp"
#include "lfrefine/parallel.hpp"
#include "lfrefine/refine.hpp"
#include "lfrefine/synth.hpp"
#include "test_util.hpp"

using namespace lfrefine;

namespace {

TaskConfig config_with_prior(double prior) {
  TaskConfig cfg;
  cfg.class_prior = prior;
  return cfg;
}

LabelModelParams independent_params(const std::vector<double>& p, double prior) {
  LabelModelParams params;
  params.class_prior = prior;
  for (std::size_t i = 0; i < p.size(); ++i) {
    params.survivors.push_back(i);
    params.accuracy_moment.push_back(2.0 * p[i] - 1.0);
    params.propensity.push_back(1.0);
    params.conditional_accuracy.push_back(p[i]);
    params.weight.push_back(std::log(p[i] / (1.0 - p[i])));
    params.components.push_back({i});
  }
  return params;
}

std::vector<std::string> lf_names(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back("lf" + std::to_string(i));
  return out;
}

// Conditionally independent votes: LF i votes y flipped with probability
// 1 - acc[i], abstaining with probability 1 - cov[i].
VoteMatrix ci_votes(std::mt19937_64& gen, std::size_t n, const std::vector<double>& acc,
                    const std::vector<double>& cov, std::vector<Vote>* gold = nullptr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vote> cells;
  for (std::size_t x = 0; x < n; ++x) {
    const Vote y = u(gen) < 0.5 ? kPositive : kNegative;
    if (gold) gold->push_back(y);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (u(gen) >= cov[i]) {
        cells.push_back(kAbstain);
        continue;
      }
      cells.push_back(u(gen) < acc[i] ? y : static_cast<Vote>(-y));
    }
  }
  return VoteMatrix(n, lf_names(acc.size()), cells);
}

}  // namespace

TEST_CASE("second moments: identical columns, Monte Carlo, abstaining column") {
  VoteMatrix same(4, {"a", "b"}, {1, 1, -1, -1, 1, 1, -1, -1});
  const auto s = second_moments(same);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(0, 0) == 1.0);

  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 40000;
  const std::vector<double> p_plus{0.8, 0.3, 0.55};
  std::vector<Vote> cells;
  for (std::size_t x = 0; x < n; ++x) {
    for (double p : p_plus) cells.push_back(u(gen) < p ? kPositive : kNegative);
  }
  const auto mc = second_moments(VoteMatrix(n, {"a", "b", "c"}, cells));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      const double expected = (2 * p_plus[i] - 1) * (2 * p_plus[j] - 1);
      CHECK(std::abs(mc(i, j) - expected) <= 3.0 / std::sqrt(static_cast<double>(n)));
    }
  }

  VoteMatrix abstain(3, {"a", "b", "c"}, {1, 0, -1, -1, 0, 1, 1, 0, 1});
  const auto z = second_moments(abstain);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(z(1, k) == 0.0);
    CHECK(z(k, 1) == 0.0);
  }
}

TEST_CASE("triplet accuracies of perfect LFs clamp to 0.98") {
  std::vector<Vote> cells;
  for (int x = 0; x < 20; ++x) {
    const Vote y = x % 3 ? kPositive : kNegative;
    for (int i = 0; i < 3; ++i) cells.push_back(y);
  }
  const VoteMatrix votes(20, lf_names(3), cells);
  const auto acc = triplet_accuracies(second_moments(votes), DependencyStructure::independent(3));
  for (double a : acc) CHECK(a == doctest::Approx(0.98));
}

TEST_CASE("triplet accuracies recover planted accuracies") {
  SynthSpec spec;
  spec.n = 50000;
  spec.seed = 5;
  for (double acc : {0.9, 0.8, 0.7, 0.6}) spec.groups.push_back({1, acc, 1.0, 0.0, {}, 0.05});
  const auto data = generate(spec);
  const auto est = triplet_accuracies(second_moments(data.votes), DependencyStructure::independent(4));
  const std::vector<double> planted{0.8, 0.6, 0.4, 0.2};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(data.accuracy_moments[i] == doctest::Approx(planted[i]));
    CHECK(std::abs(est[i] - planted[i]) <= 0.05);
  }
}

TEST_CASE("declared clique edges keep duplicated LFs out of shared triplets") {
  SynthSpec spec;
  spec.n = 50000;
  spec.seed = 6;
  spec.groups = {{3, 0.8, 1.0, 1.0, {}, 0.05},
                 {1, 0.85, 1.0, 0.0, {}, 0.05},
                 {1, 0.75, 1.0, 0.0, {}, 0.05},
                 {1, 0.7, 0.8, 0.0, {}, 0.05}};
  const auto data = generate(spec);
  auto structure = DependencyStructure::independent(6);
  structure.edges = {{0, 1}, {0, 2}, {1, 2}};
  const auto with_edges = triplet_accuracies(second_moments(data.votes), structure);

  // Oracle: the same data with the clique collapsed to a single member.
  const std::vector<std::size_t> dedup{0, 3, 4, 5};
  const auto reference = triplet_accuracies(second_moments(data.votes, dedup), DependencyStructure::independent(4));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(with_edges[i] - reference[0]) <= 0.05);
    CHECK(std::abs(with_edges[i] - data.accuracy_moments[i]) <= 0.05);
  }
  for (std::size_t i = 3; i < 6; ++i) CHECK(std::abs(with_edges[i] - reference[i - 2]) <= 0.05);

  // Ignoring the clique inflates the duplicated LFs' estimates.
  const auto naive = triplet_accuracies(second_moments(data.votes), DependencyStructure::independent(6));
  CHECK(naive[0] > data.accuracy_moments[0] + 0.05);
}

TEST_CASE("fit weights follow true accuracy ordering") {
  std::mt19937_64 gen(2);
  const auto votes = ci_votes(gen, 20000, {1.0, 0.8, 0.65}, {1.0, 1.0, 1.0});
  const auto params = fit(votes, DependencyStructure::independent(3), TaskConfig{});
  CHECK(params.weight[0] > params.weight[1]);
  CHECK(params.weight[1] > params.weight[2]);
  CHECK(params.conditional_accuracy[0] == doctest::Approx(0.99));
  for (double p : params.conditional_accuracy) {
    CHECK(p >= kMinConditionalAccuracy);
    CHECK(p <= kMaxConditionalAccuracy);
  }
}

TEST_CASE("zero edges give singleton components") {
  auto s = DependencyStructure::independent(5);
  const auto comps = dependency_components(s);
  REQUIRE(comps.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(comps[i] == std::vector<std::size_t>{i});

  s.removed = {1};
  s.survivors = {0, 2, 3, 4};
  s.anchors = Edge{0, 4};
  s.edges = {{2, 3}};
  CHECK(dependency_components(s) == std::vector<std::vector<std::size_t>>{{0}, {2, 3}, {4}});
}

TEST_CASE("the class prior enters inference as log-odds") {
  std::mt19937_64 gen(3);
  const auto votes = ci_votes(gen, 2000, {0.9, 0.8, 0.7}, {0.5, 0.5, 0.5});
  const auto params = fit(votes, DependencyStructure::independent(3), config_with_prior(0.074));
  CHECK(params.class_prior == 0.074);
  const auto post = predict(params, VoteMatrix(1, lf_names(3), {0, 0, 0}));
  CHECK(post.score[0] == doctest::Approx(std::log(0.074 / 0.926)).epsilon(1e-12));
  CHECK(post.p_positive[0] == doctest::Approx(0.074).epsilon(1e-12));
  CHECK(post.hard[0] == kNegative);
}

TEST_CASE("predict matches exact Bayes enumeration on independent LFs") {
  const VoteMatrix all_abstain(1, {"a"}, {0});
  CHECK(predict(independent_params({0.8}, 0.5), all_abstain).p_positive[0] == doctest::Approx(0.5));

  const auto one = predict(independent_params({0.8}, 0.5), VoteMatrix(1, {"a"}, {1}));
  CHECK(std::abs(one.p_positive[0] - 0.8) <= 1e-9);
  CHECK(std::abs(one.p_positive[0] - oracle::bayes_posterior(0.5, {0.8}, {1})) <= 1e-9);

  const auto two = predict(independent_params({0.8, 0.8}, 0.5), VoteMatrix(1, {"a", "b"}, {1, 1}));
  CHECK(std::abs(two.p_positive[0] - 0.64 / 0.68) <= 1e-9);
  CHECK(two.p_positive[0] == doctest::Approx(0.941).epsilon(1e-3));

  // Every vote pattern over three LFs with unequal accuracies and a skewed prior.
  const std::vector<double> p{0.9, 0.7, 0.6};
  const auto params = independent_params(p, 0.3);
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        const VoteMatrix v(1, {"a", "b", "c"}, {static_cast<Vote>(a), static_cast<Vote>(b), static_cast<Vote>(c)});
        const double got = predict(params, v).p_positive[0];
        CHECK(std::abs(got - oracle::bayes_posterior(0.3, p, {a, b, c})) <= 1e-9);
      }
    }
  }
}

TEST_CASE("components average their voters; best mode keeps the strongest") {
  auto params = independent_params({0.9, 0.7, 0.6}, 0.5);
  params.components = {{0, 1}, {2}};
  const VoteMatrix v(1, {"a", "b", "c"}, {1, 1, -1});
  const double w0 = std::log(9.0), w1 = std::log(7.0 / 3.0), w2 = std::log(1.5);
  CHECK(predict(params, v).score[0] == doctest::Approx((w0 + w1) / 2.0 - w2));
  CHECK(predict(params, v, ComponentMode::best).score[0] == doctest::Approx(w0 - w2));
}

TEST_CASE("majority vote") {
  const TaskConfig even = config_with_prior(0.5);
  CHECK(majority_vote(VoteMatrix(1, {"a", "b", "c"}, {1, 1, -1}), even).hard[0] == kPositive);
  const auto abstain = majority_vote(VoteMatrix(1, {"a", "b"}, {0, 0}), config_with_prior(0.132));
  CHECK(abstain.hard[0] == kNegative);
  CHECK(abstain.p_positive[0] == 0.5);
  CHECK(majority_vote(VoteMatrix(1, {"a", "b"}, {1, -1}), even).hard[0] == kPositive);
  CHECK(majority_vote(VoteMatrix(1, {"a", "b", "c"}, {1, 1, -1}), even).p_positive[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("flipping a vote toward +1 never lowers the posterior") {
  std::mt19937_64 gen(4);
  const auto votes = ci_votes(gen, 3000, {0.85, 0.75, 0.7, 0.65, 0.6}, {0.9, 0.7, 0.8, 0.6, 1.0});
  const auto params = fit(votes, DependencyStructure::independent(5), TaskConfig{});
  std::uniform_int_distribution<int> vote(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vote> row(5);
    for (auto& v : row) v = static_cast<Vote>(vote(gen));
    const std::size_t i = gen() % 5;
    if (row[i] == kPositive) continue;
    auto up = row;
    up[i] = static_cast<Vote>(row[i] + 1);
    const double before = predict(params, VoteMatrix(1, lf_names(5), row)).p_positive[0];
    const double after = predict(params, VoteMatrix(1, lf_names(5), up)).p_positive[0];
    CHECK(after >= before);
  }
}

TEST_CASE("swapping the classes maps P to 1 - P") {
  std::mt19937_64 gen(5);
  const auto votes = ci_votes(gen, 2000, {0.85, 0.75, 0.7, 0.65}, {0.9, 0.7, 0.8, 0.6});
  std::vector<Vote> flipped(votes.raw().size());
  for (std::size_t k = 0; k < flipped.size(); ++k) flipped[k] = static_cast<Vote>(-votes.raw()[k]);
  const VoteMatrix swapped(votes.n(), votes.lf_names(), flipped);

  auto s = DependencyStructure::independent(4);
  s.anchors = Edge{0, 3};
  s.edges = {{1, 2}};
  const auto a = predict(fit(votes, s, config_with_prior(0.3)), votes);
  const auto b = predict(fit(swapped, s, config_with_prior(0.7)), swapped);
  for (std::size_t x = 0; x < votes.n(); ++x) CHECK(std::abs(a.p_positive[x] - (1.0 - b.p_positive[x])) <= 1e-12);
}

TEST_CASE("fit and predict are deterministic at any thread count") {
  std::mt19937_64 gen(6);
  const auto votes = ci_votes(gen, 5000, {0.85, 0.75, 0.7, 0.65, 0.6, 0.8}, {0.9, 0.7, 0.8, 0.6, 1.0, 0.5});
  auto s = DependencyStructure::independent(6);
  s.edges = {{1, 2}};
  set_thread_count(1);
  const auto p1 = fit(votes, s, TaskConfig{});
  const auto r1 = predict(p1, votes);
  for (std::size_t t : {2, 8}) {
    set_thread_count(t);
    const auto p = fit(votes, s, TaskConfig{});
    CHECK(p.weight == p1.weight);
    CHECK(predict(p, votes).score == r1.score);
  }
  set_thread_count(1);
}

TEST_CASE("fit_timer grows with the number of LFs") {
  // Trend check only: median of repeated timings, compared with slack.
  std::mt19937_64 gen(7);
  std::vector<double> acc(40, 0.75), cov(40, 0.8);
  const auto votes = ci_votes(gen, 4000, acc, cov);
  std::vector<std::size_t> half(20);
  for (std::size_t i = 0; i < 20; ++i) half[i] = i;
  const auto small = votes.select_columns(half);
  const double t_small = fit_timer(small, DependencyStructure::independent(20), TaskConfig{}, 5);
  const double t_large = fit_timer(votes, DependencyStructure::independent(40), TaskConfig{}, 5);
  CHECK(t_large >= t_small);
}
