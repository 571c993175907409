#include <doctest.h>

#include <numeric>
#include <random>

#include "lfrefine/refine.hpp"
#include "lfrefine/similarity.hpp"
#include "lfrefine/synth.hpp"
#include "test_util.hpp"

using namespace lfrefine;
using testutil::to_similarity;

TEST_CASE("LaRe with m_r = 0 removes nothing") {
  const auto sim = to_similarity({{1, .9, .2}, {.9, 1, .1}, {.2, .1, 1}});
  const auto r = lare(sim, 0);
  CHECK(r.removed.empty());
  CHECK(r.survivors == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("LaRe removes the larger index of the most similar pair") {
  const oracle::Grid g{{1, .9, .2}, {.9, 1, .1}, {.2, .1, 1}};
  const auto r = lare(to_similarity(g), 1);
  CHECK(r.removed == std::vector<std::size_t>{1});
  CHECK(r.survivors == std::vector<std::size_t>{0, 2});
  CHECK(r.removed == oracle::lare(g, 1).removed);
}

TEST_CASE("LaRe at a 10% rate on 10 LFs removes exactly one") {
  std::mt19937_64 gen(10);
  const auto sim = to_similarity(oracle::random_symmetric(gen, 10, false));
  const auto params = RefineParams::rates(0.1, 0.0);
  CHECK(params.resolve_removals(10) == 1);
  const auto s = refine_pipeline(sim, params);
  CHECK(s.removed.size() == 1);
  CHECK(s.survivors.size() == 9);
  CHECK(s.edges.empty());
}

TEST_CASE("removal counts round half to even") {
  CHECK(resolve_removal_count(0.3, 73) == 22);
  CHECK(resolve_removal_count(0.5, 73) == 36);
  CHECK(resolve_removal_count(0.5, 11) == 6);
  CHECK(resolve_removal_count(0.7, 11) == 8);
  CHECK(resolve_removal_count(0.0, 5) == 0);
  CHECK_THROWS_AS(resolve_removal_count(1.0, 5), ValidationError);
  CHECK_THROWS_AS(resolve_removal_count(-0.1, 5), ValidationError);
}

TEST_CASE("LaRe rejects m_r >= m") {
  const auto sim = to_similarity({{1, .5}, {.5, 1}});
  CHECK_THROWS_AS(lare(sim, 2), ValidationError);
  CHECK_THROWS_AS(RefineParams::counts(3, 0).resolve_removals(3), ValidationError);
}

TEST_CASE("CosGen with m_e = 0 returns the least similar pair as anchors") {
  const oracle::Grid g{{1, .5, .3, .8}, {.5, 1, .05, .4}, {.3, .05, 1, .6}, {.8, .4, .6, 1}};
  const auto r = cosgen(to_similarity(g), 0);
  CHECK(r.edges.empty());
  CHECK(r.anchors == Edge{1, 2});
}

TEST_CASE("CosGen edge bound") {
  CHECK(max_edges(11) == 36);
  std::mt19937_64 gen(36);
  const auto g = oracle::random_symmetric(gen, 11, false);
  const auto full = cosgen(to_similarity(g), 36);
  CHECK(full.edges.size() == 36);
  for (const auto& [i, j] : full.edges) {
    CHECK(i < j);
    CHECK(i != full.anchors.first);
    CHECK(j != full.anchors.second);
    CHECK(i != full.anchors.second);
    CHECK(j != full.anchors.first);
  }
  CHECK_THROWS_AS(cosgen(to_similarity(g), 37), ValidationError);
  CHECK_THROWS_AS(RefineParams::counts(0, 37).resolve_edges(11), ValidationError);
}

TEST_CASE("CosGen on a planted 5x5 matrix follows the per-step rescan oracle") {
  const oracle::Grid g{{1.0, 0.7, 0.2, 0.6, 0.9},
                       {0.7, 1.0, 0.1, 0.8, 0.3},
                       {0.2, 0.1, 1.0, 0.4, 0.5},
                       {0.6, 0.8, 0.4, 1.0, 0.6},
                       {0.9, 0.3, 0.5, 0.6, 1.0}};
  // Anchors (1, 2) at 0.1; the rest ranks (0,4)=.9 > (0,3)=.6 = (3,4)=.6.
  const auto r = cosgen(to_similarity(g), 3);
  const auto o = oracle::cosgen(g, 3);
  CHECK(r.anchors == Edge{o.a0, o.a1});
  CHECK(r.anchors == Edge{1, 2});
  CHECK(r.edges == o.edges);
  CHECK(r.edges == std::vector<Edge>{{0, 4}, {0, 3}, {3, 4}});
}

TEST_CASE("pipeline removes a planted duplicate and links the remaining top pair") {
  // LF 3 duplicates LF 0. With 4 LFs one removal leaves 3 survivors, where no
  // edge fits the bound, so a fifth LF provides room for one edge.
  const oracle::Grid four{{1.0, 0.2, 0.1, 1.0}, {0.2, 1.0, 0.5, 0.2}, {0.1, 0.5, 1.0, 0.1}, {1.0, 0.2, 0.1, 1.0}};
  CHECK(refine_pipeline(to_similarity(four), RefineParams::counts(1, 0)).removed == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(refine_pipeline(to_similarity(four), RefineParams::counts(1, 1)), ValidationError);

  const oracle::Grid five{{1.0, 0.2, 0.1, 1.0, 0.3},
                          {0.2, 1.0, 0.5, 0.2, 0.6},
                          {0.1, 0.5, 1.0, 0.1, 0.7},
                          {1.0, 0.2, 0.1, 1.0, 0.3},
                          {0.3, 0.6, 0.7, 0.3, 1.0}};
  const auto s = refine_pipeline(to_similarity(five), RefineParams::counts(1, 1));
  CHECK(s.removed == std::vector<std::size_t>{3});
  CHECK(s.survivors == std::vector<std::size_t>{0, 1, 2, 4});
  REQUIRE(s.anchors.has_value());
  CHECK(*s.anchors == Edge{0, 2});
  CHECK(s.edges == std::vector<Edge>{{1, 4}});
  CHECK_NOTHROW(s.validate(5));
}

TEST_CASE("pipeline with no removals and no edges passes everything through") {
  std::mt19937_64 gen(1);
  const auto sim = to_similarity(oracle::random_symmetric(gen, 6, false));
  const auto s = refine_pipeline(sim, RefineParams::counts(0, 0));
  CHECK(s.removed.empty());
  CHECK(s.survivors == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(s.edges.empty());
  CHECK_THROWS_AS(refine_pipeline(to_similarity({{1, .2, .3}, {.2, 1, .4}, {.3, .4, 1}}, SimilarityKind::agreement),
                                  RefineParams::counts(0, 0)),
                  ValidationError);
}

TEST_CASE("empirical structure: identical twins come first") {
  std::mt19937_64 gen(3);
  const std::size_t n = 300;
  std::vector<Vote> cells;
  for (std::size_t x = 0; x < n; ++x) {
    const Vote twin = gen() % 2 ? kPositive : kNegative;
    const Vote first = gen() % 2 ? kPositive : kNegative;
    cells.push_back(first);
    cells.push_back(twin);
    cells.push_back(static_cast<Vote>(static_cast<int>(gen() % 3) - 1));
    cells.push_back(twin);
    cells.push_back(static_cast<Vote>(-first));  // always disagrees with LF 0
  }
  const VoteMatrix votes(n, {"a", "b", "c", "d", "e"}, cells);
  const auto agreement = agreement_matrix(votes);
  CHECK(empirical_structure(agreement, RefineParams::counts(1, 0)).removed == std::vector<std::size_t>{3});
  const auto s = empirical_structure(agreement, RefineParams::counts(0, 1));
  CHECK(s.anchors == Edge{0, 4});
  CHECK(s.edges == std::vector<Edge>{{1, 3}});

  const auto empty = empirical_structure(agreement, RefineParams::counts(0, 0));
  CHECK(empty.removed.empty());
  CHECK(empty.edges.empty());
  CHECK(empty.survivors.size() == 5);
}

TEST_CASE("empirical structure recovers within-clique edges before cross-clique ones") {
  SynthSpec spec;
  spec.n = 5000;
  spec.seed = 9;
  spec.groups = {{3, 0.7, 1.0, 0.9, {}, 0.05}, {3, 0.7, 1.0, 0.9, {}, 0.05}, {3, 0.7, 1.0, 0.0, {}, 0.05}};
  const auto data = generate(spec);
  const auto agreement = agreement_matrix(data.votes);
  const auto s = empirical_structure(agreement, RefineParams::counts(0, 4));
  const auto o = oracle::cosgen(testutil::to_grid(agreement), 4);
  CHECK(s.anchors == Edge{o.a0, o.a1});
  CHECK(s.edges == o.edges);
  // Every clique pair not touching an anchor outranks every other pair.
  const auto in_clique = [&](std::size_t i, std::size_t j) {
    return data.group_of[i] == data.group_of[j] && data.group_of[i] < 2;
  };
  const auto [a0, a1] = *s.anchors;
  std::size_t available = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = i + 1; j < 9; ++j) {
      available += in_clique(i, j) && i != a0 && i != a1 && j != a0 && j != a1;
    }
  }
  const std::size_t expected = std::min<std::size_t>(available, 4);
  for (std::size_t t = 0; t < expected; ++t) CHECK(in_clique(s.edges[t].first, s.edges[t].second));
}

TEST_CASE("LaRe and CosGen match the full-rescan oracle on random matrices") {
  std::mt19937_64 gen(2025);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 4 + gen() % 47;
    const bool ties = trial % 2 == 1;
    const auto g = oracle::random_symmetric(gen, m, ties);
    const auto sim = to_similarity(g);
    const std::size_t m_r = gen() % m;
    CHECK(lare(sim, m_r).removed == oracle::lare(g, m_r).removed);

    const std::size_t m_e = gen() % (max_edges(m) + 1);
    const auto r = cosgen(sim, m_e);
    const auto o = oracle::cosgen(g, m_e);
    CHECK(r.anchors == Edge{o.a0, o.a1});
    CHECK(r.edges == o.edges);
  }
}

TEST_CASE("LaRe removal values never increase") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 4 + gen() % 20;
    const auto g = oracle::random_symmetric(gen, m, trial % 2 == 0);
    const auto trace = oracle::lare(g, m - 1);
    CHECK(lare(to_similarity(g), m - 1).removed == trace.removed);
    for (std::size_t t = 1; t < trace.selected_values.size(); ++t) {
      CHECK(trace.selected_values[t] <= trace.selected_values[t - 1]);
    }
    // Removing more LFs extends the earlier removal sequence.
    const auto shorter = lare(to_similarity(g), (m - 1) / 2).removed;
    const auto longer = lare(to_similarity(g), m - 1).removed;
    CHECK(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  }
}

TEST_CASE("refinement is covariant under LF relabeling without ties") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 5 + gen() % 15;
    const auto g = oracle::random_symmetric(gen, m, false);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    oracle::Grid p(m, std::vector<double>(m));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) p[a][b] = g[perm[a]][perm[b]];
    }
    // The first removal targets the same underlying pair; which member goes
    // depends on the labeling.
    const auto first = lare(to_similarity(g), 1).removed.front();
    const auto first_p = perm[lare(to_similarity(p), 1).removed.front()];
    const auto top = oracle::ranked(g, true, [](std::size_t, std::size_t) { return true; }).front();
    CHECK((first == top.j));
    CHECK((first_p == top.i || first_p == top.j));

    const auto rg = cosgen(to_similarity(g), 2);
    const auto rp = cosgen(to_similarity(p), 2);
    const auto unmap = [&](Edge e) {
      const std::size_t a = perm[e.first], b = perm[e.second];
      return Edge{std::min(a, b), std::max(a, b)};
    };
    CHECK(unmap(rp.anchors) == rg.anchors);
    REQUIRE(rp.edges.size() == rg.edges.size());
    for (std::size_t t = 0; t < rg.edges.size(); ++t) CHECK(unmap(rp.edges[t]) == rg.edges[t]);
  }
}

TEST_CASE("refinement is deterministic") {
  std::mt19937_64 gen(4);
  const auto sim = to_similarity(oracle::random_symmetric(gen, 30, true));
  const auto params = RefineParams::rates(0.3, 0.25);
  const auto a = refine_pipeline(sim, params);
  for (int k = 0; k < 5; ++k) CHECK(refine_pipeline(sim, params) == a);
  CHECK_NOTHROW(a.validate(30));
}
