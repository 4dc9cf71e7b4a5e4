#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "featgraph/baseline_similarity.hpp"
#include "featgraph/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace featgraph;

namespace {

FeatureGraph graph_of(std::vector<std::pair<TokenId, std::uint32_t>> nodes,
                      std::vector<GraphEdge> cooc = {}) {
  FeatureGraph g;
  for (auto [t, c] : nodes) g.nodes.push_back({t, c, 0});
  g.cooccurrence = cooc;
  g.edges = cooc;
  return g;
}

ActivationDump decoder_dump(std::vector<std::vector<float>> rows) {
  ActivationDump d;
  d.activations.resize(rows.size());
  DecoderMatrix m;
  m.rows = rows.size();
  m.cols = rows.at(0).size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  d.decoder = m;
  d.meta.d_model = static_cast<std::uint32_t>(m.cols);
  return d;
}

std::map<std::uint64_t, double> histogram_map(const FeatureGraph& g) {
  std::map<std::uint64_t, double> m;
  for (const auto& n : g.nodes) m[n.token] = n.window_count;
  return m;
}

std::map<std::uint64_t, double> pair_map(const FeatureGraph& g) {
  std::map<std::uint64_t, double> m;
  for (const auto& e : g.cooccurrence) {
    const auto a = g.nodes[e.u].token, b = g.nodes[e.v].token;
    m[(std::uint64_t{std::min(a, b)} << 32) | std::max(a, b)] = static_cast<double>(e.weight);
  }
  return m;
}

}  // namespace

TEST_SUITE("baseline_similarity") {
  TEST_CASE("decoder cosine hand cases") {
    const auto d = decoder_dump({{1, 2, 3}, {1, 2, 3}, {-1, -2, -3}, {0, 0, 0}});
    const std::vector<FeatureId> ids{0, 1, 2, 3};
    const auto k = decoder_cosine(d, ids);
    CHECK(k(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(k(3, 3) == 1.0);
    CHECK(k.kind == KernelKind::DecoderCosine);

    ActivationDump none;
    none.activations.resize(1);
    const std::vector<FeatureId> one{0};
    try {
      decoder_cosine(none, one);
      FAIL("no decoder accepted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::MissingDecoder);
    }
  }

  TEST_CASE("decoder cosine matches a hand oracle") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> g;
    std::vector<std::vector<float>> rows(4, std::vector<float>(3));
    for (auto& r : rows) {
      for (auto& x : r) x = g(rng);
    }
    const auto d = decoder_dump(rows);
    const std::vector<FeatureId> ids{2, 0, 3, 1};
    const auto k = decoder_cosine(d, ids);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        const auto& x = rows[ids[a]];
        const auto& y = rows[ids[b]];
        double dot = 0, nx = 0, ny = 0;
        for (int c = 0; c < 3; ++c) {
          dot += double(x[c]) * y[c];
          nx += double(x[c]) * x[c];
          ny += double(y[c]) * y[c];
        }
        const double expected = a == b ? 1.0 : (dot / std::sqrt(nx * ny) + 1.0) / 2.0;
        CHECK(k(a, b) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("token histogram cosine") {
    const std::vector<FeatureGraph> gs{graph_of({{1, 3}, {2, 4}}), graph_of({{5, 1}, {6, 1}}),
                                       graph_of({{1, 3}, {2, 4}}), graph_of({{2, 2}, {7, 1}})};
    const auto k = token_histogram_cosine(gs);
    CHECK(k(0, 1) == 0.0);
    CHECK(k(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    // shared token 2: 4*2 / (5 * sqrt(5))
    CHECK(k(0, 3) == doctest::Approx(8.0 / (5.0 * std::sqrt(5.0))).epsilon(1e-12));
  }

  TEST_CASE("co-occurrence cosine") {
    const std::vector<FeatureGraph> gs{graph_of({{1, 1}, {2, 1}, {3, 1}}, {{0, 1, 4}}),
                                       graph_of({{2, 1}, {3, 1}, {1, 1}}, {{0, 1, 4}}),
                                       graph_of({{2, 1}, {1, 1}}, {{0, 1, 6}})};
    const auto k = cooccurrence_cosine(gs);
    CHECK(k(0, 1) == 0.0);  // pairs (1,2) and (2,3)
    CHECK(k(0, 2) == doctest::Approx(1.0).epsilon(1e-12));  // same unordered pair, scaled
  }

  TEST_CASE("sparse cosines match the dense oracle") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
      std::vector<FeatureGraph> gs;
      const std::size_t n = 1 + rng() % 6;
      for (std::size_t g = 0; g < n; ++g) {
        auto graph = fgtest::random_graph(rng, 6);
        for (auto& node : graph.nodes) {
          node.token = static_cast<TokenId>(rng() % 10);
          node.window_count = 1 + rng() % 9;
        }
        // keep tokens distinct within the graph
        std::set<TokenId> seen;
        for (auto& node : graph.nodes) {
          while (seen.count(node.token)) node.token = (node.token + 1) % 64;
          seen.insert(node.token);
        }
        gs.push_back(graph);
      }
      std::vector<std::map<std::uint64_t, double>> hist, pairs;
      for (const auto& g : gs) {
        hist.push_back(histogram_map(g));
        pairs.push_back(pair_map(g));
      }
      const auto kh = token_histogram_cosine(gs), kc = cooccurrence_cosine(gs);
      const auto rh = oracle::cosine_gram(hist), rc = oracle::cosine_gram(pairs);
      for (std::size_t x = 0; x < n * n; ++x) {
        CHECK(kh.values[x] == doctest::Approx(rh[x]).epsilon(1e-12));
        CHECK(kc.values[x] == doctest::Approx(rc[x]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("cosine is scale invariant") {
    std::vector<SparseVector> v{{{1, 2.0}, {4, 1.0}}, {{1, 1.0}, {9, 3.0}}};
    const auto a = sparse_cosine_gram(v);
    for (auto& [_, x] : v[0]) x *= 17.5;
    const auto b = sparse_cosine_gram(v);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    const std::vector<SparseVector> zero{{}, {{3, 1.0}}};
    const auto z = sparse_cosine_gram(zero);
    CHECK(z == std::vector<double>{1, 0, 0, 1});
  }

  TEST_CASE("jaccard") {
    const std::vector<FeatureGraph> gs{graph_of({{1, 1}, {2, 1}, {3, 1}}), graph_of({{2, 1}, {3, 1}, {4, 1}}),
                                       graph_of({{3, 1}, {1, 1}, {2, 1}}), graph_of({{8, 1}, {9, 1}})};
    const auto k = jaccard_topk(gs);
    CHECK(k(0, 1) == 0.5);
    CHECK(k(0, 2) == 1.0);
    CHECK(k(0, 3) == 0.0);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
      std::vector<FeatureGraph> batch;
      std::vector<std::set<TokenId>> sets;
      for (int g = 0; g < 5; ++g) {
        std::set<TokenId> s;
        for (std::size_t t = 1 + rng() % 8; t > 0; --t) s.insert(static_cast<TokenId>(rng() % 12));
        std::vector<std::pair<TokenId, std::uint32_t>> nodes;
        for (auto t : s) nodes.push_back({t, 1});
        batch.push_back(graph_of(nodes));
        sets.push_back(s);
      }
      const auto kj = jaccard_topk(batch);
      for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t b = 0; b < 5; ++b) CHECK(kj(a, b) == doctest::Approx(oracle::jaccard(sets[a], sets[b])));
      }
    }
  }
}
