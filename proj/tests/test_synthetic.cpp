#include <algorithm>
#include <set>

#include "doctest.h"
#include "featgraph/baseline_similarity.hpp"
#include "featgraph/error.hpp"
#include "featgraph/eval_metrics.hpp"
#include "featgraph/graph_builder.hpp"
#include "featgraph/synthetic_bench.hpp"
#include "support.hpp"

using namespace featgraph;
using namespace featgraph::synth;

namespace {

MotifSpec family(std::string name, std::vector<std::string> pool, Topology t, double noise = 0.0) {
  MotifSpec m;
  m.family = std::move(name);
  m.pool = std::move(pool);
  m.topology = t;
  m.features_per_family = 5;
  m.events_per_feature = 20;
  m.window_noise = noise;
  return m;
}

PlantedSpec small_spec(double noise = 0.0) {
  PlantedSpec s;
  s.window_radius = 5;
  s.distractors = 50;
  s.d_model = 8;
  s.families = {family("letters", {"a", "b", "c", "d", "e", "f", "g", "h"}, Topology::Clique, noise),
                family("marks", {"#", "$", "%", "&", "*", "@"}, Topology::Star, noise),
                family("digits", {"1", "2", "3", "4", "5", "6", "7"}, Topology::Chain, noise)};
  return s;
}

std::set<TokenId> top_tokens(const FeatureGraph& g) {
  std::set<TokenId> s;
  for (const auto& n : g.nodes) s.insert(n.token);
  return s;
}

}  // namespace

TEST_SUITE("synthetic_bench") {
  TEST_CASE("tokenizer splits punctuation and keeps one leading space") {
    CHECK(Tokenizer::split("def f(x):\n  return x") ==
          std::vector<std::string>{"def", " f", "(", "x", ")", ":", "\n", " ", " return", " x"});
    CHECK(Tokenizer::split("a,b") == std::vector<std::string>{"a", ",", "b"});
    Tokenizer t;
    const auto ids = t.encode("x x y");
    CHECK(ids == std::vector<TokenId>{0, 1, 2});
    CHECK(t.vocab().tokens == std::vector<std::string>{"x", " x", " y"});
  }

  TEST_CASE("mixed corpus is deterministic, exact in size and covers every register") {
    MixedCorpusOptions o;
    o.token_budget = 10000;
    const auto a = gen_mixed_corpus(o), b = gen_mixed_corpus(o);
    CHECK(a.corpus == b.corpus);
    CHECK(a.vocab == b.vocab);
    CHECK(a.corpus.size() == 10000);

    o.token_budget = 5000;
    const auto c = gen_mixed_corpus(o);
    const std::set<std::uint32_t> kinds(c.doc_kind.begin(), c.doc_kind.end());
    CHECK(kinds.size() == kRegisterCount);
    CHECK(c.doc_kind.size() == c.corpus.doc_starts.size());

    o.seed = 43;
    CHECK_FALSE(gen_mixed_corpus(o).corpus == c.corpus);
    o.token_budget = 999;
    CHECK_THROWS_AS(gen_mixed_corpus(o), Error);
  }

  TEST_CASE("every code snippet contains a keyword") {
    const auto code = gen_code_corpus(42, 120);
    CHECK(code.corpus.doc_starts.size() == 120);
    CHECK(gen_code_corpus(42, 120).corpus == code.corpus);
    const auto sets = CodeSets::defaults();
    const std::set<std::string> kw(sets.keywords.begin(), sets.keywords.end());
    for (std::size_t d = 0; d < code.corpus.doc_starts.size(); ++d) {
      const auto [begin, end] = code.corpus.document_span(code.corpus.doc_starts[d]);
      bool found = false;
      for (auto p = begin; p < end && !found; ++p) {
        std::string s = code.vocab[code.corpus.tokens[p]];
        s.erase(0, s.find_first_not_of(" \t"));
        found = kw.count(s) > 0;
      }
      CHECK_MESSAGE(found, "snippet " << d);
    }
    const std::set<std::uint32_t> templates(code.doc_kind.begin(), code.doc_kind.end());
    CHECK(templates.size() == kCodeTemplateCount);
  }

  TEST_CASE("code corpus shares a tokenizer with the mixed corpus") {
    Tokenizer shared;
    MixedCorpusOptions o;
    o.token_budget = 3000;
    const auto mixed = gen_mixed_corpus(o, &shared);
    const auto code = gen_code_corpus(1, 50, &shared);
    CHECK(code.vocab.size() >= mixed.vocab.size());
    for (std::size_t i = 0; i < mixed.vocab.size(); ++i) CHECK(code.vocab.tokens[i] == mixed.vocab.tokens[i]);
  }

  TEST_CASE("planted spec validation") {
    auto s = small_spec();
    s.families[1].pool.push_back("a");
    try {
      gen_planted_dump(s, 1);
      FAIL("overlapping pools accepted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OverlappingPools);
    }
    s.allow_shared_pools = true;
    CHECK_NOTHROW(gen_planted_dump(s, 1));

    s = small_spec();
    s.families[0].features_per_family = 1;
    CHECK_THROWS_AS(gen_planted_dump(s, 1), Error);
    s = small_spec(0.2);
    s.distractors = 0;
    CHECK_THROWS_AS(gen_planted_dump(s, 1), Error);
    CHECK_THROWS_AS(topology_from_name("ring"), Error);
    for (auto t : {Topology::Clique, Topology::Chain, Topology::Star}) CHECK(topology_from_name(topology_name(t)) == t);
  }

  TEST_CASE("planted spec JSON round-trip") {
    const auto s = small_spec(0.1);
    const auto back = PlantedSpec::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK_THROWS_AS(PlantedSpec::from_json(nlohmann::json{{"families", 3}}), Error);
  }

  TEST_CASE("planted dumps are valid, deterministic and carry ground truth") {
    const auto s = small_spec(0.1);
    const auto a = gen_planted_dump(s, 9), b = gen_planted_dump(s, 9);
    CHECK(a.dump == b.dump);
    CHECK(a.truth.family == b.truth.family);
    CHECK_NOTHROW(validate_dump(a.dump));
    CHECK(a.dump.n_features() == 15);
    REQUIRE(a.truth.family.size() == 15);
    CHECK(a.truth.family[0] == 0);
    CHECK(a.truth.family[14] == 2);
    CHECK(a.truth.expected_label[0] == TokenType::Alphabetic);
    CHECK(a.truth.expected_label[5] == TokenType::Symbolic);
    CHECK(a.dump.decoder.has_value());
    CHECK_FALSE(gen_planted_dump(s, 10).dump == a.dump);
    CHECK(gen_planted_dump(s, 10).dump.vocab == a.dump.vocab);

    const auto dir = fgtest::temp_dir("planted");
    write_dump(dir / "p.bin", a.dump);
    CHECK(load_dump(dir / "p.bin") == a.dump);
  }

  TEST_CASE("every planted event passes the default threshold") {
    const auto s = small_spec(0.1);
    const auto p = gen_planted_dump(s, 3);
    GraphConfig cfg;
    for (FeatureId f = 0; f < p.dump.n_features(); ++f) {
      const auto ev = detect_events(p.dump, f, cfg.percentile, cfg.min_events, cfg.max_events);
      REQUIRE(ev.has_value());
      CHECK(ev->events.size() == 20);
    }
  }

  TEST_CASE("noise 0: one family shares its top-token set, families are disjoint") {
    const auto s = small_spec(0.0);
    const auto p = gen_planted_dump(s, 5);
    GraphConfig cfg;
    std::vector<FeatureGraph> graphs;
    for (FeatureId f = 0; f < p.dump.n_features(); ++f) {
      auto g = build_feature_graph(p.dump, f, cfg);
      REQUIRE(g.has_value());
      graphs.push_back(*g);
    }
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      for (std::size_t j = 0; j < graphs.size(); ++j) {
        if (p.truth.family[i] == p.truth.family[j]) {
          CHECK(top_tokens(graphs[i]) == top_tokens(graphs[j]));
        }
      }
    }
    const auto k = jaccard_topk(graphs);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      for (std::size_t j = 0; j < graphs.size(); ++j) {
        CHECK(k(i, j) == (p.truth.family[i] == p.truth.family[j] ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("topologies leave their shape in the graph") {
    const auto p = gen_planted_dump(small_spec(0.0), 2);
    GraphConfig cfg;
    // chain feature: each digit co-occurs with at most its two ring neighbours
    const auto chain = build_feature_graph(p.dump, 10, cfg);
    REQUIRE(chain.has_value());
    std::vector<int> degree(chain->nodes.size(), 0);
    for (const auto& e : chain->edges) ++degree[e.u], ++degree[e.v];
    CHECK(*std::max_element(degree.begin(), degree.end()) <= 2);
    // star feature: the hub appears in every window
    const auto star = build_feature_graph(p.dump, 5, cfg);
    REQUIRE(star.has_value());
    CHECK(p.dump.vocab[star->nodes[0].token] == "#");
    CHECK(star->nodes[0].window_count == 20);
  }
}
