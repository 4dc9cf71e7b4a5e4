#pragma once

// Random input generators and small helpers shared by the test binaries.

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "featgraph/activation_store.hpp"
#include "featgraph/graph_builder.hpp"

namespace fgtest {

using featgraph::Activation;
using featgraph::ActivationDump;
using featgraph::FeatureGraph;
using featgraph::GraphEdge;
using featgraph::GraphNode;
using featgraph::TokenId;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("featgraph_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string random_token(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", "7", "_", " ", "\n", "(", "{", "é", "日", "\t", "#", "q", "42"};
  std::uniform_int_distribution<std::size_t> len(0, 4), pick(0, pieces.size() - 1);
  std::string s;
  for (auto n = len(rng); n > 0; --n) s += pieces[pick(rng)];
  return s;
}

struct DumpShape {
  std::size_t max_vocab = 12;
  std::size_t max_positions = 80;
  std::size_t max_features = 6;
  double density = 0.3;
  bool decoder = true;
};

/// Random valid dump: sorted, strictly positive activations, optional decoder.
inline ActivationDump random_dump(std::mt19937_64& rng, const DumpShape& shape = {}) {
  ActivationDump d;
  std::uniform_int_distribution<std::size_t> vocab_n(1, shape.max_vocab), pos_n(1, shape.max_positions),
      feat_n(0, shape.max_features);
  const auto v = vocab_n(rng);
  for (std::size_t i = 0; i < v; ++i) d.vocab.tokens.push_back(random_token(rng));
  const auto m = pos_n(rng);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(v - 1));
  for (std::size_t i = 0; i < m; ++i) d.corpus.tokens.push_back(tok(rng));
  d.corpus.doc_starts.push_back(0);
  std::bernoulli_distribution boundary(0.1);
  for (std::uint32_t p = 1; p < m; ++p) {
    if (boundary(rng)) d.corpus.doc_starts.push_back(p);
  }
  std::bernoulli_distribution active(shape.density);
  std::uniform_real_distribution<float> value(0.01f, 10.0f);
  const auto f = feat_n(rng);
  d.activations.resize(f);
  for (auto& acts : d.activations) {
    for (std::uint32_t p = 0; p < m; ++p) {
      if (active(rng)) acts.push_back({p, value(rng)});
    }
  }
  std::uniform_int_distribution<std::uint32_t> dm(1, 5);
  d.meta.d_model = dm(rng);
  d.meta.d_sae = static_cast<std::uint32_t>(f);
  d.meta.seed = rng();
  d.meta.source = "random";
  if (shape.decoder && rng() % 2 == 0) {
    featgraph::DecoderMatrix dec;
    dec.rows = f;
    dec.cols = d.meta.d_model;
    std::normal_distribution<float> g;
    for (std::size_t i = 0; i < dec.rows * dec.cols; ++i) dec.values.push_back(g(rng));
    d.decoder = dec;
  }
  return d;
}

/// Random windows over a small token alphabet; tokens may repeat within a window.
inline std::vector<featgraph::Window> random_windows(std::mt19937_64& rng, std::size_t vocab, std::size_t max_windows,
                                                     std::size_t max_width) {
  std::uniform_int_distribution<std::size_t> n(1, max_windows), w(1, max_width);
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(vocab - 1));
  std::vector<featgraph::Window> out(n(rng));
  for (auto& win : out) {
    win.resize(w(rng));
    for (auto& t : win) t = tok(rng);
  }
  return out;
}

/// Random graph in canonical form with nodes already ordered as build_graph
/// would order them (masses are arbitrary, not derived from edges).
inline FeatureGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes, double edge_p = 0.4,
                                 std::uint64_t max_mass = 500) {
  std::uniform_int_distribution<std::size_t> nn(1, max_nodes);
  std::uniform_int_distribution<std::uint64_t> mass(0, max_mass), weight(1, 40);
  std::bernoulli_distribution edge(edge_p);
  FeatureGraph g;
  const auto n = nn(rng);
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back({static_cast<TokenId>(i), static_cast<std::uint32_t>(n - i), mass(rng)});
  }
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (edge(rng)) {
        const auto w = weight(rng);
        g.edges.push_back({u, v, w});
        g.cooccurrence.push_back({u, v, w});
      }
    }
  }
  return g;
}

inline std::vector<FeatureGraph> random_batch(std::mt19937_64& rng, std::size_t n, std::size_t max_nodes) {
  std::vector<FeatureGraph> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_graph(rng, max_nodes));
    out.back().feature = static_cast<featgraph::FeatureId>(i);
  }
  return out;
}

inline std::vector<std::uint32_t> random_partition(std::mt19937_64& rng, std::size_t n, std::uint32_t max_k) {
  std::uniform_int_distribution<std::uint32_t> k(1, max_k);
  std::uniform_int_distribution<std::uint32_t> c(0, k(rng) - 1);
  std::vector<std::uint32_t> out(n);
  for (auto& x : out) x = c(rng);
  return out;
}

}  // namespace fgtest
