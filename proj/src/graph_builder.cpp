#include "featgraph/graph_builder.hpp"

#include <algorithm>
#include <numeric>

#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"

namespace featgraph {

namespace {

constexpr std::string_view kGraphMagic = "FGRAPHS1";

}  // namespace

nlohmann::json to_json(const GraphConfig& c) {
  return {{"W", c.window},          {"K", c.top_k},
          {"C", c.min_cooc},        {"p", c.percentile},
          {"min_events", c.min_events}, {"max_events", c.max_events}};
}

GraphConfig graph_config_from_json(const nlohmann::json& j, GraphConfig c) {
  c.window = j.value("W", c.window);
  c.top_k = j.value("K", c.top_k);
  c.min_cooc = j.value("C", c.min_cooc);
  c.percentile = j.value("p", c.percentile);
  c.min_events = j.value("min_events", c.min_events);
  c.max_events = j.value("max_events", c.max_events);
  return c;
}

std::optional<EventSet> detect_events(const ActivationDump& dump, FeatureId feature, double percentile,
                                      std::uint32_t min_events, std::uint32_t max_events) {
  if (feature >= dump.n_features()) {
    throw Error(Errc::UnknownFeature, "feature " + std::to_string(feature) + " not in dump");
  }
  const auto& acts = dump.activations[feature];
  if (acts.empty()) return std::nullopt;

  std::vector<double> values(acts.size());
  std::transform(acts.begin(), acts.end(), values.begin(), [](const Activation& a) { return double{a.value}; });
  EventSet set;
  set.feature = feature;
  set.threshold = activation_threshold(values, percentile);
  for (const auto& a : acts) {
    if (double{a.value} > set.threshold) set.events.push_back(a);
  }
  if (set.events.size() > max_events) {
    // Keep the strongest events; stable on position so ties favour earlier positions.
    std::stable_sort(set.events.begin(), set.events.end(),
                     [](const Activation& a, const Activation& b) { return a.value > b.value; });
    set.events.resize(max_events);
    std::sort(set.events.begin(), set.events.end(),
              [](const Activation& a, const Activation& b) { return a.position < b.position; });
  }
  if (set.events.size() < min_events) return std::nullopt;
  return set;
}

std::vector<Window> collect_windows(const EventSet& events, const CorpusTokens& corpus, std::uint32_t window) {
  if (window < 1) throw Error(Errc::InvalidArgument, "window size must be >= 1");
  std::vector<Window> out;
  out.reserve(events.events.size());
  for (const auto& e : events.events) {
    const auto [doc_begin, doc_end] = corpus.document_span(e.position);
    const std::size_t t = e.position;
    const std::size_t lo = t >= doc_begin + window ? t - window : doc_begin;
    const std::size_t hi = std::min(doc_end, t + window + 1);
    out.emplace_back(corpus.tokens.begin() + static_cast<std::ptrdiff_t>(lo),
                     corpus.tokens.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

FeatureGraph build_graph(std::span<const Window> windows, std::size_t vocab_size, std::uint32_t top_k,
                         std::uint32_t min_cooc) {
  if (windows.empty()) throw Error(Errc::InvalidArgument, "build_graph needs at least one window");
  if (top_k < 2 || min_cooc < 1) throw Error(Errc::InvalidArgument, "build_graph needs K >= 2 and C >= 1");

  // Window counts: each window contributes once per distinct token.
  std::vector<TokenId> presence;
  for (const auto& w : windows) {
    Window distinct = w;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    presence.insert(presence.end(), distinct.begin(), distinct.end());
  }
  std::sort(presence.begin(), presence.end());
  std::vector<GraphNode> candidates;
  for (std::size_t i = 0; i < presence.size();) {
    std::size_t j = i;
    while (j < presence.size() && presence[j] == presence[i]) ++j;
    if (presence[i] >= vocab_size) {
      throw Error(Errc::InvalidArgument, "window token " + std::to_string(presence[i]) + " outside vocabulary");
    }
    candidates.push_back({presence[i], static_cast<std::uint32_t>(j - i), 0});
    i = j;
  }
  if (candidates.size() < 2) {
    throw Error(Errc::DegenerateGraph, "fewer than two distinct tokens in the event windows");
  }
  std::sort(candidates.begin(), candidates.end(), [](const GraphNode& a, const GraphNode& b) {
    return a.window_count != b.window_count ? a.window_count > b.window_count : a.token < b.token;
  });
  if (candidates.size() > top_k) candidates.resize(top_k);

  FeatureGraph g;
  g.nodes = std::move(candidates);
  const std::size_t k = g.nodes.size();

  // token -> node index lookup, sorted by token
  std::vector<std::pair<TokenId, std::uint32_t>> index(k);
  for (std::uint32_t i = 0; i < k; ++i) index[i] = {g.nodes[i].token, i};
  std::sort(index.begin(), index.end());
  auto node_of = [&](TokenId t) -> std::int64_t {
    auto it = std::lower_bound(index.begin(), index.end(), std::pair<TokenId, std::uint32_t>{t, 0});
    return it != index.end() && it->first == t ? static_cast<std::int64_t>(it->second) : -1;
  };

  // Occurrence-pair counting: a window with n_a copies of a and n_b of b adds n_a * n_b.
  std::vector<std::uint64_t> pair(k * k, 0);
  std::vector<std::uint64_t> occurrences(k);
  std::vector<std::uint32_t> touched;
  for (const auto& w : windows) {
    touched.clear();
    for (TokenId t : w) {
      const auto n = node_of(t);
      if (n < 0) continue;
      if (occurrences[n]++ == 0) touched.push_back(static_cast<std::uint32_t>(n));
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t a = 0; a < touched.size(); ++a) {
      for (std::size_t b = a + 1; b < touched.size(); ++b) {
        pair[touched[a] * k + touched[b]] += occurrences[touched[a]] * occurrences[touched[b]];
      }
    }
    for (auto n : touched) occurrences[n] = 0;
  }

  for (std::uint32_t u = 0; u < k; ++u) {
    for (std::uint32_t v = u + 1; v < k; ++v) {
      const auto count = pair[u * k + v];
      if (count == 0) continue;
      g.nodes[u].mass += count;
      g.nodes[v].mass += count;
      g.cooccurrence.push_back({u, v, count});
      if (count >= min_cooc) g.edges.push_back({u, v, count});
    }
  }
  g.config.top_k = top_k;
  g.config.min_cooc = min_cooc;
  return g;
}

DirectedFeatureGraph to_directed(const FeatureGraph& graph) {
  DirectedFeatureGraph d;
  d.feature = graph.feature;
  d.nodes = graph.nodes;
  d.config = graph.config;
  d.edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) d.edges.push_back({e.v, e.u, e.weight});
  return d;
}

std::vector<FeatureId> GraphBatch::feature_ids() const {
  std::vector<FeatureId> ids(graphs.size());
  std::transform(graphs.begin(), graphs.end(), ids.begin(), [](const FeatureGraph& g) { return g.feature; });
  return ids;
}

std::optional<FeatureGraph> build_feature_graph(const ActivationDump& dump, FeatureId feature,
                                                const GraphConfig& config, std::string* excluded_reason) {
  auto events = detect_events(dump, feature, config.percentile, config.min_events, config.max_events);
  if (!events) {
    if (excluded_reason) *excluded_reason = "too few events";
    return std::nullopt;
  }
  const auto windows = collect_windows(*events, dump.corpus, config.window);
  try {
    auto g = build_graph(windows, dump.vocab.size(), config.top_k, config.min_cooc);
    g.feature = feature;
    g.config = config;
    return g;
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateGraph) throw;
    if (excluded_reason) *excluded_reason = "degenerate graph";
    return std::nullopt;
  }
}

GraphBatch build_feature_graphs(const ActivationDump& dump, std::span<const FeatureId> features,
                                const GraphConfig& config) {
  const auto n = static_cast<std::int64_t>(features.size());
  std::vector<std::optional<FeatureGraph>> slots(features.size());
  std::vector<std::string> reasons(features.size());
  std::vector<std::optional<Error>> errors(features.size());

#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      slots[i] = build_feature_graph(dump, features[i], config, &reasons[i]);
    } catch (const Error& e) {
      errors[i] = e;
    }
  }
  for (auto& e : errors) {
    if (e) throw *e;
  }

  GraphBatch batch;
  batch.config = config;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      batch.graphs.push_back(std::move(*slots[i]));
    } else {
      batch.excluded.push_back({features[i], reasons[i]});
    }
  }
  return batch;
}

std::vector<std::uint8_t> serialize_graphs(const GraphBatch& batch) {
  nlohmann::json meta = {{"config", to_json(batch.config)}, {"n_graphs", batch.graphs.size()}};
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : batch.excluded) excluded.push_back({{"feature", e.feature}, {"reason", e.reason}});
  meta["excluded"] = excluded;

  io::ByteWriter w;
  w.put_bytes(kGraphMagic);
  w.put_blob(meta.dump());
  auto put_edges = [&w](const std::vector<GraphEdge>& edges) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(edges.size()));
    for (const auto& e : edges) {
      w.put<std::uint32_t>(e.u);
      w.put<std::uint32_t>(e.v);
      w.put<std::uint64_t>(e.weight);
    }
  };
  for (const auto& g : batch.graphs) {
    w.put<std::uint32_t>(g.feature);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.nodes.size()));
    for (const auto& node : g.nodes) {
      w.put<std::uint32_t>(node.token);
      w.put<std::uint32_t>(node.window_count);
      w.put<std::uint64_t>(node.mass);
    }
    put_edges(g.edges);
    put_edges(g.cooccurrence);
  }
  return w.bytes();
}

GraphBatch parse_graphs(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, Errc::MalformedCache);
  if (r.get_bytes(kGraphMagic.size(), "magic") != kGraphMagic) r.fail("magic", "expected \"FGRAPHS1\"");
  GraphBatch batch;
  std::uint64_t n_graphs = 0;
  try {
    const auto meta = nlohmann::json::parse(r.get_blob("meta"));
    batch.config = graph_config_from_json(meta.at("config"));
    n_graphs = meta.at("n_graphs").get<std::uint64_t>();
    for (const auto& e : meta.at("excluded")) {
      batch.excluded.push_back({e.at("feature").get<FeatureId>(), e.at("reason").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    r.fail("meta", e.what());
  }
  auto get_edges = [&r](std::size_t n_nodes) {
    std::vector<GraphEdge> edges(r.get<std::uint32_t>("edges"));
    for (auto& e : edges) {
      e.u = r.get<std::uint32_t>("edges");
      e.v = r.get<std::uint32_t>("edges");
      e.weight = r.get<std::uint64_t>("edges");
      if (e.u >= e.v || e.v >= n_nodes) r.fail("edges", "edge is not canonical (u < v < n_nodes)");
    }
    return edges;
  };
  for (std::uint64_t i = 0; i < n_graphs; ++i) {
    FeatureGraph g;
    g.config = batch.config;
    g.feature = r.get<std::uint32_t>("graph");
    const auto n_nodes = r.get<std::uint32_t>("graph");
    if (std::uint64_t{n_nodes} * 16 > r.remaining()) r.fail("nodes", "node list truncated");
    g.nodes.resize(n_nodes);
    for (auto& node : g.nodes) {
      node.token = r.get<std::uint32_t>("nodes");
      node.window_count = r.get<std::uint32_t>("nodes");
      node.mass = r.get<std::uint64_t>("nodes");
    }
    g.edges = get_edges(n_nodes);
    g.cooccurrence = get_edges(n_nodes);
    batch.graphs.push_back(std::move(g));
  }
  if (r.remaining() != 0) r.fail("trailer", "unexpected trailing bytes");
  return batch;
}

void write_graphs(const std::filesystem::path& path, const GraphBatch& batch) {
  io::write_file(path, serialize_graphs(batch));
}

GraphBatch load_graphs(const std::filesystem::path& path) { return parse_graphs(io::read_file(path)); }

}  // namespace featgraph
