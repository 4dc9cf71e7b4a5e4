#pragma once

// Per-feature token co-occurrence graphs built from the windows around a
// feature's high-activation events.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "featgraph/activation_store.hpp"

namespace featgraph {

struct GraphConfig {
  std::uint32_t window = 10;      // W: tokens on each side of an event
  std::uint32_t top_k = 30;       // K: node budget
  std::uint32_t min_cooc = 3;     // C: edge threshold
  double percentile = 50.0;       // p: event threshold percentile
  std::uint32_t min_events = 5;
  std::uint32_t max_events = 200;

  bool operator==(const GraphConfig&) const = default;
};

nlohmann::json to_json(const GraphConfig& c);
GraphConfig graph_config_from_json(const nlohmann::json& j, GraphConfig defaults = {});

struct EventSet {
  FeatureId feature = 0;
  std::vector<Activation> events;  // ascending position
  double threshold = 0.0;
};

struct GraphNode {
  TokenId token = 0;
  std::uint32_t window_count = 0;
  std::uint64_t mass = 0;  // pre-threshold co-occurrence row sum
  bool operator==(const GraphNode&) const = default;
};

/// Undirected edge in canonical form u < v (node indices).
struct GraphEdge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  std::uint64_t weight = 0;
  bool operator==(const GraphEdge&) const = default;
};

struct FeatureGraph {
  FeatureId feature = 0;
  /// Ordered by window_count descending, ties by token id ascending.
  std::vector<GraphNode> nodes;
  /// Pairs with count >= C, sorted by (u, v).
  std::vector<GraphEdge> edges;
  /// Every pair with a nonzero count before thresholding, sorted by (u, v).
  std::vector<GraphEdge> cooccurrence;
  GraphConfig config;

  bool operator==(const FeatureGraph&) const = default;
};

struct DirectedEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint64_t weight = 0;
  bool operator==(const DirectedEdge&) const = default;
};

struct DirectedFeatureGraph {
  FeatureId feature = 0;
  std::vector<GraphNode> nodes;
  /// src > dst for every edge: less frequent token points at the more frequent one.
  std::vector<DirectedEdge> edges;
  GraphConfig config;
};

using Window = std::vector<TokenId>;

/// Returns nullopt when the feature has fewer than `min_events` events above
/// its threshold (the feature is excluded).
std::optional<EventSet> detect_events(const ActivationDump& dump, FeatureId feature, double percentile,
                                      std::uint32_t min_events, std::uint32_t max_events);

/// Positions [t - W, t + W] around each event, clipped to the event's document.
std::vector<Window> collect_windows(const EventSet& events, const CorpusTokens& corpus, std::uint32_t window);

/// Throws Error(DegenerateGraph) when fewer than two distinct tokens are available.
FeatureGraph build_graph(std::span<const Window> windows, std::size_t vocab_size, std::uint32_t top_k,
                         std::uint32_t min_cooc);

DirectedFeatureGraph to_directed(const FeatureGraph& graph);

struct ExcludedFeature {
  FeatureId feature = 0;
  std::string reason;
};

struct GraphBatch {
  GraphConfig config;
  std::vector<FeatureGraph> graphs;  // in selection order, excluded features removed
  std::vector<ExcludedFeature> excluded;

  std::vector<FeatureId> feature_ids() const;
};

/// Full per-feature build for a selection; parallel over features.
GraphBatch build_feature_graphs(const ActivationDump& dump, std::span<const FeatureId> features,
                                const GraphConfig& config);

/// Builds one feature's graph or returns the exclusion reason.
std::optional<FeatureGraph> build_feature_graph(const ActivationDump& dump, FeatureId feature,
                                                const GraphConfig& config, std::string* excluded_reason = nullptr);

std::vector<std::uint8_t> serialize_graphs(const GraphBatch& batch);
GraphBatch parse_graphs(std::span<const std::uint8_t> bytes);
void write_graphs(const std::filesystem::path& path, const GraphBatch& batch);
GraphBatch load_graphs(const std::filesystem::path& path);

}  // namespace featgraph
