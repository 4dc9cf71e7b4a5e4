#pragma once

// WL-style frequency-binned graph kernel.
//
// Node labels start at log(1 + mass), are refined by weighted neighbour
// averaging, and are discretised into a fixed number of bins shared across the
// whole batch. Each graph becomes a histogram of final bin indices; the kernel
// is the histogram inner product, normalised by the geometric mean of the
// diagonal and symmetrised.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "featgraph/graph_builder.hpp"

namespace featgraph {

enum class KernelKind {
  Wl,
  WlDirected,
  WlEdgesRemoved,
  WlLabelsShuffled,
  DecoderCosine,
  TokenHistogram,
  CooccurrenceCosine,
  Jaccard,
};

std::string_view kernel_kind_name(KernelKind kind);
KernelKind kernel_kind_from_name(std::string_view name);

struct LabelBins {
  std::uint32_t n_bins = 64;
  double lo = 0.0;
  double hi = 1.0;

  std::uint32_t bin(double x) const;

  /// Range [0, max log(1 + mass)] over every node of the batch. A batch whose
  /// masses are all zero gets hi = 1 so the range stays non-empty.
  template <typename GraphT>
  static LabelBins for_batch(std::span<const GraphT> graphs, std::uint32_t n_bins);
};

struct LabelState {
  std::vector<double> labels;
  std::vector<std::uint32_t> bins;
};

using Histogram = std::vector<std::uint32_t>;

struct KernelMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n
  KernelKind kind = KernelKind::Wl;
  nlohmann::json config = nlohmann::json::object();
  std::vector<FeatureId> features;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

/// Initial label of a node with co-occurrence mass c: log(1 + c).
inline double mass_label(double mass) { return std::log1p(mass); }

LabelState initial_labels(const FeatureGraph& graph, const LabelBins& bins);
LabelState refine_labels(const FeatureGraph& graph, LabelState state, const LabelBins& bins, std::uint32_t h);
Histogram graph_histogram(const LabelState& state, const LabelBins& bins);

/// Final-iteration histograms for the undirected kernel (one per graph).
std::vector<Histogram> wl_histograms(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins);

/// Composite (in-bin, out-bin) histograms of length n_bins^2 for the directed kernel.
std::vector<Histogram> directed_wl_histograms(std::span<const DirectedFeatureGraph> graphs, std::uint32_t h,
                                              std::uint32_t n_bins);

/// Raw Gram matrix of histogram inner products; upper triangle filled in parallel.
std::vector<double> histogram_gram(std::span<const Histogram> histograms);

/// Geometric-mean normalisation with the zero-diagonal rule, then (K + K^T) / 2.
std::vector<double> normalize_gram(std::span<const double> raw, std::size_t n);

KernelMatrix kernel_matrix(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins,
                           KernelKind kind = KernelKind::Wl);
KernelMatrix directed_kernel_matrix(std::span<const DirectedFeatureGraph> graphs, std::uint32_t h,
                                    std::uint32_t n_bins);

FeatureGraph ablate_edges(const FeatureGraph& graph);
/// Permutes node masses within the graph; the stream is keyed by (seed, feature id).
FeatureGraph ablate_labels(const FeatureGraph& graph, std::uint64_t seed);

std::vector<std::uint8_t> serialize_kernel(const KernelMatrix& k);
KernelMatrix parse_kernel(std::span<const std::uint8_t> bytes);
void write_kernel(const std::filesystem::path& path, const KernelMatrix& k);
KernelMatrix load_kernel(const std::filesystem::path& path);

template <typename GraphT>
LabelBins LabelBins::for_batch(std::span<const GraphT> graphs, std::uint32_t n_bins) {
  LabelBins b;
  b.n_bins = n_bins;
  double hi = 0.0;
  for (const auto& g : graphs) {
    for (const auto& node : g.nodes) hi = std::max(hi, mass_label(static_cast<double>(node.mass)));
  }
  b.hi = hi > b.lo ? hi : b.lo + 1.0;
  return b;
}

}  // namespace featgraph
