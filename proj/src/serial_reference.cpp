#include "featgraph/serial_reference.hpp"

#include <algorithm>

namespace featgraph::serial {

GraphBatch build_feature_graphs(const ActivationDump& dump, std::span<const FeatureId> features,
                                const GraphConfig& config) {
  GraphBatch batch;
  batch.config = config;
  for (FeatureId f : features) {
    std::string reason;
    if (auto g = build_feature_graph(dump, f, config, &reason)) {
      batch.graphs.push_back(std::move(*g));
    } else {
      batch.excluded.push_back({f, reason});
    }
  }
  return batch;
}

std::vector<Histogram> wl_histograms(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins) {
  const auto bins = LabelBins::for_batch(graphs, n_bins);
  std::vector<Histogram> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    auto state = refine_labels(g, initial_labels(g, bins), bins, h);
    out.push_back(graph_histogram(state, bins));
  }
  return out;
}

std::vector<double> histogram_gram(std::span<const Histogram> histograms) {
  const std::size_t n = histograms.size();
  std::vector<double> k(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t len = std::min(histograms[i].size(), histograms[j].size());
      double dot = 0.0;
      for (std::size_t b = 0; b < len; ++b) dot += double(histograms[i][b]) * double(histograms[j][b]);
      k[i * n + j] = dot;
    }
  }
  return k;
}

KernelMatrix kernel_matrix(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins) {
  KernelMatrix k;
  k.n = graphs.size();
  k.kind = KernelKind::Wl;
  k.config = {{"h", h}, {"bins", n_bins}};
  for (const auto& g : graphs) k.features.push_back(g.feature);
  const auto hist = serial::wl_histograms(graphs, h, n_bins);
  k.values = normalize_gram(serial::histogram_gram(hist), k.n);
  return k;
}

}  // namespace featgraph::serial
