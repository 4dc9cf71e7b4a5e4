#pragma once

// Single-threaded, dense reference versions of the parallel kernels. Tests
// compare against these and the benchmark times both.

#include <span>
#include <vector>

#include "featgraph/graph_builder.hpp"
#include "featgraph/wl_kernel.hpp"

namespace featgraph::serial {

GraphBatch build_feature_graphs(const ActivationDump& dump, std::span<const FeatureId> features,
                                const GraphConfig& config);

std::vector<Histogram> wl_histograms(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins);

/// Dense O(n^2 * bins) inner products over the full histogram length.
std::vector<double> histogram_gram(std::span<const Histogram> histograms);

KernelMatrix kernel_matrix(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins);

}  // namespace featgraph::serial
