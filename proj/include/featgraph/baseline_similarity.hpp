#pragma once

// Non-WL similarity matrices used as baselines. All of them share the
// KernelMatrix representation so they feed the same embedding path.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "featgraph/activation_store.hpp"
#include "featgraph/graph_builder.hpp"
#include "featgraph/wl_kernel.hpp"

namespace featgraph {

/// Sparse vector sorted by key.
using SparseVector = std::vector<std::pair<std::uint64_t, double>>;

/// Window counts of the top-K tokens, keyed by global token id.
SparseVector token_histogram_vector(const FeatureGraph& graph);
/// Pre-threshold pair counts keyed by the unordered global token pair.
SparseVector cooccurrence_vector(const FeatureGraph& graph);

/// Cosine similarity of sparse vectors; zero vectors get a 0 row and unit diagonal.
std::vector<double> sparse_cosine_gram(std::span<const SparseVector> vectors);

/// Cosine of unit-normalised decoder rows mapped from [-1, 1] to [0, 1].
/// Throws Error(MissingDecoder) if the dump has no decoder.
KernelMatrix decoder_cosine(const ActivationDump& dump, std::span<const FeatureId> features);
KernelMatrix token_histogram_cosine(std::span<const FeatureGraph> graphs);
KernelMatrix cooccurrence_cosine(std::span<const FeatureGraph> graphs);
KernelMatrix jaccard_topk(std::span<const FeatureGraph> graphs);

}  // namespace featgraph
