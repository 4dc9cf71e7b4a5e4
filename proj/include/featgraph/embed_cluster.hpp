#pragma once

// Kernel PCA embedding of a precomputed similarity matrix and seeded k-means
// on the embedded points.

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "featgraph/wl_kernel.hpp"

namespace featgraph {

struct Embedding {
  std::size_t n = 0;
  std::size_t dims = 0;
  std::vector<double> coords;       // row-major n x dims
  std::vector<double> eigenvalues;  // descending, length dims
  KernelKind kind = KernelKind::Wl;

  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dims, dims}; }
  /// Rows `indices` of this embedding, in that order.
  Embedding subset(std::span<const std::size_t> indices) const;
};

struct Clustering {
  std::vector<std::uint32_t> assignment;
  std::vector<double> centroids;  // row-major k x dims
  std::size_t dims = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t n_init = 0;
  std::uint32_t k = 0;
  std::vector<std::uint32_t> prototypes;
  /// Final inertia of every restart, in restart order.
  std::vector<double> restart_inertia;
};

/// Double-centres the matrix, keeps the top `dims` eigenpairs and scales each
/// eigenvector by sqrt(max(lambda, 0)). Each column is sign-fixed so its
/// largest-magnitude entry is positive. Throws Error(DimensionTooLarge).
Embedding kernel_pca(const KernelMatrix& kernel, std::size_t dims);

/// Lloyd's algorithm with k-means++ seeding; restart r draws from stream r of
/// `seed`. Returns the lowest-inertia restart (ties: lowest restart index).
/// Throws Error(TooFewPoints) when k exceeds the number of points.
Clustering kmeans(const Embedding& embedding, std::uint32_t k, std::uint32_t n_init, std::uint64_t seed);

/// Per cluster, the member nearest its centroid (ties: lowest index).
std::vector<std::uint32_t> prototypes(const Clustering& clustering, const Embedding& embedding);

nlohmann::json to_json(const Clustering& c, KernelKind kind);

}  // namespace featgraph
