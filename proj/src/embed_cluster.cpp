#include "featgraph/embed_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "featgraph/error.hpp"
#include "featgraph/rng.hpp"

namespace featgraph {

namespace {

constexpr double kEigenFloor = 1e-12;
constexpr int kMaxIterations = 300;

double squared_distance(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Run {
  std::vector<std::uint32_t> assignment;
  std::vector<double> centroids;
  double inertia = 0.0;
};

class Lloyd {
 public:
  Lloyd(const Embedding& e, std::uint32_t k) : e_(e), k_(k), d_(e.dims) {}

  Run run(CounterRng& rng) const {
    std::vector<double> centroids = seed_plus_plus(rng);
    auto labels = assign(centroids);
    for (int it = 0; it < kMaxIterations; ++it) {
      update(labels, centroids);
      auto next = assign(centroids);
      if (next == labels) break;
      labels = std::move(next);
    }
    // Centroids are the means of the returned assignment even if the
    // iteration cap was hit.
    update(labels, centroids);
    Run r;
    r.inertia = 0.0;
    for (std::size_t i = 0; i < e_.n; ++i) r.inertia += squared_distance(e_.point(i), &centroids[labels[i] * d_]);
    r.assignment = std::move(labels);
    r.centroids = std::move(centroids);
    return r;
  }

 private:
  std::vector<double> seed_plus_plus(CounterRng& rng) const {
    const auto n = e_.n;
    std::vector<double> centroids;
    centroids.reserve(std::size_t{k_} * d_);
    std::vector<bool> chosen(n, false);
    auto take = [&](std::size_t i) {
      chosen[i] = true;
      const auto p = e_.point(i);
      centroids.insert(centroids.end(), p.begin(), p.end());
    };
    take(rng.below(n));
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    for (std::uint32_t c = 1; c < k_; ++c) {
      const double* last = &centroids[(c - 1) * d_];
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dist[i] = std::min(dist[i], squared_distance(e_.point(i), last));
        total += dist[i];
      }
      std::size_t pick = n;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (dist[i] <= 0.0) continue;
          acc += dist[i];
          pick = i;
          if (acc > target) break;
        }
      } else {
        // Every point coincides with a centre: pick uniformly among unused points.
        std::vector<std::size_t> unused;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) unused.push_back(i);
        }
        pick = unused[rng.below(unused.size())];
      }
      take(pick);
    }
    return centroids;
  }

  std::vector<std::uint32_t> assign(const std::vector<double>& centroids) const {
    std::vector<std::uint32_t> labels(e_.n);
    for (std::size_t i = 0; i < e_.n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::uint32_t c = 0; c < k_; ++c) {
        const double dist = squared_distance(e_.point(i), &centroids[c * d_]);
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      labels[i] = arg;
    }
    return labels;
  }

  void means(const std::vector<std::uint32_t>& labels, std::vector<double>& centroids,
             std::vector<std::size_t>& sizes) const {
    std::fill(centroids.begin(), centroids.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < e_.n; ++i) {
      ++sizes[labels[i]];
      const auto p = e_.point(i);
      for (std::size_t j = 0; j < d_; ++j) centroids[labels[i] * d_ + j] += p[j];
    }
    for (std::uint32_t c = 0; c < k_; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < d_; ++j) centroids[c * d_ + j] /= static_cast<double>(sizes[c]);
    }
  }

  // Recomputes centroids; an empty cluster takes over the point farthest
  // from its own centroid among clusters that can spare one.
  void update(std::vector<std::uint32_t>& labels, std::vector<double>& centroids) const {
    std::vector<std::size_t> sizes(k_);
    means(labels, centroids, sizes);
    for (std::uint32_t c = 0; c < k_; ++c) {
      if (sizes[c] != 0) continue;
      double far = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < e_.n; ++i) {
        if (sizes[labels[i]] < 2) continue;
        const double dist = squared_distance(e_.point(i), &centroids[labels[i] * d_]);
        if (dist > far) {
          far = dist;
          arg = i;
        }
      }
      labels[arg] = c;
      means(labels, centroids, sizes);
    }
  }

  const Embedding& e_;
  std::uint32_t k_;
  std::size_t d_;
};

}  // namespace

Embedding Embedding::subset(std::span<const std::size_t> indices) const {
  Embedding out;
  out.n = indices.size();
  out.dims = dims;
  out.eigenvalues = eigenvalues;
  out.kind = kind;
  out.coords.reserve(out.n * dims);
  for (auto i : indices) {
    const auto p = point(i);
    out.coords.insert(out.coords.end(), p.begin(), p.end());
  }
  return out;
}

Embedding kernel_pca(const KernelMatrix& kernel, std::size_t dims) {
  const auto n = kernel.n;
  if (dims < 1 || dims > n) {
    throw Error(Errc::DimensionTooLarge, "cannot embed " + std::to_string(n) + " points in " +
                                             std::to_string(dims) + " dimensions");
  }
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> k(kernel.values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = k.mean();
  Eigen::MatrixXd centered = k;
  centered.colwise() -= row_mean;
  centered.rowwise() -= col_mean;
  centered.array() += grand;
  // Exact symmetry for the self-adjoint solver.
  centered = (0.5 * (centered + centered.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered);
  if (solver.info() != Eigen::Success) throw Error(Errc::InvalidArgument, "eigendecomposition failed");
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();

  Embedding e;
  e.n = n;
  e.dims = dims;
  e.kind = kernel.kind;
  e.coords.assign(n * dims, 0.0);
  for (std::size_t c = 0; c < dims; ++c) {
    const auto col = static_cast<Eigen::Index>(n - 1 - c);  // solver sorts ascending
    const double lambda = values(col);
    e.eigenvalues.push_back(lambda);
    if (lambda < kEigenFloor) continue;
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    }
    if (v(arg) < 0) v = -v;
    const double scale = std::sqrt(std::max(lambda, 0.0));
    for (std::size_t i = 0; i < n; ++i) e.coords[i * dims + c] = v(static_cast<Eigen::Index>(i)) * scale;
  }
  return e;
}

Clustering kmeans(const Embedding& embedding, std::uint32_t k, std::uint32_t n_init, std::uint64_t seed) {
  if (k < 1 || k > embedding.n) {
    throw Error(Errc::TooFewPoints, std::to_string(embedding.n) + " points cannot form " + std::to_string(k) +
                                        " clusters");
  }
  if (n_init < 1) throw Error(Errc::InvalidArgument, "n_init must be >= 1");

  const Lloyd lloyd(embedding, k);
  std::vector<Run> runs(n_init);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(n_init); ++r) {
    CounterRng rng(seed, static_cast<std::uint64_t>(r));
    runs[r] = lloyd.run(rng);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  Clustering c;
  c.dims = embedding.dims;
  c.seed = seed;
  c.n_init = n_init;
  c.k = k;
  for (const auto& r : runs) c.restart_inertia.push_back(r.inertia);
  c.assignment = std::move(runs[best].assignment);
  c.centroids = std::move(runs[best].centroids);
  c.inertia = runs[best].inertia;
  c.prototypes = prototypes(c, embedding);
  return c;
}

std::vector<std::uint32_t> prototypes(const Clustering& clustering, const Embedding& embedding) {
  if (clustering.assignment.size() != embedding.n) {
    throw Error(Errc::SizeMismatch, "clustering and embedding disagree on n");
  }
  std::vector<std::uint32_t> out(clustering.k, 0);
  std::vector<double> best(clustering.k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < embedding.n; ++i) {
    const auto c = clustering.assignment[i];
    const double d = squared_distance(embedding.point(i), &clustering.centroids[c * clustering.dims]);
    if (d < best[c]) {
      best[c] = d;
      out[c] = static_cast<std::uint32_t>(i);
    }
  }
  return out;
}

nlohmann::json to_json(const Clustering& c, KernelKind kind) {
  std::vector<std::vector<double>> centroids;
  for (std::uint32_t i = 0; i < c.k; ++i) {
    centroids.emplace_back(c.centroids.begin() + static_cast<std::ptrdiff_t>(i * c.dims),
                           c.centroids.begin() + static_cast<std::ptrdiff_t>((i + 1) * c.dims));
  }
  return {{"kind", kernel_kind_name(kind)}, {"seed", c.seed},         {"K", c.k},
          {"n_init", c.n_init},             {"assignment", c.assignment}, {"centroids", centroids},
          {"inertia", c.inertia},           {"prototypes", c.prototypes}};
}

}  // namespace featgraph
