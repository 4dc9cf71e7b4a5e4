#include "featgraph/baseline_similarity.hpp"

#include <algorithm>
#include <cmath>

#include "featgraph/error.hpp"

namespace featgraph {

namespace {

KernelMatrix wrap(std::vector<double> values, std::span<const FeatureGraph> graphs, KernelKind kind) {
  KernelMatrix k;
  k.n = graphs.size();
  k.values = std::move(values);
  k.kind = kind;
  for (const auto& g : graphs) k.features.push_back(g.feature);
  return k;
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0;
  for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
    if (a[x].first < b[y].first) {
      ++x;
    } else if (b[y].first < a[x].first) {
      ++y;
    } else {
      dot += a[x++].second * b[y++].second;
    }
  }
  return dot;
}

}  // namespace

SparseVector token_histogram_vector(const FeatureGraph& graph) {
  SparseVector v;
  v.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) v.emplace_back(node.token, static_cast<double>(node.window_count));
  std::sort(v.begin(), v.end());
  return v;
}

SparseVector cooccurrence_vector(const FeatureGraph& graph) {
  SparseVector v;
  v.reserve(graph.cooccurrence.size());
  for (const auto& e : graph.cooccurrence) {
    const std::uint64_t a = graph.nodes[e.u].token, b = graph.nodes[e.v].token;
    v.emplace_back((std::min(a, b) << 32) | std::max(a, b), static_cast<double>(e.weight));
  }
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> sparse_cosine_gram(std::span<const SparseVector> vectors) {
  const auto n = vectors.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(sparse_dot(vectors[i], vectors[i]));

  std::vector<double> s(n * n, 0.0);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < rows; ++i) {
    s[i * n + i] = 1.0;
    if (norms[i] == 0.0) continue;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      if (norms[j] == 0.0) continue;
      const double c = std::clamp(sparse_dot(vectors[i], vectors[j]) / (norms[i] * norms[j]), 0.0, 1.0);
      s[i * n + j] = c;
      s[j * n + i] = c;
    }
  }
  return s;
}

KernelMatrix decoder_cosine(const ActivationDump& dump, std::span<const FeatureId> features) {
  if (!dump.decoder) throw Error(Errc::MissingDecoder, "dump has no decoder section");
  const auto& dec = *dump.decoder;
  const auto n = features.size();
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i] >= dec.rows) throw Error(Errc::UnknownFeature, "feature " + std::to_string(features[i]));
    const auto r = dec.row(features[i]);
    double norm = 0.0;
    for (float x : r) norm += double{x} * double{x};
    norm = std::sqrt(norm);
    rows[i].resize(r.size(), 0.0);
    if (norm > 0.0) {
      for (std::size_t c = 0; c < r.size(); ++c) rows[i][c] = double{r[c]} / norm;
    }
  }

  KernelMatrix k;
  k.n = n;
  k.values.assign(n * n, 0.0);
  k.kind = KernelKind::DecoderCosine;
  k.features.assign(features.begin(), features.end());
  const auto nrows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < nrows; ++i) {
    k.values[i * n + i] = 1.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < rows[i].size(); ++c) dot += rows[i][c] * rows[j][c];
      const double mapped = (std::clamp(dot, -1.0, 1.0) + 1.0) / 2.0;
      k.values[i * n + j] = mapped;
      k.values[j * n + i] = mapped;
    }
  }
  return k;
}

KernelMatrix token_histogram_cosine(std::span<const FeatureGraph> graphs) {
  std::vector<SparseVector> vectors;
  vectors.reserve(graphs.size());
  for (const auto& g : graphs) vectors.push_back(token_histogram_vector(g));
  return wrap(sparse_cosine_gram(vectors), graphs, KernelKind::TokenHistogram);
}

KernelMatrix cooccurrence_cosine(std::span<const FeatureGraph> graphs) {
  std::vector<SparseVector> vectors;
  vectors.reserve(graphs.size());
  for (const auto& g : graphs) vectors.push_back(cooccurrence_vector(g));
  return wrap(sparse_cosine_gram(vectors), graphs, KernelKind::CooccurrenceCosine);
}

KernelMatrix jaccard_topk(std::span<const FeatureGraph> graphs) {
  const auto n = graphs.size();
  std::vector<std::vector<TokenId>> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& node : graphs[i].nodes) sets[i].push_back(node.token);
    std::sort(sets[i].begin(), sets[i].end());
  }
  std::vector<double> s(n * n, 0.0);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < rows; ++i) {
    s[i * n + i] = 1.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      std::size_t common = 0;
      for (std::size_t x = 0, y = 0; x < sets[i].size() && y < sets[j].size();) {
        if (sets[i][x] < sets[j][y]) {
          ++x;
        } else if (sets[j][y] < sets[i][x]) {
          ++y;
        } else {
          ++common, ++x, ++y;
        }
      }
      const auto uni = sets[i].size() + sets[j].size() - common;
      const double v = uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
      s[i * n + j] = v;
      s[j * n + i] = v;
    }
  }
  return wrap(std::move(s), graphs, KernelKind::Jaccard);
}

}  // namespace featgraph
