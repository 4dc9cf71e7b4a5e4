#include "featgraph/wl_kernel.hpp"

#include <array>
#include <numeric>

#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"
#include "featgraph/rng.hpp"

namespace featgraph {

namespace {

constexpr std::string_view kKernelMagic = "KMATRIX1";

constexpr std::array<std::pair<KernelKind, std::string_view>, 8> kKindNames{{
    {KernelKind::Wl, "wl"},
    {KernelKind::WlDirected, "wl-directed"},
    {KernelKind::WlEdgesRemoved, "wl-edges-removed"},
    {KernelKind::WlLabelsShuffled, "wl-labels-shuffled"},
    {KernelKind::DecoderCosine, "decoder-cosine"},
    {KernelKind::TokenHistogram, "token-histogram"},
    {KernelKind::CooccurrenceCosine, "cooccurrence-cosine"},
    {KernelKind::Jaccard, "jaccard"},
}};

void check_bins(std::uint32_t n_bins) {
  if (n_bins < 2) throw Error(Errc::InvalidArgument, "label bins must be >= 2");
}

// Weighted neighbour lists in both directions for one undirected graph.
struct Adjacency {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbours;

  explicit Adjacency(const FeatureGraph& g) : neighbours(g.nodes.size()) {
    for (const auto& e : g.edges) {
      neighbours[e.u].emplace_back(e.v, static_cast<double>(e.weight));
      neighbours[e.v].emplace_back(e.u, static_cast<double>(e.weight));
    }
  }
};

double weighted_average(const std::vector<std::pair<std::uint32_t, double>>& nbrs,
                        const std::vector<double>& labels, double fallback) {
  if (nbrs.empty()) return fallback;
  double num = 0.0, den = 0.0;
  for (const auto& [u, w] : nbrs) {
    num += w * labels[u];
    den += w;
  }
  return den > 0.0 ? num / den : fallback;
}

}  // namespace

std::string_view kernel_kind_name(KernelKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

KernelKind kernel_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown kernel kind '" + std::string(name) + "'");
}

std::uint32_t LabelBins::bin(double x) const {
  const double scaled = std::floor((x - lo) / (hi - lo) * static_cast<double>(n_bins));
  if (!(scaled > 0.0)) return 0;
  if (scaled >= static_cast<double>(n_bins - 1)) return n_bins - 1;
  return static_cast<std::uint32_t>(scaled);
}

LabelState initial_labels(const FeatureGraph& graph, const LabelBins& bins) {
  LabelState s;
  s.labels.reserve(graph.nodes.size());
  s.bins.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) {
    const double label = mass_label(static_cast<double>(node.mass));
    s.labels.push_back(label);
    s.bins.push_back(bins.bin(label));
  }
  return s;
}

LabelState refine_labels(const FeatureGraph& graph, LabelState state, const LabelBins& bins, std::uint32_t h) {
  const Adjacency adj(graph);
  std::vector<double> next(state.labels.size());
  for (std::uint32_t it = 0; it < h; ++it) {
    for (std::size_t v = 0; v < next.size(); ++v) {
      next[v] = weighted_average(adj.neighbours[v], state.labels, state.labels[v]);
    }
    state.labels.swap(next);
    for (std::size_t v = 0; v < state.labels.size(); ++v) state.bins[v] = bins.bin(state.labels[v]);
  }
  return state;
}

Histogram graph_histogram(const LabelState& state, const LabelBins& bins) {
  Histogram hist(bins.n_bins, 0);
  for (auto b : state.bins) ++hist[b];
  return hist;
}

std::vector<Histogram> wl_histograms(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins) {
  check_bins(n_bins);
  const auto bins = LabelBins::for_batch(graphs, n_bins);
  std::vector<Histogram> out(graphs.size());
  const auto n = static_cast<std::int64_t>(graphs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& g = graphs[i];
    out[i] = graph_histogram(refine_labels(g, initial_labels(g, bins), bins, h), bins);
  }
  return out;
}

std::vector<Histogram> directed_wl_histograms(std::span<const DirectedFeatureGraph> graphs, std::uint32_t h,
                                              std::uint32_t n_bins) {
  check_bins(n_bins);
  const auto bins = LabelBins::for_batch(graphs, n_bins);
  std::vector<Histogram> out(graphs.size());
  const auto n = static_cast<std::int64_t>(graphs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t gi = 0; gi < n; ++gi) {
    const auto& g = graphs[gi];
    const auto k = g.nodes.size();
    std::vector<std::vector<std::pair<std::uint32_t, double>>> in(k), outn(k);
    for (const auto& e : g.edges) {
      in[e.dst].emplace_back(e.src, static_cast<double>(e.weight));
      outn[e.src].emplace_back(e.dst, static_cast<double>(e.weight));
    }
    std::vector<double> labels(k);
    std::vector<std::uint32_t> composite(k);
    for (std::size_t v = 0; v < k; ++v) {
      labels[v] = mass_label(static_cast<double>(g.nodes[v].mass));
      const auto b = bins.bin(labels[v]);
      composite[v] = b * n_bins + b;
    }
    std::vector<double> next(k);
    for (std::uint32_t it = 0; it < h; ++it) {
      for (std::size_t v = 0; v < k; ++v) {
        const double in_avg = weighted_average(in[v], labels, labels[v]);
        const double out_avg = weighted_average(outn[v], labels, labels[v]);
        composite[v] = bins.bin(in_avg) * n_bins + bins.bin(out_avg);
        next[v] = (in_avg + out_avg) / 2.0;
      }
      labels.swap(next);
    }
    Histogram hist(std::size_t{n_bins} * n_bins, 0);
    for (auto c : composite) ++hist[c];
    out[gi] = std::move(hist);
  }
  return out;
}

std::vector<double> histogram_gram(std::span<const Histogram> histograms) {
  const auto n = histograms.size();
  // Histograms have at most K nonzero bins out of n_bins (or n_bins^2), so the
  // pairwise products run over sorted sparse entries.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> sparse(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t b = 0; b < histograms[i].size(); ++b) {
      if (histograms[i][b] != 0) sparse[i].emplace_back(b, static_cast<double>(histograms[i][b]));
    }
  }
  std::vector<double> raw(n * n, 0.0);
  const auto rows = static_cast<std::int64_t>(n);
  // Rows shrink along the upper triangle; dynamic scheduling balances them.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto& a = sparse[i];
    for (std::size_t j = static_cast<std::size_t>(i); j < n; ++j) {
      const auto& b = sparse[j];
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
      raw[i * n + j] = dot;
      raw[j * n + i] = dot;
    }
  }
  return raw;
}

std::vector<double> normalize_gram(std::span<const double> raw, std::size_t n) {
  std::vector<double> k(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dii = raw[i * n + i], djj = raw[j * n + j];
      if (dii <= 0.0 || djj <= 0.0) {
        k[i * n + j] = i == j ? 1.0 : 0.0;
      } else {
        k[i * n + j] = std::clamp(raw[i * n + j] / std::sqrt(dii * djj), 0.0, 1.0);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = (k[i * n + j] + k[j * n + i]) / 2.0;
      k[i * n + j] = s;
      k[j * n + i] = s;
    }
  }
  return k;
}

KernelMatrix kernel_matrix(std::span<const FeatureGraph> graphs, std::uint32_t h, std::uint32_t n_bins,
                           KernelKind kind) {
  const auto hists = wl_histograms(graphs, h, n_bins);
  KernelMatrix k;
  k.n = graphs.size();
  k.values = normalize_gram(histogram_gram(hists), k.n);
  k.kind = kind;
  k.config = {{"h", h}, {"bins", n_bins}};
  for (const auto& g : graphs) k.features.push_back(g.feature);
  return k;
}

KernelMatrix directed_kernel_matrix(std::span<const DirectedFeatureGraph> graphs, std::uint32_t h,
                                    std::uint32_t n_bins) {
  const auto hists = directed_wl_histograms(graphs, h, n_bins);
  KernelMatrix k;
  k.n = graphs.size();
  k.values = normalize_gram(histogram_gram(hists), k.n);
  k.kind = KernelKind::WlDirected;
  k.config = {{"h", h}, {"bins", n_bins}};
  for (const auto& g : graphs) k.features.push_back(g.feature);
  return k;
}

FeatureGraph ablate_edges(const FeatureGraph& graph) {
  FeatureGraph out = graph;
  out.edges.clear();
  return out;
}

FeatureGraph ablate_labels(const FeatureGraph& graph, std::uint64_t seed) {
  FeatureGraph out = graph;
  std::vector<std::uint64_t> masses(out.nodes.size());
  std::transform(out.nodes.begin(), out.nodes.end(), masses.begin(), [](const GraphNode& n) { return n.mass; });
  CounterRng rng(seed, graph.feature);
  shuffle(masses, rng);
  for (std::size_t i = 0; i < masses.size(); ++i) out.nodes[i].mass = masses[i];
  return out;
}

std::vector<std::uint8_t> serialize_kernel(const KernelMatrix& k) {
  const nlohmann::json meta = {
      {"kind", kernel_kind_name(k.kind)}, {"config", k.config}, {"n", k.n}, {"features", k.features}};
  io::ByteWriter w;
  w.put_bytes(kKernelMagic);
  w.put_blob(meta.dump());
  for (double v : k.values) w.put<double>(v);
  return w.bytes();
}

KernelMatrix parse_kernel(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, Errc::MalformedCache);
  if (r.get_bytes(kKernelMagic.size(), "magic") != kKernelMagic) r.fail("magic", "expected \"KMATRIX1\"");
  KernelMatrix k;
  try {
    const auto meta = nlohmann::json::parse(r.get_blob("meta"));
    k.kind = kernel_kind_from_name(meta.at("kind").get<std::string>());
    k.config = meta.at("config");
    k.n = meta.at("n").get<std::size_t>();
    k.features = meta.at("features").get<std::vector<FeatureId>>();
  } catch (const nlohmann::json::exception& e) {
    r.fail("meta", e.what());
  }
  if (k.features.size() != k.n) r.fail("meta", "feature list length differs from n");
  if (r.remaining() != k.n * k.n * sizeof(double)) r.fail("values", "expected n*n f64 values");
  k.values.resize(k.n * k.n);
  for (auto& v : k.values) v = r.get<double>("values");
  return k;
}

void write_kernel(const std::filesystem::path& path, const KernelMatrix& k) {
  io::write_file(path, serialize_kernel(k));
}

KernelMatrix load_kernel(const std::filesystem::path& path) { return parse_kernel(io::read_file(path)); }

}  // namespace featgraph
