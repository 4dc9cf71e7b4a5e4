#pragma once

// Brute-force reference implementations. Each one recomputes a quantity the
// slow, obvious way so the library's versions can be checked against it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "featgraph/activation_store.hpp"
#include "featgraph/graph_builder.hpp"
#include "featgraph/wl_kernel.hpp"

namespace oracle {

using featgraph::ActivationDump;
using featgraph::TokenId;

inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0) return v[lo];
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct Event {
  std::uint32_t position;
  float value;
};

/// Strictly-above-threshold events, capped to the `max_events` largest values
/// (equal values: lower position first). Empty when fewer than `min_events`.
inline std::vector<Event> events(const ActivationDump& d, std::uint32_t f, double p, std::uint32_t min_events,
                                 std::uint32_t max_events) {
  const auto& acts = d.activations[f];
  if (acts.empty()) return {};
  std::vector<double> values;
  for (const auto& a : acts) values.push_back(a.value);
  const double tau = percentile(values, p);
  std::vector<Event> out;
  for (const auto& a : acts) {
    if (a.value > tau) out.push_back({a.position, a.value});
  }
  if (out.size() > max_events) {
    std::vector<Event> kept;
    std::vector<bool> used(out.size(), false);
    for (std::uint32_t n = 0; n < max_events; ++n) {
      std::size_t best = out.size();
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (!used[i] && (best == out.size() || out[i].value > out[best].value)) best = i;
      }
      used[best] = true;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (used[i]) kept.push_back(out[i]);
    }
    out = kept;
  }
  if (out.size() < min_events) return {};
  return out;
}

inline std::size_t document_of(const featgraph::CorpusTokens& c, std::size_t pos) {
  std::size_t doc = 0;
  for (std::size_t i = 0; i < c.doc_starts.size(); ++i) {
    if (c.doc_starts[i] <= pos) doc = i;
  }
  return doc;
}

/// Every corpus position within `w` of the event and in the same document.
inline std::vector<std::vector<TokenId>> windows(const featgraph::CorpusTokens& c, const std::vector<Event>& ev,
                                                 std::uint32_t w) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& e : ev) {
    const auto doc = document_of(c, e.position);
    std::vector<TokenId> win;
    for (std::size_t p = 0; p < c.size(); ++p) {
      const auto dist = p > e.position ? p - e.position : e.position - p;
      if (dist <= w && document_of(c, p) == doc) win.push_back(c.tokens[p]);
    }
    out.push_back(win);
  }
  return out;
}

struct Graph {
  std::vector<TokenId> nodes;                        // ordered as the library orders them
  std::map<TokenId, std::uint32_t> window_count;
  std::map<TokenId, std::uint64_t> mass;
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> pairs;  // keyed (smaller, larger) token id
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> edges;
};

/// Counts every (position, position) pair of distinct top-K tokens in each window.
inline Graph graph(const std::vector<std::vector<TokenId>>& wins, std::uint32_t top_k, std::uint32_t min_cooc) {
  Graph g;
  for (const auto& w : wins) {
    const std::set<TokenId> distinct(w.begin(), w.end());
    for (auto t : distinct) ++g.window_count[t];
  }
  std::vector<std::pair<TokenId, std::uint32_t>> ranked(g.window_count.begin(), g.window_count.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) g.nodes.push_back(ranked[i].first);
  const std::set<TokenId> keep(g.nodes.begin(), g.nodes.end());
  for (const auto& w : wins) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (i == j || w[i] >= w[j] || !keep.count(w[i]) || !keep.count(w[j])) continue;
        ++g.pairs[{w[i], w[j]}];
      }
    }
  }
  for (const auto& [pr, count] : g.pairs) {
    g.mass[pr.first] += count;
    g.mass[pr.second] += count;
    if (count >= min_cooc) g.edges[pr] = count;
  }
  return g;
}

/// True when the library graph describes exactly the oracle graph.
inline bool same_graph(const featgraph::FeatureGraph& lib, const Graph& ref, std::string* why) {
  auto fail = [&](const std::string& s) {
    if (why) *why = s;
    return false;
  };
  if (lib.nodes.size() != ref.nodes.size()) return fail("node count");
  for (std::size_t i = 0; i < lib.nodes.size(); ++i) {
    const auto t = lib.nodes[i].token;
    if (t != ref.nodes[i]) return fail("node order at " + std::to_string(i));
    if (lib.nodes[i].window_count != ref.window_count.at(t)) return fail("window count of token " + std::to_string(t));
    const auto m = ref.mass.count(t) ? ref.mass.at(t) : 0;
    if (lib.nodes[i].mass != m) return fail("mass of token " + std::to_string(t));
  }
  auto keyed = [&](const std::vector<featgraph::GraphEdge>& edges) {
    std::map<std::pair<TokenId, TokenId>, std::uint64_t> out;
    for (const auto& e : edges) {
      const auto a = lib.nodes[e.u].token, b = lib.nodes[e.v].token;
      out[{std::min(a, b), std::max(a, b)}] = e.weight;
    }
    return out;
  };
  if (keyed(lib.edges) != ref.edges) return fail("edge set");
  if (keyed(lib.cooccurrence) != ref.pairs) return fail("pair counts");
  for (const auto& e : lib.edges) {
    if (e.u >= e.v) return fail("edge not canonical");
  }
  return true;
}

/// Dense WL: adjacency matrix, explicit neighbour averages, dense histograms.
inline std::vector<std::vector<double>> wl_histograms(const std::vector<featgraph::FeatureGraph>& graphs,
                                                      std::uint32_t h, std::uint32_t n_bins) {
  double hi = 0.0;
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes) hi = std::max(hi, std::log1p(static_cast<double>(n.mass)));
  }
  if (hi == 0.0) hi = 1.0;
  auto bin = [&](double x) {
    const double s = std::floor(x / hi * n_bins);
    if (s <= 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(s), static_cast<std::size_t>(n_bins - 1));
  };
  std::vector<std::vector<double>> out;
  for (const auto& g : graphs) {
    const auto k = g.nodes.size();
    std::vector<std::vector<double>> adj(k, std::vector<double>(k, 0.0));
    for (const auto& e : g.edges) adj[e.u][e.v] = adj[e.v][e.u] = static_cast<double>(e.weight);
    std::vector<double> label(k);
    for (std::size_t v = 0; v < k; ++v) label[v] = std::log1p(static_cast<double>(g.nodes[v].mass));
    for (std::uint32_t it = 0; it < h; ++it) {
      std::vector<double> next = label;
      for (std::size_t v = 0; v < k; ++v) {
        double num = 0.0, den = 0.0;
        for (std::size_t u = 0; u < k; ++u) {
          if (adj[v][u] == 0.0) continue;
          num += adj[v][u] * label[u];
          den += adj[v][u];
        }
        if (den > 0.0) next[v] = num / den;
      }
      label = next;
    }
    std::vector<double> hist(n_bins, 0.0);
    for (double x : label) hist[bin(x)] += 1.0;
    out.push_back(hist);
  }
  return out;
}

inline std::vector<double> normalized_gram(const std::vector<std::vector<double>>& hists) {
  const auto n = hists.size();
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double di = dot(hists[i], hists[i]), dj = dot(hists[j], hists[j]);
      if (di == 0.0 || dj == 0.0) {
        k[i * n + j] = i == j ? 1.0 : 0.0;
      } else {
        k[i * n + j] = std::min(1.0, dot(hists[i], hists[j]) / std::sqrt(di * dj));
      }
    }
  }
  return k;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

/// ARI from explicit pair enumeration rather than a contingency table.
inline double ari(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  const auto n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  }
  const double total = choose2(static_cast<double>(n));
  if (total == 0.0) return 1.0;
  const double expected = in_a * in_b / total;
  const double max_index = (in_a + in_b) / 2.0;
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

/// NMI with arithmetic-mean normalisation from explicit joint probabilities.
inline double nmi(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  const double n = static_cast<double>(a.size());
  const std::set<std::uint32_t> la(a.begin(), a.end()), lb(b.begin(), b.end());
  auto prob = [&](const std::vector<std::uint32_t>& x, std::uint32_t v) {
    return static_cast<double>(std::count(x.begin(), x.end(), v)) / n;
  };
  double ha = 0, hb = 0, mi = 0;
  for (auto x : la) ha -= prob(a, x) * std::log(prob(a, x));
  for (auto y : lb) hb -= prob(b, y) * std::log(prob(b, y));
  for (auto x : la) {
    for (auto y : lb) {
      double joint = 0;
      for (std::size_t i = 0; i < a.size(); ++i) joint += a[i] == x && b[i] == y;
      joint /= n;
      if (joint > 0) mi += joint * std::log(joint / (prob(a, x) * prob(b, y)));
    }
  }
  if (ha + hb == 0.0) return 1.0;
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

/// Overall purity: per cluster the largest label count (ties to the lower label).
inline double purity(const std::vector<std::uint32_t>& assign, const std::vector<std::uint8_t>& labels) {
  const std::set<std::uint32_t> clusters(assign.begin(), assign.end());
  double matching = 0;
  for (auto c : clusters) {
    std::size_t best = 0;
    for (std::uint8_t l = 0; l < 4; ++l) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < assign.size(); ++i) count += assign[i] == c && labels[i] == l;
      best = std::max(best, count);
    }
    matching += static_cast<double>(best);
  }
  return matching / static_cast<double>(assign.size());
}

/// Dense cosine similarity; zero vectors give 0 off the diagonal and 1 on it.
inline std::vector<double> cosine_gram(const std::vector<std::map<std::uint64_t, double>>& vecs) {
  const auto n = vecs.size();
  auto dot = [](const std::map<std::uint64_t, double>& a, const std::map<std::uint64_t, double>& b) {
    double s = 0;
    for (const auto& [k, v] : a) {
      auto it = b.find(k);
      if (it != b.end()) s += v * it->second;
    }
    return s;
  };
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ni = std::sqrt(dot(vecs[i], vecs[i])), nj = std::sqrt(dot(vecs[j], vecs[j]));
      if (i == j) {
        out[i * n + j] = 1.0;
      } else if (ni == 0 || nj == 0) {
        out[i * n + j] = 0.0;
      } else {
        out[i * n + j] = dot(vecs[i], vecs[j]) / (ni * nj);
      }
    }
  }
  return out;
}

inline double jaccard(const std::set<TokenId>& a, const std::set<TokenId>& b) {
  std::size_t inter = 0;
  for (auto t : a) inter += b.count(t);
  const auto uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace oracle
