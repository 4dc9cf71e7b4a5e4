#include "featgraph/experiment_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "featgraph/baseline_similarity.hpp"
#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"

namespace featgraph {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

template <typename F>
auto timed_stage(std::string_view name, std::map<std::string, double>& timing, F&& f) {
  const auto t0 = Clock::now();
  try {
    auto result = f();
    timing[std::string(name)] += std::chrono::duration<double>(Clock::now() - t0).count();
    return result;
  } catch (const Error&) {
    rethrow_with_stage(name);
  }
}

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Population standard deviation.
double std_of(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::vector<TokenType> graph_labels(const GraphBatch& batch, const TokenVocab& vocab) {
  std::vector<TokenType> labels;
  labels.reserve(batch.graphs.size());
  for (const auto& g : batch.graphs) labels.push_back(feature_label(g, vocab));
  return labels;
}

// Clusterings of one embedding under several seeds with their purity.
struct SeedRuns {
  std::vector<std::uint64_t> seeds;
  std::vector<Clustering> clusterings;
  std::vector<PurityReport> purity;

  std::vector<double> overall() const {
    std::vector<double> out;
    for (const auto& p : purity) out.push_back(p.overall);
    return out;
  }
  std::vector<double> alphabetic() const {
    std::vector<double> out;
    for (const auto& p : purity) {
      if (auto a = p.category(TokenType::Alphabetic)) out.push_back(*a);
    }
    return out;
  }
};

SeedRuns run_seeds(const Embedding& embedding, const ClusterConfig& config, std::span<const std::uint64_t> seeds,
                   std::span<const TokenType> labels) {
  SeedRuns runs;
  for (auto seed : seeds) {
    runs.seeds.push_back(seed);
    runs.clusterings.push_back(run_clustering(embedding, config, seed));
    runs.purity.push_back(purity(runs.clusterings.back().assignment, labels));
  }
  return runs;
}

json header(const PipelineConfig& config, std::string_view experiment) {
  return {{"experiment", experiment}, {"tool_version", kToolVersion}, {"config", config.to_json()}};
}

std::string csv_number(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream out;
  out.precision(6);
  out << x;
  return out.str();
}

struct Csv {
  std::ostringstream out;
  explicit Csv(std::initializer_list<std::string_view> columns) {
    bool first = true;
    for (auto c : columns) {
      out << (first ? "" : ",") << c;
      first = false;
    }
    out << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out << (first ? "" : ",") << cell(cells), first = false), ...);
    out << '\n';
  }
  static std::string cell(double x) { return csv_number(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(std::string_view s) { return std::string(s); }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "true" : "false"; }
  template <typename T>
    requires std::is_integral_v<T>
  static std::string cell(T x) {
    return std::to_string(x);
  }
  std::string str() const { return out.str(); }
};

Embedding embed(const KernelMatrix& kernel, const ClusterConfig& config) { return kernel_pca(kernel, config.dims); }

}  // namespace


json PipelineConfig::to_json() const {
  return {{"dump", dump.string()},
          {"selection",
           {{"alpha_min", selection.alpha_min}, {"alpha_max", selection.alpha_max}, {"target_n", selection.target_n}}},
          {"graph", featgraph::to_json(graph)},
          {"kernel", {{"h", kernel.h}, {"bins", kernel.bins}, {"kind", kernel_kind_name(kernel.kind)}}},
          {"clustering",
           {{"K", cluster.k}, {"n_init", cluster.n_init}, {"seed", cluster.seed}, {"dims", cluster.dims}}}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
    c.dump = j.value("dump", std::string{});
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      c.selection.alpha_min = s.value("alpha_min", c.selection.alpha_min);
      c.selection.alpha_max = s.value("alpha_max", c.selection.alpha_max);
      c.selection.target_n = s.value("target_n", c.selection.target_n);
    }
    if (j.contains("graph")) c.graph = graph_config_from_json(j.at("graph"));
    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      c.kernel.h = k.value("h", c.kernel.h);
      c.kernel.bins = k.value("bins", c.kernel.bins);
      if (k.contains("kind")) c.kernel.kind = kernel_kind_from_name(k.at("kind").get<std::string>());
      if (k.value("directed", false)) c.kernel.kind = KernelKind::WlDirected;
      if (k.contains("ablation")) {
        const auto a = k.at("ablation").get<std::string>();
        if (a == "edges-removed") {
          c.kernel.kind = KernelKind::WlEdgesRemoved;
        } else if (a == "labels-shuffled") {
          c.kernel.kind = KernelKind::WlLabelsShuffled;
        } else if (a != "none") {
          throw Error(Errc::InvalidArgument, "unknown ablation '" + a + "'");
        }
      }
    }
    if (j.contains("clustering")) {
      const auto& k = j.at("clustering");
      c.cluster.k = k.value("K", c.cluster.k);
      c.cluster.n_init = k.value("n_init", c.cluster.n_init);
      c.cluster.seed = k.value("seed", c.cluster.seed);
      c.cluster.dims = k.value("dims", c.cluster.dims);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("config: ") + e.what());
  }
  if (!(c.selection.alpha_min >= 0.0 && c.selection.alpha_min <= c.selection.alpha_max &&
        c.selection.alpha_max <= 1.0)) {
    throw Error(Errc::InvalidArgument, "config: need 0 <= alpha_min <= alpha_max <= 1");
  }
  if (c.selection.target_n < 1) throw Error(Errc::InvalidArgument, "config: target_n must be >= 1");
  if (c.cluster.k < 1) throw Error(Errc::InvalidArgument, "config: K must be >= 1");
  if (c.cluster.n_init < 1) throw Error(Errc::InvalidArgument, "config: n_init must be >= 1");
  if (c.cluster.dims < 1) throw Error(Errc::InvalidArgument, "config: dims must be >= 1");
  if (c.kernel.bins < 2) throw Error(Errc::InvalidArgument, "config: bins must be >= 2");
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("config: ") + e.what());
  }
}


json EvalReport::to_json(bool with_timing) const {
  json clusters_json = json::array();
  for (const auto& c : clusters) {
    clusters_json.push_back({{"cluster", c.cluster},
                             {"size", c.size},
                             {"dominant", token_type_name(c.dominant)},
                             {"matching", c.matching},
                             {"purity", c.purity},
                             {"prototype", c.prototype}});
  }
  json categories = json::object();
  for (auto t : kTokenTypes) {
    const auto v = purity.category(t);
    categories[std::string(token_type_name(t))] = v ? json(*v) : json(nullptr);
  }
  json excluded_json = json::array();
  for (const auto& e : excluded) excluded_json.push_back({{"feature", e.feature}, {"reason", e.reason}});
  json labels_json = json::array();
  for (auto t : labels) labels_json.push_back(token_type_name(t));
  json comparisons_json = json::array();
  for (const auto& c : comparisons) {
    comparisons_json.push_back(
        {{"name", c.name}, {"ari", nullable(c.ari)}, {"nmi", nullable(c.nmi)}, {"n_common", c.n_common}});
  }
  json selection = {{"requested", n_requested},
                    {"eligible", n_eligible},
                    {"selected", n_selected},
                    {"clustered", features.size()},
                    {"reduced_n", reduced_n()}};
  if (reduced_n()) {
    selection["note"] = "requested " + std::to_string(n_requested) + " features, only " +
                        std::to_string(n_selected) + " eligible";
  }
  json j = {{"tool_version", tool_version},
            {"config", config},
            {"kind", kernel_kind_name(kind)},
            {"multi_seed", false},
            {"selection", selection},
            {"excluded", excluded_json},
            {"features", features},
            {"assignment", assignment},
            {"labels", labels_json},
            {"purity", {{"overall", purity.overall}, {"per_category", categories}}},
            {"clusters", clusters_json},
            {"inertia", inertia},
            {"comparisons", comparisons_json}};
  if (with_timing) j["timing"] = timing;
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  try {
    r.tool_version = j.at("tool_version").get<std::string>();
    r.config = j.at("config");
    r.kind = kernel_kind_from_name(j.at("kind").get<std::string>());
    const auto& s = j.at("selection");
    r.n_requested = s.at("requested").get<std::size_t>();
    r.n_eligible = s.at("eligible").get<std::size_t>();
    r.n_selected = s.at("selected").get<std::size_t>();
    for (const auto& e : j.at("excluded")) {
      r.excluded.push_back({e.at("feature").get<FeatureId>(), e.at("reason").get<std::string>()});
    }
    r.features = j.at("features").get<std::vector<FeatureId>>();
    r.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
    for (const auto& l : j.at("labels")) r.labels.push_back(token_type_from_name(l.get<std::string>()));
    r.purity.overall = j.at("purity").at("overall").get<double>();
    for (const auto& [name, v] : j.at("purity").at("per_category").items()) {
      if (!v.is_null()) r.purity.per_category[token_type_from_name(name)] = v.get<double>();
    }
    for (const auto& c : j.at("clusters")) {
      ClusterRow row;
      row.cluster = c.at("cluster").get<std::uint32_t>();
      row.size = c.at("size").get<std::size_t>();
      row.dominant = token_type_from_name(c.at("dominant").get<std::string>());
      row.matching = c.at("matching").get<std::size_t>();
      row.purity = c.at("purity").get<double>();
      row.prototype = c.at("prototype").get<FeatureId>();
      r.clusters.push_back(row);
      r.purity.per_cluster.push_back({row.cluster, row.size, row.dominant, row.matching, row.purity});
    }
    r.inertia = j.at("inertia").get<double>();
    for (const auto& c : j.at("comparisons")) {
      Comparison cmp;
      cmp.name = c.at("name").get<std::string>();
      cmp.ari = c.at("ari").is_null() ? std::numeric_limits<double>::quiet_NaN() : c.at("ari").get<double>();
      cmp.nmi = c.at("nmi").is_null() ? std::numeric_limits<double>::quiet_NaN() : c.at("nmi").get<double>();
      cmp.n_common = c.at("n_common").get<std::size_t>();
      r.comparisons.push_back(cmp);
    }
    if (j.contains("timing")) r.timing = j.at("timing").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("report: ") + e.what());
  }
  return r;
}

std::string deterministic_dump(const json& report) {
  json copy = report;
  if (copy.is_object()) copy.erase("timing");
  return copy.dump(2);
}


FeatureSelection run_selection(const ActivationDump& dump, const PipelineConfig& config) {
  return select_features(dump, config.selection.alpha_min, config.selection.alpha_max, config.selection.target_n);
}

KernelMatrix run_kernel(const ActivationDump& dump, const GraphBatch& batch, const PipelineConfig& config) {
  const auto& graphs = batch.graphs;
  const auto h = config.kernel.h;
  const auto bins = config.kernel.bins;
  switch (config.kernel.kind) {
    case KernelKind::Wl:
      return kernel_matrix(graphs, h, bins);
    case KernelKind::WlDirected: {
      std::vector<DirectedFeatureGraph> directed;
      directed.reserve(graphs.size());
      for (const auto& g : graphs) directed.push_back(to_directed(g));
      return directed_kernel_matrix(directed, h, bins);
    }
    case KernelKind::WlEdgesRemoved: {
      std::vector<FeatureGraph> ablated;
      ablated.reserve(graphs.size());
      for (const auto& g : graphs) ablated.push_back(ablate_edges(g));
      return kernel_matrix(ablated, h, bins, KernelKind::WlEdgesRemoved);
    }
    case KernelKind::WlLabelsShuffled: {
      std::vector<FeatureGraph> ablated;
      ablated.reserve(graphs.size());
      for (const auto& g : graphs) ablated.push_back(ablate_labels(g, config.cluster.seed));
      auto k = kernel_matrix(ablated, h, bins, KernelKind::WlLabelsShuffled);
      k.config["shuffle_seed"] = config.cluster.seed;
      return k;
    }
    case KernelKind::DecoderCosine: {
      const auto ids = batch.feature_ids();
      return decoder_cosine(dump, ids);
    }
    case KernelKind::TokenHistogram:
      return token_histogram_cosine(graphs);
    case KernelKind::CooccurrenceCosine:
      return cooccurrence_cosine(graphs);
    case KernelKind::Jaccard:
      return jaccard_topk(graphs);
  }
  throw Error(Errc::InvalidArgument, "unknown kernel kind");
}

Clustering run_clustering(const Embedding& embedding, const ClusterConfig& config, std::uint64_t seed) {
  const auto k = static_cast<std::uint32_t>(std::min<std::size_t>(config.k, embedding.n));
  return kmeans(embedding, k, config.n_init, seed);
}

PipelineRun run_pipeline(const ActivationDump& dump, const PipelineConfig& config) {
  PipelineRun run;
  auto& report = run.report;
  auto& timing = report.timing;
  report.config = config.to_json();
  report.tool_version = std::string(kToolVersion);
  report.kind = config.kernel.kind;

  run.selection = timed_stage("select", timing, [&] { return run_selection(dump, config); });
  report.n_requested = config.selection.target_n;
  report.n_eligible = run.selection.n_eligible;
  report.n_selected = run.selection.selected.size();

  run.batch = timed_stage("graphs", timing,
                          [&] { return build_feature_graphs(dump, run.selection.selected, config.graph); });
  report.excluded = run.batch.excluded;
  report.features = run.batch.feature_ids();
  if (run.batch.graphs.empty()) {
    throw Error(Errc::NoEligibleFeatures, "graphs: every selected feature was excluded");
  }

  run.kernel = timed_stage("kernel", timing, [&] { return run_kernel(dump, run.batch, config); });
  run.embedding = timed_stage("embed", timing, [&] { return embed(run.kernel, config.cluster); });
  run.clustering =
      timed_stage("cluster", timing, [&] { return run_clustering(run.embedding, config.cluster, config.cluster.seed); });

  timed_stage("evaluate", timing, [&] {
    report.labels = graph_labels(run.batch, dump.vocab);
    report.assignment = run.clustering.assignment;
    report.purity = purity(report.assignment, report.labels);
    report.inertia = run.clustering.inertia;
    for (const auto& p : report.purity.per_cluster) {
      ClusterRow row{p.cluster, p.size, p.dominant, p.matching, p.purity, 0};
      row.prototype = report.features[run.clustering.prototypes[p.cluster]];
      report.clusters.push_back(row);
    }
    return 0;
  });
  return run;
}

EvalReport run_pipeline(const PipelineConfig& config) {
  if (config.dump.empty()) throw Error(Errc::InvalidArgument, "config has no dump path");
  const auto dump = [&] {
    try {
      return load_dump(config.dump);
    } catch (const Error&) {
      rethrow_with_stage("load");
    }
  }();
  return run_pipeline(dump, config).report;
}

Comparison compare_on_common(std::string name, std::span<const FeatureId> features_a,
                             std::span<const std::uint32_t> a, std::span<const FeatureId> features_b,
                             std::span<const std::uint32_t> b) {
  if (features_a.size() != a.size() || features_b.size() != b.size()) {
    throw Error(Errc::SizeMismatch, "feature list and assignment differ in length");
  }
  std::unordered_map<FeatureId, std::size_t> index_b;
  for (std::size_t i = 0; i < features_b.size(); ++i) index_b.emplace(features_b[i], i);
  std::vector<std::uint32_t> ra, rb;
  for (std::size_t i = 0; i < features_a.size(); ++i) {
    if (auto it = index_b.find(features_a[i]); it != index_b.end()) {
      ra.push_back(a[i]);
      rb.push_back(b[it->second]);
    }
  }
  Comparison c;
  c.name = std::move(name);
  c.n_common = ra.size();
  if (ra.empty()) {
    c.ari = c.nmi = std::numeric_limits<double>::quiet_NaN();
  } else {
    c.ari = ari(ra, rb);
    c.nmi = nmi(ra, rb);
  }
  return c;
}


TableReport run_grid(const ActivationDump& dump, const PipelineConfig& config, const GridAxes& axes) {
  struct Cell {
    GraphConfig graph;
    bool is_default = false;
    EvalReport report;
  };
  std::vector<Cell> cells;
  for (auto w : axes.windows) {
    for (auto k : axes.top_ks) {
      for (auto c : axes.min_coocs) {
        Cell cell;
        cell.graph = config.graph;
        cell.graph.window = w;
        cell.graph.top_k = k;
        cell.graph.min_cooc = c;
        cell.is_default = cell.graph == config.graph;
        cells.push_back(std::move(cell));
      }
    }
  }
  for (auto& cell : cells) {
    PipelineConfig cfg = config;
    cfg.graph = cell.graph;
    cell.report = run_pipeline(dump, cfg).report;
  }
  auto def = std::find_if(cells.begin(), cells.end(), [](const Cell& c) { return c.is_default; });
  const EvalReport reference = def != cells.end() ? def->report : run_pipeline(dump, config).report;

  TableReport out;
  out.body = header(config, "grid");
  json rows = json::array();
  Csv csv({"W", "K", "C", "is_default", "n_clustered", "purity", "ari_vs_default", "nmi_vs_default", "n_common"});
  std::vector<double> purities;
  for (const auto& cell : cells) {
    const auto cmp = compare_on_common("default", cell.report.features, cell.report.assignment, reference.features,
                                       reference.assignment);
    purities.push_back(cell.report.purity.overall);
    rows.push_back({{"W", cell.graph.window},
                    {"K", cell.graph.top_k},
                    {"C", cell.graph.min_cooc},
                    {"is_default", cell.is_default},
                    {"n_clustered", cell.report.features.size()},
                    {"purity", cell.report.purity.overall},
                    {"ari_vs_default", nullable(cmp.ari)},
                    {"nmi_vs_default", nullable(cmp.nmi)},
                    {"n_common", cmp.n_common}});
    csv.row(cell.graph.window, cell.graph.top_k, cell.graph.min_cooc, cell.is_default, cell.report.features.size(),
            cell.report.purity.overall, cmp.ari, cmp.nmi, cmp.n_common);
  }
  out.body["multi_seed"] = false;
  out.body["cells"] = rows;
  out.body["summary"] = {{"purity_min", *std::min_element(purities.begin(), purities.end())},
                         {"purity_max", *std::max_element(purities.begin(), purities.end())},
                         {"purity_mean", mean_of(purities)},
                         {"purity_std", std_of(purities)}};
  out.csv["cells"] = csv.str();
  return out;
}

TableReport run_seed_sweep(const ActivationDump& dump, const PipelineConfig& config,
                           std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw Error(Errc::InvalidArgument, "a seed sweep needs at least two seeds");
  const auto base = run_pipeline(dump, config);
  const auto runs = run_seeds(base.embedding, config.cluster, seeds, base.report.labels);
  const auto overall = runs.overall();
  const auto alpha = runs.alphabetic();

  TableReport out;
  out.body = header(config, "seeds");
  out.body["multi_seed"] = true;
  out.body["n_clustered"] = base.report.features.size();
  json rows = json::array();
  Csv csv({"seed", "purity", "alphabetic_purity", "inertia"});
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto a = runs.purity[i].category(TokenType::Alphabetic);
    rows.push_back({{"seed", seeds[i]},
                    {"purity", overall[i]},
                    {"alphabetic_purity", a ? json(*a) : json(nullptr)},
                    {"inertia", runs.clusterings[i].inertia}});
    csv.row(seeds[i], overall[i], a.value_or(std::numeric_limits<double>::quiet_NaN()), runs.clusterings[i].inertia);
  }
  json pairwise = json::array();
  double min_pair = 1.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < seeds.size(); ++j) {
      const double v = ari(runs.clusterings[i].assignment, runs.clusterings[j].assignment);
      min_pair = std::min(min_pair, v);
      row.push_back(v);
    }
    pairwise.push_back(row);
  }
  out.body["seeds"] = rows;
  out.body["purity_mean"] = mean_of(overall);
  out.body["purity_std"] = std_of(overall);
  out.body["alphabetic_mean"] = nullable(mean_of(alpha));
  out.body["alphabetic_std"] = nullable(std_of(alpha));
  out.body["pairwise_ari"] = pairwise;
  out.body["pairwise_ari_min"] = min_pair;
  out.csv["seeds"] = csv.str();
  return out;
}

TableReport run_ablation_table(const ActivationDump& dump, const PipelineConfig& config,
                               std::span<const std::uint64_t> seeds) {
  PipelineConfig base_cfg = config;
  base_cfg.kernel.kind = KernelKind::Wl;
  const auto base = run_pipeline(dump, base_cfg);
  const auto& labels = base.report.labels;
  const auto& features = base.report.features;

  constexpr KernelKind kRows[] = {KernelKind::Wl,
                                  KernelKind::WlEdgesRemoved,
                                  KernelKind::WlLabelsShuffled,
                                  KernelKind::DecoderCosine,
                                  KernelKind::TokenHistogram,
                                  KernelKind::CooccurrenceCosine,
                                  KernelKind::Jaccard};
  TableReport out;
  out.body = header(config, "ablate");
  out.body["multi_seed"] = true;
  out.body["n_seeds"] = seeds.size();
  out.body["n_clustered"] = features.size();
  json rows = json::array();
  Csv csv({"kind", "skipped", "purity_mean", "purity_std", "alphabetic_mean", "ari_vs_default", "nmi_vs_default"});
  for (auto kind : kRows) {
    json row = {{"kind", kernel_kind_name(kind)}};
    if (kind == KernelKind::DecoderCosine && !dump.decoder) {
      row["skipped"] = true;
      row["reason"] = "MissingDecoder";
      rows.push_back(row);
      csv.row(kernel_kind_name(kind), true, NAN, NAN, NAN, NAN, NAN);
      continue;
    }
    PipelineConfig cfg = base_cfg;
    cfg.kernel.kind = kind;
    Embedding embedding;
    if (kind == KernelKind::Wl) {
      embedding = base.embedding;
    } else {
      const auto kernel = [&] {
        try {
          return run_kernel(dump, base.batch, cfg);
        } catch (const Error&) {
          rethrow_with_stage(std::string("ablate ") + std::string(kernel_kind_name(kind)));
        }
      }();
      embedding = embed(kernel, cfg.cluster);
    }
    const auto runs = run_seeds(embedding, cfg.cluster, seeds, labels);
    const auto at_seed = run_clustering(embedding, cfg.cluster, cfg.cluster.seed);
    const auto cmp = compare_on_common("default", features, at_seed.assignment, features,
                                       base.clustering.assignment);
    const auto overall = runs.overall();
    const auto alpha = runs.alphabetic();
    row["skipped"] = false;
    row["purity_mean"] = mean_of(overall);
    row["purity_std"] = std_of(overall);
    row["alphabetic_mean"] = nullable(mean_of(alpha));
    row["ari_vs_default"] = cmp.ari;
    row["nmi_vs_default"] = cmp.nmi;
    rows.push_back(row);
    csv.row(kernel_kind_name(kind), false, mean_of(overall), std_of(overall), mean_of(alpha), cmp.ari, cmp.nmi);
  }
  out.body["rows"] = rows;
  out.csv["rows"] = csv.str();
  return out;
}

TableReport run_cutoff_sweep(const ActivationDump& dump, const PipelineConfig& config,
                             std::span<const std::uint64_t> seeds) {
  const auto base = run_pipeline(dump, config);
  const auto& features = base.report.features;

  TableReport out;
  out.body = header(config, "cutoffs");
  out.body["multi_seed"] = true;
  out.body["n_seeds"] = seeds.size();
  out.body["n_default"] = features.size();
  json rows = json::array();
  Csv csv({"config", "alpha_min", "alpha_max", "n_selected", "n_intersect", "purity_mean", "purity_std"});
  for (const auto& cut : kCutoffConfigs) {
    std::vector<FeatureId> selected;
    try {
      selected = select_features(dump, cut.alpha_min, cut.alpha_max, config.selection.target_n).selected;
    } catch (const Error& e) {
      if (e.code() != Errc::NoEligibleFeatures) rethrow_with_stage("cutoffs");
    }
    const std::unordered_set<FeatureId> chosen(selected.begin(), selected.end());
    std::vector<std::size_t> keep;
    std::vector<TokenType> labels;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (chosen.contains(features[i])) {
        keep.push_back(i);
        labels.push_back(base.report.labels[i]);
      }
    }
    json row = {{"config", cut.name},
                {"alpha_min", cut.alpha_min},
                {"alpha_max", cut.alpha_max},
                {"n_selected", selected.size()},
                {"n_intersect", keep.size()}};
    double m = std::numeric_limits<double>::quiet_NaN(), s = m;
    if (!keep.empty()) {
      const auto runs = run_seeds(base.embedding.subset(keep), config.cluster, seeds, labels);
      const auto overall = runs.overall();
      m = mean_of(overall);
      s = std_of(overall);
    }
    row["purity_mean"] = nullable(m);
    row["purity_std"] = nullable(s);
    rows.push_back(row);
    csv.row(cut.name, cut.alpha_min, cut.alpha_max, selected.size(), keep.size(), m, s);
  }
  out.body["rows"] = rows;
  out.csv["rows"] = csv.str();
  return out;
}

TableReport run_directed_comparison(const ActivationDump& dump, const PipelineConfig& config,
                                    std::span<const std::uint64_t> seeds) {
  PipelineConfig undirected_cfg = config;
  undirected_cfg.kernel.kind = KernelKind::Wl;
  const auto base = run_pipeline(dump, undirected_cfg);
  PipelineConfig directed_cfg = config;
  directed_cfg.kernel.kind = KernelKind::WlDirected;
  const auto directed_kernel = run_kernel(dump, base.batch, directed_cfg);
  const auto directed_embedding = embed(directed_kernel, config.cluster);
  const auto directed_at_seed = run_clustering(directed_embedding, config.cluster, config.cluster.seed);

  std::size_t undirected_edges = 0, directed_edges = 0;
  std::uint64_t undirected_weight = 0, directed_weight = 0;
  for (const auto& g : base.batch.graphs) {
    const auto d = to_directed(g);
    undirected_edges += g.edges.size();
    directed_edges += d.edges.size();
    for (const auto& e : g.edges) undirected_weight += e.weight;
    for (const auto& e : d.edges) directed_weight += e.weight;
  }

  TableReport out;
  out.body = header(config, "directed");
  out.body["n_seeds"] = seeds.size();
  out.body["n_clustered"] = base.report.features.size();
  json variants = json::array();
  Csv csv({"kind", "purity_seed", "purity_mean", "purity_std", "alphabetic_cluster", "alphabetic_purity"});
  const auto& labels = base.report.labels;
  auto add_variant = [&](KernelKind kind, const Embedding& embedding, const Clustering& at_seed) {
    const auto runs = run_seeds(embedding, config.cluster, seeds, labels);
    const auto overall = runs.overall();
    const auto p = purity(at_seed.assignment, labels);
    const auto alpha = p.category(TokenType::Alphabetic);
    variants.push_back({{"kind", kernel_kind_name(kind)},
                        {"purity_seed", p.overall},
                        {"purity_mean", mean_of(overall)},
                        {"purity_std", std_of(overall)},
                        {"alphabetic_cluster", alpha.has_value()},
                        {"alphabetic_purity", alpha ? json(*alpha) : json(nullptr)}});
    csv.row(kernel_kind_name(kind), p.overall, mean_of(overall), std_of(overall), alpha.has_value(),
            alpha.value_or(std::numeric_limits<double>::quiet_NaN()));
  };
  add_variant(KernelKind::Wl, base.embedding, base.clustering);
  add_variant(KernelKind::WlDirected, directed_embedding, directed_at_seed);
  out.body["variants"] = variants;
  out.body["ari_between"] = ari(base.clustering.assignment, directed_at_seed.assignment);
  out.body["nmi_between"] = nmi(base.clustering.assignment, directed_at_seed.assignment);
  out.body["edges"] = {{"undirected_count", undirected_edges},
                       {"directed_count", directed_edges},
                       {"undirected_weight", undirected_weight},
                       {"directed_weight", directed_weight}};
  out.csv["variants"] = csv.str();
  return out;
}

TableReport run_cross_corpus(const ActivationDump& main, const ActivationDump& second, const PipelineConfig& config,
                             const CodeSets& codesets) {
  if (main.vocab != second.vocab) {
    throw Error(Errc::VocabMismatch, "dumps have different vocabularies (" + std::to_string(main.vocab.size()) +
                                         " vs " + std::to_string(second.vocab.size()) + " tokens)");
  }
  const auto base = run_pipeline(main, config);
  std::vector<FeatureId> second_selected;
  try {
    second_selected = run_selection(second, config).selected;
  } catch (const Error& e) {
    if (e.code() != Errc::NoEligibleFeatures) rethrow_with_stage("cross select");
  }
  const std::unordered_set<FeatureId> in_second(second_selected.begin(), second_selected.end());
  std::size_t overlap = 0;
  for (auto f : base.selection.selected) overlap += in_second.contains(f);
  std::vector<FeatureId> shared;
  for (auto f : base.report.features) {
    if (in_second.contains(f)) shared.push_back(f);
  }

  TableReport out;
  out.body = header(config, "cross");
  out.body["multi_seed"] = false;
  out.body["n_main_selected"] = base.selection.selected.size();
  out.body["n_second_selected"] = second_selected.size();
  out.body["overlap_fraction"] =
      base.selection.selected.empty() ? 0.0 : double(overlap) / double(base.selection.selected.size());
  out.body["n_intersect"] = shared.size();

  Comparison cmp{"main", std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0};
  std::size_t reclustered = 0;
  GraphBatch batch2;
  try {
    batch2 = build_feature_graphs(second, shared, config.graph);
  } catch (const Error&) {
    rethrow_with_stage("cross graphs");
  }
  reclustered = batch2.graphs.size();
  if (reclustered >= std::max<std::size_t>(config.cluster.dims, 2)) {
    const auto kernel = run_kernel(second, batch2, config);
    const auto embedding = embed(kernel, config.cluster);
    const auto clustering = run_clustering(embedding, config.cluster, config.cluster.seed);
    const auto ids = batch2.feature_ids();
    cmp = compare_on_common("main", base.report.features, base.report.assignment, ids, clustering.assignment);
  }
  out.body["n_reclustered"] = reclustered;
  out.body["ari"] = nullable(cmp.ari);
  out.body["nmi"] = nullable(cmp.nmi);
  out.body["n_common"] = cmp.n_common;

  const auto code = code_token_ratio(base.report.assignment, base.batch.graphs, main.vocab, codesets);
  out.body["code_tokens"] = to_json(code);
  Csv csv({"cluster", "size", "code_ratio", "keywords", "operators", "brackets", "total_tokens"});
  for (const auto& c : code.clusters) {
    csv.row(c.cluster, c.size, c.code_ratio, c.keywords, c.operators, c.brackets, c.total_tokens);
  }
  out.csv["code_tokens"] = csv.str();
  return out;
}

std::string clusters_csv(const EvalReport& report) {
  Csv csv({"cluster", "size", "dominant", "purity", "prototype"});
  for (const auto& c : report.clusters) csv.row(c.cluster, c.size, token_type_name(c.dominant), c.purity, c.prototype);
  return csv.str();
}

void write_report(const std::filesystem::path& dir, std::string_view name, const TableReport& report) {
  io::write_text(dir / (std::string(name) + ".json"), report.body.dump(2) + "\n");
  for (const auto& [table, text] : report.csv) {
    io::write_text(dir / (std::string(name) + "_" + table + ".csv"), text);
  }
}

void write_pipeline_outputs(const std::filesystem::path& dir, const PipelineRun& run) {
  io::write_text(dir / "report.json", run.report.to_json().dump(2) + "\n");
  io::write_text(dir / "clusters.csv", clusters_csv(run.report));
  io::write_text(dir / "scatter.svg",
                 scatter_svg(run.embedding, run.report.assignment, kernel_kind_name(run.report.kind)));
}

std::string scatter_svg(const Embedding& embedding, std::span<const std::uint32_t> assignment,
                        std::string_view title) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                             "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kWidth = 640, kHeight = 480, kMargin = 40;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (embedding.n > 0) {
    xmin = ymin = std::numeric_limits<double>::infinity();
    xmax = ymax = -xmin;
    for (std::size_t i = 0; i < embedding.n; ++i) {
      const auto p = embedding.point(i);
      const double y = embedding.dims > 1 ? p[1] : 0.0;
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  }
  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")" << kHeight << "\">\n";
  svg << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  svg << R"(<text x=")" << kMargin << R"(" y="24" font-family="sans-serif" font-size="14">)" << title
      << " kernel PCA</text>\n";
  for (std::size_t i = 0; i < embedding.n; ++i) {
    const auto p = embedding.point(i);
    const double y = embedding.dims > 1 ? p[1] : 0.0;
    const double sx = kMargin + (p[0] - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin);
    const double sy = kHeight - kMargin - (y - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin);
    const auto c = i < assignment.size() ? assignment[i] : 0;
    svg << R"(<circle cx=")" << sx << R"(" cy=")" << sy << R"(" r="3" fill=")" << kPalette[c % 10]
        << R"(" fill-opacity="0.7"><title>cluster )" << c << "</title></circle>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace featgraph
