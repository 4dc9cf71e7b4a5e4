#pragma once

// End-to-end runs: selection, graphs, kernel, embedding, clustering and
// evaluation, plus the experiment families built on top (hyperparameter grid,
// seed sweep, ablation table, cutoff sweep, directed comparison, cross-corpus
// check). Every report embeds its config and the tool version; timings live in
// a separate object so the rest of a report is reproducible byte for byte.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "featgraph/activation_store.hpp"
#include "featgraph/embed_cluster.hpp"
#include "featgraph/eval_metrics.hpp"
#include "featgraph/graph_builder.hpp"
#include "featgraph/wl_kernel.hpp"

namespace featgraph {

inline constexpr std::string_view kToolVersion = "featgraph 0.1.0";

struct SelectionConfig {
  double alpha_min = 0.001;
  double alpha_max = 0.98;
  std::size_t target_n = 2048;
  bool operator==(const SelectionConfig&) const = default;
};

struct KernelConfig {
  std::uint32_t h = 3;
  std::uint32_t bins = 64;
  /// Wl by default; the directed variant, the two ablations and the baselines
  /// are selected here too.
  KernelKind kind = KernelKind::Wl;
  bool operator==(const KernelConfig&) const = default;
};

struct ClusterConfig {
  std::uint32_t k = 10;
  std::uint32_t n_init = 20;
  std::uint64_t seed = 42;
  std::uint32_t dims = 2;
  bool operator==(const ClusterConfig&) const = default;
};

struct PipelineConfig {
  std::filesystem::path dump;
  SelectionConfig selection;
  GraphConfig graph;
  KernelConfig kernel;
  ClusterConfig cluster;

  bool operator==(const PipelineConfig&) const = default;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults. Throws Error(InvalidArgument).
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

struct ClusterRow {
  std::uint32_t cluster = 0;
  std::size_t size = 0;
  TokenType dominant = TokenType::Mixed;
  std::size_t matching = 0;
  double purity = 0.0;
  FeatureId prototype = 0;  // feature id of the member nearest the centroid
};

struct Comparison {
  std::string name;
  double ari = 0.0;
  double nmi = 0.0;
  std::size_t n_common = 0;
};

struct EvalReport {
  nlohmann::json config;
  std::string tool_version;
  KernelKind kind = KernelKind::Wl;
  std::size_t n_requested = 0;
  std::size_t n_eligible = 0;
  std::size_t n_selected = 0;
  std::vector<ExcludedFeature> excluded;
  std::vector<FeatureId> features;  // clustered features, in selection order
  std::vector<std::uint32_t> assignment;
  std::vector<TokenType> labels;
  PurityReport purity;
  std::vector<ClusterRow> clusters;
  double inertia = 0.0;
  std::vector<Comparison> comparisons;
  std::map<std::string, double> timing;  // seconds per stage

  bool reduced_n() const { return n_selected < n_requested; }

  nlohmann::json to_json(bool with_timing = true) const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Everything a pipeline run produced, for callers that reuse stages.
struct PipelineRun {
  FeatureSelection selection;
  GraphBatch batch;
  KernelMatrix kernel;
  Embedding embedding;
  Clustering clustering;
  EvalReport report;
};

FeatureSelection run_selection(const ActivationDump& dump, const PipelineConfig& config);
/// Similarity matrix of the configured kind over the batch's graphs.
KernelMatrix run_kernel(const ActivationDump& dump, const GraphBatch& batch, const PipelineConfig& config);
/// Clusters with min(K, n) centroids so small batches still cluster.
Clustering run_clustering(const Embedding& embedding, const ClusterConfig& config, std::uint64_t seed);

PipelineRun run_pipeline(const ActivationDump& dump, const PipelineConfig& config);
/// Loads `config.dump` and runs the pipeline.
EvalReport run_pipeline(const PipelineConfig& config);

/// ARI / NMI of two clusterings on the features they share.
Comparison compare_on_common(std::string name, std::span<const FeatureId> features_a,
                             std::span<const std::uint32_t> a, std::span<const FeatureId> features_b,
                             std::span<const std::uint32_t> b);

/// Each report has a JSON body and named CSV tables.
struct TableReport {
  nlohmann::json body;
  std::map<std::string, std::string> csv;
};

struct GridAxes {
  std::vector<std::uint32_t> windows{5, 10, 15};
  std::vector<std::uint32_t> top_ks{30, 50};
  std::vector<std::uint32_t> min_coocs{3, 5};
};

inline const std::vector<std::uint64_t> kDefaultSeeds{42, 0, 7, 13, 21, 33, 47, 64, 99, 123};

struct CutoffConfig {
  std::string name;
  double alpha_min = 0.0;
  double alpha_max = 1.0;
};

inline const std::vector<CutoffConfig> kCutoffConfigs{
    {"A", 0.001, 0.98}, {"B", 0.005, 0.95}, {"C", 0.010, 0.90}, {"D", 0.001, 0.99}, {"E", 0.0005, 0.98}};

/// One pipeline run per (W, K, C) cell, compared against the config's cell.
TableReport run_grid(const ActivationDump& dump, const PipelineConfig& config, const GridAxes& axes = {});
/// Re-clusters one embedding with every seed. Throws Error(InvalidArgument) for fewer than two seeds.
TableReport run_seed_sweep(const ActivationDump& dump, const PipelineConfig& config,
                           std::span<const std::uint64_t> seeds = kDefaultSeeds);
/// Seven rows over one graph batch: WL, the two ablations and four baselines.
TableReport run_ablation_table(const ActivationDump& dump, const PipelineConfig& config,
                               std::span<const std::uint64_t> seeds = kDefaultSeeds);
/// Configurations A-E, each intersected with the default selection and
/// re-clustered on the default embedding.
TableReport run_cutoff_sweep(const ActivationDump& dump, const PipelineConfig& config,
                             std::span<const std::uint64_t> seeds = kDefaultSeeds);
TableReport run_directed_comparison(const ActivationDump& dump, const PipelineConfig& config,
                                    std::span<const std::uint64_t> seeds = kDefaultSeeds);
/// Throws Error(VocabMismatch) unless both dumps share one vocabulary.
TableReport run_cross_corpus(const ActivationDump& main, const ActivationDump& second, const PipelineConfig& config,
                             const CodeSets& codesets = CodeSets::defaults());

/// JSON report body without its "timing" member.
std::string deterministic_dump(const nlohmann::json& report);

/// Writes `<name>.json` and `<name>_<table>.csv` files under `dir`.
void write_report(const std::filesystem::path& dir, std::string_view name, const TableReport& report);
/// Writes report.json, clusters.csv and scatter.svg for a pipeline run.
void write_pipeline_outputs(const std::filesystem::path& dir, const PipelineRun& run);

std::string clusters_csv(const EvalReport& report);
/// 2-D scatter of the first two embedding coordinates, coloured by cluster.
std::string scatter_svg(const Embedding& embedding, std::span<const std::uint32_t> assignment,
                        std::string_view title);

}  // namespace featgraph
