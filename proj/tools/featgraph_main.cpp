// featgraph command-line entry point.
//
// Exit codes: 0 success, 2 validation error (bad flags or config), 3 data
// error (malformed or unusable input).

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "featgraph/activation_store.hpp"
#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"
#include "featgraph/experiment_harness.hpp"
#include "featgraph/graph_builder.hpp"
#include "featgraph/synthetic_bench.hpp"
#include "featgraph/wl_kernel.hpp"

namespace fg = featgraph;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitData = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;
};

struct Overrides {
  std::string dump;
  std::optional<std::uint32_t> window, top_k, min_cooc, h, bins, k, n_init, dims;
  std::optional<double> percentile;
  std::optional<std::size_t> target_n;
  std::string kind;
  bool directed = false;
  std::string ablate, baseline;
};

fg::PipelineConfig make_config(const Globals& g, const Overrides& o) {
  fg::PipelineConfig c = g.config.empty() ? fg::PipelineConfig{} : fg::PipelineConfig::load(g.config);
  if (!o.dump.empty()) c.dump = o.dump;
  if (o.window) c.graph.window = *o.window;
  if (o.top_k) c.graph.top_k = *o.top_k;
  if (o.min_cooc) c.graph.min_cooc = *o.min_cooc;
  if (o.percentile) c.graph.percentile = *o.percentile;
  if (o.target_n) c.selection.target_n = *o.target_n;
  if (o.h) c.kernel.h = *o.h;
  if (o.bins) c.kernel.bins = *o.bins;
  if (o.k) c.cluster.k = *o.k;
  if (o.n_init) c.cluster.n_init = *o.n_init;
  if (o.dims) c.cluster.dims = *o.dims;
  if (!o.kind.empty()) c.kernel.kind = fg::kernel_kind_from_name(o.kind);
  if (o.directed) c.kernel.kind = fg::KernelKind::WlDirected;
  if (!o.ablate.empty()) {
    c.kernel.kind = o.ablate == "edges" ? fg::KernelKind::WlEdgesRemoved : fg::KernelKind::WlLabelsShuffled;
  }
  if (!o.baseline.empty()) {
    static const std::map<std::string, fg::KernelKind> kBaselines{{"decoder", fg::KernelKind::DecoderCosine},
                                                                 {"histogram", fg::KernelKind::TokenHistogram},
                                                                 {"cooc", fg::KernelKind::CooccurrenceCosine},
                                                                 {"jaccard", fg::KernelKind::Jaccard}};
    c.kernel.kind = kBaselines.at(o.baseline);
  }
  if (g.seed) c.cluster.seed = *g.seed;
  // Round-trip through JSON so CLI overrides get the same validation as files.
  return fg::PipelineConfig::from_json(c.to_json());
}

fg::ActivationDump load_config_dump(const fg::PipelineConfig& c) {
  if (c.dump.empty()) throw fg::Error(fg::Errc::InvalidArgument, "no dump given (--dump or config \"dump\")");
  return fg::load_dump(c.dump);
}

fs::path out_dir(const Globals& g) { return g.out.empty() ? fs::path("out") : fs::path(g.out); }

fs::path out_file(const Globals& g, std::string_view what) {
  if (g.out.empty()) throw fg::Error(fg::Errc::InvalidArgument, std::string(what) + " needs --out PATH");
  return g.out;
}

void add_dump(CLI::App* cmd, Overrides& o) { cmd->add_option("--dump", o.dump, "SAEDUMP1 activation dump"); }

void add_graph_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-W,--window", o.window, "tokens on each side of an event");
  cmd->add_option("-K,--top-k", o.top_k, "node budget per graph");
  cmd->add_option("-C,--min-cooc", o.min_cooc, "edge co-occurrence threshold");
  cmd->add_option("--p", o.percentile, "event threshold percentile");
  cmd->add_option("--target-n", o.target_n, "number of features to select");
}

void add_kernel_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--h", o.h, "refinement iterations");
  cmd->add_option("--bins", o.bins, "label bins");
  cmd->add_option("--kind", o.kind, "wl, wl-directed, wl-edges-removed, wl-labels-shuffled, decoder-cosine, "
                                    "token-histogram, cooccurrence-cosine, jaccard");
  cmd->add_flag("--directed", o.directed, "lower-triangular directed variant");
  cmd->add_option("--ablate", o.ablate, "edges or labels")->check(CLI::IsMember({"edges", "labels"}));
  cmd->add_option("--baseline", o.baseline, "decoder, histogram, cooc or jaccard")
      ->check(CLI::IsMember({"decoder", "histogram", "cooc", "jaccard"}));
}

void add_cluster_flags(CLI::App* cmd, Overrides& o, bool long_k = false) {
  cmd->add_option(long_k ? "-k,--K,--clusters" : "-k,--clusters", o.k, "number of clusters");
  cmd->add_option("--n-init", o.n_init, "k-means restarts");
  cmd->add_option("--dims", o.dims, "embedding dimensions");
}

void print_pipeline_summary(const fg::EvalReport& r) {
  std::printf("kind %s  clustered %zu of %zu selected  overall purity %.4f\n",
              std::string(fg::kernel_kind_name(r.kind)).c_str(), r.features.size(), r.n_selected, r.purity.overall);
  if (r.reduced_n()) std::printf("note: requested %zu features, only %zu eligible\n", r.n_requested, r.n_selected);
  std::printf("%8s %6s %-11s %8s %10s\n", "cluster", "size", "dominant", "purity", "prototype");
  for (const auto& c : r.clusters) {
    std::printf("%8u %6zu %-11s %8.3f %10u\n", c.cluster, c.size, std::string(fg::token_type_name(c.dominant)).c_str(),
                c.purity, c.prototype);
  }
}

void print_table_report(const fg::TableReport& r) {
  for (const auto& [name, text] : r.csv) std::cout << "# " << name << "\n" << text;
}

int report_command(const std::string& in) {
  std::ifstream f(in);
  if (!f) throw fg::Error(fg::Errc::Io, "cannot open " + in);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw fg::Error(fg::Errc::MalformedCache, std::string("report: ") + e.what());
  }
  if (j.contains("experiment")) {
    std::cout << "experiment " << j.at("experiment").get<std::string>() << " ("
              << j.value("tool_version", std::string("?")) << ")\n";
    for (const auto& [key, value] : j.items()) {
      if (key == "config" || key == "experiment" || key == "tool_version") continue;
      if (value.is_array()) {
        std::cout << key << ":\n";
        for (const auto& row : value) std::cout << "  " << row.dump() << "\n";
      } else {
        std::cout << key << ": " << value.dump() << "\n";
      }
    }
  } else {
    print_pipeline_summary(fg::EvalReport::from_json(j));
  }
  return 0;
}

std::vector<std::uint64_t> seeds_or_default(const std::vector<std::uint64_t>& seeds) {
  return seeds.empty() ? fg::kDefaultSeeds : seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural clustering of sparse-autoencoder features via co-occurrence graph kernels"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "pipeline config (JSON)");
  app.add_option("--seed", g.seed, "random seed (clustering, or generation for synth)");
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--jobs", g.jobs, "OpenMP threads (0 = runtime default)");

  Overrides o;
  auto* ingest = app.add_subcommand("ingest-check", "validate a dump and print its summary");
  add_dump(ingest, o);
  auto* build = app.add_subcommand("build-graphs", "select features and write the FGRAPHS1 graph cache");
  add_dump(build, o);
  add_graph_flags(build, o);

  std::string graphs_path;
  auto* kernel = app.add_subcommand("kernel", "compute a similarity matrix from a graph cache");
  kernel->add_option("--graphs", graphs_path, "FGRAPHS1 graph cache")->required();
  add_dump(kernel, o);
  add_kernel_flags(kernel, o);

  std::string kernel_path;
  auto* cluster = app.add_subcommand("cluster", "embed a kernel matrix and run k-means");
  cluster->add_option("--kernel", kernel_path, "KMATRIX1 kernel file")->required();
  add_cluster_flags(cluster, o, true);

  auto* evaluate = app.add_subcommand("evaluate", "run the full pipeline and write its report");
  auto* grid = app.add_subcommand("grid", "window / top-K / threshold grid");
  std::vector<std::uint64_t> seed_list;
  auto* seeds = app.add_subcommand("seeds", "re-cluster under several seeds");
  auto* ablate = app.add_subcommand("ablate", "ablation and baseline table");
  auto* cutoffs = app.add_subcommand("cutoffs", "activation-frequency cutoff sweep");
  auto* directed = app.add_subcommand("directed", "directed versus undirected kernel");
  for (auto* cmd : {evaluate, grid, seeds, ablate, cutoffs, directed}) {
    add_dump(cmd, o);
    add_graph_flags(cmd, o);
    add_kernel_flags(cmd, o);
    add_cluster_flags(cmd, o);
  }
  for (auto* cmd : {seeds, ablate, cutoffs, directed}) {
    cmd->add_option("--seeds", seed_list, "clustering seeds, comma separated (default: ten fixed seeds)")->delimiter(',');
  }

  std::string second_path, codesets_path;
  auto* cross = app.add_subcommand("cross", "compare clusterings across two corpora");
  add_dump(cross, o);
  add_graph_flags(cross, o);
  add_kernel_flags(cross, o);
  add_cluster_flags(cross, o);
  cross->add_option("--second", second_path, "second dump sharing the vocabulary")->required();
  cross->add_option("--codesets", codesets_path, "code token sets (JSON)");

  auto* synth = app.add_subcommand("synth", "generate synthetic dumps");
  synth->require_subcommand(1);
  std::size_t budget = 78749, snippets = 600;
  std::string spec_path, vocab_from;
  auto* mixed = synth->add_subcommand("mixed", "mixed-register corpus");
  mixed->add_option("--budget", budget, "token budget")->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 32));
  auto* code = synth->add_subcommand("code", "Python snippet corpus");
  code->add_option("-n", snippets, "number of snippets")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 24));
  for (auto* cmd : {mixed, code}) cmd->add_option("--vocab-from", vocab_from, "start from this dump's vocabulary");
  auto* planted = synth->add_subcommand("planted", "planted-motif activation dump");
  planted->add_option("--spec", spec_path, "planted spec (JSON)")->required();

  std::string report_in;
  auto* report = app.add_subcommand("report", "print a summary of a report file");
  report->add_option("--in", report_in, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  if (g.jobs > 0) omp_set_num_threads(g.jobs);

  try {
    if (*ingest) {
      const auto c = make_config(g, o);
      const auto dump = load_config_dump(c);
      json summary = fg::dump_meta_json(dump);
      summary["n_docs"] = dump.corpus.doc_starts.size();
      summary["vocab_size"] = dump.vocab.size();
      summary["decoder"] = dump.decoder.has_value();
      std::size_t eligible = 0;
      try {
        eligible = fg::run_selection(dump, c).n_eligible;
      } catch (const fg::Error& e) {
        if (e.code() != fg::Errc::NoEligibleFeatures) throw;
      }
      summary["eligible_features"] = eligible;
      std::cout << summary.dump(2) << "\n";
      if (!g.out.empty()) fg::io::write_text(g.out, summary.dump(2) + "\n");
    } else if (*build) {
      const auto c = make_config(g, o);
      const auto dump = load_config_dump(c);
      const auto selection = fg::run_selection(dump, c);
      const auto batch = fg::build_feature_graphs(dump, selection.selected, c.graph);
      fg::write_graphs(out_file(g, "build-graphs"), batch);
      std::printf("%zu graphs, %zu excluded\n", batch.graphs.size(), batch.excluded.size());
    } else if (*kernel) {
      const auto c = make_config(g, o);
      const auto batch = fg::load_graphs(graphs_path);
      fg::ActivationDump dump;
      if (!c.dump.empty()) dump = fg::load_dump(c.dump);
      if (c.kernel.kind == fg::KernelKind::DecoderCosine && c.dump.empty()) {
        throw fg::Error(fg::Errc::InvalidArgument, "decoder-cosine needs --dump");
      }
      const auto k = fg::run_kernel(dump, batch, c);
      fg::write_kernel(out_file(g, "kernel"), k);
      std::printf("%s kernel over %zu graphs\n", std::string(fg::kernel_kind_name(k.kind)).c_str(), k.n);
    } else if (*cluster) {
      const auto c = make_config(g, o);
      const auto k = fg::load_kernel(kernel_path);
      const auto embedding = fg::kernel_pca(k, c.cluster.dims);
      const auto clustering = fg::run_clustering(embedding, c.cluster, c.cluster.seed);
      json j = fg::to_json(clustering, k.kind);
      j["features"] = k.features;
      const auto dir = out_dir(g);
      fg::io::write_text(dir / "clustering.json", j.dump(2) + "\n");
      fg::io::write_text(dir / "scatter.svg", fg::scatter_svg(embedding, clustering.assignment, fg::kernel_kind_name(k.kind)));
      std::printf("%u clusters over %zu points, inertia %.6g\n", clustering.k, embedding.n, clustering.inertia);
    } else if (*evaluate) {
      const auto c = make_config(g, o);
      const auto dump = load_config_dump(c);
      const auto run = fg::run_pipeline(dump, c);
      fg::write_pipeline_outputs(out_dir(g), run);
      print_pipeline_summary(run.report);
    } else if (*grid || *seeds || *ablate || *cutoffs || *directed) {
      const auto c = make_config(g, o);
      const auto dump = load_config_dump(c);
      const auto s = seeds_or_default(seed_list);
      fg::TableReport r;
      std::string name;
      if (*grid) {
        r = fg::run_grid(dump, c);
        name = "grid";
      } else if (*seeds) {
        r = fg::run_seed_sweep(dump, c, s);
        name = "seeds";
      } else if (*ablate) {
        r = fg::run_ablation_table(dump, c, s);
        name = "ablate";
      } else if (*cutoffs) {
        r = fg::run_cutoff_sweep(dump, c, s);
        name = "cutoffs";
      } else {
        r = fg::run_directed_comparison(dump, c, s);
        name = "directed";
      }
      fg::write_report(out_dir(g), name, r);
      print_table_report(r);
    } else if (*cross) {
      const auto c = make_config(g, o);
      const auto main_dump = load_config_dump(c);
      const auto second = fg::load_dump(second_path);
      const auto sets = codesets_path.empty() ? fg::CodeSets::defaults() : fg::CodeSets::load(codesets_path);
      const auto r = fg::run_cross_corpus(main_dump, second, c, sets);
      fg::write_report(out_dir(g), "cross", r);
      std::printf("overlap %.4f  ari %s  nmi %s\n", r.body.at("overlap_fraction").get<double>(),
                  r.body.at("ari").dump().c_str(), r.body.at("nmi").dump().c_str());
    } else if (*synth) {
      const auto path = out_file(g, "synth");
      const std::uint64_t seed = g.seed.value_or(42);
      if (*planted) {
        const auto spec = fg::synth::PlantedSpec::load(spec_path);
        const auto pd = fg::synth::gen_planted_dump(spec, seed);
        fg::write_dump(path, pd.dump);
        json truth = {{"family", pd.truth.family}, {"spec", spec.to_json()}, {"seed", seed}};
        json labels = json::array();
        for (auto t : pd.truth.expected_label) labels.push_back(fg::token_type_name(t));
        truth["expected_label"] = labels;
        fg::io::write_text(path.string() + ".truth.json", truth.dump(2) + "\n");
        std::printf("%zu features, %zu positions\n", pd.dump.n_features(), pd.dump.corpus.tokens.size());
      } else {
        fg::synth::Tokenizer tokenizer;
        if (!vocab_from.empty()) tokenizer = fg::synth::Tokenizer(fg::load_dump(vocab_from).vocab);
        const auto corpus = *mixed ? fg::synth::gen_mixed_corpus({seed, budget, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}}, &tokenizer)
                                   : fg::synth::gen_code_corpus(seed, snippets, &tokenizer);
        const auto dump = fg::synth::corpus_dump(corpus, seed, *mixed ? "synth-mixed" : "synth-code");
        fg::write_dump(path, dump);
        std::printf("%zu positions, %zu documents, vocabulary %zu\n", dump.corpus.tokens.size(),
                    dump.corpus.doc_starts.size(), dump.vocab.size());
      }
    } else if (*report) {
      return report_command(report_in);
    }
  } catch (const fg::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return fg::is_validation_error(e.code()) ? kExitValidation : kExitData;
  }
  return 0;
}
