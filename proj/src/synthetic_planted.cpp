#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "featgraph/error.hpp"
#include "featgraph/rng.hpp"
#include "featgraph/synthetic_bench.hpp"

namespace featgraph::synth {

namespace {

// Stream namespaces so no two uses of one seed share draws.
constexpr std::uint64_t kFeatureStream = 1ULL << 32;
constexpr std::uint64_t kFamilyStream = 2ULL << 32;
constexpr float kBackgroundValue = 0.05f;

// Distractor tokens are non-ASCII pairs, so they carry the "mixed" label and
// never collide with ASCII pool tokens.
std::vector<std::string> distractor_tokens(std::uint32_t n) {
  static const std::vector<std::string> greek = {"α", "β", "γ", "δ", "ε", "ζ", "η", "θ", "ι", "κ", "λ", "μ",
                                                 "ν", "ξ", "ο", "π", "ρ", "σ", "τ", "υ", "φ", "χ", "ψ", "ω"};
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string s;
    for (std::uint32_t x = i; ; x /= greek.size()) {
      s += greek[x % greek.size()];
      if (x < greek.size()) break;
    }
    out.push_back("\xC2\xB7" + s);  // middle dot prefix keeps them distinct from pool strings
  }
  return out;
}

double gaussian(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform();  // (0, 1]
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void validate(const PlantedSpec& spec) {
  if (spec.families.empty()) throw Error(Errc::InvalidArgument, "planted spec has no families");
  if (spec.window_radius < 1) throw Error(Errc::InvalidArgument, "window_radius must be >= 1");
  if (spec.d_model < 1) throw Error(Errc::InvalidArgument, "d_model must be >= 1");
  if (!(spec.background_fraction >= 0.0 && spec.background_fraction < 0.5)) {
    throw Error(Errc::InvalidArgument, "background_fraction must be in [0, 0.5)");
  }
  std::set<std::string> seen;
  for (const auto& f : spec.families) {
    if (f.pool.size() < 2) throw Error(Errc::InvalidArgument, "family " + f.family + ": pool needs >= 2 tokens");
    if (f.features_per_family < 2) {
      throw Error(Errc::InvalidArgument, "family " + f.family + ": features_per_family must be >= 2");
    }
    if (f.events_per_feature < 1) throw Error(Errc::InvalidArgument, "family " + f.family + ": no events");
    if (!(f.window_noise >= 0.0 && f.window_noise <= 1.0)) {
      throw Error(Errc::InvalidArgument, "family " + f.family + ": window_noise must be in [0, 1]");
    }
    if (f.window_noise > 0.0 && spec.distractors == 0) {
      throw Error(Errc::InvalidArgument, "window noise needs a non-empty distractor pool");
    }
    std::set<std::string> own(f.pool.begin(), f.pool.end());
    if (own.size() != f.pool.size()) throw Error(Errc::InvalidArgument, "family " + f.family + ": repeated pool token");
    if (!spec.allow_shared_pools) {
      for (const auto& t : own) {
        if (seen.contains(t)) throw Error(Errc::OverlappingPools, "token '" + t + "' in more than one family pool");
      }
    }
    seen.insert(own.begin(), own.end());
  }
}

}  // namespace

std::string_view topology_name(Topology t) {
  switch (t) {
    case Topology::Clique: return "clique";
    case Topology::Chain: return "chain";
    case Topology::Star: return "star";
  }
  return "clique";
}

Topology topology_from_name(std::string_view name) {
  if (name == "clique") return Topology::Clique;
  if (name == "chain") return Topology::Chain;
  if (name == "star") return Topology::Star;
  throw Error(Errc::InvalidArgument, "unknown topology '" + std::string(name) + "'");
}

PlantedSpec PlantedSpec::from_json(const nlohmann::json& j) {
  PlantedSpec s;
  try {
    s.window_radius = j.value("window_radius", s.window_radius);
    s.distractors = j.value("distractors", s.distractors);
    s.d_model = j.value("d_model", s.d_model);
    s.decoder_noise = j.value("decoder_noise", s.decoder_noise);
    s.background_fraction = j.value("background_fraction", s.background_fraction);
    s.allow_shared_pools = j.value("allow_shared_pools", s.allow_shared_pools);
    for (const auto& f : j.at("families")) {
      MotifSpec m;
      m.family = f.at("family").get<std::string>();
      m.pool = f.at("pool").get<std::vector<std::string>>();
      m.topology = topology_from_name(f.at("topology").get<std::string>());
      m.features_per_family = f.value("features_per_family", m.features_per_family);
      m.events_per_feature = f.value("events_per_feature", m.events_per_feature);
      m.window_noise = f.value("window_noise", m.window_noise);
      s.families.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("planted spec: ") + e.what());
  }
  return s;
}

PlantedSpec PlantedSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("planted spec: ") + e.what());
  }
}

nlohmann::json PlantedSpec::to_json() const {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& f : families) {
    fams.push_back({{"family", f.family},
                    {"pool", f.pool},
                    {"topology", topology_name(f.topology)},
                    {"features_per_family", f.features_per_family},
                    {"events_per_feature", f.events_per_feature},
                    {"window_noise", f.window_noise}});
  }
  return {{"window_radius", window_radius},
          {"distractors", distractors},
          {"d_model", d_model},
          {"decoder_noise", decoder_noise},
          {"background_fraction", background_fraction},
          {"allow_shared_pools", allow_shared_pools},
          {"families", fams}};
}

PlantedDump gen_planted_dump(const PlantedSpec& spec, std::uint64_t seed) {
  validate(spec);

  // Vocabulary depends on the PlantedSpec only, so re-generations with other seeds
  // share the token id space.
  Tokenizer vocab;
  std::vector<std::vector<TokenId>> pools;
  for (const auto& f : spec.families) {
    auto& ids = pools.emplace_back();
    for (const auto& t : f.pool) ids.push_back(vocab.id_of(t));
  }
  std::vector<TokenId> distractors;
  for (const auto& t : distractor_tokens(spec.distractors)) distractors.push_back(vocab.id_of(t));

  struct FeaturePlan {
    std::uint32_t family;
    std::uint32_t events;
    std::size_t offset;  // first corpus position
  };
  const std::size_t doc_len = 2 * std::size_t{spec.window_radius} + 1;
  std::vector<FeaturePlan> plan;
  std::size_t total = 0;
  for (std::uint32_t fam = 0; fam < spec.families.size(); ++fam) {
    const auto& f = spec.families[fam];
    for (std::uint32_t j = 0; j < f.features_per_family; ++j) {
      plan.push_back({fam, f.events_per_feature, total});
      total += std::size_t{f.events_per_feature} * doc_len;
    }
  }
  if (total > UINT32_MAX) throw Error(Errc::InvalidArgument, "planted corpus exceeds 2^32 positions");

  PlantedDump out;
  auto& dump = out.dump;
  dump.vocab = vocab.vocab();
  dump.corpus.tokens.assign(total, 0);
  for (std::size_t p = 0; p < total; p += doc_len) dump.corpus.doc_starts.push_back(static_cast<std::uint32_t>(p));
  dump.activations.resize(plan.size());
  dump.meta.d_model = spec.d_model;
  dump.meta.d_sae = static_cast<std::uint32_t>(plan.size());
  dump.meta.seed = seed;
  dump.meta.source = "synth-planted";

  // Shared family directions for the decoder.
  std::vector<std::vector<double>> directions(spec.families.size(), std::vector<double>(spec.d_model));
  for (std::size_t fam = 0; fam < directions.size(); ++fam) {
    CounterRng rng(seed, kFamilyStream | fam);
    double norm = 0.0;
    for (auto& x : directions[fam]) {
      x = gaussian(rng);
      norm += x * x;
    }
    for (auto& x : directions[fam]) x /= std::sqrt(norm);
  }
  DecoderMatrix decoder;
  decoder.rows = plan.size();
  decoder.cols = spec.d_model;
  decoder.values.assign(decoder.rows * decoder.cols, 0.0f);

  const auto background_target = static_cast<std::size_t>(std::ceil(spec.background_fraction * double(total)));
  const auto n_features = static_cast<std::int64_t>(plan.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t fi = 0; fi < n_features; ++fi) {
    const auto& fp = plan[fi];
    const auto& motif = spec.families[fp.family];
    const auto& pool = pools[fp.family];
    const std::size_t P = pool.size();
    CounterRng rng(seed, kFeatureStream | static_cast<std::uint64_t>(fi));
    const std::size_t phase = rng.below(P);

    std::vector<Activation> acts;
    std::unordered_set<std::uint32_t> event_positions;
    const auto n_noise = static_cast<std::size_t>(std::lround(motif.window_noise * double(doc_len)));
    std::vector<TokenId> window(doc_len);
    std::vector<TokenId> order(pool.begin(), pool.end());
    for (std::uint32_t e = 0; e < fp.events; ++e) {
      const std::size_t base = fp.offset + std::size_t{e} * doc_len;
      // Every window holds exactly n_noise distractors; the remaining slots
      // are split as evenly as the topology allows. Cliques cycle through a
      // fresh permutation of the pool, chains split between one adjacent
      // (cyclic) pool pair chosen round-robin, stars between the hub and one
      // round-robin spoke.
      const std::size_t m = doc_len - n_noise;
      const std::size_t a = (e + phase) % P;
      switch (motif.topology) {
        case Topology::Clique:
          shuffle(order, rng);
          for (std::size_t s = 0; s < m; ++s) window[s] = order[s % P];
          break;
        case Topology::Chain:
          for (std::size_t s = 0; s < m; ++s) window[s] = pool[s % 2 == 0 ? a : (a + 1) % P];
          break;
        case Topology::Star:
          for (std::size_t s = 0; s < m; ++s) window[s] = s % 2 == 0 ? pool[0] : pool[1 + (e + phase) % (P - 1)];
          break;
      }
      for (std::size_t s = m; s < doc_len; ++s) window[s] = distractors[rng.below(distractors.size())];
      shuffle(window, rng);
      std::copy(window.begin(), window.end(), dump.corpus.tokens.begin() + static_cast<std::ptrdiff_t>(base));
      const auto t = static_cast<std::uint32_t>(base + spec.window_radius);
      event_positions.insert(t);
      acts.push_back({t, static_cast<float>(1.0 + rng.uniform())});
    }

    // A constant floor of sub-threshold activations, at least one more than the
    // events, pins the median to the floor value so exactly the planted events
    // clear the strict threshold.
    const std::size_t background = std::max<std::size_t>(
        fp.events + 1, background_target > fp.events ? background_target - fp.events : 0);
    std::unordered_set<std::uint32_t> used = event_positions;
    while (acts.size() < fp.events + background && used.size() < total) {
      const auto pos = static_cast<std::uint32_t>(rng.below(total));
      if (!used.insert(pos).second) continue;
      acts.push_back({pos, kBackgroundValue});
    }
    std::sort(acts.begin(), acts.end(), [](const Activation& x, const Activation& y) { return x.position < y.position; });
    dump.activations[fi] = std::move(acts);

    const double scale = spec.decoder_noise / std::sqrt(static_cast<double>(spec.d_model));
    for (std::size_t c = 0; c < spec.d_model; ++c) {
      decoder.values[fi * spec.d_model + c] = static_cast<float>(directions[fp.family][c] + scale * gaussian(rng));
    }
  }
  dump.decoder = std::move(decoder);

  out.truth.family.reserve(plan.size());
  for (const auto& fp : plan) {
    out.truth.family.push_back(fp.family);
    out.truth.expected_label.push_back(feature_label(spec.families[fp.family].pool));
  }
  return out;
}

}  // namespace featgraph::synth
