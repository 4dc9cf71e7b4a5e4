#pragma once

// Activation dumps: the token stream a model was run over, its vocabulary, and
// the sparse per-feature activations recorded at each position.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace featgraph {

using TokenId = std::uint32_t;
using FeatureId = std::uint32_t;

/// Token strings indexed by id; ids are implicitly 0..size()-1.
struct TokenVocab {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  const std::string& operator[](TokenId id) const { return tokens[id]; }
  bool operator==(const TokenVocab&) const = default;
};

struct CorpusTokens {
  std::vector<TokenId> tokens;
  /// Start position of every document; first element 0, strictly increasing.
  std::vector<std::uint32_t> doc_starts;

  std::size_t size() const { return tokens.size(); }
  /// Half-open [begin, end) of the document containing `position`.
  std::pair<std::size_t, std::size_t> document_span(std::size_t position) const;
  bool operator==(const CorpusTokens&) const = default;
};

struct Activation {
  std::uint32_t position = 0;
  float value = 0.0f;
  bool operator==(const Activation&) const = default;
};

struct DecoderMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;  // row-major

  std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  bool operator==(const DecoderMatrix&) const = default;
};

struct DumpMeta {
  std::uint32_t version = 1;
  std::uint32_t d_model = 0;
  std::uint32_t d_sae = 0;
  std::uint64_t seed = 0;
  std::string source;
  bool operator==(const DumpMeta&) const = default;
};

struct ActivationDump {
  TokenVocab vocab;
  CorpusTokens corpus;
  /// One sorted activation list per feature id.
  std::vector<std::vector<Activation>> activations;
  std::optional<DecoderMatrix> decoder;
  DumpMeta meta;

  std::size_t n_features() const { return activations.size(); }
  bool operator==(const ActivationDump&) const = default;
};

struct FeatureSelection {
  std::vector<FeatureId> selected;
  std::vector<double> nonzero_fraction;  // parallel to `selected`
  double alpha_min = 0.0;
  double alpha_max = 1.0;
  std::size_t target_n = 0;
  std::size_t n_eligible = 0;
};

/// Throws Error(MalformedDump | VocabGap | UnsortedActivations |
/// DecoderShapeMismatch) naming the section and byte offset.
ActivationDump parse_dump(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_dump(const ActivationDump& dump);

ActivationDump load_dump(const std::filesystem::path& path);
/// Writes the binary dump plus a `<path>.json` sidecar holding the meta block.
void write_dump(const std::filesystem::path& path, const ActivationDump& dump);

nlohmann::json dump_meta_json(const ActivationDump& dump);

/// Checks every invariant of an in-memory dump; throws like parse_dump.
void validate_dump(const ActivationDump& dump);

double nonzero_fraction(const ActivationDump& dump, FeatureId feature);

FeatureSelection select_features(const ActivationDump& dump, double alpha_min, double alpha_max,
                                 std::size_t target_n);

/// Linear-interpolation percentile: rank p/100 * (n-1) over the sorted values.
double activation_threshold(std::span<const double> values, double p);

}  // namespace featgraph
