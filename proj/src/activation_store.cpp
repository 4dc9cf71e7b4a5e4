#include "featgraph/activation_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"

namespace featgraph {

namespace {

constexpr std::string_view kMagic = "SAEDUMP1";

std::string at(std::size_t index) { return "[" + std::to_string(index) + "]"; }

void check_vocab_and_corpus(const TokenVocab& vocab, const CorpusTokens& corpus) {
  const auto v = vocab.size();
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i) {
    if (corpus.tokens[i] >= v) {
      throw Error(Errc::VocabGap, "corpus token" + at(i) + " = " + std::to_string(corpus.tokens[i]) +
                                      " has no vocabulary entry (V = " + std::to_string(v) + ")");
    }
  }
  const auto& starts = corpus.doc_starts;
  if (corpus.tokens.empty()) {
    if (!starts.empty()) throw Error(Errc::MalformedDump, "corpus: document starts on an empty corpus");
    return;
  }
  if (starts.empty() || starts.front() != 0) {
    throw Error(Errc::MalformedDump, "corpus: first document must start at position 0");
  }
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (starts[i] <= starts[i - 1]) {
      throw Error(Errc::MalformedDump, "corpus: document starts not strictly increasing at" + at(i));
    }
  }
  if (starts.back() >= corpus.tokens.size()) {
    throw Error(Errc::MalformedDump, "corpus: document start beyond the token stream");
  }
}

void check_feature(FeatureId id, const std::vector<Activation>& acts, std::size_t n_positions) {
  for (std::size_t i = 0; i < acts.size(); ++i) {
    const auto& a = acts[i];
    if (!(a.value > 0.0f) || !std::isfinite(a.value)) {
      throw Error(Errc::MalformedDump,
                  "activations: feature " + std::to_string(id) + " value" + at(i) + " is not strictly positive");
    }
    if (a.position >= n_positions) {
      throw Error(Errc::MalformedDump,
                  "activations: feature " + std::to_string(id) + " position" + at(i) + " outside the corpus");
    }
    if (i > 0 && acts[i - 1].position >= a.position) {
      throw Error(Errc::UnsortedActivations,
                  "activations: feature " + std::to_string(id) + " positions not strictly increasing at" + at(i));
    }
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> CorpusTokens::document_span(std::size_t position) const {
  auto it = std::upper_bound(doc_starts.begin(), doc_starts.end(), static_cast<std::uint32_t>(position));
  const std::size_t begin = it == doc_starts.begin() ? 0 : *std::prev(it);
  const std::size_t end = it == doc_starts.end() ? tokens.size() : *it;
  return {begin, end};
}

nlohmann::json dump_meta_json(const ActivationDump& dump) {
  return {
      {"version", dump.meta.version},
      {"d_model", dump.meta.d_model},
      {"d_sae", dump.meta.d_sae},
      {"n_features", dump.n_features()},
      {"n_positions", dump.corpus.size()},
      {"n_docs", dump.corpus.doc_starts.size()},
      {"seed", dump.meta.seed},
      {"source", dump.meta.source},
  };
}

void validate_dump(const ActivationDump& dump) {
  check_vocab_and_corpus(dump.vocab, dump.corpus);
  for (std::size_t f = 0; f < dump.activations.size(); ++f) {
    check_feature(static_cast<FeatureId>(f), dump.activations[f], dump.corpus.size());
  }
  if (dump.decoder) {
    const auto& d = *dump.decoder;
    if (d.rows != dump.n_features() || d.values.size() != d.rows * d.cols) {
      throw Error(Errc::DecoderShapeMismatch, "decoder: " + std::to_string(d.rows) + " rows for " +
                                                  std::to_string(dump.n_features()) + " features");
    }
    if (d.cols != dump.meta.d_model) {
      throw Error(Errc::DecoderShapeMismatch, "decoder: row width differs from d_model");
    }
  }
}

std::vector<std::uint8_t> serialize_dump(const ActivationDump& dump) {
  validate_dump(dump);
  io::ByteWriter w;
  w.put_bytes(kMagic);
  w.put_blob(dump_meta_json(dump).dump());

  w.put<std::uint32_t>(static_cast<std::uint32_t>(dump.vocab.size()));
  for (const auto& s : dump.vocab.tokens) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    w.put_bytes(s);
  }

  for (TokenId t : dump.corpus.tokens) w.put<std::uint32_t>(t);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dump.corpus.doc_starts.size()));
  for (auto s : dump.corpus.doc_starts) w.put<std::uint32_t>(s);

  for (std::size_t f = 0; f < dump.n_features(); ++f) {
    const auto& acts = dump.activations[f];
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(acts.size()));
    for (const auto& a : acts) {
      w.put<std::uint32_t>(a.position);
      w.put<float>(a.value);
    }
  }

  w.put<std::uint8_t>(dump.decoder ? 1 : 0);
  if (dump.decoder) {
    for (float v : dump.decoder->values) w.put<float>(v);
  }
  return w.bytes();
}

ActivationDump parse_dump(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, Errc::MalformedDump);
  if (r.get_bytes(kMagic.size(), "magic") != kMagic) r.fail("magic", "expected \"SAEDUMP1\"");

  nlohmann::json meta;
  std::uint64_t n_features = 0, n_positions = 0, n_docs = 0;
  ActivationDump dump;
  {
    const auto meta_offset = r.offset();
    const auto text = r.get_blob("meta");
    try {
      meta = nlohmann::json::parse(text);
      dump.meta.version = meta.at("version").get<std::uint32_t>();
      dump.meta.d_model = meta.at("d_model").get<std::uint32_t>();
      dump.meta.d_sae = meta.at("d_sae").get<std::uint32_t>();
      dump.meta.seed = meta.at("seed").get<std::uint64_t>();
      dump.meta.source = meta.at("source").get<std::string>();
      n_features = meta.at("n_features").get<std::uint64_t>();
      n_positions = meta.at("n_positions").get<std::uint64_t>();
      n_docs = meta.at("n_docs").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedDump, "meta at byte " + std::to_string(meta_offset) + ": " + e.what());
    }
    if (dump.meta.version != 1) r.fail("meta", "unsupported version " + std::to_string(dump.meta.version));
  }

  const auto vocab_offset = r.offset();
  const auto v = r.get<std::uint32_t>("vocab");
  dump.vocab.tokens.reserve(std::min<std::size_t>(v, r.remaining() / 4));
  for (std::uint32_t i = 0; i < v; ++i) {
    const auto len = r.get<std::uint32_t>("vocab");
    dump.vocab.tokens.push_back(r.get_bytes(len, "vocab"));
  }

  const auto corpus_offset = r.offset();
  if (n_positions * 4 > r.remaining()) r.fail("corpus", "token stream truncated");
  dump.corpus.tokens.resize(n_positions);
  for (auto& t : dump.corpus.tokens) t = r.get<std::uint32_t>("corpus");
  const auto docs = r.get<std::uint32_t>("corpus");
  if (docs != n_docs) r.fail("corpus", "document count disagrees with meta.n_docs");
  if (std::uint64_t{docs} * 4 > r.remaining()) r.fail("corpus", "document starts truncated");
  dump.corpus.doc_starts.resize(docs);
  for (auto& s : dump.corpus.doc_starts) s = r.get<std::uint32_t>("corpus");
  try {
    check_vocab_and_corpus(dump.vocab, dump.corpus);
  } catch (const Error& e) {
    const auto offset = e.code() == Errc::VocabGap ? vocab_offset : corpus_offset;
    throw Error(e.code(), e.detail() + " (section at byte " + std::to_string(offset) + ")");
  }

  if (n_features > r.remaining() / 8) r.fail("activations", "feature count exceeds file size");
  dump.activations.resize(n_features);
  std::vector<bool> seen(n_features, false);
  for (std::uint64_t k = 0; k < n_features; ++k) {
    const auto record_offset = r.offset();
    const auto id = r.get<std::uint32_t>("activations");
    if (id >= n_features || seen[id]) {
      r.fail("activations", "feature record id " + std::to_string(id) + " out of range or repeated");
    }
    seen[id] = true;
    const auto count = r.get<std::uint32_t>("activations");
    if (std::uint64_t{count} * 8 > r.remaining()) r.fail("activations", "feature record truncated");
    auto& acts = dump.activations[id];
    acts.resize(count);
    for (auto& a : acts) {
      a.position = r.get<std::uint32_t>("activations");
      a.value = r.get<float>("activations");
    }
    try {
      check_feature(id, acts, dump.corpus.size());
    } catch (const Error& e) {
      throw Error(e.code(), e.detail() + " (record at byte " + std::to_string(record_offset) + ")");
    }
  }

  const auto present = r.get<std::uint8_t>("decoder");
  if (present > 1) r.fail("decoder", "present flag must be 0 or 1");
  if (present == 1) {
    const auto decoder_offset = r.offset();
    const std::size_t row_bytes = std::size_t{dump.meta.d_model} * 4;
    if (row_bytes == 0 || r.remaining() % row_bytes != 0 || r.remaining() / row_bytes != n_features) {
      throw Error(Errc::DecoderShapeMismatch,
                  "decoder at byte " + std::to_string(decoder_offset) + ": " + std::to_string(r.remaining()) +
                      " bytes is not " + std::to_string(n_features) + " rows of d_model = " +
                      std::to_string(dump.meta.d_model) + " floats");
    }
    DecoderMatrix d;
    d.rows = n_features;
    d.cols = dump.meta.d_model;
    d.values.resize(d.rows * d.cols);
    for (auto& x : d.values) x = r.get<float>("decoder");
    dump.decoder = std::move(d);
  }
  if (r.remaining() != 0) r.fail("trailer", std::to_string(r.remaining()) + " unexpected trailing bytes");
  return dump;
}

ActivationDump load_dump(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_dump(bytes);
}

void write_dump(const std::filesystem::path& path, const ActivationDump& dump) {
  io::write_file(path, serialize_dump(dump));
  io::write_text(path.string() + ".json", dump_meta_json(dump).dump(2) + "\n");
}

double nonzero_fraction(const ActivationDump& dump, FeatureId feature) {
  if (feature >= dump.n_features()) {
    throw Error(Errc::UnknownFeature, "feature " + std::to_string(feature) + " not in dump");
  }
  if (dump.corpus.size() == 0) return 0.0;
  return static_cast<double>(dump.activations[feature].size()) / static_cast<double>(dump.corpus.size());
}

FeatureSelection select_features(const ActivationDump& dump, double alpha_min, double alpha_max,
                                 std::size_t target_n) {
  if (!(0.0 <= alpha_min && alpha_min < alpha_max && alpha_max <= 1.0) || target_n < 1) {
    throw Error(Errc::InvalidArgument, "selection bounds must satisfy 0 <= alpha_min < alpha_max <= 1, target_n >= 1");
  }
  std::vector<std::pair<double, FeatureId>> eligible;
  for (FeatureId f = 0; f < dump.n_features(); ++f) {
    const double frac = nonzero_fraction(dump, f);
    if (frac >= alpha_min && frac <= alpha_max) eligible.emplace_back(frac, f);
  }
  if (eligible.empty()) {
    throw Error(Errc::NoEligibleFeatures, "no feature has nonzero fraction in [" + std::to_string(alpha_min) +
                                              ", " + std::to_string(alpha_max) + "]");
  }
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  FeatureSelection sel;
  sel.alpha_min = alpha_min;
  sel.alpha_max = alpha_max;
  sel.target_n = target_n;
  sel.n_eligible = eligible.size();
  const auto n = std::min(target_n, eligible.size());
  for (std::size_t i = 0; i < n; ++i) {
    sel.selected.push_back(eligible[i].second);
    sel.nonzero_fraction.push_back(eligible[i].first);
  }
  return sel;
}

double activation_threshold(std::span<const double> values, double p) {
  if (values.empty()) throw Error(Errc::EmptyValues, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(Errc::InvalidArgument, "percentile must be in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace featgraph
