#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "featgraph/activation_store.hpp"
#include "featgraph/binary_io.hpp"
#include "featgraph/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace featgraph;

namespace {

ActivationDump minimal_dump() {
  ActivationDump d;
  d.vocab.tokens = {"a", " b", "\n"};
  d.corpus.tokens = {0, 1, 2, 0, 1};
  d.corpus.doc_starts = {0};
  d.activations = {{{1, 0.5f}, {3, 2.0f}}};
  d.meta.d_model = 2;
  d.meta.d_sae = 1;
  d.meta.source = "hand";
  return d;
}

// Same byte layout as serialize_dump, but with feature records in `order`.
std::vector<std::uint8_t> bytes_with_record_order(const ActivationDump& d, const std::vector<std::size_t>& order) {
  io::ByteWriter w;
  w.put_bytes("SAEDUMP1");
  w.put_blob(dump_meta_json(d).dump());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.vocab.size()));
  for (const auto& s : d.vocab.tokens) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    w.put_bytes(s);
  }
  for (auto t : d.corpus.tokens) w.put<std::uint32_t>(t);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.corpus.doc_starts.size()));
  for (auto s : d.corpus.doc_starts) w.put<std::uint32_t>(s);
  for (auto f : order) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(d.activations[f].size()));
    for (const auto& a : d.activations[f]) {
      w.put<std::uint32_t>(a.position);
      w.put<float>(a.value);
    }
  }
  w.put<std::uint8_t>(0);
  return w.bytes();
}

Errc parse_error(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_dump(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("parse_dump accepted corrupt input");
  return Errc::Io;
}

}  // namespace

TEST_SUITE("activation_store") {
  TEST_CASE("minimal dump loads with one feature") {
    const auto dir = fgtest::temp_dir("minimal");
    write_dump(dir / "m.bin", minimal_dump());
    const auto back = load_dump(dir / "m.bin");
    CHECK(back.n_features() == 1);
    CHECK(back == minimal_dump());
    CHECK(std::filesystem::exists(dir / "m.bin.json"));
  }

  TEST_CASE("decoder rows must match the feature count") {
    auto d = minimal_dump();
    d.decoder = DecoderMatrix{1, 2, {1.0f, 0.0f}};
    auto bytes = serialize_dump(d);
    bytes.insert(bytes.end(), 8, 0);  // one extra row
    CHECK(parse_error(bytes) == Errc::DecoderShapeMismatch);
    bytes.resize(bytes.size() - 12);  // 0.5 rows
    CHECK(parse_error(bytes) == Errc::DecoderShapeMismatch);

    d.decoder->rows = 2;
    d.decoder->values = {1, 0, 0, 1};
    CHECK_THROWS_AS(validate_dump(d), Error);
  }

  TEST_CASE("corrupt inputs raise typed errors") {
    const auto good = serialize_dump(minimal_dump());
    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(parse_error(bad_magic) == Errc::MalformedDump);

    auto truncated = good;
    truncated.resize(good.size() / 2);
    CHECK(parse_error(truncated) == Errc::MalformedDump);

    auto gap = minimal_dump();
    gap.corpus.tokens[2] = 7;
    CHECK_THROWS_WITH_AS(serialize_dump(gap), doctest::Contains("vocabulary"), Error);

    auto unsorted = minimal_dump();
    std::swap(unsorted.activations[0][0], unsorted.activations[0][1]);
    try {
      validate_dump(unsorted);
      FAIL("unsorted activations accepted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnsortedActivations);
    }

    auto zero = minimal_dump();
    zero.activations[0][0].value = 0.0f;
    CHECK_THROWS_AS(validate_dump(zero), Error);
  }

  TEST_CASE("errors name the byte offset") {
    auto bytes = serialize_dump(minimal_dump());
    bytes.push_back(0);
    CHECK_THROWS_WITH(parse_dump(bytes), doctest::Contains("byte"));
  }

  TEST_CASE("random dumps round-trip") {
    std::mt19937_64 rng(11);
    const auto dir = fgtest::temp_dir("roundtrip");
    for (int i = 0; i < 50; ++i) {
      const auto d = fgtest::random_dump(rng);
      write_dump(dir / "d.bin", d);
      REQUIRE(load_dump(dir / "d.bin") == d);
    }
  }

  TEST_CASE("record order on disk does not change the dump or the selection") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
      fgtest::DumpShape shape;
      shape.decoder = false;
      shape.max_features = 8;
      const auto d = fgtest::random_dump(rng, shape);
      if (d.n_features() == 0) continue;
      std::vector<std::size_t> order(d.n_features());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const auto back = parse_dump(bytes_with_record_order(d, order));
      CHECK(back == d);
      try {
        const auto a = select_features(d, 0.0, 1.0, 3);
        const auto b = select_features(back, 0.0, 1.0, 3);
        CHECK(a.selected == b.selected);
      } catch (const Error& e) {
        CHECK(e.code() == Errc::NoEligibleFeatures);
      }
    }
  }

  TEST_CASE("nonzero fraction") {
    ActivationDump d;
    d.vocab.tokens = {"x"};
    d.corpus.tokens.assign(100, 0);
    d.corpus.doc_starts = {0};
    d.activations.resize(2);
    for (std::uint32_t p = 0; p < 100; ++p) d.activations[1].push_back({p, 1.0f});
    CHECK(nonzero_fraction(d, 0) == 0.0);
    CHECK(nonzero_fraction(d, 1) == 1.0);
    CHECK_THROWS_AS(nonzero_fraction(d, 2), Error);

    d.corpus.tokens.assign(78749, 0);
    d.activations[0] = {{10, 1.f}, {20, 1.f}, {30, 1.f}, {40, 1.f}, {50, 1.f}, {60, 1.f}, {70, 1.f}};
    CHECK(nonzero_fraction(d, 0) == doctest::Approx(7.0 / 78749).epsilon(1e-12));
    CHECK(nonzero_fraction(d, 0) == doctest::Approx(8.889e-5).epsilon(1e-3));
  }

  TEST_CASE("select_features keeps the largest eligible fractions") {
    ActivationDump d;
    d.vocab.tokens = {"x"};
    d.corpus.tokens.assign(1000, 0);
    d.corpus.doc_starts = {0};
    const std::vector<std::size_t> counts{0, 1, 10, 50, 200, 500, 900, 985, 990, 50};
    for (auto c : counts) {
      std::vector<Activation> acts;
      for (std::uint32_t p = 0; p < c; ++p) acts.push_back({p, 1.0f});
      d.activations.push_back(acts);
    }
    const auto sel = select_features(d, 0.001, 0.98, 5);
    // eligible: 1..6 and 9; the two 50s tie and break on feature id
    CHECK(sel.selected == std::vector<FeatureId>{6, 5, 4, 3, 9});
    CHECK(sel.n_eligible == 7);
    for (std::size_t i = 1; i < sel.nonzero_fraction.size(); ++i) {
      CHECK(sel.nonzero_fraction[i - 1] >= sel.nonzero_fraction[i]);
    }

    CHECK(select_features(d, 0.001, 0.98, 100).selected.size() == 7);
    CHECK_THROWS_AS(select_features(d, 0.995, 1.0, 5), Error);
    try {
      select_features(d, 0.995, 1.0, 5);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NoEligibleFeatures);
    }
    CHECK_THROWS_AS(select_features(d, 0.5, 0.4, 5), Error);
  }

  TEST_CASE("select_features matches a filter-and-sort oracle") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
      fgtest::DumpShape shape;
      shape.max_features = 20;
      shape.density = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const auto d = fgtest::random_dump(rng, shape);
      const double lo = 0.05, hi = 0.9;
      const std::size_t target = 1 + rng() % 10;
      std::vector<std::pair<double, FeatureId>> ref;
      for (FeatureId f = 0; f < d.n_features(); ++f) {
        const double frac = static_cast<double>(d.activations[f].size()) / static_cast<double>(d.corpus.size());
        if (frac >= lo && frac <= hi) ref.push_back({-frac, f});
      }
      std::sort(ref.begin(), ref.end());
      if (ref.empty()) {
        CHECK_THROWS_AS(select_features(d, lo, hi, target), Error);
        continue;
      }
      const auto sel = select_features(d, lo, hi, target);
      REQUIRE(sel.selected.size() == std::min(target, ref.size()));
      for (std::size_t k = 0; k < sel.selected.size(); ++k) CHECK(sel.selected[k] == ref[k].second);
    }
  }

  TEST_CASE("activation_threshold") {
    const std::vector<double> nine{1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(activation_threshold(nine, 50) == 5.0);
    const std::vector<double> four{1, 2, 3, 4};
    CHECK(activation_threshold(four, 50) == 2.5);
    const std::vector<double> one{7.0};
    for (double p : {0.0, 37.0, 50.0, 100.0}) CHECK(activation_threshold(one, p) == 7.0);
    CHECK_THROWS_AS(activation_threshold(std::vector<double>{}, 50), Error);
    CHECK_THROWS_AS(activation_threshold(four, 101), Error);
  }

  TEST_CASE("activation_threshold is monotone in p and bounded") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.001, 50.0);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> v(1 + rng() % 40);
      for (auto& x : v) x = u(rng);
      const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      double prev = -1.0;
      for (double p = 0; p <= 100; p += 2.5) {
        const double t = activation_threshold(v, p);
        CHECK(t >= *mn);
        CHECK(t <= *mx);
        CHECK(t >= prev);
        CHECK(t == oracle::percentile(v, p));
        prev = t;
      }
    }
  }
}
