#include "featgraph/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "featgraph/error.hpp"

namespace featgraph {

namespace {

constexpr std::string_view kPunctuation = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_ascii_letter(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_symbolic(unsigned char c) {
  return is_digit(c) || c == ' ' || c == '\n' || c == '\t' || kPunctuation.find(static_cast<char>(c)) != std::string_view::npos;
}

TokenType plurality(const std::array<std::size_t, 4>& counts) {
  std::size_t best = 0;
  for (std::size_t t = 1; t < counts.size(); ++t) {
    if (counts[t] > counts[best]) best = t;
  }
  return static_cast<TokenType>(best);
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

// Dense relabelling of both partitions and their contingency counts.
struct Contingency {
  std::vector<double> a_sums, b_sums;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> cells;
  double n = 0.0;

  Contingency(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.size() != b.size()) {
      throw Error(Errc::SizeMismatch, "partitions of length " + std::to_string(a.size()) + " and " +
                                          std::to_string(b.size()));
    }
    std::unordered_map<std::uint32_t, std::uint32_t> ida, idb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto x = ida.try_emplace(a[i], static_cast<std::uint32_t>(ida.size())).first->second;
      const auto y = idb.try_emplace(b[i], static_cast<std::uint32_t>(idb.size())).first->second;
      if (x >= a_sums.size()) a_sums.push_back(0.0);
      if (y >= b_sums.size()) b_sums.push_back(0.0);
      a_sums[x] += 1.0;
      b_sums[y] += 1.0;
      cells[{x, y}] += 1.0;
    }
    n = static_cast<double>(a.size());
  }
};

}  // namespace

std::string_view token_type_name(TokenType t) {
  switch (t) {
    case TokenType::Symbolic: return "symbolic";
    case TokenType::Alphabetic: return "alphabetic";
    case TokenType::Numeric: return "numeric";
    case TokenType::Mixed: return "mixed";
  }
  return "mixed";
}

TokenType token_type_from_name(std::string_view name) {
  for (auto t : kTokenTypes) {
    if (token_type_name(t) == name) return t;
  }
  throw Error(Errc::InvalidArgument, "unknown token type '" + std::string(name) + "'");
}

TokenType token_label(std::string_view s) {
  // Bytes >= 0x80 belong to no class, so byte iteration matches code-point counting.
  std::size_t cs = 0, ca = 0, cn = 0;
  for (unsigned char c : s) {
    cs += is_symbolic(c);
    ca += is_ascii_letter(c);
    cn += is_digit(c);
  }
  const auto total = static_cast<double>(cs + ca + cn);
  if (total == 0.0) return TokenType::Mixed;
  if (static_cast<double>(cs) / total > 0.5) return TokenType::Symbolic;
  if (static_cast<double>(ca) / total > 0.5) return TokenType::Alphabetic;
  if (static_cast<double>(cn) / total > 0.3) return TokenType::Numeric;
  return TokenType::Mixed;
}

TokenType feature_label(std::span<const std::string> top_tokens) {
  if (top_tokens.empty()) throw Error(Errc::EmptyTokenList, "feature has no top tokens");
  std::array<std::size_t, 4> counts{};
  for (const auto& t : top_tokens) ++counts[static_cast<std::size_t>(token_label(t))];
  return plurality(counts);
}

TokenType feature_label(const FeatureGraph& graph, const TokenVocab& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(graph.nodes.size());
  for (const auto& node : graph.nodes) tokens.push_back(vocab[node.token]);
  return feature_label(tokens);
}

std::optional<double> PurityReport::category(TokenType t) const {
  auto it = per_category.find(t);
  if (it == per_category.end()) return std::nullopt;
  return it->second;
}

PurityReport purity(std::span<const std::uint32_t> assignment, std::span<const TokenType> labels) {
  if (assignment.size() != labels.size()) {
    throw Error(Errc::SizeMismatch, "assignment has " + std::to_string(assignment.size()) + " entries, labels " +
                                        std::to_string(labels.size()));
  }
  if (assignment.empty()) throw Error(Errc::SizeMismatch, "purity of an empty clustering");
  std::map<std::uint32_t, std::array<std::size_t, 4>> counts;
  for (std::size_t i = 0; i < assignment.size(); ++i) ++counts[assignment[i]][static_cast<std::size_t>(labels[i])];

  PurityReport r;
  std::size_t matched = 0;
  std::map<TokenType, std::pair<double, std::size_t>> by_category;
  for (const auto& [cluster, c] : counts) {
    ClusterPurity row;
    row.cluster = cluster;
    for (auto x : c) row.size += x;
    row.dominant = plurality(c);
    row.matching = c[static_cast<std::size_t>(row.dominant)];
    row.purity = static_cast<double>(row.matching) / static_cast<double>(row.size);
    matched += row.matching;
    auto& cat = by_category[row.dominant];
    cat.first += row.purity;
    ++cat.second;
    r.per_cluster.push_back(row);
  }
  r.overall = static_cast<double>(matched) / static_cast<double>(assignment.size());
  for (const auto& [t, acc] : by_category) r.per_category[t] = acc.first / static_cast<double>(acc.second);
  return r;
}

double ari(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  const Contingency ct(a, b);
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, v] : ct.cells) index += comb2(v);
  for (double v : ct.a_sums) sum_a += comb2(v);
  for (double v : ct.b_sums) sum_b += comb2(v);
  const double pairs = comb2(ct.n);
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double max_index = (sum_a + sum_b) / 2.0;
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double nmi(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  const Contingency ct(a, b);
  if (ct.n == 0.0) return 1.0;
  auto entropy = [n = ct.n](const std::vector<double>& sums) {
    double h = 0.0;
    for (double v : sums) {
      const double p = v / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double ha = entropy(ct.a_sums), hb = entropy(ct.b_sums);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, v] : ct.cells) {
    mi += v / ct.n * std::log(ct.n * v / (ct.a_sums[key.first] * ct.b_sums[key.second]));
  }
  return std::max(0.0, 2.0 * mi / (ha + hb));
}

CodeSets CodeSets::defaults() {
  CodeSets c;
  c.keywords = {"False", "None",   "True",  "and",    "as",       "assert", "async", "await",    "break",
                "class", "continue", "def", "del",    "elif",     "else",   "except", "finally", "for",
                "from",  "global", "if",    "import", "in",       "is",     "lambda", "nonlocal", "not",
                "or",    "pass",   "raise", "return", "try",      "while",  "with",  "yield"};
  c.operators = {"=",  "+",  "-",  "*",  "/",  "%",  "**", "//", "==", "!=", "<",  ">",  "<=", ">=",
                 "+=", "-=", "*=", "/=", "%=", "&",  "|",  "^",  "~",  "<<", ">>", "->", "@",  "!"};
  c.brackets = {"(", ")", "[", "]", "{", "}", ":", ",", "()", "[]", "{}", "):"};
  return c;
}

CodeSets CodeSets::from_json(const nlohmann::json& j) {
  CodeSets c;
  try {
    c.keywords = j.at("keywords").get<std::vector<std::string>>();
    c.operators = j.at("operators").get<std::vector<std::string>>();
    c.brackets = j.at("brackets").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("codesets: ") + e.what());
  }
  return c;
}

CodeSets CodeSets::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidArgument, std::string("codesets: ") + e.what());
  }
}

nlohmann::json CodeSets::to_json() const {
  return {{"keywords", keywords}, {"operators", operators}, {"brackets", brackets}};
}

CodeTokenReport code_token_ratio(std::span<const std::uint32_t> assignment, std::span<const FeatureGraph> graphs,
                                 const TokenVocab& vocab, const CodeSets& codesets) {
  if (assignment.size() != graphs.size()) throw Error(Errc::SizeMismatch, "assignment and graph list differ");
  const std::set<std::string, std::less<>> kw(codesets.keywords.begin(), codesets.keywords.end());
  const std::set<std::string, std::less<>> op(codesets.operators.begin(), codesets.operators.end());
  const std::set<std::string, std::less<>> br(codesets.brackets.begin(), codesets.brackets.end());

  std::map<std::uint32_t, ClusterCodeTokens> rows;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    auto& row = rows[assignment[i]];
    row.cluster = assignment[i];
    ++row.size;
    for (const auto& node : graphs[i].nodes) {
      std::string_view s = vocab[node.token];
      s.remove_prefix(std::min(s.find_first_not_of(" \t\n\r"), s.size()));
      ++row.total_tokens;
      if (kw.contains(s)) {
        ++row.keywords;
      } else if (op.contains(s)) {
        ++row.operators;
      } else if (br.contains(s)) {
        ++row.brackets;
      }
    }
  }
  CodeTokenReport report;
  for (auto& [_, row] : rows) {
    if (row.total_tokens > 0) {
      row.code_ratio = static_cast<double>(row.keywords + row.operators + row.brackets) /
                       static_cast<double>(row.total_tokens);
    }
    report.clusters.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const PurityReport& p) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : p.per_cluster) {
    clusters.push_back({{"cluster", c.cluster},
                        {"size", c.size},
                        {"dominant", token_type_name(c.dominant)},
                        {"purity", c.purity}});
  }
  nlohmann::json categories = nlohmann::json::object();
  for (auto t : kTokenTypes) {
    const auto v = p.category(t);
    categories[std::string(token_type_name(t))] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  return {{"overall", p.overall}, {"per_cluster", clusters}, {"per_category", categories}};
}

nlohmann::json to_json(const CodeTokenReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : r.clusters) {
    rows.push_back({{"cluster", c.cluster},
                    {"size", c.size},
                    {"code_ratio", c.code_ratio},
                    {"keywords", c.keywords},
                    {"operators", c.operators},
                    {"brackets", c.brackets},
                    {"total_tokens", c.total_tokens}});
  }
  return rows;
}

}  // namespace featgraph
