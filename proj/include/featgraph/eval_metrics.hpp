#pragma once

// Token-type labels, cluster purity, partition agreement (ARI / NMI) and the
// per-cluster code-token ratio.

#include <array>
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
#include "featgraph/graph_builder.hpp"

namespace featgraph {

/// Declaration order is the tie-break priority: earlier wins.
enum class TokenType : std::uint8_t { Symbolic = 0, Alphabetic = 1, Numeric = 2, Mixed = 3 };

inline constexpr std::array<TokenType, 4> kTokenTypes{TokenType::Symbolic, TokenType::Alphabetic,
                                                      TokenType::Numeric, TokenType::Mixed};

std::string_view token_type_name(TokenType t);
/// Inverse of token_type_name. Throws Error(InvalidArgument).
TokenType token_type_from_name(std::string_view name);

TokenType token_label(std::string_view s);
/// Plurality of token_label over the list. Throws Error(EmptyTokenList).
TokenType feature_label(std::span<const std::string> top_tokens);
/// feature_label over the graph's node tokens.
TokenType feature_label(const FeatureGraph& graph, const TokenVocab& vocab);

struct ClusterPurity {
  std::uint32_t cluster = 0;
  std::size_t size = 0;
  TokenType dominant = TokenType::Mixed;
  std::size_t matching = 0;
  double purity = 0.0;
};

struct PurityReport {
  double overall = 0.0;
  std::vector<ClusterPurity> per_cluster;  // ascending cluster id, non-empty clusters only
  /// Mean per-cluster purity over clusters whose dominant label is the key.
  std::map<TokenType, double> per_category;

  std::optional<double> category(TokenType t) const;
};

PurityReport purity(std::span<const std::uint32_t> assignment, std::span<const TokenType> labels);

double ari(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
/// Mutual information over the arithmetic mean of the two entropies.
double nmi(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

struct CodeSets {
  std::vector<std::string> keywords;
  std::vector<std::string> operators;
  std::vector<std::string> brackets;

  static CodeSets defaults();
  static CodeSets from_json(const nlohmann::json& j);
  static CodeSets load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct ClusterCodeTokens {
  std::uint32_t cluster = 0;
  std::size_t size = 0;  // features
  std::size_t total_tokens = 0;
  std::size_t keywords = 0;
  std::size_t operators = 0;
  std::size_t brackets = 0;
  double code_ratio = 0.0;
};

struct CodeTokenReport {
  std::vector<ClusterCodeTokens> clusters;  // ascending cluster id
};

/// `graphs[i]` is the graph of the feature at clustering index i.
CodeTokenReport code_token_ratio(std::span<const std::uint32_t> assignment, std::span<const FeatureGraph> graphs,
                                 const TokenVocab& vocab, const CodeSets& codesets);

nlohmann::json to_json(const PurityReport& p);
nlohmann::json to_json(const CodeTokenReport& r);

}  // namespace featgraph
