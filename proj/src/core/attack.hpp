#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/de.hpp"
#include "core/embedding.hpp"
#include "core/ranked_list.hpp"
#include "core/rankers.hpp"

namespace rp {

/// A0: random single-token baseline. A1: score only. A2: score plus distance
/// of every replaced token. A3: score plus distance of replaced query tokens.
enum class Variant { A0, A1, A2, A3 };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

struct AttackConfig {
  Variant variant = Variant::A1;
  std::size_t sparsity = 1;  // c
  double lambda = 1.0;
  std::optional<double> delta_bound;  // per-coordinate clip radius; see default_delta_bound
  bool hard_query_lock = false;

  void validate(std::size_t doc_length) const;
};

/// 2 * mean row norm / sqrt(D).
double default_delta_bound(const EmbeddingStore& store);

struct Replacement {
  std::size_t position = 0;
  TokenId old_token = 0;
  TokenId new_token = 0;

  bool operator==(const Replacement&) const = default;
};

struct Projection {
  TokenDoc doc;
  std::vector<Replacement> replaced;  // sorted by position
  std::size_t zero_vector_genes = 0;  // embed(d_i) + v was zero; token kept
  std::size_t dropped_genes = 0;      // no unlocked position left to repair into
};

/// 1 at positions whose token also occurs in the query.
std::vector<char> query_positions(const Query& query, const TokenDoc& doc);

/// Maps each gene (i, v) to nearest_token(embed(d_i) + v, excluding d_i).
/// Later genes on the same position win. Genes on `locked` positions are moved
/// to the closest unlocked position (lower index on ties) or dropped.
Projection project(const PerturbationGenome& genome, const TokenDoc& doc, const EmbeddingStore& store,
                   std::span<const char> locked = {});

/// Distance term of the objective for the given replacements (0 for A1).
double replacement_penalty(Variant variant, const Query& query, std::span<const Replacement> replaced,
                           const EmbeddingStore& store, double lambda);

double fitness(Variant variant, const Query& query, const TokenDoc& doc, const PerturbationGenome& genome,
               const Ranker& ranker, const EmbeddingStore& store, double lambda, bool hard_query_lock = false);

struct AttackOutcome {
  std::string query_id;
  std::string doc_id;
  Variant variant = Variant::A1;
  std::size_t sparsity = 1;
  std::vector<TokenId> original_tokens;
  std::vector<TokenId> perturbed_tokens;
  std::vector<Replacement> replaced;
  std::size_t rank_before = 0;
  std::size_t rank_after = 0;
  Score score_before;
  Score score_after;
  double best_fitness = 0.0;
  std::vector<double> fitness_trace;
  std::size_t evaluations = 0;  // ranker calls made for perturbed documents

  bool operator==(const AttackOutcome&) const = default;
};

/// Runs DE with the configured objective against `doc`, which must appear in
/// `before` (the ranking of its candidate list).
AttackOutcome attack(const Query& query, const TokenDoc& doc, const RankedList& before, const Ranker& ranker,
                     const EmbeddingStore& store, const AttackConfig& config, const DEConfig& de);

/// Same, ranking `context` first.
AttackOutcome attack(const Query& query, const TokenDoc& doc, std::span<const TokenDoc> context,
                     const Ranker& ranker, const EmbeddingStore& store, const AttackConfig& config,
                     const DEConfig& de);

/// Replaces one uniformly chosen token by its nearest vocabulary neighbour.
AttackOutcome baseline_a0(const Query& query, const TokenDoc& doc, const RankedList& before,
                          const Ranker& ranker, const EmbeddingStore& store, std::uint64_t seed,
                          bool hard_query_lock = false);

AttackOutcome baseline_a0(const Query& query, const TokenDoc& doc, std::span<const TokenDoc> context,
                          const Ranker& ranker, const EmbeddingStore& store, std::uint64_t seed,
                          bool hard_query_lock = false);

}  // namespace rp
