#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "core/attack.hpp"
#include "core/corpus.hpp"
#include "core/embedding.hpp"
#include "core/ranked_list.hpp"

namespace rp {

/// Fraction of outcomes whose rank worsened by at least k. Every outcome's
/// document must be relevant to its query.
double success_at_k(std::span<const AttackOutcome> outcomes, const QrelSet& qrels, std::size_t k);

/// Non-relevant documents whose position in `after` lies strictly between the
/// attacked document's rank in `before` and its rank in `after`.
std::size_t nrc(const AttackOutcome& outcome, const RankedList& before, const RankedList& after,
                const QrelSet& qrels);

struct Precision {
  double value = 0.0;
  bool truncated = false;  // list shorter than k; value is over the full list
};

Precision precision_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k = 5);

/// (P@k before - mean P@k after) / P@k before, where each attacked document's
/// new score is substituted into the original list independently. Absent when
/// P@k before is 0.
std::optional<double> precision_drop(const RankedList& before, std::span<const AttackOutcome> outcomes,
                                     const QrelSet& qrels, std::size_t k = 5);

/// Mean P@k after substituting each outcome's score independently. Absent for
/// an empty outcome list.
std::optional<double> mean_precision_after(const RankedList& before, std::span<const AttackOutcome> outcomes,
                                           const QrelSet& qrels, std::size_t k = 5);

/// Cosine similarity of the mean-pooled token vectors. Absent when either
/// pooled vector has zero norm.
std::optional<double> doc_similarity(std::span<const TokenId> original, std::span<const TokenId> perturbed,
                                     const EmbeddingStore& store);

inline std::optional<double> doc_similarity(const TokenDoc& original, const TokenDoc& perturbed,
                                            const EmbeddingStore& store) {
  return doc_similarity(original.token_ids, perturbed.token_ids, store);
}

}  // namespace rp
