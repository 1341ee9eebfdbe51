#include "core/eval.hpp"

#include <algorithm>

#include "core/common.hpp"

namespace rp {

double success_at_k(std::span<const AttackOutcome> outcomes, const QrelSet& qrels, std::size_t k) {
  if (outcomes.empty()) fail(ErrorCode::invalid_argument, "success_at_k: no outcomes");
  if (k == 0) fail(ErrorCode::invalid_argument, "success_at_k: k must be positive");
  std::size_t hits = 0;
  for (const auto& o : outcomes) {
    if (!qrels.relevant(o.query_id, o.doc_id))
      fail(ErrorCode::invalid_argument, "success_at_k: document " + o.doc_id + " is not relevant to " + o.query_id);
    if (o.rank_after >= o.rank_before + k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

std::size_t nrc(const AttackOutcome& outcome, const RankedList& before, const RankedList& after,
                const QrelSet& qrels) {
  const std::size_t from = before.rank_of(outcome.doc_id);
  const std::size_t to = after.rank_of(outcome.doc_id);
  std::size_t count = 0;
  for (std::size_t pos = from + 1; pos < to; ++pos) {
    const auto& entry = after.entries()[pos - 1];
    if (qrels.grade(outcome.query_id, entry.doc_id) == 0) ++count;
  }
  return count;
}

Precision precision_at_k(const RankedList& ranked, const QrelSet& qrels, std::size_t k) {
  if (k == 0) fail(ErrorCode::invalid_argument, "precision_at_k: k must be positive");
  Precision p;
  std::size_t depth = k;
  if (ranked.size() < k) {
    p.truncated = true;
    depth = ranked.size();
  }
  if (depth == 0) return p;
  std::size_t relevant = 0;
  for (std::size_t i = 0; i < depth; ++i)
    if (qrels.relevant(ranked.query_id(), ranked.entries()[i].doc_id)) ++relevant;
  p.value = static_cast<double>(relevant) / static_cast<double>(depth);
  return p;
}

std::optional<double> mean_precision_after(const RankedList& before, std::span<const AttackOutcome> outcomes,
                                           const QrelSet& qrels, std::size_t k) {
  if (outcomes.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& o : outcomes) {
    const RankedList after = rescore_one(before, o.doc_id, o.score_after);
    total += precision_at_k(after, qrels, k).value;
  }
  return total / static_cast<double>(outcomes.size());
}

std::optional<double> precision_drop(const RankedList& before, std::span<const AttackOutcome> outcomes,
                                     const QrelSet& qrels, std::size_t k) {
  const double p_before = precision_at_k(before, qrels, k).value;
  if (p_before == 0.0) return std::nullopt;
  const auto p_after = mean_precision_after(before, outcomes, qrels, k);
  if (!p_after) return 0.0;
  return (p_before - *p_after) / p_before;
}

std::optional<double> doc_similarity(std::span<const TokenId> original, std::span<const TokenId> perturbed,
                                     const EmbeddingStore& store) {
  const auto a = doc_vector(store, original);
  const auto b = doc_vector(store, perturbed);
  if (a == b && l2_norm(a) > 0.0) return 1.0;
  if (l2_norm(a) == 0.0 || l2_norm(b) == 0.0) return std::nullopt;
  return 1.0 - cosine_distance(a, b);
}

}  // namespace rp
