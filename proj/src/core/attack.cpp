#include "core/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <unordered_map>

#include "core/common.hpp"

namespace rp {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::A0: return "A0";
    case Variant::A1: return "A1";
    case Variant::A2: return "A2";
    case Variant::A3: return "A3";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "a0" || text == "A0") return Variant::A0;
  if (text == "a1" || text == "A1") return Variant::A1;
  if (text == "a2" || text == "A2") return Variant::A2;
  if (text == "a3" || text == "A3") return Variant::A3;
  fail(ErrorCode::invalid_argument, "unknown attack variant '" + std::string(text) + "'");
}

void AttackConfig::validate(std::size_t doc_length) const {
  if (sparsity == 0) fail(ErrorCode::invalid_argument, "sparsity c must be at least 1");
  if (sparsity > doc_length)
    fail(ErrorCode::invalid_argument, "sparsity c = " + std::to_string(sparsity) + " exceeds document length " +
                                          std::to_string(doc_length));
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (delta_bound && (!(*delta_bound > 0.0) || !std::isfinite(*delta_bound)))
    fail(ErrorCode::invalid_argument, "delta bound must be positive");
}

double default_delta_bound(const EmbeddingStore& store) {
  return 2.0 * store.mean_norm() / std::sqrt(static_cast<double>(store.dim()));
}

std::vector<char> query_positions(const Query& query, const TokenDoc& doc) {
  std::vector<char> mask(doc.token_ids.size(), 0);
  for (std::size_t i = 0; i < doc.token_ids.size(); ++i) {
    mask[i] = std::find(query.token_ids.begin(), query.token_ids.end(), doc.token_ids[i]) != query.token_ids.end();
  }
  return mask;
}

namespace {

using NearestFn = std::function<TokenId(std::size_t position, std::span<const double> point)>;

std::optional<std::size_t> repair_position(std::size_t pos, std::span<const char> locked) {
  const std::size_t n = locked.size();
  for (std::size_t step = 1; step < n; ++step) {
    if (pos >= step && !locked[pos - step]) return pos - step;
    if (pos + step < n && !locked[pos + step]) return pos + step;
  }
  return std::nullopt;
}

Projection project_impl(const PerturbationGenome& genome, const TokenDoc& doc, const EmbeddingStore& store,
                        std::span<const char> locked, const NearestFn& nearest) {
  const std::size_t n = doc.token_ids.size();
  if (!locked.empty() && locked.size() != n) fail(ErrorCode::invalid_argument, "project: lock mask length");

  Projection out;
  out.doc = doc;
  std::vector<double> point(store.dim());
  std::vector<char> touched(n, 0);
  for (const auto& gene : genome.genes) {
    if (gene.position >= n) fail(ErrorCode::invalid_argument, "project: gene index outside document");
    if (gene.delta.size() != store.dim()) fail(ErrorCode::invalid_argument, "project: gene delta dimension");
    std::size_t pos = gene.position;
    if (!locked.empty() && locked[pos]) {
      auto repaired = repair_position(pos, locked);
      if (!repaired) {
        ++out.dropped_genes;
        continue;
      }
      pos = *repaired;
    }
    const TokenId original = doc.token_ids[pos];
    auto base = store.vector(original);
    for (std::size_t k = 0; k < point.size(); ++k) point[k] = base[k] + gene.delta[k];
    touched[pos] = 1;
    if (l2_norm(point) == 0.0) {
      ++out.zero_vector_genes;
      out.doc.token_ids[pos] = original;
      continue;
    }
    out.doc.token_ids[pos] = nearest(pos, point);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (touched[i] && out.doc.token_ids[i] != doc.token_ids[i])
      out.replaced.push_back({i, doc.token_ids[i], out.doc.token_ids[i]});
  }
  return out;
}

// Cosine distance that treats a zero-norm side as orthogonal.
double token_distance(const EmbeddingStore& store, TokenId a, TokenId b) {
  if (store.norm(a) == 0.0 || store.norm(b) == 0.0) return 1.0;
  return cosine_distance(store.vector(a), store.vector(b));
}

/// Per-attack memo of ranker scores and gene projections. Both are pure
/// functions of their keys for a fixed (query, doc, store, ranker).
class AttackEvaluator {
 public:
  AttackEvaluator(const Query& query, const TokenDoc& doc, const Ranker& ranker, const EmbeddingStore& store,
                  const AttackConfig& config)
      : query_(query), doc_(doc), ranker_(ranker), store_(store), config_(config) {
    if (config.hard_query_lock) locked_ = query_positions(query, doc);
  }

  Projection project(const PerturbationGenome& genome) {
    return project_impl(genome, doc_, store_, locked_, [this](std::size_t pos, std::span<const double> point) {
      return nearest_cached(pos, point);
    });
  }

  Score score(const TokenDoc& perturbed) {
    std::string key(reinterpret_cast<const char*>(perturbed.token_ids.data()),
                    perturbed.token_ids.size() * sizeof(TokenId));
    auto it = scores_.find(key);
    if (it != scores_.end()) return it->second;
    const Score s = ranker_.score(query_, perturbed);
    ++ranker_calls_;
    scores_.emplace(std::move(key), s);
    return s;
  }

  double fitness(const PerturbationGenome& genome) {
    const Projection p = project(genome);
    const double base = score(p.doc).value;
    return base + replacement_penalty(config_.variant, query_, p.replaced, store_, config_.lambda);
  }

  std::size_t ranker_calls() const noexcept { return ranker_calls_; }

 private:
  static constexpr std::size_t kMaxCachedGenes = 1 << 16;

  TokenId nearest_cached(std::size_t pos, std::span<const double> point) {
    std::string key(sizeof(std::size_t) + point.size_bytes(), '\0');
    std::memcpy(key.data(), &pos, sizeof pos);
    std::memcpy(key.data() + sizeof pos, point.data(), point.size_bytes());
    auto it = genes_.find(key);
    if (it != genes_.end()) return it->second;
    const TokenId original = doc_.token_ids[pos];
    const TokenId id = nearest_token(store_, point, std::span<const TokenId>(&original, 1));
    if (genes_.size() >= kMaxCachedGenes) genes_.clear();
    genes_.emplace(std::move(key), id);
    return id;
  }

  const Query& query_;
  const TokenDoc& doc_;
  const Ranker& ranker_;
  const EmbeddingStore& store_;
  const AttackConfig& config_;
  std::vector<char> locked_;
  std::unordered_map<std::string, Score> scores_;
  std::unordered_map<std::string, TokenId> genes_;
  std::size_t ranker_calls_ = 0;
};

void check_inputs(const Query& query, const TokenDoc& doc, const RankedList& before, const EmbeddingStore& store) {
  validate_tokens(store, query.token_ids, "query " + query.query_id);
  validate_tokens(store, doc.token_ids, "document " + doc.doc_id);
  if (!before.contains(doc.doc_id))
    fail(ErrorCode::invalid_argument, "attacked document " + doc.doc_id + " is not in the candidate list");
}

}  // namespace

Projection project(const PerturbationGenome& genome, const TokenDoc& doc, const EmbeddingStore& store,
                   std::span<const char> locked) {
  return project_impl(genome, doc, store, locked, [&](std::size_t pos, std::span<const double> point) {
    const TokenId original = doc.token_ids[pos];
    return nearest_token(store, point, std::span<const TokenId>(&original, 1));
  });
}

double replacement_penalty(Variant variant, const Query& query, std::span<const Replacement> replaced,
                           const EmbeddingStore& store, double lambda) {
  double sum = 0.0;
  switch (variant) {
    case Variant::A0:
    case Variant::A1:
      return 0.0;
    case Variant::A2:
      for (const auto& r : replaced) sum += token_distance(store, r.old_token, r.new_token);
      break;
    case Variant::A3:
      for (const auto& r : replaced) {
        const bool in_query =
            std::find(query.token_ids.begin(), query.token_ids.end(), r.old_token) != query.token_ids.end();
        if (in_query) sum += token_distance(store, r.old_token, r.new_token);
      }
      break;
  }
  return lambda * sum;
}

double fitness(Variant variant, const Query& query, const TokenDoc& doc, const PerturbationGenome& genome,
               const Ranker& ranker, const EmbeddingStore& store, double lambda, bool hard_query_lock) {
  if (variant == Variant::A0) fail(ErrorCode::invalid_argument, "A0 has no fitness function");
  std::vector<char> locked;
  if (hard_query_lock) locked = query_positions(query, doc);
  const Projection p = project(genome, doc, store, locked);
  const double base = ranker.score(query, p.doc).value;
  return base + replacement_penalty(variant, query, p.replaced, store, lambda);
}

AttackOutcome attack(const Query& query, const TokenDoc& doc, const RankedList& before, const Ranker& ranker,
                     const EmbeddingStore& store, const AttackConfig& config, const DEConfig& de) {
  if (config.variant == Variant::A0)
    return baseline_a0(query, doc, before, ranker, store, de.seed, config.hard_query_lock);
  check_inputs(query, doc, before, store);
  config.validate(doc.token_ids.size());
  de.validate();

  GenomeSpace space;
  space.doc_length = doc.token_ids.size();
  space.sparsity = config.sparsity;
  space.delta_bound = config.delta_bound.value_or(default_delta_bound(store));
  space.dim = store.dim();

  AttackEvaluator evaluator(query, doc, ranker, store, config);
  DEResult result =
      de_minimize(de, space, [&](const PerturbationGenome& genome) { return evaluator.fitness(genome); });

  const Projection best = evaluator.project(result.best);
  AttackOutcome out;
  out.query_id = query.query_id;
  out.doc_id = doc.doc_id;
  out.variant = config.variant;
  out.sparsity = config.sparsity;
  out.original_tokens = doc.token_ids;
  out.perturbed_tokens = best.doc.token_ids;
  out.replaced = best.replaced;
  out.rank_before = before.rank_of(doc.doc_id);
  out.score_before = before.score_of(doc.doc_id);
  out.score_after = evaluator.score(best.doc);
  out.rank_after = rescore_one(before, doc.doc_id, out.score_after).rank_of(doc.doc_id);
  out.best_fitness = result.best_fitness;
  out.fitness_trace = std::move(result.trace);
  out.evaluations = evaluator.ranker_calls();
  return out;
}

AttackOutcome attack(const Query& query, const TokenDoc& doc, std::span<const TokenDoc> context,
                     const Ranker& ranker, const EmbeddingStore& store, const AttackConfig& config,
                     const DEConfig& de) {
  return attack(query, doc, rank(ranker, query, context), ranker, store, config, de);
}

AttackOutcome baseline_a0(const Query& query, const TokenDoc& doc, const RankedList& before,
                          const Ranker& ranker, const EmbeddingStore& store, std::uint64_t seed,
                          bool hard_query_lock) {
  check_inputs(query, doc, before, store);
  std::vector<std::size_t> eligible;
  const std::vector<char> locked =
      hard_query_lock ? query_positions(query, doc) : std::vector<char>(doc.token_ids.size(), 0);
  for (std::size_t i = 0; i < doc.token_ids.size(); ++i)
    if (!locked[i]) eligible.push_back(i);

  AttackOutcome out;
  out.query_id = query.query_id;
  out.doc_id = doc.doc_id;
  out.variant = Variant::A0;
  out.sparsity = 1;
  out.original_tokens = doc.token_ids;
  out.perturbed_tokens = doc.token_ids;

  if (!eligible.empty()) {
    Rng rng(seed);
    const std::size_t pos = eligible[rng.index(eligible.size())];
    const TokenId original = doc.token_ids[pos];
    if (store.norm(original) != 0.0) {
      const TokenId replacement = nearest_token(store, store.vector(original), std::span<const TokenId>(&original, 1));
      out.perturbed_tokens[pos] = replacement;
      out.replaced.push_back({pos, original, replacement});
    }
  }

  out.rank_before = before.rank_of(doc.doc_id);
  out.score_before = before.score_of(doc.doc_id);
  out.score_after = ranker.score(query, TokenDoc{doc.doc_id, out.perturbed_tokens});
  out.evaluations = 1;
  out.rank_after = rescore_one(before, doc.doc_id, out.score_after).rank_of(doc.doc_id);
  out.best_fitness = out.score_after.value;
  return out;
}

AttackOutcome baseline_a0(const Query& query, const TokenDoc& doc, std::span<const TokenDoc> context,
                          const Ranker& ranker, const EmbeddingStore& store, std::uint64_t seed,
                          bool hard_query_lock) {
  return baseline_a0(query, doc, rank(ranker, query, context), ranker, store, seed, hard_query_lock);
}

}  // namespace rp
