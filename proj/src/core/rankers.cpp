#include "core/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "core/common.hpp"
#include "core/external_ranker.hpp"

namespace rp {

std::string_view to_string(RankerKind kind) {
  switch (kind) {
    case RankerKind::cosine_centroid: return "cosine_centroid";
    case RankerKind::kernel_pooling: return "kernel_pooling";
    case RankerKind::lexical_overlap: return "lexical_overlap";
    case RankerKind::external: return "external";
  }
  return "unknown";
}

RankerKind parse_ranker_kind(std::string_view text) {
  if (text == "cosine_centroid") return RankerKind::cosine_centroid;
  if (text == "kernel_pooling") return RankerKind::kernel_pooling;
  if (text == "lexical_overlap") return RankerKind::lexical_overlap;
  if (text == "external") return RankerKind::external;
  fail(ErrorCode::invalid_argument, "unknown ranker kind '" + std::string(text) + "'");
}

KernelParams KernelParams::defaults() {
  KernelParams p;
  for (int k = 0; k <= 10; ++k) {
    const double mu = -1.0 + 0.2 * k;
    p.mus.push_back(k == 10 ? 1.0 : mu);
    p.sigmas.push_back(k == 10 ? 0.001 : 0.1);
    p.weights.push_back(1.0);
  }
  return p;
}

void RankerSpec::validate() const {
  switch (kind) {
    case RankerKind::kernel_pooling: {
      if (kernels.mus.empty()) fail(ErrorCode::invalid_argument, "kernel_pooling needs at least one kernel");
      if (kernels.mus.size() != kernels.sigmas.size() || kernels.mus.size() != kernels.weights.size())
        fail(ErrorCode::invalid_argument, "kernel means, widths and weights must have equal length");
      for (double mu : kernels.mus)
        if (!(mu >= -1.0 && mu <= 1.0)) fail(ErrorCode::invalid_argument, "kernel mean outside [-1, 1]");
      for (double s : kernels.sigmas)
        if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::invalid_argument, "kernel width must be positive");
      for (double w : kernels.weights)
        if (!std::isfinite(w)) fail(ErrorCode::invalid_argument, "kernel weight must be finite");
      break;
    }
    case RankerKind::lexical_overlap:
      if (!(bm25.k1 >= 0.0) || !(bm25.b >= 0.0 && bm25.b <= 1.0))
        fail(ErrorCode::invalid_argument, "BM25 needs k1 >= 0 and b in [0, 1]");
      break;
    case RankerKind::external:
      if (external.command.empty()) fail(ErrorCode::invalid_argument, "external ranker needs a command");
      if (!(external.timeout_seconds > 0.0))
        fail(ErrorCode::invalid_argument, "external ranker timeout must be positive");
      if (external.processes == 0) fail(ErrorCode::invalid_argument, "external ranker needs >= 1 process");
      break;
    case RankerKind::cosine_centroid:
      break;
  }
}

CorpusStats CorpusStats::from_docs(std::span<const TokenDoc> docs) {
  CorpusStats stats;
  stats.num_docs = docs.size();
  std::size_t total = 0;
  for (const auto& doc : docs) {
    total += doc.token_ids.size();
    std::unordered_set<TokenId> unique(doc.token_ids.begin(), doc.token_ids.end());
    for (TokenId id : unique) ++stats.doc_freq[id];
  }
  stats.avg_doc_len = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  return stats;
}

namespace {

class CosineCentroidRanker final : public Ranker {
 public:
  explicit CosineCentroidRanker(const EmbeddingStore& store) : store_(store) {}

  Score score(const Query& query, const TokenDoc& doc) const override {
    const auto q = doc_vector(store_, query.token_ids);
    const auto d = doc_vector(store_, doc.token_ids);
    const double nq = l2_norm(q);
    const double nd = l2_norm(d);
    if (nq == 0.0 || nd == 0.0) return Score{0.0, true};
    return Score{dot(q, d) / (nq * nd), false};
  }

  RankerKind kind() const noexcept override { return RankerKind::cosine_centroid; }

 private:
  const EmbeddingStore& store_;
};

class KernelPoolingRanker final : public Ranker {
 public:
  KernelPoolingRanker(const EmbeddingStore& store, KernelParams params)
      : store_(store), params_(std::move(params)) {
    for (double s : params_.sigmas) inv_two_var_.push_back(1.0 / (2.0 * s * s));
  }

  Score score(const Query& query, const TokenDoc& doc) const override {
    const std::size_t nk = params_.mus.size();
    std::vector<double> soft(nk);
    bool degenerate = false;
    double total = 0.0;
    for (TokenId q : query.token_ids) {
      std::fill(soft.begin(), soft.end(), 0.0);
      const double nq = store_.norm(q);
      for (TokenId d : doc.token_ids) {
        const double nd = store_.norm(d);
        double cos = 0.0;
        if (nq == 0.0 || nd == 0.0) {
          degenerate = true;
        } else {
          cos = dot(store_.vector(q), store_.vector(d)) / (nq * nd);
        }
        for (std::size_t k = 0; k < nk; ++k) {
          const double diff = cos - params_.mus[k];
          soft[k] += std::exp(-diff * diff * inv_two_var_[k]);
        }
      }
      for (std::size_t k = 0; k < nk; ++k) total += params_.weights[k] * std::log1p(soft[k]);
    }
    return Score{total, degenerate};
  }

  RankerKind kind() const noexcept override { return RankerKind::kernel_pooling; }

 private:
  const EmbeddingStore& store_;
  KernelParams params_;
  std::vector<double> inv_two_var_;
};

/// Okapi BM25 over exact token-id matches, with the non-negative
/// log(1 + (N - df + 0.5) / (df + 0.5)) idf.
class LexicalOverlapRanker final : public Ranker {
 public:
  LexicalOverlapRanker(const CorpusStats& stats, Bm25Params params) : stats_(stats), params_(params) {}

  Score score(const Query& query, const TokenDoc& doc) const override {
    std::unordered_map<TokenId, std::size_t> tf;
    for (TokenId id : doc.token_ids) ++tf[id];
    const double len = static_cast<double>(doc.token_ids.size());
    const double avg = stats_.avg_doc_len > 0.0 ? stats_.avg_doc_len : len;
    const double n = static_cast<double>(stats_.num_docs);
    double total = 0.0;
    for (TokenId q : query.token_ids) {
      auto it = tf.find(q);
      if (it == tf.end()) continue;
      auto df_it = stats_.doc_freq.find(q);
      const double df = df_it == stats_.doc_freq.end() ? 0.0 : static_cast<double>(df_it->second);
      const double idf = std::log1p((n - df + 0.5) / (df + 0.5));
      const double f = static_cast<double>(it->second);
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg);
      total += idf * f * (params_.k1 + 1.0) / (f + norm);
    }
    return Score{total, false};
  }

  RankerKind kind() const noexcept override { return RankerKind::lexical_overlap; }

 private:
  CorpusStats stats_;
  Bm25Params params_;
};

}  // namespace

std::unique_ptr<Ranker> make_ranker(const RankerSpec& spec, const EmbeddingStore& store,
                                    const CorpusStats* stats) {
  spec.validate();
  switch (spec.kind) {
    case RankerKind::cosine_centroid:
      return std::make_unique<CosineCentroidRanker>(store);
    case RankerKind::kernel_pooling:
      return std::make_unique<KernelPoolingRanker>(store, spec.kernels);
    case RankerKind::lexical_overlap:
      if (stats == nullptr) fail(ErrorCode::invalid_argument, "lexical_overlap needs corpus statistics");
      return std::make_unique<LexicalOverlapRanker>(*stats, spec.bm25);
    case RankerKind::external:
      return std::make_unique<ExternalRanker>(spec.external, store);
  }
  fail(ErrorCode::internal, "unhandled ranker kind");
}

RankedList rank(const Ranker& ranker, const Query& query, std::span<const TokenDoc> docs) {
  if (docs.empty()) fail(ErrorCode::invalid_argument, "rank: no documents");
  std::vector<RankedEntry> entries;
  entries.reserve(docs.size());
  for (const auto& doc : docs) {
    try {
      entries.push_back({doc.doc_id, ranker.score(query, doc)});
    } catch (const RankerError& e) {
      throw RankerError(std::string(e.what()) + " (document " + doc.doc_id + ")", e.raw_reply(), doc.doc_id);
    }
    if (!std::isfinite(entries.back().score.value))
      throw RankerError("non-finite score for document " + doc.doc_id, {}, doc.doc_id);
  }
  return RankedList(query.query_id, std::move(entries));
}

}  // namespace rp
