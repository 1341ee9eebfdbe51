#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/embedding.hpp"
#include "core/ranked_list.hpp"

namespace rp {

enum class RankerKind { cosine_centroid, kernel_pooling, lexical_overlap, external };

std::string_view to_string(RankerKind kind);
RankerKind parse_ranker_kind(std::string_view text);

/// Gaussian kernels over query/document token cosine similarity.
struct KernelParams {
  std::vector<double> mus;
  std::vector<double> sigmas;
  std::vector<double> weights;

  /// 11 kernels at mu = -1, -0.8, ..., 1; sigma 0.1 except 0.001 for the
  /// exact-match kernel at mu = 1; unit weights.
  static KernelParams defaults();
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ExternalParams {
  std::string command;
  double timeout_seconds = 10.0;
  std::size_t processes = 1;
};

struct RankerSpec {
  RankerKind kind = RankerKind::cosine_centroid;
  KernelParams kernels = KernelParams::defaults();
  Bm25Params bm25;
  ExternalParams external;

  void validate() const;
};

/// Document statistics for the lexical ranker.
struct CorpusStats {
  std::size_t num_docs = 0;
  double avg_doc_len = 0.0;
  std::unordered_map<TokenId, std::size_t> doc_freq;

  static CorpusStats from_docs(std::span<const TokenDoc> docs);
};

/// Black-box scorer F(q, d). Implementations must be deterministic and safe to
/// call from several threads.
class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual Score score(const Query& query, const TokenDoc& doc) const = 0;
  virtual RankerKind kind() const noexcept = 0;
};

/// The store must outlive the returned ranker. `stats` is required
/// for lexical_overlap and ignored otherwise.
std::unique_ptr<Ranker> make_ranker(const RankerSpec& spec, const EmbeddingStore& store,
                                    const CorpusStats* stats = nullptr);

/// Scores every document and sorts by (score desc, doc_id asc). Ranker errors
/// are rethrown as RankerError naming the offending document.
RankedList rank(const Ranker& ranker, const Query& query, std::span<const TokenDoc> docs);

}  // namespace rp
