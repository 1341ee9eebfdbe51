#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/embedding.hpp"

namespace rp {

/// Lowercases ASCII letters and splits on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

/// Relevance judgments. Unjudged pairs have grade 0.
class QrelSet {
 public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool relevant(const std::string& query_id, const std::string& doc_id) const {
    return grade(query_id, doc_id) > 0;
  }
  bool judged(const std::string& query_id, const std::string& doc_id) const {
    return judgments_.contains({query_id, doc_id});
  }
  std::size_t size() const noexcept { return judgments_.size(); }
  const std::map<std::pair<std::string, std::string>, int>& judgments() const noexcept { return judgments_; }

 private:
  std::map<std::pair<std::string, std::string>, int> judgments_;
};

struct OovEntry {
  std::string doc_id;
  std::size_t total_tokens = 0;
  std::size_t dropped_tokens = 0;

  bool operator==(const OovEntry&) const = default;
};

struct IngestReport {
  std::vector<OovEntry> docs;  // every document read, in file order
  std::vector<std::string> excluded_docs;
  std::vector<std::string> excluded_queries;
  std::size_t query_tokens_dropped = 0;
  std::size_t unknown_qrels = 0;
};

struct Corpus {
  std::vector<Query> queries;
  std::vector<TokenDoc> docs;
  QrelSet qrels;
  IngestReport report;

  const TokenDoc* find_doc(const std::string& doc_id) const;
  const Query* find_query(const std::string& query_id) const;
};

/// Reads `id<TAB>text` query and document files plus TREC qrels
/// (`qid 0 docid grade`). Out-of-vocabulary tokens are dropped; records left
/// empty are excluded; qrels naming unknown ids are skipped.
Corpus ingest(const std::filesystem::path& queries_path, const std::filesystem::path& docs_path,
              const std::filesystem::path& qrels_path, const EmbeddingStore& store);

/// `doc_id,total_tokens,dropped_tokens` with a header line.
std::string render_oov_report(const IngestReport& report);

struct CandidatePool {
  std::string query_id;
  std::vector<std::string> doc_ids;  // sampled positives first, then negatives
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t positive_shortfall = 0;
  std::size_t negative_shortfall = 0;

  bool operator==(const CandidatePool&) const = default;
};

/// Samples without replacement up to `positives` relevant and `negatives`
/// non-relevant documents. Negatives judged 0 for the query are drawn first;
/// unjudged documents only fill a shortfall. Throws if the query has no
/// relevant document among `docs`.
CandidatePool sample_pool(const std::string& query_id, const QrelSet& qrels, std::span<const TokenDoc> docs,
                          std::size_t positives, std::size_t negatives, std::uint64_t seed);

}  // namespace rp
