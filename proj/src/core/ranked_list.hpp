#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rp {

/// Relevance score returned by a ranker. Higher is more relevant.
struct Score {
  double value = 0.0;
  bool degenerate = false;  // zero-norm input; value forced to 0

  bool operator==(const Score&) const = default;
};

struct RankedEntry {
  std::string doc_id;
  Score score;

  bool operator==(const RankedEntry&) const = default;
};

/// Documents for one query ordered by descending score, ties by doc_id
/// ascending. Ranks are 1-based.
class RankedList {
 public:
  RankedList() = default;

  /// Sorts the entries. Doc ids must be unique and scores finite.
  RankedList(std::string query_id, std::vector<RankedEntry> entries);

  const std::string& query_id() const noexcept { return query_id_; }
  const std::vector<RankedEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(const std::string& doc_id) const { return position_.count(doc_id) != 0; }

  /// 1-based rank; throws not_found for an unknown id.
  std::size_t rank_of(const std::string& doc_id) const;
  const Score& score_of(const std::string& doc_id) const;

  bool operator==(const RankedList& other) const {
    return query_id_ == other.query_id_ && entries_ == other.entries_;
  }

 private:
  std::string query_id_;
  std::vector<RankedEntry> entries_;
  std::unordered_map<std::string, std::size_t> position_;
};

/// Copy of `ranked` with only `doc_id`'s score replaced, re-sorted.
RankedList rescore_one(const RankedList& ranked, const std::string& doc_id, Score new_score);

}  // namespace rp
