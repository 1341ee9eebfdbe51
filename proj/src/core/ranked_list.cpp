#include "core/ranked_list.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace rp {

RankedList::RankedList(std::string query_id, std::vector<RankedEntry> entries)
    : query_id_(std::move(query_id)), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!std::isfinite(e.score.value))
      fail(ErrorCode::invalid_argument, "non-finite score for document " + e.doc_id);
  }
  std::sort(entries_.begin(), entries_.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score.value != b.score.value) return a.score.value > b.score.value;
    return a.doc_id < b.doc_id;
  });
  position_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!position_.emplace(entries_[i].doc_id, i).second)
      fail(ErrorCode::invalid_argument, "duplicate document id " + entries_[i].doc_id + " in ranked list");
  }
}

std::size_t RankedList::rank_of(const std::string& doc_id) const {
  auto it = position_.find(doc_id);
  if (it == position_.end())
    fail(ErrorCode::not_found, "document " + doc_id + " not in ranked list for query " + query_id_);
  return it->second + 1;
}

const Score& RankedList::score_of(const std::string& doc_id) const {
  return entries_[rank_of(doc_id) - 1].score;
}

RankedList rescore_one(const RankedList& ranked, const std::string& doc_id, Score new_score) {
  std::vector<RankedEntry> entries = ranked.entries();
  entries[ranked.rank_of(doc_id) - 1].score = new_score;
  return RankedList(ranked.query_id(), std::move(entries));
}

}  // namespace rp
