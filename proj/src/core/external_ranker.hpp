#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "core/rankers.hpp"

namespace rp {

/// Client for a ranker running in a child process, speaking newline-delimited
/// JSON over the child's stdin/stdout:
///
///   -> {"hello": "rank-perturb/1"}
///   <- {"hello": "<name>", "version": "<string>"}
///   -> {"id": "<n>", "query": [tokens...], "doc": [tokens...]}
///   <- {"id": "<n>", "score": <finite number>}
///
/// Each child has at most one request in flight. A child that times out or
/// sends a malformed reply is killed and respawned on the next request.
class ExternalScorer {
 public:
  explicit ExternalScorer(ExternalParams params);
  ~ExternalScorer();

  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  double score(std::span<const std::string> query, std::span<const std::string> doc) const;

  /// Name the child reported in its handshake (empty before the first spawn).
  std::string server_name() const;

  /// Number of child processes started so far, including restarts.
  std::size_t spawn_count() const;

 private:
  struct Worker;
  ExternalParams params_;
  std::vector<std::unique_ptr<Worker>> workers_;
  mutable std::mutex pick_mu_;
  mutable std::size_t next_ = 0;
};

class ExternalRanker final : public Ranker {
 public:
  ExternalRanker(ExternalParams params, const EmbeddingStore& store);

  Score score(const Query& query, const TokenDoc& doc) const override;
  RankerKind kind() const noexcept override { return RankerKind::external; }

  const ExternalScorer& client() const noexcept { return client_; }

 private:
  const EmbeddingStore& store_;
  ExternalScorer client_;
};

}  // namespace rp
