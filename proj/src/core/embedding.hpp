#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rp {

using TokenId = std::int32_t;

/// Tokenized document. Token ids index rows of an EmbeddingStore.
struct TokenDoc {
  std::string doc_id;
  std::vector<TokenId> token_ids;

  bool operator==(const TokenDoc&) const = default;
};

struct Query {
  std::string query_id;
  std::vector<TokenId> token_ids;

  bool operator==(const Query&) const = default;
};

/// Immutable vocabulary of tokens with fixed-dimension vectors.
class EmbeddingStore {
 public:
  /// `values` is row-major, tokens.size() rows by `dim` columns. Tokens must
  /// be unique and every value finite.
  EmbeddingStore(std::vector<std::string> tokens, std::vector<double> values, std::size_t dim);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<TokenId> find(std::string_view token) const;

  std::span<const double> vector(TokenId id) const {
    return {values_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  double norm(TokenId id) const { return norms_[static_cast<std::size_t>(id)]; }

  /// Mean L2 norm over all rows.
  double mean_norm() const noexcept { return mean_norm_; }

  /// Unit-length rows in blocks of kUnitBlock tokens: block b holds, for each
  /// coordinate k, the k-th value of tokens b*kUnitBlock... Zero-norm and
  /// padding rows are zero. Used by nearest_token.
  static constexpr std::size_t kUnitBlock = 8;
  std::span<const double> unit_blocks() const noexcept { return unit_t_; }

  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<double> values_;
  std::vector<double> norms_;
  std::vector<double> unit_t_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t dim_ = 0;
  double mean_norm_ = 0.0;
};

struct EmbeddingLoadReport {
  std::size_t duplicate_tokens = 0;  // later duplicates skipped
  std::size_t rejected_lines = 0;    // non-numeric coordinates
};

/// Reads GloVe text format (`token v1 ... vD`, one entry per line).
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim = std::nullopt,
                               EmbeddingLoadReport* report = nullptr);

/// Writes GloVe text format with shortest round-trip decimal formatting.
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> v);

/// 1 - cos(u, v). Throws on zero-norm input or length mismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Row minimizing cosine distance to `point` (maximizing its dot product with
/// the unit row), skipping `exclude` and zero-norm rows. Ties go to the
/// smallest row id.
TokenId nearest_token(const EmbeddingStore& store, std::span<const double> point,
                      std::span<const TokenId> exclude = {});

/// Mean of the token vectors.
std::vector<double> doc_vector(const EmbeddingStore& store, std::span<const TokenId> token_ids);

/// Checks every id is a valid row and the sequence is nonempty.
void validate_tokens(const EmbeddingStore& store, std::span<const TokenId> token_ids,
                     std::string_view owner);

}  // namespace rp
