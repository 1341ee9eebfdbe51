#include "core/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "core/common.hpp"
#include "core/log.hpp"

namespace rp {

EmbeddingStore::EmbeddingStore(std::vector<std::string> tokens, std::vector<double> values,
                               std::size_t dim)
    : tokens_(std::move(tokens)), values_(std::move(values)), dim_(dim) {
  if (dim_ == 0) fail(ErrorCode::invalid_argument, "embedding dimension must be positive");
  if (tokens_.empty()) fail(ErrorCode::invalid_argument, "embedding vocabulary is empty");
  if (values_.size() != tokens_.size() * dim_)
    fail(ErrorCode::invalid_argument, "embedding matrix does not match vocabulary size");
  if (tokens_.size() > static_cast<std::size_t>(std::numeric_limits<TokenId>::max()))
    fail(ErrorCode::invalid_argument, "vocabulary too large");

  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      fail(ErrorCode::invalid_argument, "duplicate token '" + tokens_[i] + "'");
  }
  for (double x : values_) {
    if (!std::isfinite(x)) fail(ErrorCode::invalid_argument, "non-finite embedding value");
  }

  norms_.resize(tokens_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    norms_[i] = l2_norm(vector(static_cast<TokenId>(i)));
    total += norms_[i];
  }
  mean_norm_ = total / static_cast<double>(tokens_.size());

  const std::size_t n = tokens_.size();
  const std::size_t blocks = (n + kUnitBlock - 1) / kUnitBlock;
  unit_t_.assign(blocks * kUnitBlock * dim_, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (norms_[i] == 0.0) continue;
    const std::size_t base = (i / kUnitBlock) * kUnitBlock * dim_ + i % kUnitBlock;
    for (std::size_t k = 0; k < dim_; ++k) unit_t_[base + k * kUnitBlock] = values_[i * dim_ + k] / norms_[i];
  }
}

std::optional<TokenId> EmbeddingStore::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

void split_fields(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
}

}  // namespace

EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_dim,
                               EmbeddingLoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open embedding file " + path.string());

  std::vector<std::string> tokens;
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> seen;
  EmbeddingLoadReport stats;
  std::optional<std::size_t> dim = expected_dim;
  if (dim && *dim == 0) fail(ErrorCode::invalid_argument, "expected dimension must be positive");

  std::string line;
  std::vector<std::string_view> fields;
  std::vector<double> row;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    split_fields(line, fields);
    if (fields.empty()) continue;
    if (fields.size() < 2)
      fail(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": entry has no coordinates");

    const std::size_t width = fields.size() - 1;
    if (!dim) dim = width;
    if (width != *dim) {
      fail(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": dimension " +
                                 std::to_string(width) + " does not match " + std::to_string(*dim));
    }

    row.resize(width);
    bool ok = true;
    for (std::size_t k = 0; k < width && ok; ++k) ok = parse_double(fields[k + 1], row[k]);
    if (!ok) {
      ++stats.rejected_lines;
      log::warn(path.string(), ":", line_no, ": non-numeric coordinate, line skipped");
      continue;
    }

    std::string token(fields[0]);
    if (seen.count(token) != 0) {
      ++stats.duplicate_tokens;
      continue;
    }
    seen.emplace(token, tokens.size());
    tokens.push_back(std::move(token));
    values.insert(values.end(), row.begin(), row.end());
  }

  if (tokens.empty()) fail(ErrorCode::parse, "embedding file " + path.string() + " has no entries");
  if (stats.duplicate_tokens > 0)
    log::warn(path.string(), ": skipped ", stats.duplicate_tokens, " duplicate token(s)");
  if (report != nullptr) *report = stats;
  return EmbeddingStore(std::move(tokens), std::move(values), *dim);
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    out << store.token(id);
    for (double x : store.vector(id)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

double dot(std::span<const double> u, std::span<const double> v) {
  const std::size_t n = u.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += u[k] * v[k];
    s1 += u[k + 1] * v[k + 1];
    s2 += u[k + 2] * v[k + 2];
    s3 += u[k + 3] * v[k + 3];
  }
  for (; k < n; ++k) s0 += u[k] * v[k];
  return (s0 + s1) + (s2 + s3);
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(ErrorCode::invalid_argument, "cosine_distance: length mismatch");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) fail(ErrorCode::invalid_argument, "cosine_distance: zero-norm vector");
  const double d = 1.0 - dot(u, v) / (nu * nv);
  return std::clamp(d, 0.0, 2.0);
}

namespace {

using v4d = double __attribute__((vector_size(32)));
static_assert(EmbeddingStore::kUnitBlock == 8);

// sims[r] = sum_k unit[r][k] * p[k], accumulated in k order so every ISA
// variant produces the same bits.
__attribute__((target_clones("avx2", "default"))) void unit_sims(const double* blocks, std::size_t n_blocks,
                                                               const double* p, std::size_t dim, double* sims) {
  // Two blocks per pass keep four independent accumulator chains in flight.
  std::size_t b = 0;
  for (; b + 2 <= n_blocks; b += 2) {
    const double* b0 = blocks + b * 8 * dim;
    const double* b1 = b0 + 8 * dim;
    v4d a0 = {0, 0, 0, 0}, a1 = a0, a2 = a0, a3 = a0;
    for (std::size_t k = 0; k < dim; ++k) {
      const v4d pk = {p[k], p[k], p[k], p[k]};
      v4d x0, x1, x2, x3;
      std::memcpy(&x0, b0 + k * 8, sizeof x0);
      std::memcpy(&x1, b0 + k * 8 + 4, sizeof x1);
      std::memcpy(&x2, b1 + k * 8, sizeof x2);
      std::memcpy(&x3, b1 + k * 8 + 4, sizeof x3);
      a0 += x0 * pk;
      a1 += x1 * pk;
      a2 += x2 * pk;
      a3 += x3 * pk;
    }
    std::memcpy(sims + b * 8, &a0, sizeof a0);
    std::memcpy(sims + b * 8 + 4, &a1, sizeof a1);
    std::memcpy(sims + b * 8 + 8, &a2, sizeof a2);
    std::memcpy(sims + b * 8 + 12, &a3, sizeof a3);
  }
  for (; b < n_blocks; ++b) {
    const double* blk = blocks + b * 8 * dim;
    v4d lo = {0, 0, 0, 0}, hi = lo;
    for (std::size_t k = 0; k < dim; ++k) {
      const v4d pk = {p[k], p[k], p[k], p[k]};
      v4d x0, x1;
      std::memcpy(&x0, blk + k * 8, sizeof x0);
      std::memcpy(&x1, blk + k * 8 + 4, sizeof x1);
      lo += x0 * pk;
      hi += x1 * pk;
    }
    std::memcpy(sims + b * 8, &lo, sizeof lo);
    std::memcpy(sims + b * 8 + 4, &hi, sizeof hi);
  }
}

}  // namespace

TokenId nearest_token(const EmbeddingStore& store, std::span<const double> point,
                      std::span<const TokenId> exclude) {
  if (point.size() != store.dim())
    fail(ErrorCode::invalid_argument, "nearest_token: point has wrong dimension");
  const double np = l2_norm(point);
  if (np == 0.0) fail(ErrorCode::invalid_argument, "nearest_token: zero-norm point");

  const std::size_t n = store.size();
  thread_local std::vector<double> sims;
  const std::size_t n_blocks = (n + EmbeddingStore::kUnitBlock - 1) / EmbeddingStore::kUnitBlock;
  sims.resize(n_blocks * EmbeddingStore::kUnitBlock);
  unit_sims(store.unit_blocks().data(), n_blocks, point.data(), point.size(), sims.data());
  for (TokenId id : exclude)
    if (store.contains(id)) sims[static_cast<std::size_t>(id)] = -std::numeric_limits<double>::infinity();

  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r)
    if (sims[r] > best_sim && store.norm(static_cast<TokenId>(r)) != 0.0) best_sim = sims[r];
  if (best_sim == -std::numeric_limits<double>::infinity())
    fail(ErrorCode::invalid_argument, "nearest_token: every candidate row is excluded");

  // The blocked pass only shortlists; rows within rounding distance of the
  // best are re-ranked with the plain cosine distance so ties resolve exactly
  // as a row-by-row scan would.
  const double tol = 1e-9 * np;
  TokenId best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    if (sims[r] < best_sim - tol) continue;
    const auto id = static_cast<TokenId>(r);
    if (store.norm(id) == 0.0) continue;
    const double dist = cosine_distance(point, store.vector(id));
    if (dist < best_dist) {
      best_dist = dist;
      best = id;
    }
  }
  return best;
}

std::vector<double> doc_vector(const EmbeddingStore& store, std::span<const TokenId> token_ids) {
  if (token_ids.empty()) fail(ErrorCode::invalid_argument, "doc_vector: empty document");
  std::vector<double> acc(store.dim(), 0.0);
  for (TokenId id : token_ids) {
    auto v = store.vector(id);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
  }
  const auto n = static_cast<double>(token_ids.size());
  for (double& x : acc) x /= n;
  return acc;
}

void validate_tokens(const EmbeddingStore& store, std::span<const TokenId> token_ids,
                     std::string_view owner) {
  if (token_ids.empty())
    fail(ErrorCode::invalid_argument, std::string(owner) + " has no tokens");
  for (TokenId id : token_ids) {
    if (!store.contains(id))
      fail(ErrorCode::invalid_argument,
           std::string(owner) + " references token id " + std::to_string(id) + " outside the vocabulary");
  }
}

}  // namespace rp
