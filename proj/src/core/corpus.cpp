#include "core/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "core/common.hpp"
#include "core/log.hpp"

namespace rp {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool separator = c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c));
    if (separator) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

void QrelSet::set(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) fail(ErrorCode::invalid_argument, "relevance grade must be non-negative");
  judgments_[{query_id, doc_id}] = grade;
}

int QrelSet::grade(const std::string& query_id, const std::string& doc_id) const {
  auto it = judgments_.find({query_id, doc_id});
  return it == judgments_.end() ? 0 : it->second;
}

const TokenDoc* Corpus::find_doc(const std::string& doc_id) const {
  for (const auto& d : docs)
    if (d.doc_id == doc_id) return &d;
  return nullptr;
}

const Query* Corpus::find_query(const std::string& query_id) const {
  for (const auto& q : queries)
    if (q.query_id == query_id) return &q;
  return nullptr;
}

namespace {

struct TsvRecord {
  std::string id;
  std::string text;
};

std::vector<TsvRecord> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<TsvRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tab == std::string::npos) fail(ErrorCode::parse, where + ": expected id<TAB>text");
    std::string id = line.substr(0, tab);
    if (id.empty()) fail(ErrorCode::parse, where + ": empty id");
    if (!seen.insert(id).second) fail(ErrorCode::parse, where + ": duplicate id '" + id + "'");
    records.push_back({std::move(id), line.substr(tab + 1)});
  }
  return records;
}

// Maps tokens to ids, dropping OOV tokens. Returns the number dropped.
std::size_t to_ids(const std::vector<std::string>& tokens, const EmbeddingStore& store, std::vector<TokenId>& ids) {
  std::size_t dropped = 0;
  for (const auto& t : tokens) {
    if (auto id = store.find(t)) {
      ids.push_back(*id);
    } else {
      ++dropped;
    }
  }
  return dropped;
}

}  // namespace

Corpus ingest(const std::filesystem::path& queries_path, const std::filesystem::path& docs_path,
              const std::filesystem::path& qrels_path, const EmbeddingStore& store) {
  Corpus corpus;

  for (auto& rec : read_tsv(queries_path)) {
    Query q{rec.id, {}};
    corpus.report.query_tokens_dropped += to_ids(tokenize(rec.text), store, q.token_ids);
    if (q.token_ids.empty()) {
      corpus.report.excluded_queries.push_back(rec.id);
      continue;
    }
    corpus.queries.push_back(std::move(q));
  }

  for (auto& rec : read_tsv(docs_path)) {
    const auto tokens = tokenize(rec.text);
    TokenDoc d{rec.id, {}};
    const std::size_t dropped = to_ids(tokens, store, d.token_ids);
    corpus.report.docs.push_back({rec.id, tokens.size(), dropped});
    if (d.token_ids.empty()) {
      corpus.report.excluded_docs.push_back(rec.id);
      continue;
    }
    corpus.docs.push_back(std::move(d));
  }

  std::unordered_set<std::string> query_ids;
  std::unordered_set<std::string> doc_ids;
  for (const auto& q : corpus.queries) query_ids.insert(q.query_id);
  for (const auto& d : corpus.docs) doc_ids.insert(d.doc_id);

  std::ifstream in(qrels_path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + qrels_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    const std::string where = qrels_path.string() + ":" + std::to_string(line_no);
    if (parts.size() != 4) fail(ErrorCode::parse, where + ": expected 'qid 0 docid grade'");
    int grade = 0;
    const auto& g = parts[3];
    auto [ptr, ec] = std::from_chars(g.data(), g.data() + g.size(), grade);
    if (ec != std::errc() || ptr != g.data() + g.size() || grade < 0)
      fail(ErrorCode::parse, where + ": grade must be a non-negative integer");
    if (query_ids.count(parts[0]) == 0 || doc_ids.count(parts[2]) == 0) {
      ++corpus.report.unknown_qrels;
      continue;
    }
    corpus.qrels.set(parts[0], parts[2], grade);
  }

  if (corpus.report.unknown_qrels > 0)
    log::warn("ignored ", corpus.report.unknown_qrels, " judgment(s) naming unknown or excluded ids");
  if (!corpus.report.excluded_docs.empty())
    log::warn("excluded ", corpus.report.excluded_docs.size(), " document(s) with no in-vocabulary tokens");
  if (!corpus.report.excluded_queries.empty())
    log::warn("excluded ", corpus.report.excluded_queries.size(), " query(ies) with no in-vocabulary tokens");
  return corpus;
}

std::string render_oov_report(const IngestReport& report) {
  std::string out = "doc_id,total_tokens,dropped_tokens\n";
  for (const auto& e : report.docs) {
    out += e.doc_id;
    out += ',';
    out += std::to_string(e.total_tokens);
    out += ',';
    out += std::to_string(e.dropped_tokens);
    out += '\n';
  }
  return out;
}

CandidatePool sample_pool(const std::string& query_id, const QrelSet& qrels, std::span<const TokenDoc> docs,
                          std::size_t positives, std::size_t negatives, std::uint64_t seed) {
  std::vector<std::string> pos;
  std::vector<std::string> neg;       // judged grade 0
  std::vector<std::string> unjudged;
  for (const auto& d : docs) {
    if (qrels.relevant(query_id, d.doc_id)) pos.push_back(d.doc_id);
    else if (qrels.judged(query_id, d.doc_id)) neg.push_back(d.doc_id);
    else unjudged.push_back(d.doc_id);
  }
  if (pos.empty()) fail(ErrorCode::not_found, "query " + query_id + " has no relevant documents");

  Rng rng(seed);
  // Partial Fisher-Yates: the first k entries become a uniform sample.
  auto take = [&rng](std::vector<std::string>& items, std::size_t k) {
    k = std::min(k, items.size());
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.index(items.size() - i);
      std::swap(items[i], items[j]);
    }
    items.resize(k);
  };

  CandidatePool pool;
  pool.query_id = query_id;
  const std::size_t pos_available = pos.size();
  const std::size_t neg_available = neg.size() + unjudged.size();
  take(pos, positives);
  // Explicit negatives are drawn first; unjudged documents only fill the gap.
  take(neg, negatives);
  take(unjudged, negatives - neg.size());
  neg.insert(neg.end(), unjudged.begin(), unjudged.end());
  pool.positives = pos.size();
  pool.negatives = neg.size();
  pool.positive_shortfall = positives > pos_available ? positives - pos_available : 0;
  pool.negative_shortfall = negatives > neg_available ? negatives - neg_available : 0;
  pool.doc_ids = std::move(pos);
  pool.doc_ids.insert(pool.doc_ids.end(), neg.begin(), neg.end());
  return pool;
}

}  // namespace rp
