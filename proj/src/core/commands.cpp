#include "core/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "core/attack.hpp"
#include "core/common.hpp"
#include "core/corpus.hpp"
#include "core/embedding.hpp"
#include "core/eval.hpp"
#include "core/hash.hpp"
#include "core/log.hpp"
#include "core/rankers.hpp"
#include "core/report.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace rp {

namespace {

constexpr const char* kCacheFormat = "rank-perturb-cache/1";
constexpr std::size_t kTopK = 5;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) fail(ErrorCode::invalid_argument, std::string("no ") + what + " path configured");
  if (!fs::is_regular_file(path)) fail(ErrorCode::io, std::string(what) + " file not found: " + path.string());
}

json input_entry(const fs::path& path) { return {{"path", path.string()}, {"sha256", sha256_file(path)}}; }

// Maps library errors to exit codes and logs them.
template <typename Fn>
int guarded(const char* command, Fn&& fn) {
  try {
    return fn();
  } catch (const RankerError& e) {
    log::error(command, ": ranker failure: ", e.what());
    return exit_failed;
  } catch (const Error& e) {
    log::error(command, ": ", e.what());
    return e.code() == ErrorCode::internal ? exit_failed : exit_invalid;
  } catch (const json::exception& e) {
    log::error(command, ": malformed JSON: ", e.what());
    return exit_invalid;
  } catch (const std::exception& e) {
    log::error(command, ": ", e.what());
    return exit_failed;
  }
}

std::vector<std::string> token_strings(const EmbeddingStore& store, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(store.token(id));
  return out;
}

std::vector<TokenId> token_ids(const EmbeddingStore& store, const json& tokens, const std::string& owner) {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto id = store.find(t.get<std::string>());
    if (!id) fail(ErrorCode::invalid_argument, "cache is stale: token '" + t.get<std::string>() + "' of " + owner +
                                                   " is not in the embedding file");
    out.push_back(*id);
  }
  return out;
}

struct LoadedCache {
  EmbeddingStore store;
  Corpus corpus;
  json inputs;
};

fs::path cache_dir(const RunConfig& config) { return config.out / "cache"; }

LoadedCache load_cache(const RunConfig& config) {
  const fs::path corpus_path = cache_dir(config) / "corpus.json";
  if (!fs::is_regular_file(corpus_path))
    fail(ErrorCode::invalid_argument, "no ingested corpus at " + corpus_path.string() + "; run ingest first");
  const json cache = json::parse(read_file(corpus_path));
  if (cache.value("format", "") != kCacheFormat)
    fail(ErrorCode::invalid_argument, "unrecognised cache format in " + corpus_path.string());

  fs::path emb_path = config.embeddings;
  if (emb_path.empty()) emb_path = cache.at("inputs").at("embeddings").at("path").get<std::string>();
  require_file(emb_path, "embeddings");
  if (sha256_file(emb_path) != cache.at("inputs").at("embeddings").at("sha256").get<std::string>())
    fail(ErrorCode::invalid_argument, "cache is stale: " + emb_path.string() + " changed since ingest");
  const std::pair<const char*, const fs::path*> corpus_inputs[] = {
      {"queries", &config.queries}, {"docs", &config.docs}, {"qrels", &config.qrels}};
  for (const auto& [name, path] : corpus_inputs) {
    if (path->empty()) continue;
    require_file(*path, name);
    if (sha256_file(*path) != cache.at("inputs").at(name).at("sha256").get<std::string>())
      fail(ErrorCode::invalid_argument, "cache is stale: " + path->string() + " changed since ingest");
  }

  LoadedCache out{load_embeddings(emb_path, config.embedding_dim), {}, cache.at("inputs")};
  for (const auto& q : cache.at("queries")) {
    const std::string id = q.at("id").get<std::string>();
    out.corpus.queries.push_back({id, token_ids(out.store, q.at("tokens"), "query " + id)});
  }
  for (const auto& d : cache.at("docs")) {
    const std::string id = d.at("id").get<std::string>();
    out.corpus.docs.push_back({id, token_ids(out.store, d.at("tokens"), "document " + id)});
  }
  for (const auto& j : cache.at("qrels"))
    out.corpus.qrels.set(j.at(0).get<std::string>(), j.at(1).get<std::string>(), j.at(2).get<int>());
  return out;
}

struct QueryPlan {
  CandidatePool pool;
  std::vector<TokenDoc> context;
  RankedList before;
};

QueryPlan plan_query(const RunConfig& config, const Corpus& corpus, const Query& query, const Ranker& ranker) {
  const std::uint64_t qseed = derive_seed(config.seed, "query:" + query.query_id);
  QueryPlan plan;
  plan.pool = sample_pool(query.query_id, corpus.qrels, corpus.docs, config.pool_positives, config.pool_negatives,
                          derive_seed(qseed, "pool"));
  if (plan.pool.positive_shortfall || plan.pool.negative_shortfall)
    log::info("query ", query.query_id, ": pool short by ", plan.pool.positive_shortfall, " positives and ",
              plan.pool.negative_shortfall, " negatives");
  for (const auto& id : plan.pool.doc_ids) plan.context.push_back(*corpus.find_doc(id));
  plan.before = rank(ranker, query, plan.context);
  return plan;
}

struct QueryResult {
  std::vector<std::string> lines;
  bool attempted = false;
  bool failed = false;
};

std::size_t query_tokens_replaced(const Query& query, std::span<const Replacement> replaced) {
  std::size_t n = 0;
  for (const auto& r : replaced)
    if (std::find(query.token_ids.begin(), query.token_ids.end(), r.old_token) != query.token_ids.end()) ++n;
  return n;
}

std::string outcome_line(const RunConfig& config, const EmbeddingStore& store, const Query& query,
                         const QueryPlan& plan, const QrelSet& qrels, const AttackOutcome& o) {
  json j;
  j["dataset"] = config.dataset;
  j["ranker"] = std::string(to_string(config.ranker.kind));
  j["variant"] = config.variant_label();
  j["c"] = o.sparsity;
  j["seed"] = config.seed;
  j["query_id"] = o.query_id;
  j["doc_id"] = o.doc_id;
  j["original_tokens"] = token_strings(store, o.original_tokens);
  j["perturbed_tokens"] = token_strings(store, o.perturbed_tokens);
  json replaced = json::array();
  for (const auto& r : o.replaced)
    replaced.push_back({{"position", r.position}, {"old", store.token(r.old_token)}, {"new", store.token(r.new_token)}});
  j["replaced"] = replaced;
  j["rank_before"] = o.rank_before;
  j["rank_after"] = o.rank_after;
  j["score_before"] = o.score_before.value;
  j["score_after"] = o.score_after.value;
  j["best_fitness"] = o.best_fitness;
  j["fitness_trace"] = o.fitness_trace;
  j["evaluations"] = o.evaluations;
  const auto sim = doc_similarity(o.original_tokens, o.perturbed_tokens, store);
  j["doc_similarity"] = sim ? json(*sim) : json(nullptr);
  j["query_tokens_replaced"] = query_tokens_replaced(query, o.replaced);
  json context = json::array();
  for (const auto& e : plan.before.entries())
    context.push_back({{"doc_id", e.doc_id}, {"score", e.score.value}, {"grade", qrels.grade(query.query_id, e.doc_id)}});
  j["context"] = context;
  return j.dump();
}

QueryResult run_query(const RunConfig& config, const EmbeddingStore& store, const Corpus& corpus,
                      const Query& query, const Ranker& ranker) {
  QueryResult result;
  result.attempted = true;
  const std::uint64_t qseed = derive_seed(config.seed, "query:" + query.query_id);
  try {
    QueryPlan plan;
    try {
      plan = plan_query(config, corpus, query, ranker);
    } catch (const RankerError&) {
      throw;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::not_found) throw;
      log::info("query ", query.query_id, ": no relevant documents; skipped");
      result.attempted = false;
      return result;
    }
    std::vector<std::string> targets;
    const auto& entries = plan.before.entries();
    for (std::size_t i = 0; i < std::min(kTopK, entries.size()); ++i)
      if (corpus.qrels.relevant(query.query_id, entries[i].doc_id)) targets.push_back(entries[i].doc_id);
    if (targets.empty()) {
      log::info("query ", query.query_id, ": no relevant documents in the top ", kTopK, "; zero outcomes");
      return result;
    }
    for (const auto& doc_id : targets) {
      const TokenDoc& doc = *corpus.find_doc(doc_id);
      const std::uint64_t aseed = derive_seed(qseed, "attack:" + doc_id);
      AttackOutcome outcome;
      if (config.attack.variant == Variant::A0) {
        outcome = baseline_a0(query, doc, plan.before, ranker, store, aseed, config.attack.hard_query_lock);
      } else {
        DEConfig de = config.de;
        de.seed = aseed;
        AttackConfig ac = config.attack;
        ac.sparsity = std::min(ac.sparsity, doc.token_ids.size());
        outcome = attack(query, doc, plan.before, ranker, store, ac, de);
        outcome.sparsity = config.attack.sparsity;
      }
      result.lines.push_back(outcome_line(config, store, query, plan, corpus.qrels, outcome));
      log::debug("query ", query.query_id, " doc ", doc_id, ": rank ", outcome.rank_before, " -> ",
                 outcome.rank_after);
    }
  } catch (const RankerError& e) {
    log::warn("query ", query.query_id, ": ranker failure, query skipped: ", e.what());
    result.lines.clear();
    result.failed = true;
  }
  return result;
}

std::unique_ptr<Ranker> build_ranker(const RunConfig& config, const EmbeddingStore& store, const Corpus& corpus,
                                     CorpusStats& stats) {
  stats = CorpusStats::from_docs(corpus.docs);
  return make_ranker(config.ranker, store, &stats);
}

}  // namespace

std::string run_stem(const RunConfig& config) {
  return std::string(to_string(config.ranker.kind)) + "_" + config.variant_label() + "_c" +
         std::to_string(config.attack.sparsity);
}

int cmd_ingest(const RunConfig& config) {
  return guarded("ingest", [&] {
    require_file(config.embeddings, "embeddings");
    require_file(config.queries, "queries");
    require_file(config.docs, "docs");
    require_file(config.qrels, "qrels");

    EmbeddingLoadReport load_report;
    const EmbeddingStore store = load_embeddings(config.embeddings, config.embedding_dim, &load_report);
    if (load_report.duplicate_tokens || load_report.rejected_lines)
      log::warn("embeddings: ", load_report.duplicate_tokens, " duplicate tokens and ", load_report.rejected_lines,
                " malformed lines skipped");
    const Corpus corpus = ingest(config.queries, config.docs, config.qrels, store);
    if (corpus.queries.empty()) fail(ErrorCode::invalid_argument, "no usable queries after ingest");
    if (corpus.docs.empty()) fail(ErrorCode::invalid_argument, "no usable documents after ingest");

    json inputs;
    inputs["embeddings"] = input_entry(config.embeddings);
    inputs["queries"] = input_entry(config.queries);
    inputs["docs"] = input_entry(config.docs);
    inputs["qrels"] = input_entry(config.qrels);

    json cache;
    cache["format"] = kCacheFormat;
    cache["inputs"] = inputs;
    cache["embedding_dim"] = store.dim();
    json queries = json::array();
    for (const auto& q : corpus.queries)
      queries.push_back({{"id", q.query_id}, {"tokens", token_strings(store, q.token_ids)}});
    cache["queries"] = queries;
    json docs = json::array();
    for (const auto& d : corpus.docs)
      docs.push_back({{"id", d.doc_id}, {"tokens", token_strings(store, d.token_ids)}});
    cache["docs"] = docs;
    json qrels = json::array();
    for (const auto& [key, grade] : corpus.qrels.judgments()) qrels.push_back({key.first, key.second, grade});
    cache["qrels"] = qrels;
    cache["excluded_queries"] = corpus.report.excluded_queries;
    cache["excluded_docs"] = corpus.report.excluded_docs;
    cache["query_tokens_dropped"] = corpus.report.query_tokens_dropped;
    cache["unknown_qrels"] = corpus.report.unknown_qrels;

    const fs::path dir = cache_dir(config);
    fs::create_directories(dir);
    write_file(dir / "corpus.json", cache.dump(1) + "\n");
    write_file(dir / "oov_report.csv", render_oov_report(corpus.report));

    json manifest;
    manifest["command"] = "ingest";
    manifest["version"] = kVersion;
    manifest["config"] = config.to_json();
    manifest["inputs"] = inputs;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    log::info("ingest: ", corpus.queries.size(), " queries, ", corpus.docs.size(), " documents, ",
              corpus.qrels.size(), " judgments");
    return static_cast<int>(exit_ok);
  });
}

int cmd_attack(const RunConfig& config) {
  return guarded("attack", [&] {
    const LoadedCache cache = load_cache(config);
    CorpusStats stats;
    const auto ranker = build_ranker(config, cache.store, cache.corpus, stats);

    const auto& queries = cache.corpus.queries;
    std::vector<QueryResult> results(queries.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < queries.size(); i = next++)
        results[i] = run_query(config, cache.store, cache.corpus, queries[i], *ranker);
    };
    const std::size_t workers = std::min(config.workers, std::max<std::size_t>(1, queries.size()));
    if (workers <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    std::string body;
    std::size_t attempted = 0;
    std::size_t failed = 0;
    std::size_t outcomes = 0;
    json skipped = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (r.attempted) ++attempted;
      if (r.failed) {
        ++failed;
        skipped.push_back(queries[i].query_id);
      }
      for (const auto& line : r.lines) body += line + "\n";
      outcomes += r.lines.size();
    }

    fs::create_directories(config.out);
    const std::string stem = run_stem(config);
    write_file(config.out / ("outcomes_" + stem + ".jsonl"), body);

    json manifest;
    manifest["command"] = "attack";
    manifest["version"] = kVersion;
    manifest["config"] = config.to_json();
    manifest["inputs"] = cache.inputs;
    manifest["outcomes"] = outcomes;
    manifest["skipped_queries"] = skipped;
    write_file(config.out / ("manifest_" + stem + ".json"), manifest.dump(2) + "\n");

    log::info("attack: ", outcomes, " outcomes over ", attempted, " queries, ", failed, " skipped");
    if (attempted > 0 && failed == attempted) {
      log::error("attack: every query failed");
      return static_cast<int>(exit_failed);
    }
    return static_cast<int>(exit_ok);
  });
}

int cmd_report(const RunConfig& config) {
  return guarded("report", [&] {
    std::vector<fs::path> files;
    if (fs::is_directory(config.out)) {
      for (const auto& entry : fs::directory_iterator(config.out)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("outcomes_", 0) == 0 && entry.path().extension() == ".jsonl")
          files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());

    using Key = std::tuple<std::string, std::string, std::string, std::size_t>;
    struct Group {
      std::vector<std::string> order;
      std::map<std::string, AttackedQuery> queries;
    };
    std::map<Key, Group> groups;

    for (const auto& file : files) {
      std::istringstream in(read_file(file));
      std::size_t line_no = 0;
      for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception& e) {
          fail(ErrorCode::parse, file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const std::string variant_label = j.at("variant").get<std::string>();
        Key key{j.at("dataset").get<std::string>(), j.at("ranker").get<std::string>(), variant_label,
                j.at("c").get<std::size_t>()};
        Group& g = groups[key];
        const std::string qid = j.at("query_id").get<std::string>();
        auto it = g.queries.find(qid);
        if (it == g.queries.end()) {
          std::vector<RankedEntry> entries;
          QrelSet qrels;
          for (const auto& c : j.at("context")) {
            const std::string did = c.at("doc_id").get<std::string>();
            entries.push_back({did, Score{c.at("score").get<double>(), false}});
            const int grade = c.at("grade").get<int>();
            if (grade != 0) qrels.set(qid, did, grade);
          }
          it = g.queries.emplace(qid, AttackedQuery{RankedList(qid, std::move(entries)), std::move(qrels), {}, {}})
                   .first;
          g.order.push_back(qid);
        }
        AttackOutcome o;
        o.query_id = qid;
        o.doc_id = j.at("doc_id").get<std::string>();
        o.variant = parse_variant(variant_label.substr(0, variant_label.find('-')));
        o.sparsity = std::get<3>(key);
        o.rank_before = j.at("rank_before").get<std::size_t>();
        o.rank_after = j.at("rank_after").get<std::size_t>();
        o.score_before = Score{j.at("score_before").get<double>(), false};
        o.score_after = Score{j.at("score_after").get<double>(), false};
        it->second.outcomes.push_back(std::move(o));
        const auto& sim = j.at("doc_similarity");
        it->second.similarities.push_back(sim.is_null() ? std::nullopt : std::optional<double>(sim.get<double>()));
      }
    }
    if (groups.empty()) fail(ErrorCode::invalid_argument, "no attack outcomes found under " + config.out.string());

    std::vector<MetricRow> rows;
    for (const auto& [key, g] : groups) {
      std::vector<AttackedQuery> queries;
      for (const auto& qid : g.order) queries.push_back(g.queries.at(qid));
      rows.push_back(summarize(std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), queries));
    }
    emit_report(rows, ReportFormat::csv, config.out / "report.csv");
    emit_report(rows, ReportFormat::markdown, config.out / "report.md");
    log::info("report: ", rows.size(), " rows from ", files.size(), " outcome files");
    return static_cast<int>(exit_ok);
  });
}

std::string cmd_rank(const RunConfig& config, const std::string& query_id) {
  const LoadedCache cache = load_cache(config);
  const Query* query = cache.corpus.find_query(query_id);
  if (!query) fail(ErrorCode::not_found, "unknown query id " + query_id);
  CorpusStats stats;
  const auto ranker = build_ranker(config, cache.store, cache.corpus, stats);
  const QueryPlan plan = plan_query(config, cache.corpus, *query, *ranker);
  std::string out = "rank\tdoc_id\tscore\tgrade\n";
  std::size_t r = 0;
  for (const auto& e : plan.before.entries())
    out += std::to_string(++r) + "\t" + e.doc_id + "\t" + format_number(e.score.value) + "\t" +
           std::to_string(cache.corpus.qrels.grade(query_id, e.doc_id)) + "\n";
  return out;
}

}  // namespace rp
