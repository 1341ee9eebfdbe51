#include "rank_perturb/rank_perturb.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "core/commands.hpp"
#include "core/common.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/embedding.hpp"
#include "core/log.hpp"
#include "core/rankers.hpp"

struct rp_embeddings {
  rp::EmbeddingStore store;
};

struct rp_config {
  rp::FlatConfig flat;
};

struct rp_ranker {
  const rp::EmbeddingStore* store = nullptr;
  rp::RankerSpec spec;
  std::unique_ptr<rp::Ranker> ranker;
};

namespace {

thread_local std::string g_last_error;

rp_status to_status(rp::ErrorCode code) {
  switch (code) {
    case rp::ErrorCode::invalid_argument: return RP_ERR_INVALID_ARGUMENT;
    case rp::ErrorCode::io: return RP_ERR_IO;
    case rp::ErrorCode::parse: return RP_ERR_PARSE;
    case rp::ErrorCode::ranker: return RP_ERR_RANKER;
    case rp::ErrorCode::not_found: return RP_ERR_NOT_FOUND;
    case rp::ErrorCode::internal: return RP_ERR_INTERNAL;
  }
  return RP_ERR_INTERNAL;
}

template <typename Fn>
rp_status wrap(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RP_OK;
  } catch (const rp::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RP_ERR_INTERNAL;
  }
}

rp_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return RP_ERR_INVALID_ARGUMENT;
}

// Config problems are validation failures of the command.
template <typename Fn>
int run_command(const rp_config* cfg, Fn&& fn) {
  if (!cfg) {
    g_last_error = "config must not be NULL";
    return rp::exit_invalid;
  }
  rp::RunConfig run;
  try {
    run = rp::RunConfig::from_flat(cfg->flat);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    rp::log::error("config: ", e.what());
    return rp::exit_invalid;
  }
  try {
    return fn(run);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return rp::exit_failed;
  }
}

}  // namespace

extern "C" {

const char* rp_last_error(void) { return g_last_error.c_str(); }

const char* rp_version(void) { return rp::kVersion; }

rp_status rp_embeddings_load(const char* path, size_t expected_dim, rp_embeddings** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return wrap([&] {
    std::optional<std::size_t> dim;
    if (expected_dim) dim = expected_dim;
    *out = new rp_embeddings{rp::load_embeddings(path, dim)};
  });
}

void rp_embeddings_free(rp_embeddings* emb) { delete emb; }

size_t rp_embeddings_size(const rp_embeddings* emb) { return emb ? emb->store.size() : 0; }

size_t rp_embeddings_dim(const rp_embeddings* emb) { return emb ? emb->store.dim() : 0; }

const char* rp_embeddings_token(const rp_embeddings* emb, int32_t id) {
  if (!emb || !emb->store.contains(id)) return nullptr;
  return emb->store.token(id).c_str();
}

rp_status rp_embeddings_lookup(const rp_embeddings* emb, const char* token, int32_t* id) {
  if (!emb) return null_arg("embeddings");
  if (!token) return null_arg("token");
  if (!id) return null_arg("id");
  return wrap([&] {
    const auto found = emb->store.find(token);
    if (!found) rp::fail(rp::ErrorCode::not_found, std::string("unknown token '") + token + "'");
    *id = *found;
  });
}

rp_status rp_embeddings_vector(const rp_embeddings* emb, int32_t id, double* out, size_t out_len) {
  if (!emb) return null_arg("embeddings");
  if (!out) return null_arg("out");
  return wrap([&] {
    if (!emb->store.contains(id)) rp::fail(rp::ErrorCode::not_found, "token id out of range");
    if (out_len < emb->store.dim()) rp::fail(rp::ErrorCode::invalid_argument, "output buffer too small");
    const auto v = emb->store.vector(id);
    std::memcpy(out, v.data(), v.size() * sizeof(double));
  });
}

rp_status rp_embeddings_nearest(const rp_embeddings* emb, const double* point, size_t dim, const int32_t* exclude,
                                size_t n_exclude, int32_t* id) {
  if (!emb) return null_arg("embeddings");
  if (!point) return null_arg("point");
  if (!id) return null_arg("id");
  if (n_exclude && !exclude) return null_arg("exclude");
  return wrap([&] {
    if (dim != emb->store.dim()) rp::fail(rp::ErrorCode::invalid_argument, "point dimension mismatch");
    *id = rp::nearest_token(emb->store, {point, dim}, {exclude, n_exclude});
  });
}

rp_status rp_cosine_distance(const double* u, const double* v, size_t dim, double* out) {
  if (!u || !v) return null_arg("vector");
  if (!out) return null_arg("out");
  return wrap([&] { *out = rp::cosine_distance({u, dim}, {v, dim}); });
}

rp_config* rp_config_new(void) {
  try {
    return new rp_config{};
  } catch (...) {
    g_last_error = "out of memory";
    return nullptr;
  }
}

void rp_config_free(rp_config* cfg) { delete cfg; }

rp_status rp_config_load_file(rp_config* cfg, const char* path) {
  if (!cfg) return null_arg("config");
  if (!path) return null_arg("path");
  return wrap([&] {
    for (auto& [key, value] : rp::load_toml(path)) cfg->flat[key] = value;
  });
}

rp_status rp_config_set(rp_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("config");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return wrap([&] { cfg->flat[key] = value; });
}

const char* rp_config_get(const rp_config* cfg, const char* key) {
  if (!cfg || !key) return nullptr;
  auto it = cfg->flat.find(key);
  return it == cfg->flat.end() ? nullptr : it->second.c_str();
}

rp_status rp_ranker_new(const rp_config* cfg, const rp_embeddings* emb, rp_ranker** out) {
  if (!cfg) return null_arg("config");
  if (!emb) return null_arg("embeddings");
  if (!out) return null_arg("out");
  *out = nullptr;
  return wrap([&] {
    auto r = std::make_unique<rp_ranker>();
    r->store = &emb->store;
    r->spec = rp::RunConfig::from_flat(cfg->flat).ranker;
    if (r->spec.kind != rp::RankerKind::lexical_overlap) r->ranker = rp::make_ranker(r->spec, emb->store);
    *out = r.release();
  });
}

void rp_ranker_free(rp_ranker* ranker) { delete ranker; }

rp_status rp_ranker_score_text(const rp_ranker* ranker, const char* query, const char* doc, double* score) {
  if (!ranker) return null_arg("ranker");
  if (!query || !doc) return null_arg("text");
  if (!score) return null_arg("score");
  return wrap([&] {
    auto to_ids = [&](const char* text) {
      std::vector<rp::TokenId> ids;
      for (const auto& t : rp::tokenize(text))
        if (auto id = ranker->store->find(t)) ids.push_back(*id);
      return ids;
    };
    const rp::Query q{"q", to_ids(query)};
    const rp::TokenDoc d{"d", to_ids(doc)};
    if (q.token_ids.empty()) rp::fail(rp::ErrorCode::invalid_argument, "query has no in-vocabulary tokens");
    if (d.token_ids.empty()) rp::fail(rp::ErrorCode::invalid_argument, "document has no in-vocabulary tokens");
    if (ranker->ranker) {
      *score = ranker->ranker->score(q, d).value;
    } else {
      const auto stats = rp::CorpusStats::from_docs(std::span<const rp::TokenDoc>(&d, 1));
      *score = rp::make_ranker(ranker->spec, *ranker->store, &stats)->score(q, d).value;
    }
  });
}

int rp_cmd_ingest(const rp_config* cfg) {
  return run_command(cfg, [](const rp::RunConfig& run) { return rp::cmd_ingest(run); });
}

int rp_cmd_attack(const rp_config* cfg) {
  return run_command(cfg, [](const rp::RunConfig& run) { return rp::cmd_attack(run); });
}

int rp_cmd_report(const rp_config* cfg) {
  return run_command(cfg, [](const rp::RunConfig& run) { return rp::cmd_report(run); });
}

rp_status rp_cmd_rank(const rp_config* cfg, const char* query_id, char** out) {
  if (!cfg) return null_arg("config");
  if (!query_id) return null_arg("query_id");
  if (!out) return null_arg("out");
  *out = nullptr;
  return wrap([&] {
    const std::string text = rp::cmd_rank(rp::RunConfig::from_flat(cfg->flat), query_id);
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

void rp_string_free(char* s) { delete[] s; }

}  // extern "C"
