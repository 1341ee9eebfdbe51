/* rank_perturb: black-box embedding-space attacks on text rankers. */
#ifndef RANK_PERTURB_H
#define RANK_PERTURB_H

#include <stddef.h>
#include <stdint.h>

#if defined(RP_BUILDING_LIBRARY)
#define RP_API __attribute__((visibility("default")))
#else
#define RP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rp_status {
  RP_OK = 0,
  RP_ERR_INVALID_ARGUMENT = 1,
  RP_ERR_IO = 2,
  RP_ERR_PARSE = 3,
  RP_ERR_RANKER = 4,
  RP_ERR_NOT_FOUND = 5,
  RP_ERR_INTERNAL = 6
} rp_status;

typedef struct rp_embeddings rp_embeddings;
typedef struct rp_config rp_config;
typedef struct rp_ranker rp_ranker;

/* Message for the last failing call on this thread; never NULL. */
RP_API const char* rp_last_error(void);
RP_API const char* rp_version(void);

/* ---- embeddings ---- */

/* expected_dim 0 accepts the dimension of the first line. */
RP_API rp_status rp_embeddings_load(const char* path, size_t expected_dim, rp_embeddings** out);
RP_API void rp_embeddings_free(rp_embeddings* emb);
RP_API size_t rp_embeddings_size(const rp_embeddings* emb);
RP_API size_t rp_embeddings_dim(const rp_embeddings* emb);
/* Borrowed pointer valid for the lifetime of emb. */
RP_API const char* rp_embeddings_token(const rp_embeddings* emb, int32_t id);
RP_API rp_status rp_embeddings_lookup(const rp_embeddings* emb, const char* token, int32_t* id);
/* Copies dim values into out. */
RP_API rp_status rp_embeddings_vector(const rp_embeddings* emb, int32_t id, double* out, size_t out_len);
RP_API rp_status rp_embeddings_nearest(const rp_embeddings* emb, const double* point, size_t dim,
                                       const int32_t* exclude, size_t n_exclude, int32_t* id);
RP_API rp_status rp_cosine_distance(const double* u, const double* v, size_t dim, double* out);

/* ---- configuration ---- */

/* Keys use dotted form, e.g. "attack.variant". Values are strings; arrays are
   comma separated. Unknown keys are rejected when a command runs. */
RP_API rp_config* rp_config_new(void);
RP_API void rp_config_free(rp_config* cfg);
RP_API rp_status rp_config_load_file(rp_config* cfg, const char* path);
RP_API rp_status rp_config_set(rp_config* cfg, const char* key, const char* value);
/* Borrowed pointer or NULL when unset. */
RP_API const char* rp_config_get(const rp_config* cfg, const char* key);

/* ---- rankers ---- */

/* Uses ranker.* keys of cfg. The embeddings must outlive the ranker. Lexical
   rankers see statistics of the scored document only. */
RP_API rp_status rp_ranker_new(const rp_config* cfg, const rp_embeddings* emb, rp_ranker** out);
RP_API void rp_ranker_free(rp_ranker* ranker);
/* Tokenizes both texts; out-of-vocabulary tokens are dropped. */
RP_API rp_status rp_ranker_score_text(const rp_ranker* ranker, const char* query, const char* doc, double* score);

/* ---- commands (return process exit codes: 0 ok, 1 failure, 2 invalid) ---- */

RP_API int rp_cmd_ingest(const rp_config* cfg);
RP_API int rp_cmd_attack(const rp_config* cfg);
RP_API int rp_cmd_report(const rp_config* cfg);
/* On success *out is a TSV table to release with rp_string_free. */
RP_API rp_status rp_cmd_rank(const rp_config* cfg, const char* query_id, char** out);
RP_API void rp_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
