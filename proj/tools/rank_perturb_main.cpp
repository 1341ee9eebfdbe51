// rank-perturb command-line front end. Talks to the library only through the
// C API.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rank_perturb/rank_perturb.h"

namespace {

struct ConfigDeleter {
  void operator()(rp_config* c) const { rp_config_free(c); }
};

int invalid(const std::string& what) {
  std::cerr << "rank-perturb: " << what << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential-evolution adversarial attacks on black-box text rankers"};
  app.set_version_flag("--version", std::string(rp_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::string> variant, ranker, out, embeddings, queries, docs, qrels;
  std::optional<std::uint64_t> seed, sparsity, workers;
  bool paper_scale = false;
  bool hard_lock = false;
  std::vector<std::string> overrides;

  app.add_option("--config", config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--variant", variant, "attack variant: a0|a1|a2|a3");
  app.add_option("--sparsity", sparsity, "number of document tokens the attack may change");
  app.add_option("--seed", seed, "run seed");
  app.add_option("--ranker", ranker, "cosine_centroid|kernel_pooling|lexical_overlap|external");
  app.add_flag("--paper-scale", paper_scale, "population 500, 100 iterations");
  app.add_flag("--hard-query-lock", hard_lock, "never replace tokens that occur in the query");
  app.add_option("--out", out, "output directory");
  app.add_option("--embeddings", embeddings, "GloVe-format embedding file");
  app.add_option("--queries", queries, "query TSV (id, text)");
  app.add_option("--docs", docs, "document TSV (id, text)");
  app.add_option("--qrels", qrels, "TREC qrels");
  app.add_option("--workers", workers, "parallel query workers");
  app.add_option("--set", overrides, "override any config key, e.g. --set de.population=80");

  auto* ingest = app.add_subcommand("ingest", "tokenize and cache the corpus");
  auto* attack = app.add_subcommand("attack", "attack relevant documents in each top 5");
  auto* report = app.add_subcommand("report", "aggregate outcome files into report.csv and report.md");
  auto* rank = app.add_subcommand("rank", "print the ranked candidate pool of one query");
  std::string query_id;
  rank->add_option("--query", query_id, "query id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::unique_ptr<rp_config, ConfigDeleter> cfg(rp_config_new());
  if (!cfg) return invalid("out of memory");
  if (!config_path.empty() && rp_config_load_file(cfg.get(), config_path.c_str()) != RP_OK)
    return invalid(rp_last_error());

  auto set = [&](const char* key, const std::string& value) { rp_config_set(cfg.get(), key, value.c_str()); };
  if (variant) set("attack.variant", *variant);
  if (sparsity) set("attack.sparsity", std::to_string(*sparsity));
  if (seed) set("seed", std::to_string(*seed));
  if (ranker) set("ranker.kind", *ranker);
  if (paper_scale) set("paper_scale", "true");
  if (hard_lock) set("attack.hard_query_lock", "true");
  if (out) set("out", *out);
  if (embeddings) set("paths.embeddings", *embeddings);
  if (queries) set("paths.queries", *queries);
  if (docs) set("paths.docs", *docs);
  if (qrels) set("paths.qrels", *qrels);
  if (workers) set("workers", std::to_string(*workers));
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) return invalid("--set expects key=value, got '" + kv + "'");
    set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
  }

  if (*ingest) return rp_cmd_ingest(cfg.get());
  if (*attack) return rp_cmd_attack(cfg.get());
  if (*report) return rp_cmd_report(cfg.get());
  if (*rank) {
    char* text = nullptr;
    const rp_status st = rp_cmd_rank(cfg.get(), query_id.c_str(), &text);
    if (st != RP_OK) {
      std::cerr << "rank-perturb: " << rp_last_error() << "\n";
      return st == RP_ERR_RANKER || st == RP_ERR_INTERNAL ? 1 : 2;
    }
    std::fputs(text, stdout);
    rp_string_free(text);
    return 0;
  }
  return 2;
}
