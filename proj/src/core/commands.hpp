#pragma once

#include <string>

#include "core/config.hpp"

namespace rp {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes shared by every command.
enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_invalid = 2 };

/// Tokenizes the corpus and writes out/cache/{corpus.json, oov_report.csv,
/// manifest.json}.
int cmd_ingest(const RunConfig& config);

/// Attacks the relevant documents in each query's top 5 and writes
/// out/outcomes_<ranker>_<variant>_c<c>.jsonl plus a matching manifest.
int cmd_attack(const RunConfig& config);

/// Aggregates every outcomes_*.jsonl under out/ into report.csv and report.md.
int cmd_report(const RunConfig& config);

/// Ranked candidate pool for one query as TSV (rank, doc_id, score, grade).
/// Throws on failure.
std::string cmd_rank(const RunConfig& config, const std::string& query_id);

/// File stem shared by the outcomes and manifest files of an attack run.
std::string run_stem(const RunConfig& config);

}  // namespace rp
