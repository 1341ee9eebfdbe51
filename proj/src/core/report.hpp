#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/attack.hpp"
#include "core/corpus.hpp"
#include "core/ranked_list.hpp"

namespace rp {

/// One table row per (dataset, ranker, variant, c).
struct MetricRow {
  std::string dataset;
  std::string ranker;
  std::string variant;
  std::size_t sparsity = 1;
  double s_at_1 = 0.0;
  double s_at_5 = 0.0;
  double nrc_mean = 0.0;
  double nrc_std = 0.0;  // population standard deviation
  std::optional<double> p5_before;
  std::optional<double> p5_after;
  std::optional<double> p5_drop;
  std::optional<double> mean_cos_sim;

  bool operator==(const MetricRow&) const = default;
};

/// Everything needed to score the attacks run against one query's list.
struct AttackedQuery {
  RankedList before;
  QrelSet qrels;
  std::vector<AttackOutcome> outcomes;
  std::vector<std::optional<double>> similarities;  // parallel to outcomes
};

/// S@1, S@5 and NRC over all outcomes; P@5 before/after averaged over the
/// queries; p5_drop = (before - after) / before on those means;
/// mean_cos_sim over outcomes with a defined similarity.
MetricRow summarize(std::string dataset, std::string ranker, std::string variant, std::size_t sparsity,
                    std::span<const AttackedQuery> queries);

enum class ReportFormat { csv, markdown };

/// Rows are sorted by (dataset, ranker, variant, c).
std::string render_csv(std::span<const MetricRow> rows);
std::string render_markdown(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_csv(std::string_view text);

/// Throws on an empty collection or an unwritable path.
void emit_report(std::span<const MetricRow> rows, ReportFormat format, const std::filesystem::path& path);

/// Shortest decimal that round-trips.
std::string format_number(double value);

}  // namespace rp
