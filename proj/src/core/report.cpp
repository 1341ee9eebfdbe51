#include "core/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "core/common.hpp"
#include "core/eval.hpp"

namespace rp {

namespace {

constexpr const char* kCsvHeader =
    "dataset,ranker,variant,c,s_at_1,s_at_5,nrc_mean,nrc_std,p5_before,p5_after,p5_drop,mean_cos_sim";

std::vector<MetricRow> sorted(std::span<const MetricRow> rows) {
  std::vector<MetricRow> out(rows.begin(), rows.end());
  std::stable_sort(out.begin(), out.end(), [](const MetricRow& a, const MetricRow& b) {
    return std::tie(a.dataset, a.ranker, a.variant, a.sparsity) < std::tie(b.dataset, b.ranker, b.variant, b.sparsity);
  });
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string fixed(const std::optional<double>& v, int digits = 4) {
  if (!v) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) fail(ErrorCode::parse, "report CSV: unterminated quote");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_number(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorCode::parse, "report CSV: bad number '" + s + "'");
  return v;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_number(s);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

MetricRow summarize(std::string dataset, std::string ranker, std::string variant, std::size_t sparsity,
                    std::span<const AttackedQuery> queries) {
  MetricRow row;
  row.dataset = std::move(dataset);
  row.ranker = std::move(ranker);
  row.variant = std::move(variant);
  row.sparsity = sparsity;

  std::vector<double> nrcs;
  std::size_t hits1 = 0;
  std::size_t hits5 = 0;
  std::size_t total = 0;
  double sim_sum = 0.0;
  std::size_t sim_count = 0;
  double p_before_sum = 0.0;
  double p_after_sum = 0.0;
  std::size_t p_queries = 0;

  for (const auto& q : queries) {
    if (q.outcomes.empty()) continue;
    std::vector<AttackOutcome> relevant;
    for (std::size_t i = 0; i < q.outcomes.size(); ++i) {
      const auto& o = q.outcomes[i];
      const RankedList after = rescore_one(q.before, o.doc_id, o.score_after);
      nrcs.push_back(static_cast<double>(nrc(o, q.before, after, q.qrels)));
      if (i < q.similarities.size() && q.similarities[i]) {
        sim_sum += *q.similarities[i];
        ++sim_count;
      }
    }
    const double s1 = success_at_k(q.outcomes, q.qrels, 1);
    const double s5 = success_at_k(q.outcomes, q.qrels, 5);
    hits1 += static_cast<std::size_t>(std::lround(s1 * static_cast<double>(q.outcomes.size())));
    hits5 += static_cast<std::size_t>(std::lround(s5 * static_cast<double>(q.outcomes.size())));
    total += q.outcomes.size();

    p_before_sum += precision_at_k(q.before, q.qrels, 5).value;
    p_after_sum += *mean_precision_after(q.before, q.outcomes, q.qrels, 5);
    ++p_queries;
  }
  if (total == 0) fail(ErrorCode::invalid_argument, "summarize: no outcomes");

  row.s_at_1 = static_cast<double>(hits1) / static_cast<double>(total);
  row.s_at_5 = static_cast<double>(hits5) / static_cast<double>(total);
  double sum = 0.0;
  for (double v : nrcs) sum += v;
  row.nrc_mean = sum / static_cast<double>(nrcs.size());
  double sq = 0.0;
  for (double v : nrcs) sq += (v - row.nrc_mean) * (v - row.nrc_mean);
  row.nrc_std = std::sqrt(sq / static_cast<double>(nrcs.size()));

  row.p5_before = p_before_sum / static_cast<double>(p_queries);
  row.p5_after = p_after_sum / static_cast<double>(p_queries);
  if (*row.p5_before > 0.0) row.p5_drop = (*row.p5_before - *row.p5_after) / *row.p5_before;
  if (sim_count > 0) row.mean_cos_sim = sim_sum / static_cast<double>(sim_count);
  return row;
}

std::string render_csv(std::span<const MetricRow> rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : sorted(rows)) {
    out += csv_field(r.dataset) + ',' + csv_field(r.ranker) + ',' + csv_field(r.variant) + ',' +
           std::to_string(r.sparsity) + ',' + format_number(r.s_at_1) + ',' + format_number(r.s_at_5) + ',' +
           format_number(r.nrc_mean) + ',' + format_number(r.nrc_std) + ',' + opt_number(r.p5_before) + ',' +
           opt_number(r.p5_after) + ',' + opt_number(r.p5_drop) + ',' + opt_number(r.mean_cos_sim) + '\n';
  }
  return out;
}

std::string render_markdown(std::span<const MetricRow> rows) {
  const auto ordered = sorted(rows);
  std::string out;
  std::string dataset;
  bool first = true;
  std::string last_ranker;
  for (const auto& r : ordered) {
    if (first || r.dataset != dataset) {
      if (!first) out += '\n';
      dataset = r.dataset;
      last_ranker.clear();
      out += "### " + dataset + "\n\n";
      out += "| Ranker | Attack | c | S@1 | S@5 | NRC (mean ± std) | P@5 before | P@5 after | % drop P@5 | Cos sim |\n";
      out += "|---|---|---|---|---|---|---|---|---|---|\n";
      first = false;
    }
    const std::string ranker_cell = r.ranker == last_ranker ? std::string() : r.ranker;
    last_ranker = r.ranker;
    const std::string drop = r.p5_drop ? fixed(*r.p5_drop * 100.0, 2) : std::string("n/a");
    out += "| " + ranker_cell + " | " + r.variant + " | " + std::to_string(r.sparsity) + " | " + fixed(r.s_at_1) +
           " | " + fixed(r.s_at_5) + " | " + fixed(r.nrc_mean, 2) + " ± " + fixed(r.nrc_std, 2) + " | " +
           fixed(r.p5_before) + " | " + fixed(r.p5_after) + " | " + drop + " | " + fixed(r.mean_cos_sim) + " |\n";
  }
  return out;
}

std::vector<MetricRow> parse_csv(std::string_view text) {
  auto table = split_csv(text);
  if (table.empty()) fail(ErrorCode::parse, "report CSV: empty");
  std::string header;
  for (std::size_t i = 0; i < table[0].size(); ++i) header += (i ? "," : "") + table[0][i];
  if (header != kCsvHeader) fail(ErrorCode::parse, "report CSV: unexpected header");
  std::vector<MetricRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 12) fail(ErrorCode::parse, "report CSV: row " + std::to_string(i) + " has wrong field count");
    MetricRow r;
    r.dataset = f[0];
    r.ranker = f[1];
    r.variant = f[2];
    r.sparsity = static_cast<std::size_t>(parse_number(f[3]));
    r.s_at_1 = parse_number(f[4]);
    r.s_at_5 = parse_number(f[5]);
    r.nrc_mean = parse_number(f[6]);
    r.nrc_std = parse_number(f[7]);
    r.p5_before = parse_opt(f[8]);
    r.p5_after = parse_opt(f[9]);
    r.p5_drop = parse_opt(f[10]);
    r.mean_cos_sim = parse_opt(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report(std::span<const MetricRow> rows, ReportFormat format, const std::filesystem::path& path) {
  if (rows.empty()) fail(ErrorCode::invalid_argument, "emit_report: no rows");
  const std::string text = format == ReportFormat::csv ? render_csv(rows) : render_markdown(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write report " + path.string());
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::io, "failed writing report " + path.string());
}

}  // namespace rp
