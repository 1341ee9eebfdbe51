#include "core/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "core/common.hpp"
#include "core/report.hpp"

namespace rp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void toml_error(std::size_t line, const std::string& what) {
  fail(ErrorCode::parse, "config line " + std::to_string(line) + ": " + what);
}

// Removes a trailing comment that is not inside a string.
std::string strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

// Parses one scalar starting at `pos`; advances pos past it.
std::string parse_scalar(std::string_view v, std::size_t& pos, std::size_t line) {
  if (pos >= v.size()) toml_error(line, "missing value");
  if (v[pos] == '"') {
    std::string out;
    for (++pos; pos < v.size(); ++pos) {
      const char c = v[pos];
      if (c == '"') {
        ++pos;
        return out;
      }
      if (c == '\\') {
        if (++pos >= v.size()) break;
        switch (v[pos]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: toml_error(line, "unsupported escape");
        }
      } else {
        out += c;
      }
    }
    toml_error(line, "unterminated string");
  }
  if (v[pos] == '\'') {
    const auto end = v.find('\'', pos + 1);
    if (end == std::string_view::npos) toml_error(line, "unterminated string");
    std::string out(v.substr(pos + 1, end - pos - 1));
    pos = end + 1;
    return out;
  }
  const auto end = v.find_first_of(",] \t", pos);
  std::string raw(v.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
  pos = end == std::string_view::npos ? v.size() : end;
  if (raw.empty()) toml_error(line, "missing value");
  if (raw == "true" || raw == "false") return raw;
  std::string digits;
  for (char c : raw)
    if (c != '_') digits += c;
  double parsed = 0.0;
  const char* first = digits.data();
  if (!digits.empty() && digits[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), parsed);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) toml_error(line, "bad value '" + raw + "'");
  return digits[0] == '+' ? digits.substr(1) : digits;
}

std::string parse_value(std::string_view v, std::size_t line) {
  std::size_t pos = 0;
  if (!v.empty() && v[0] == '[') {
    std::string joined;
    pos = 1;
    bool first = true;
    for (;;) {
      while (pos < v.size() && (v[pos] == ' ' || v[pos] == '\t')) ++pos;
      if (pos >= v.size()) toml_error(line, "unterminated array");
      if (v[pos] == ']') {
        ++pos;
        break;
      }
      if (!first) {
        if (v[pos] != ',') toml_error(line, "expected ',' in array");
        ++pos;
        while (pos < v.size() && (v[pos] == ' ' || v[pos] == '\t')) ++pos;
        if (pos < v.size() && v[pos] == ']') {
          ++pos;
          break;
        }
      }
      const std::string item = parse_scalar(v, pos, line);
      if (item.find(',') != std::string::npos) toml_error(line, "array strings may not contain ','");
      joined += (first ? "" : ",") + item;
      first = false;
    }
    if (!trim(v.substr(pos)).empty()) toml_error(line, "trailing characters after array");
    return joined;
  }
  std::string out = parse_scalar(v, pos, line);
  if (!trim(v.substr(pos)).empty()) toml_error(line, "trailing characters after value");
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset",           "seed",          "out",           "workers",          "paper_scale",
      "paths.embeddings",  "paths.queries", "paths.docs",    "paths.qrels",      "paths.embedding_dim",
      "pool.positives",    "pool.negatives",
      "ranker.kind",       "ranker.kernel_mus", "ranker.kernel_sigmas", "ranker.kernel_weights",
      "ranker.k1",         "ranker.b",      "ranker.command", "ranker.timeout",  "ranker.processes",
      "attack.variant",    "attack.sparsity", "attack.lambda", "attack.delta_bound", "attack.hard_query_lock",
      "de.population",     "de.iterations", "de.mutation",   "de.fitness_floor",
  };
  return keys;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    fail(ErrorCode::invalid_argument, "config " + key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    fail(ErrorCode::invalid_argument, "config " + key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::invalid_argument, "config " + key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(to_double(key, trim(item)));
  return out;
}

}  // namespace

FlatConfig parse_toml(std::string_view text) {
  FlatConfig out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) toml_error(line_no, "bad section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) toml_error(line_no, "expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) toml_error(line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full) != 0) toml_error(line_no, "duplicate key '" + full + "'");
    out[full] = parse_value(trim(std::string_view(line).substr(eq + 1)), line_no);
  }
  return out;
}

FlatConfig load_toml(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  FlatConfig flat = parse_toml(ss.str());
  const auto base = path.parent_path();
  for (const char* key : {"paths.embeddings", "paths.queries", "paths.docs", "paths.qrels"}) {
    auto it = flat.find(key);
    if (it != flat.end() && !it->second.empty() && std::filesystem::path(it->second).is_relative())
      it->second = (base / it->second).lexically_normal().string();
  }
  return flat;
}

RunConfig RunConfig::from_flat(const FlatConfig& flat) {
  for (const auto& [key, value] : flat) {
    if (known_keys().count(key) == 0) fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
  }
  auto get = [&](const char* key) -> const std::string* {
    auto it = flat.find(key);
    return it == flat.end() ? nullptr : &it->second;
  };

  RunConfig c;
  c.de.population = 50;
  c.de.iterations = 30;
  if (auto v = get("dataset")) c.dataset = *v;
  if (auto v = get("seed")) c.seed = to_u64("seed", *v);
  if (auto v = get("out")) c.out = *v;
  if (auto v = get("workers")) c.workers = to_u64("workers", *v);
  if (auto v = get("paper_scale")) c.paper_scale = to_bool("paper_scale", *v);
  if (auto v = get("paths.embeddings")) c.embeddings = *v;
  if (auto v = get("paths.queries")) c.queries = *v;
  if (auto v = get("paths.docs")) c.docs = *v;
  if (auto v = get("paths.qrels")) c.qrels = *v;
  if (auto v = get("paths.embedding_dim")) c.embedding_dim = to_u64("paths.embedding_dim", *v);
  if (auto v = get("pool.positives")) c.pool_positives = to_u64("pool.positives", *v);
  if (auto v = get("pool.negatives")) c.pool_negatives = to_u64("pool.negatives", *v);

  if (auto v = get("ranker.kind")) c.ranker.kind = parse_ranker_kind(*v);
  if (auto v = get("ranker.kernel_mus")) c.ranker.kernels.mus = to_list("ranker.kernel_mus", *v);
  if (auto v = get("ranker.kernel_sigmas")) c.ranker.kernels.sigmas = to_list("ranker.kernel_sigmas", *v);
  if (auto v = get("ranker.kernel_weights")) c.ranker.kernels.weights = to_list("ranker.kernel_weights", *v);
  if (auto v = get("ranker.k1")) c.ranker.bm25.k1 = to_double("ranker.k1", *v);
  if (auto v = get("ranker.b")) c.ranker.bm25.b = to_double("ranker.b", *v);
  if (auto v = get("ranker.command")) c.ranker.external.command = *v;
  if (auto v = get("ranker.timeout")) c.ranker.external.timeout_seconds = to_double("ranker.timeout", *v);
  if (auto v = get("ranker.processes")) c.ranker.external.processes = to_u64("ranker.processes", *v);

  if (auto v = get("attack.variant")) c.attack.variant = parse_variant(*v);
  if (auto v = get("attack.sparsity")) c.attack.sparsity = to_u64("attack.sparsity", *v);
  if (auto v = get("attack.lambda")) c.attack.lambda = to_double("attack.lambda", *v);
  if (auto v = get("attack.delta_bound")) c.attack.delta_bound = to_double("attack.delta_bound", *v);
  if (auto v = get("attack.hard_query_lock")) c.attack.hard_query_lock = to_bool("attack.hard_query_lock", *v);

  if (auto v = get("de.population")) c.de.population = to_u64("de.population", *v);
  if (auto v = get("de.iterations")) c.de.iterations = to_u64("de.iterations", *v);
  if (auto v = get("de.mutation")) c.de.mutation = to_double("de.mutation", *v);
  if (auto v = get("de.fitness_floor")) c.de.fitness_floor = to_double("de.fitness_floor", *v);
  if (c.paper_scale) {
    c.de.population = 500;
    c.de.iterations = 100;
  }

  if (c.workers == 0) fail(ErrorCode::invalid_argument, "workers must be at least 1");
  if (c.pool_positives == 0) fail(ErrorCode::invalid_argument, "pool.positives must be at least 1");
  if (c.attack.sparsity == 0) fail(ErrorCode::invalid_argument, "sparsity c must be at least 1");
  c.ranker.validate();
  c.de.validate();
  return c;
}

std::string RunConfig::variant_label() const {
  std::string label(to_string(attack.variant));
  if (attack.hard_query_lock && attack.variant != Variant::A0) label += "-hard";
  return label;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["paper_scale"] = paper_scale;
  j["paths"] = {{"embeddings", embeddings.string()},
                {"queries", queries.string()},
                {"docs", docs.string()},
                {"qrels", qrels.string()}};
  if (embedding_dim) j["paths"]["embedding_dim"] = *embedding_dim;
  j["pool"] = {{"positives", pool_positives}, {"negatives", pool_negatives}};
  nlohmann::ordered_json r;
  r["kind"] = std::string(to_string(ranker.kind));
  switch (ranker.kind) {
    case RankerKind::kernel_pooling:
      r["kernel_mus"] = ranker.kernels.mus;
      r["kernel_sigmas"] = ranker.kernels.sigmas;
      r["kernel_weights"] = ranker.kernels.weights;
      break;
    case RankerKind::lexical_overlap:
      r["k1"] = ranker.bm25.k1;
      r["b"] = ranker.bm25.b;
      break;
    case RankerKind::external:
      r["command"] = ranker.external.command;
      r["timeout"] = ranker.external.timeout_seconds;
      r["processes"] = ranker.external.processes;
      break;
    case RankerKind::cosine_centroid:
      break;
  }
  j["ranker"] = r;
  nlohmann::ordered_json a;
  a["variant"] = std::string(to_string(attack.variant));
  a["sparsity"] = attack.sparsity;
  a["lambda"] = attack.lambda;
  if (attack.delta_bound) a["delta_bound"] = *attack.delta_bound;
  a["hard_query_lock"] = attack.hard_query_lock;
  j["attack"] = a;
  nlohmann::ordered_json d;
  d["population"] = de.population;
  d["iterations"] = de.iterations;
  d["mutation"] = de.mutation;
  if (de.fitness_floor) d["fitness_floor"] = *de.fitness_floor;
  j["de"] = d;
  return j;
}

}  // namespace rp
