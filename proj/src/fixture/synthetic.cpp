#include "fixture/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "core/common.hpp"

namespace rp::fixture {

namespace {

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

TokenId pick(Rng& rng, const std::vector<TokenId>& from) { return from[rng.index(from.size())]; }

void shuffle(Rng& rng, std::vector<TokenId>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

struct Mixture {
  const std::vector<TokenId>* facet;
  const std::vector<TokenId>* topic;  // other facets of the same topic
  const std::vector<TokenId>* other;
  double facet_share;
  double topic_share;
};

std::vector<TokenId> make_doc(Rng& rng, const FixtureParams& p, const Mixture& mix,
                              std::span<const TokenId> planted) {
  const std::size_t len = p.min_len + rng.index(p.max_len - p.min_len + 1);
  std::vector<TokenId> doc(planted.begin(), planted.end());
  while (doc.size() < len) {
    const double u = rng.unit();
    if (u < mix.facet_share) doc.push_back(pick(rng, *mix.facet));
    else if (u < mix.facet_share + mix.topic_share) doc.push_back(pick(rng, *mix.topic));
    else doc.push_back(pick(rng, *mix.other));
  }
  shuffle(rng, doc);
  return doc;
}

void write_lines(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out.flush()) fail(ErrorCode::io, "failed writing " + path.string());
}

std::string join(const EmbeddingStore& store, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? " " : "") + store.token(ids[i]);
  return out;
}

}  // namespace

Fixture make_fixture(const FixtureParams& p) {
  if (p.topics == 0 || p.queries == 0 || p.dim == 0) fail(ErrorCode::invalid_argument, "fixture: empty dimension");
  if (p.min_len == 0 || p.max_len < p.min_len) fail(ErrorCode::invalid_argument, "fixture: bad document lengths");
  if (p.min_query_len == 0 || p.max_query_len < p.min_query_len)
    fail(ErrorCode::invalid_argument, "fixture: bad query lengths");
  if (p.positive_query_hits > p.min_len) fail(ErrorCode::invalid_argument, "fixture: too many planted tokens");
  const std::size_t facets = p.queries;  // one per query
  if (p.vocab < p.background + p.rare + facets * p.max_query_len)
    fail(ErrorCode::invalid_argument, "fixture: vocabulary too small");

  Rng rng(p.seed);
  std::vector<std::vector<double>> topic_dirs, facet_dirs;
  for (std::size_t t = 0; t < p.topics; ++t) topic_dirs.push_back(random_direction(rng, p.dim));
  for (std::size_t f = 0; f < facets; ++f) facet_dirs.push_back(random_direction(rng, p.dim));

  // Facet f belongs to topic f % topics. Facet tokens come first
  // (round-robin over facets), then background, then rare tokens.
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<std::vector<TokenId>> facet_tokens(facets);
  std::vector<TokenId> background;
  const std::size_t topical = p.vocab - p.background - p.rare;
  const double sd = p.noise / std::sqrt(static_cast<double>(p.dim));
  for (std::size_t id = 0; id < p.vocab; ++id) {
    if (id < topical) {
      const std::size_t f = id % facets;
      const auto& tdir = topic_dirs[f % p.topics];
      names.push_back("f" + std::to_string(f) + "w" + std::to_string(id / facets));
      for (std::size_t k = 0; k < p.dim; ++k)
        values.push_back(p.topic_weight * tdir[k] + p.facet_weight * facet_dirs[f][k] + sd * rng.normal());
      facet_tokens[f].push_back(static_cast<TokenId>(id));
    } else if (id >= topical + p.background) {
      names.push_back("r" + std::to_string(id - topical - p.background));
      for (double x : random_direction(rng, p.dim)) values.push_back(p.rare_norm * x);
    } else {
      const std::size_t b = id - topical;
      const auto& tdir = topic_dirs[b % p.topics];
      names.push_back("bg" + std::to_string(b));
      for (std::size_t k = 0; k < p.dim; ++k) values.push_back(-p.background_weight * tdir[k] + sd * rng.normal());
      background.push_back(static_cast<TokenId>(id));
    }
  }

  Fixture fx{EmbeddingStore(std::move(names), std::move(values), p.dim), {}, {}, {}};

  for (std::size_t qi = 0; qi < p.queries; ++qi) {
    const std::size_t f = qi;
    const std::size_t t = f % p.topics;
    std::vector<TokenId> topic, other = background;
    for (std::size_t g = 0; g < facets; ++g) {
      if (g == f) continue;
      auto& dst = g % p.topics == t ? topic : other;
      dst.insert(dst.end(), facet_tokens[g].begin(), facet_tokens[g].end());
    }
    if (topic.empty()) topic = facet_tokens[f];

    const std::string qid = "q" + std::to_string(qi);
    const std::size_t qlen = p.min_query_len + rng.index(p.max_query_len - p.min_query_len + 1);
    std::vector<TokenId> qtokens;
    while (qtokens.size() < qlen) {
      const TokenId tok = pick(rng, facet_tokens[f]);
      if (std::find(qtokens.begin(), qtokens.end(), tok) == qtokens.end()) qtokens.push_back(tok);
    }
    fx.queries.push_back({qid, qtokens});

    // Query tokens reach this query's documents only by planting.
    std::vector<TokenId> facet;
    for (TokenId tok : facet_tokens[f])
      if (std::find(qtokens.begin(), qtokens.end(), tok) == qtokens.end()) facet.push_back(tok);
    const Mixture pos{&facet, &topic, &other, p.positive_facet_share, p.positive_topic_share};
    const Mixture hard{&facet, &topic, &other, p.negative_facet_share, p.negative_topic_share};
    const Mixture easy{&facet, &topic, &other, 0.0, 0.0};
    for (std::size_t k = 0; k < p.positives; ++k) {
      std::vector<TokenId> planted;
      for (std::size_t h = 0; h < p.positive_query_hits; ++h) planted.push_back(pick(rng, qtokens));
      const std::string did = qid + "p" + std::to_string(k);
      fx.docs.push_back({did, make_doc(rng, p, pos, planted)});
      fx.qrels.set(qid, did, 1 + static_cast<int>(rng.index(2)));
    }
    const auto hard_count = static_cast<std::size_t>(std::lround(p.hard_negative_fraction * p.negatives));
    for (std::size_t k = 0; k < p.negatives; ++k) {
      // The first hard_negatives stay on topic; the rest are off topic.
      std::vector<TokenId> planted;
      const bool on_topic = k < hard_count;
      if (on_topic && rng.unit() < p.negative_query_hit_rate) planted.push_back(pick(rng, qtokens));
      const std::string did = qid + "n" + std::to_string(k);
      fx.docs.push_back({did, make_doc(rng, p, on_topic ? hard : easy, planted)});
      fx.qrels.set(qid, did, 0);
    }
  }
  return fx;
}

FixturePaths write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  FixturePaths paths{dir / "embeddings.txt", dir / "queries.tsv", dir / "docs.tsv", dir / "qrels.txt"};
  save_embeddings(f.store, paths.embeddings);
  std::string text;
  for (const auto& q : f.queries) text += q.query_id + "\t" + join(f.store, q.token_ids) + "\n";
  write_lines(paths.queries, text);
  text.clear();
  for (const auto& d : f.docs) text += d.doc_id + "\t" + join(f.store, d.token_ids) + "\n";
  write_lines(paths.docs, text);
  text.clear();
  for (const auto& [key, grade] : f.qrels.judgments())
    text += key.first + " 0 " + key.second + " " + std::to_string(grade) + "\n";
  write_lines(paths.qrels, text);
  return paths;
}

}  // namespace rp::fixture
