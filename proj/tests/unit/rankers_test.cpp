#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "core/rankers.hpp"
#include "support.hpp"

using namespace rp;

namespace {

// Same vocabulary as tests/oracles/frozen_values.py.
EmbeddingStore oracle_store() {
  return test::make_store({{"apple", {1.0, 0.0, 0.0}},
                           {"pear", {0.8, 0.6, 0.0}},
                           {"car", {0.0, 0.0, 2.0}},
                           {"road", {0.0, 0.6, 0.8}},
                           {"sky", {-1.0, 0.2, 0.1}}});
}

enum : TokenId { apple, pear, car, road, sky };

Score score_of(RankerKind kind, const EmbeddingStore& store, std::vector<TokenId> q, std::vector<TokenId> d,
               const CorpusStats* stats = nullptr) {
  RankerSpec spec;
  spec.kind = kind;
  return make_ranker(spec, store, stats)->score(Query{"q", std::move(q)}, TokenDoc{"d", std::move(d)});
}

}  // namespace

TEST_CASE("cosine_centroid") {
  const auto store = oracle_store();
  CHECK(score_of(RankerKind::cosine_centroid, store, {apple, road}, {road, apple}).value ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(score_of(RankerKind::cosine_centroid, store, {apple, road}, {pear, car, sky, apple}).value ==
        doctest::Approx(0.8774463667585531).epsilon(1e-12));
}

TEST_CASE("cosine_centroid flags a zero centroid") {
  const auto store = test::make_store({{"a", {1, 0}}, {"b", {-1, 0}}, {"c", {0, 1}}});
  const Score s = score_of(RankerKind::cosine_centroid, store, {2}, {0, 1});
  CHECK(s.value == 0.0);
  CHECK(s.degenerate);
}

TEST_CASE("kernel_pooling single exact-match kernel") {
  const auto store = test::make_store({{"q", {1, 0, 0}}, {"x", {0, 1, 0}}, {"y", {0, 0, 1}}});
  RankerSpec spec;
  spec.kind = RankerKind::kernel_pooling;
  spec.kernels.mus = {1.0};
  spec.kernels.sigmas = {0.1};
  spec.kernels.weights = {2.5};
  const auto ranker = make_ranker(spec, store);
  const double s = ranker->score(Query{"q", {0}}, TokenDoc{"d", {1, 0, 2}}).value;
  // Orthogonal tokens add exp(-50) each.
  const double expected = 2.5 * std::log(1.0 + 1.0 + 2.0 * std::exp(-50.0));
  CHECK(std::abs(s - expected) < 1e-9);
  CHECK(std::abs(s - 2.5 * std::log(2.0)) < 1e-9);
}

TEST_CASE("kernel_pooling default kernels against the frozen oracle") {
  const auto store = oracle_store();
  CHECK(score_of(RankerKind::kernel_pooling, store, {apple, road}, {pear, car, sky, apple}).value ==
        doctest::Approx(6.758150938822212).epsilon(1e-12));
  CHECK(score_of(RankerKind::kernel_pooling, store, {car}, {road, road, sky}).value ==
        doctest::Approx(2.309044826425866).epsilon(1e-12));
}

TEST_CASE("default kernel layout") {
  const auto k = KernelParams::defaults();
  REQUIRE(k.mus.size() == 11);
  for (int i = 0; i < 11; ++i) {
    CHECK(k.mus[i] == doctest::Approx(-1.0 + 0.2 * i).epsilon(1e-12));
    CHECK(k.sigmas[i] == (i == 10 ? 0.001 : 0.1));
    CHECK(k.weights[i] == 1.0);
  }
  CHECK(k.mus[10] == 1.0);
}

TEST_CASE("lexical_overlap BM25 against the frozen oracle") {
  const auto store = oracle_store();
  const std::vector<TokenDoc> corpus{{"d0", {apple, pear, apple}}, {"d1", {car, road}}, {"d2", {sky, apple, car, road, road}}};
  const auto stats = CorpusStats::from_docs(corpus);
  const double expected[] = {0.664956903112938, 0.561960861054684, 0.9567714096509212};
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(score_of(RankerKind::lexical_overlap, store, {apple, road}, corpus[i].token_ids, &stats).value ==
          doctest::Approx(expected[i]).epsilon(1e-12));
  CHECK(score_of(RankerKind::lexical_overlap, store, {sky}, {apple, pear}, &stats).value == 0.0);
}

TEST_CASE("lexical_overlap needs corpus statistics") {
  const auto store = oracle_store();
  RankerSpec spec;
  spec.kind = RankerKind::lexical_overlap;
  CHECK_THROWS_AS(make_ranker(spec, store), Error);
}

TEST_CASE("ranker spec validation") {
  RankerSpec spec;
  spec.kind = RankerKind::kernel_pooling;
  spec.kernels.sigmas.pop_back();
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.kernels = KernelParams::defaults();
  spec.kernels.sigmas[0] = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.kernels = KernelParams::defaults();
  spec.kernels.mus[0] = -1.5;
  CHECK_THROWS_AS(spec.validate(), Error);

  RankerSpec ext;
  ext.kind = RankerKind::external;
  CHECK_THROWS_AS(ext.validate(), Error);
  ext.external.command = "x";
  ext.external.timeout_seconds = 0;
  CHECK_THROWS_AS(ext.validate(), Error);

  CHECK(parse_ranker_kind("kernel_pooling") == RankerKind::kernel_pooling);
  CHECK_THROWS_AS(parse_ranker_kind("drmm"), Error);
}

TEST_CASE("rank orders by score then doc id") {
  // Scores are fixed per document by a stub ranker.
  struct Table final : Ranker {
    std::map<std::string, double> s;
    Score score(const Query&, const TokenDoc& d) const override { return {s.at(d.doc_id), false}; }
    RankerKind kind() const noexcept override { return RankerKind::external; }
  } table;
  table.s = {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}};
  std::vector<TokenDoc> docs{{"c", {0}}, {"a", {0}}, {"b", {0}}};
  auto list = rank(table, Query{"q", {0}}, docs);
  REQUIRE(list.size() == 3);
  CHECK(list.entries()[0].doc_id == "a");
  CHECK(list.entries()[2].doc_id == "c");
  CHECK(list.rank_of("b") == 2);

  table.s = {{"a", 0.5}, {"b", 0.5}};
  docs = {{"b", {0}}, {"a", {0}}};
  list = rank(table, Query{"q", {0}}, docs);
  CHECK(list.entries()[0].doc_id == "a");
  CHECK(list.entries()[1].doc_id == "b");
}

TEST_CASE("rank of a 50-doc pool equals an independent sort") {
  const auto store = test::random_store(300, 10, 4);
  Rng rng(8);
  std::vector<TokenDoc> docs;
  for (int i = 0; i < 50; ++i) docs.push_back(test::random_doc(store, 5 + rng.index(10), rng, "doc" + std::to_string(i)));
  // Two duplicate documents force a tie.
  docs[7].token_ids = docs[3].token_ids;
  const Query q{"q", {1, 2, 3}};
  for (auto kind : {RankerKind::cosine_centroid, RankerKind::kernel_pooling}) {
    RankerSpec spec;
    spec.kind = kind;
    const auto ranker = make_ranker(spec, store);
    const auto list = rank(*ranker, q, docs);
    std::vector<std::pair<double, std::string>> ref;
    for (const auto& d : docs) ref.emplace_back(-ranker->score(q, d).value, d.doc_id);
    std::sort(ref.begin(), ref.end());
    REQUIRE(list.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(list.entries()[i].doc_id == ref[i].second);
  }
}

TEST_CASE("rescore_one") {
  const RankedList list("q", {{"a", {0.9}}, {"b", {0.5}}, {"c", {0.1}}});
  const auto moved = rescore_one(list, "a", Score{-std::numeric_limits<double>::max()});
  CHECK(moved.entries().back().doc_id == "a");
  CHECK(moved.rank_of("a") == 3);
  CHECK(list.rank_of("a") == 1);
  const auto tie = rescore_one(list, "c", Score{0.5});
  CHECK(tie.rank_of("b") == 2);
  CHECK(tie.rank_of("c") == 3);
  CHECK_THROWS_AS(rescore_one(list, "zz", Score{0.0}), Error);
  CHECK_THROWS_AS(RankedList("q", {{"a", {1.0}}, {"a", {0.5}}}), Error);
  CHECK_THROWS_AS(RankedList("q", {{"a", {std::nan("")}}}), Error);
}

TEST_CASE("rankers are safe to share between threads") {
  const auto store = test::random_store(200, 16, 2);
  Rng rng(2);
  std::vector<TokenDoc> docs;
  for (int i = 0; i < 64; ++i) docs.push_back(test::random_doc(store, 30, rng, "d" + std::to_string(i)));
  const Query q{"q", {5, 6, 7}};
  RankerSpec spec;
  spec.kind = RankerKind::kernel_pooling;
  const auto ranker = make_ranker(spec, store);
  std::vector<double> serial, parallel(docs.size());
  for (const auto& d : docs) serial.push_back(ranker->score(q, d).value);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < docs.size(); i += 4) parallel[i] = ranker->score(q, docs[i]).value;
    });
  for (auto& th : threads) th.join();
  CHECK(serial == parallel);
}
