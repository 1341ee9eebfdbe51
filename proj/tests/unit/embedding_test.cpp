#include <doctest.h>

#include <cmath>
#include <limits>

#include "core/embedding.hpp"
#include "fixture/synthetic.hpp"
#include "support.hpp"

using namespace rp;
using rp::test::TempDir;

namespace {

// Plain row-by-row scan, the definition nearest_token has to agree with.
TokenId scan_nearest(const EmbeddingStore& store, std::span<const double> point, std::span<const TokenId> exclude) {
  TokenId best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  double np = 0.0;
  for (double x : point) np += x * x;
  np = std::sqrt(np);
  for (std::size_t r = 0; r < store.size(); ++r) {
    const auto id = static_cast<TokenId>(r);
    if (std::find(exclude.begin(), exclude.end(), id) != exclude.end()) continue;
    auto row = store.vector(id);
    double dot = 0.0, nr = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      dot += row[k] * point[k];
      nr += row[k] * row[k];
    }
    if (nr == 0.0) continue;
    const double d = 1.0 - dot / (std::sqrt(nr) * np);
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("load_embeddings reads a two-line file") {
  TempDir dir("emb");
  test::write_file(dir / "e.txt", "a 1.0 0.0\nb 0.0 1.0\n");
  const auto store = load_embeddings(dir / "e.txt");
  CHECK(store.size() == 2);
  CHECK(store.dim() == 2);
  CHECK(store.find("a") == 0);
  CHECK(store.find("b") == 1);
  CHECK_FALSE(store.find("c"));
}

TEST_CASE("duplicate tokens keep the first row") {
  TempDir dir("emb");
  test::write_file(dir / "e.txt", "a 1.0 0.0\r\nb 0.0 1.0\r\na 9.0 9.0\r\n");
  EmbeddingLoadReport report;
  const auto store = load_embeddings(dir / "e.txt", std::nullopt, &report);
  CHECK(store.size() == 2);
  CHECK(report.duplicate_tokens == 1);
  CHECK(store.vector(0)[0] == 1.0);
  CHECK(store.vector(0)[1] == 0.0);
}

TEST_CASE("load_embeddings rejects bad input") {
  TempDir dir("emb");
  SUBCASE("empty file") {
    test::write_file(dir / "e.txt", "");
    CHECK_THROWS_AS(load_embeddings(dir / "e.txt"), Error);
  }
  SUBCASE("dimension mismatch") {
    test::write_file(dir / "e.txt", "a 1 0\nb 1 0 0\n");
    CHECK_THROWS_AS(load_embeddings(dir / "e.txt"), Error);
  }
  SUBCASE("expected dimension") {
    test::write_file(dir / "e.txt", "a 1 0\n");
    CHECK_THROWS_AS(load_embeddings(dir / "e.txt", 3), Error);
  }
  SUBCASE("non-numeric line is skipped and counted") {
    test::write_file(dir / "e.txt", "a 1 0\nb x 0\nc 0 1\n");
    EmbeddingLoadReport report;
    const auto store = load_embeddings(dir / "e.txt", std::nullopt, &report);
    CHECK(store.size() == 2);
    CHECK(report.rejected_lines == 1);
    CHECK(store.find("c") == 1);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_embeddings(dir / "nope.txt"), Error); }
}

TEST_CASE("fixture store round-trips through the text format") {
  fixture::FixtureParams p;
  p.queries = 5;
  p.vocab = 50;
  p.background = 10;
  p.rare = 5;
  p.dim = 8;
  p.min_query_len = 1;
  p.max_query_len = 2;
  const auto fx = fixture::make_fixture(p);
  REQUIRE(fx.store.size() == 50);
  TempDir dir("emb");
  save_embeddings(fx.store, dir / "a.txt");
  const auto back = load_embeddings(dir / "a.txt");
  REQUIRE(back.size() == fx.store.size());
  REQUIRE(back.dim() == 8);
  for (std::size_t r = 0; r < back.size(); ++r) {
    const auto id = static_cast<TokenId>(r);
    CHECK(back.token(id) == fx.store.token(id));
    for (std::size_t k = 0; k < 8; ++k) CHECK(back.vector(id)[k] == fx.store.vector(id)[k]);
  }
  save_embeddings(back, dir / "b.txt");
  CHECK(test::read_file(dir / "a.txt") == test::read_file(dir / "b.txt"));
}

TEST_CASE("cosine_distance") {
  const std::vector<double> x{1, 0}, y{0, 1}, nx{-1, 0}, z{0, 0};
  CHECK(cosine_distance(x, x) == 0.0);
  CHECK(cosine_distance(x, nx) == 2.0);
  CHECK(cosine_distance(x, y) == 1.0);
  CHECK_THROWS_AS(cosine_distance(x, z), Error);
  CHECK_THROWS_AS(cosine_distance(x, std::vector<double>{1, 0, 0}), Error);

  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> u(5), v(5);
    for (auto& a : u) a = rng.normal();
    for (auto& a : v) a = rng.normal();
    const double d = cosine_distance(u, v);
    CHECK(d == cosine_distance(v, u));
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    std::vector<double> scaled = u;
    for (auto& a : scaled) a *= 3.5;
    CHECK(cosine_distance(u, scaled) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("nearest_token examples") {
  const auto store = test::make_store({{"a", {1, 0, 0}},
                                       {"b", {0, 1, 0}},
                                       {"c", {0.9, 0.1, 0}},
                                       {"d", {0.2, 0.7, 0.1}},
                                       {"e", {0.9, 0.1, 0}},
                                       {"z", {0, 0, 0}}});
  SUBCASE("exact match") { CHECK(nearest_token(store, store.vector(3)) == 3); }
  SUBCASE("excluding itself") {
    const TokenId self = 0;
    const TokenId got = nearest_token(store, store.vector(0), std::span<const TokenId>(&self, 1));
    CHECK(got == scan_nearest(store, store.vector(0), std::span<const TokenId>(&self, 1)));
    CHECK(got == 2);
  }
  SUBCASE("identical rows tie to the smaller id") {
    CHECK(nearest_token(store, store.vector(4)) == 2);
  }
  SUBCASE("zero point is an error") {
    const std::vector<double> zero(3, 0.0);
    CHECK_THROWS_AS(nearest_token(store, zero), Error);
  }
  SUBCASE("everything excluded") {
    const std::vector<TokenId> all{0, 1, 2, 3, 4};
    CHECK_THROWS_AS(nearest_token(store, store.vector(0), all), Error);
  }
}

TEST_CASE("nearest_token matches an exhaustive scan") {
  for (std::size_t v : {1ul, 7ul, 9ul, 100ul, 1000ul, 10000ul}) {
    CAPTURE(v);
    const auto store = test::random_store(v, 13, 100 + v);
    Rng rng(v);
    for (int t = 0; t < 40; ++t) {
      std::vector<double> p(13);
      for (auto& x : p) x = rng.normal();
      CHECK(nearest_token(store, p) == scan_nearest(store, p, {}));
      if (v > 1) {
        const auto ex = static_cast<TokenId>(rng.index(v));
        const std::vector<TokenId> exclude{ex};
        CHECK(nearest_token(store, p, exclude) == scan_nearest(store, p, exclude));
      }
    }
  }
}

TEST_CASE("every row is its own nearest token") {
  const auto store = test::random_store(500, 50, 9);
  for (std::size_t r = 0; r < store.size(); ++r) {
    const auto id = static_cast<TokenId>(r);
    CHECK(nearest_token(store, store.vector(id)) == id);
  }
}

TEST_CASE("nearest_token with many duplicate rows") {
  // Quantized vectors make exact ties common.
  Rng rng(5);
  std::vector<std::string> tokens;
  std::vector<double> values;
  for (int i = 0; i < 300; ++i) {
    tokens.push_back("w" + std::to_string(i));
    for (int k = 0; k < 4; ++k) values.push_back(static_cast<double>(rng.index(3)) - 1.0);
  }
  const EmbeddingStore store(tokens, values, 4);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> p(4);
    for (auto& x : p) x = static_cast<double>(rng.index(5)) - 2.0;
    if (l2_norm(p) == 0.0) continue;
    CHECK(nearest_token(store, p) == scan_nearest(store, p, {}));
  }
}

TEST_CASE("doc_vector") {
  const auto store = test::make_store({{"x", {1, 0}}, {"y", {0, 1}}});
  const std::vector<TokenId> one{0}, two{0, 1}, same{1, 1, 1};
  CHECK(doc_vector(store, one) == std::vector<double>{1, 0});
  CHECK(doc_vector(store, two) == std::vector<double>{0.5, 0.5});
  CHECK(doc_vector(store, same) == std::vector<double>{0, 1});

  const auto big = test::random_store(200, 6, 17);
  Rng rng(1);
  const auto doc = test::random_doc(big, 20, rng);
  const auto mean = doc_vector(big, doc.token_ids);
  for (std::size_t k = 0; k < 6; ++k) {
    long double sum = 0;
    for (TokenId id : doc.token_ids) sum += big.vector(id)[k];
    CHECK(mean[k] == doctest::Approx(static_cast<double>(sum / 20)).epsilon(1e-12));
  }
}

TEST_CASE("store invariants are enforced") {
  CHECK_THROWS_AS(EmbeddingStore({"a", "a"}, {1, 2}, 1), Error);
  CHECK_THROWS_AS(EmbeddingStore({"a"}, {std::nan("")}, 1), Error);
  CHECK_THROWS_AS(EmbeddingStore({"a"}, {1, 2}, 1), Error);
  CHECK_THROWS_AS(EmbeddingStore({}, {}, 1), Error);
}
