#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/corpus.hpp"
#include "core/embedding.hpp"

namespace rp::fixture {

// Two-level synthetic corpus. Each query owns a facet inside a topic; token
// vectors are topic direction + facet direction + noise. Queries of the same
// topic share the topic direction, so other queries' documents act as hard
// negatives. Background tokens point away from a topic.
struct FixtureParams {
  std::size_t queries = 50;
  std::size_t vocab = 5000;
  std::size_t dim = 50;
  std::size_t topics = 2;
  std::size_t background = 400;  // tokens outside every facet
  std::size_t rare = 300;        // vocabulary-only tokens never used in text
  double rare_norm = 5.0;        // length of rare token vectors
  std::size_t positives = 5;     // relevant docs per query
  std::size_t negatives = 45;    // docs judged 0 generated per query
  double hard_negative_fraction = 0.5;  // share of negatives drawn on topic
  std::size_t min_len = 20;
  std::size_t max_len = 40;
  std::size_t min_query_len = 3;
  std::size_t max_query_len = 4;
  double topic_weight = 1.0;
  double facet_weight = 0.2;
  double background_weight = 0.6;  // length of the anti-topic component
  double noise = 0.8;              // per-token noise scale
  double positive_facet_share = 0.3;
  double positive_topic_share = 0.2;
  double negative_facet_share = 0.3;  // for same-topic negatives
  double negative_topic_share = 0.2;
  std::size_t positive_query_hits = 1;   // query tokens planted in each positive
  double negative_query_hit_rate = 0.6;  // chance a same-topic negative gets one query token
  std::uint64_t seed = 20240611;
};

struct Fixture {
  EmbeddingStore store;
  std::vector<Query> queries;
  std::vector<TokenDoc> docs;
  QrelSet qrels;
};

Fixture make_fixture(const FixtureParams& params = {});

struct FixturePaths {
  std::filesystem::path embeddings;
  std::filesystem::path queries;
  std::filesystem::path docs;
  std::filesystem::path qrels;
};

/// Writes embeddings.txt, queries.tsv, docs.tsv and qrels.txt under `dir`.
FixturePaths write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace rp::fixture
