// Writes the synthetic corpus plus a matching config file.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fixture/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic rank-perturb corpus"};
  rp::fixture::FixtureParams p;
  std::string dir;
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--queries", p.queries);
  app.add_option("--vocab", p.vocab);
  app.add_option("--dim", p.dim);
  app.add_option("--topics", p.topics);
  app.add_option("--negatives", p.negatives);
  app.add_option("--hard-negatives", p.hard_negative_fraction, "share of negatives that stay on topic");
  app.add_option("--background", p.background);
  app.add_option("--noise", p.noise);
  app.add_option("--rare", p.rare);
  app.add_option("--rare-norm", p.rare_norm);
  app.add_option("--topic-weight", p.topic_weight);
  app.add_option("--facet-weight", p.facet_weight);
  app.add_option("--background-weight", p.background_weight);
  app.add_option("--positive-facet-share", p.positive_facet_share);
  app.add_option("--positive-topic-share", p.positive_topic_share);
  app.add_option("--negative-facet-share", p.negative_facet_share);
  app.add_option("--negative-topic-share", p.negative_topic_share);
  app.add_option("--positive-hits", p.positive_query_hits);
  app.add_option("--negative-hit-rate", p.negative_query_hit_rate);
  app.add_option("--seed", p.seed);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto fx = rp::fixture::make_fixture(p);
    rp::fixture::write_fixture(fx, dir);
    std::ofstream cfg(std::filesystem::path(dir) / "fixture.toml");
    cfg << "dataset = \"synthetic\"\nseed = 1\nout = \"out\"\n\n"
        << "[paths]\nembeddings = \"embeddings.txt\"\nqueries = \"queries.tsv\"\n"
        << "docs = \"docs.tsv\"\nqrels = \"qrels.txt\"\n";
    std::cout << fx.queries.size() << " queries, " << fx.docs.size() << " docs, " << fx.store.size()
              << " tokens written to " << dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
