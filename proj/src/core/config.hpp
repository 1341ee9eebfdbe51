#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "core/attack.hpp"
#include "core/de.hpp"
#include "core/rankers.hpp"

namespace rp {

/// Dotted key ("section.key") to raw value. Strings are unquoted; arrays are
/// joined with commas.
using FlatConfig = std::map<std::string, std::string>;

/// Parses the TOML subset used by run configs: [section] headers, key = value
/// with strings, numbers, booleans and single-line arrays, and # comments.
FlatConfig parse_toml(std::string_view text);

/// Reads a config file. Relative `paths.*` values are resolved against the
/// file's directory.
FlatConfig load_toml(const std::filesystem::path& path);

/// Fully resolved settings for one CLI invocation.
struct RunConfig {
  std::string dataset = "default";
  std::filesystem::path embeddings;
  std::optional<std::size_t> embedding_dim;
  std::filesystem::path queries;
  std::filesystem::path docs;
  std::filesystem::path qrels;
  std::filesystem::path out = "rank-perturb-out";
  std::size_t pool_positives = 5;
  std::size_t pool_negatives = 45;
  RankerSpec ranker;
  AttackConfig attack;
  DEConfig de;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool paper_scale = false;

  /// Desk profile: population 50, 30 iterations. paper_scale forces 500 / 100.
  static RunConfig from_flat(const FlatConfig& flat);

  /// Label used in file names and report rows, e.g. "A3" or "A3-hard".
  std::string variant_label() const;

  nlohmann::ordered_json to_json() const;
};

}  // namespace rp
