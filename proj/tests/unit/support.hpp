#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <unistd.h>

#include "core/common.hpp"
#include "core/embedding.hpp"

namespace rp::test {

inline EmbeddingStore make_store(std::initializer_list<std::pair<const char*, std::vector<double>>> rows) {
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::size_t dim = 0;
  for (const auto& [tok, vec] : rows) {
    tokens.emplace_back(tok);
    values.insert(values.end(), vec.begin(), vec.end());
    dim = vec.size();
  }
  return EmbeddingStore(std::move(tokens), std::move(values), dim);
}

/// V random rows of dimension D with names t0, t1, ...
inline EmbeddingStore random_store(std::size_t v, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> tokens;
  std::vector<double> values;
  for (std::size_t i = 0; i < v; ++i) {
    tokens.push_back("t" + std::to_string(i));
    for (std::size_t k = 0; k < d; ++k) values.push_back(rng.normal());
  }
  return EmbeddingStore(std::move(tokens), std::move(values), d);
}

inline TokenDoc random_doc(const EmbeddingStore& store, std::size_t len, Rng& rng, std::string id = "d") {
  TokenDoc doc{std::move(id), {}};
  for (std::size_t i = 0; i < len; ++i) doc.token_ids.push_back(static_cast<TokenId>(rng.index(store.size())));
  return doc;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rp-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace rp::test
