// Reference external ranker: score = number of distinct token strings shared
// by query and document. Fault flags make it misbehave on chosen tokens.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

using json = nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"echo scorer for the rank-perturb external ranker protocol"};
  std::string hang_token;
  std::string garbage_token;
  std::string crash_token;
  std::string wrong_id_token;
  bool no_hello = false;
  app.add_option("--hang-token", hang_token, "never answer requests whose doc contains this token");
  app.add_option("--garbage-token", garbage_token, "answer with a non-JSON line for this token");
  app.add_option("--crash-token", crash_token, "exit without answering for this token");
  app.add_option("--wrong-id-token", wrong_id_token, "answer with a mismatched id for this token");
  app.add_flag("--no-hello", no_hello, "reply to the handshake with garbage");
  CLI11_PARSE(app, argc, argv);

  std::string line;
  if (!std::getline(std::cin, line)) return 0;
  if (no_hello) {
    std::cout << "not a handshake" << std::endl;
  } else {
    std::cout << json{{"hello", "echo-scorer"}, {"version", "1"}}.dump() << std::endl;
  }

  while (std::getline(std::cin, line)) {
    const json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      std::cout << json{{"error", "bad request"}}.dump() << std::endl;
      continue;
    }
    const auto query = req.value("query", std::vector<std::string>{});
    const auto doc = req.value("doc", std::vector<std::string>{});
    const std::set<std::string> qset(query.begin(), query.end());
    const std::set<std::string> dset(doc.begin(), doc.end());
    auto has = [&](const std::string& t) { return !t.empty() && dset.count(t) != 0; };

    if (has(hang_token)) {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(60));
    }
    if (has(crash_token)) return 3;
    if (has(garbage_token)) {
      std::cout << "{\"id\": oops" << std::endl;
      continue;
    }
    std::size_t overlap = 0;
    for (const auto& t : dset) overlap += qset.count(t);
    std::string id = req.value("id", std::string());
    if (has(wrong_id_token)) id += "-x";
    std::cout << json{{"id", id}, {"score", overlap}}.dump() << std::endl;
  }
  return 0;
}
