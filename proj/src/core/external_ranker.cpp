#include "core/external_ranker.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "core/common.hpp"
#include "core/log.hpp"

extern char** environ;

namespace rp {

namespace {

using Clock = std::chrono::steady_clock;
constexpr const char* kProtocol = "rank-perturb/1";
constexpr std::size_t kMaxLine = 1 << 20;

std::string clip(const std::string& raw) {
  return raw.size() <= 512 ? raw : raw.substr(0, 512) + "...";
}

}  // namespace

struct ExternalScorer::Worker {
  std::mutex mu;
  pid_t pid = -1;
  int fd = -1;  // our end of a socketpair wired to the child's stdin and stdout
  std::string buffer;
  std::string name;
  std::uint64_t next_id = 0;
  std::size_t spawns = 0;

  ~Worker() { shutdown_child(); }

  bool alive() const { return pid > 0; }

  void spawn(const ExternalParams& params) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw RankerError(std::string("socketpair failed: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

    std::string shell = "/bin/sh";
    std::string flag = "-c";
    std::string command = params.command;
    char* argv[] = {shell.data(), flag.data(), command.data(), nullptr};
    // Own process group, so a kill also reaches whatever the shell started.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    pid_t child = -1;
    const int rc = ::posix_spawn(&child, shell.c_str(), &actions, &attr, argv, environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      throw RankerError("cannot start external ranker '" + params.command + "': " + std::strerror(rc));
    }
    pid = child;
    fd = fds[0];
    buffer.clear();
    ++spawns;

    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(params.timeout_seconds));
    write_line(nlohmann::json{{"hello", kProtocol}}.dump());
    const std::string reply = read_line(deadline);
    nlohmann::json parsed = nlohmann::json::parse(reply, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("hello") ||
        !parsed["hello"].is_string() || !parsed.contains("version") || !parsed["version"].is_string()) {
      kill_child();
      throw RankerError("external ranker sent a malformed handshake", reply);
    }
    name = parsed["hello"].get<std::string>();
    log::info("external ranker '", name, "' version ", parsed["version"].get<std::string>(), " started (pid ",
              pid, ")");
  }

  void write_line(const std::string& line) {
    std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        const std::string why = std::strerror(errno);
        kill_child();
        throw RankerError("external ranker write failed: " + why);
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    char chunk[4096];
    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (buffer.size() > kMaxLine) {
        std::string raw = buffer;
        kill_child();
        throw RankerError("external ranker reply exceeds line limit", clip(raw));
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (remaining <= 0) {
        std::string raw = buffer;
        kill_child();
        throw RankerError("external ranker timed out", clip(raw));
      }
      pollfd p{fd, POLLIN, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        std::string raw = buffer;
        kill_child();
        throw RankerError("poll on external ranker failed", clip(raw));
      }
      if (ready == 0) continue;
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        std::string raw = buffer;
        kill_child();
        throw RankerError("external ranker closed its output", clip(raw));
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void kill_child() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
    if (pid > 0) {
      ::kill(-pid, SIGKILL);
      int status = 0;
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
      pid = -1;
    }
    buffer.clear();
  }

  // Closes the child's stdin and gives it a moment to exit before killing it.
  void shutdown_child() {
    if (pid <= 0) return;
    if (fd >= 0) ::shutdown(fd, SHUT_WR);
    for (int i = 0; i < 20; ++i) {
      int status = 0;
      if (::waitpid(pid, &status, WNOHANG) == pid) {
        ::kill(-pid, SIGKILL);
        pid = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill_child();
  }

  double request(const ExternalParams& params, std::span<const std::string> query,
                 std::span<const std::string> doc) {
    if (!alive()) spawn(params);
    const std::string id = std::to_string(next_id++);
    nlohmann::json req;
    req["id"] = id;
    req["query"] = std::vector<std::string>(query.begin(), query.end());
    req["doc"] = std::vector<std::string>(doc.begin(), doc.end());

    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(params.timeout_seconds));
    write_line(req.dump());
    const std::string reply = read_line(deadline);

    nlohmann::json parsed = nlohmann::json::parse(reply, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      kill_child();
      throw RankerError("external ranker reply is not a JSON object", clip(reply));
    }
    if (!parsed.contains("id") || !parsed["id"].is_string() || parsed["id"].get<std::string>() != id) {
      kill_child();
      throw RankerError("external ranker reply has wrong or missing id (expected " + id + ")", clip(reply));
    }
    if (!parsed.contains("score") || !parsed["score"].is_number()) {
      kill_child();
      throw RankerError("external ranker reply has no numeric score", clip(reply));
    }
    const double value = parsed["score"].get<double>();
    if (!std::isfinite(value)) {
      kill_child();
      throw RankerError("external ranker returned a non-finite score", clip(reply));
    }
    return value;
  }
};

ExternalScorer::ExternalScorer(ExternalParams params) : params_(std::move(params)) {
  if (params_.command.empty()) fail(ErrorCode::invalid_argument, "external ranker needs a command");
  if (!(params_.timeout_seconds > 0.0)) fail(ErrorCode::invalid_argument, "external ranker timeout must be positive");
  const std::size_t n = params_.processes == 0 ? 1 : params_.processes;
  for (std::size_t i = 0; i < n; ++i) workers_.push_back(std::make_unique<Worker>());
}

ExternalScorer::~ExternalScorer() = default;

double ExternalScorer::score(std::span<const std::string> query, std::span<const std::string> doc) const {
  for (auto& w : workers_) {
    std::unique_lock<std::mutex> lock(w->mu, std::try_to_lock);
    if (lock.owns_lock()) return w->request(params_, query, doc);
  }
  // Every worker busy: queue on one of them.
  Worker* w = nullptr;
  {
    std::lock_guard<std::mutex> guard(pick_mu_);
    w = workers_[next_++ % workers_.size()].get();
  }
  std::lock_guard<std::mutex> lock(w->mu);
  return w->request(params_, query, doc);
}

std::string ExternalScorer::server_name() const {
  std::lock_guard<std::mutex> lock(workers_.front()->mu);
  return workers_.front()->name;
}

std::size_t ExternalScorer::spawn_count() const {
  std::size_t total = 0;
  for (auto& w : workers_) {
    std::lock_guard<std::mutex> lock(w->mu);
    total += w->spawns;
  }
  return total;
}

ExternalRanker::ExternalRanker(ExternalParams params, const EmbeddingStore& store)
    : store_(store), client_(std::move(params)) {}

Score ExternalRanker::score(const Query& query, const TokenDoc& doc) const {
  std::vector<std::string> q;
  std::vector<std::string> d;
  q.reserve(query.token_ids.size());
  d.reserve(doc.token_ids.size());
  for (TokenId id : query.token_ids) q.push_back(store_.token(id));
  for (TokenId id : doc.token_ids) d.push_back(store_.token(id));
  return Score{client_.score(q, d), false};
}

}  // namespace rp
