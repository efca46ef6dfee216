#include "pointprobe/external_oracle.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <istream>
#include <mutex>
#include <ostream>
#include <unordered_map>

#include "json.hpp"
#include "pointprobe/errors.hpp"

namespace pointprobe {

using nlohmann::json;

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string build_request(std::int64_t id, const PointCloud& cloud) {
  json req;
  req["id"] = id;
  json pts = json::array();
  for (const auto& p : cloud.points) pts.push_back({p[0], p[1], p[2]});
  req["points"] = std::move(pts);
  return req.dump() + "\n";
}

}  // namespace

struct ExternalOracle::Subprocess {
  pid_t pid = -1;
  int to_child = -1;    // our write end
  int from_child = -1;  // our read end
  std::string read_buffer;
  std::int64_t next_id = 0;
  int classes = 0;
  std::string command;
  std::mutex mutex;

  explicit Subprocess(const std::string& cmd, int timeout_ms) : command(cmd) {
    ignore_sigpipe_once();
    int in_pipe[2];   // parent -> child
    int out_pipe[2];  // child -> parent
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
      throw OracleError("cannot create pipes for oracle subprocess");
    pid = ::fork();
    if (pid < 0) throw OracleError("cannot fork oracle subprocess");
    if (pid == 0) {
      ::setpgid(0, 0);  // own process group, so teardown reaches grandchildren
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);  // mirror the child's call; either side may win
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child = in_pipe[1];
    from_child = out_pipe[0];

    try {
      const std::string line = read_line(timeout_ms);
      try {
        const json handshake = json::parse(line);
        classes = handshake.at("classes").get<int>();
      } catch (const json::exception& e) {
        throw OracleError(std::string("bad oracle handshake: ") + e.what(), line);
      }
      if (classes < 2) throw OracleError("oracle handshake: class count < 2", line);
    } catch (...) {
      terminate_child();
      throw;
    }
  }

  ~Subprocess() { terminate_child(); }

  // Closes the pipes, waits briefly for a clean exit on stdin EOF, then
  // takes down the whole process group (the shell may have forked the
  // actual model instead of exec'ing it).
  void terminate_child() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    to_child = from_child = -1;
    if (pid <= 0) return;
    bool reaped = false;
    for (int i = 0; i < 50 && !reaped; ++i) {
      reaped = ::waitpid(pid, nullptr, WNOHANG) != 0;
      if (!reaped) ::usleep(2000);
    }
    if (!reaped) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
    }
    pid = -1;
  }

  // Reads one newline-terminated line, honoring data already buffered.
  std::string read_line(int timeout_ms) {
    const std::int64_t deadline = now_ms() + timeout_ms;
    for (;;) {
      const auto eol = read_buffer.find('\n');
      if (eol != std::string::npos) {
        std::string line = read_buffer.substr(0, eol);
        read_buffer.erase(0, eol + 1);
        return line;
      }
      const std::int64_t remain = deadline - now_ms();
      if (remain <= 0)
        throw OracleError("oracle timeout waiting for response from: " + command,
                          read_buffer);
      struct pollfd pfd{from_child, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(remain));
      if (rc <= 0)
        throw OracleError("oracle timeout waiting for response from: " + command,
                          read_buffer);
      char chunk[4096];
      const ssize_t got = ::read(from_child, chunk, sizeof chunk);
      if (got <= 0)
        throw OracleError("oracle subprocess closed its output: " + command,
                          read_buffer);
      read_buffer.append(chunk, static_cast<std::size_t>(got));
    }
  }

  // Writes all requests and collects all responses, interleaving the two so
  // neither pipe can fill up and deadlock.
  std::vector<ProbVector> exchange(const std::vector<PointCloud>& batch,
                                   int timeout_ms) {
    std::string outgoing;
    std::vector<std::int64_t> ids;
    ids.reserve(batch.size());
    for (const auto& cloud : batch) {
      const std::int64_t id = next_id++;
      ids.push_back(id);
      outgoing += build_request(id, cloud);
    }

    std::unordered_map<std::int64_t, ProbVector> responses;
    std::size_t written = 0;
    const std::int64_t deadline = now_ms() + timeout_ms;

    auto consume_lines = [&] {
      for (;;) {
        const auto eol = read_buffer.find('\n');
        if (eol == std::string::npos) return;
        const std::string line = read_buffer.substr(0, eol);
        read_buffer.erase(0, eol + 1);
        std::int64_t id = -1;
        ProbVector probs;
        try {
          const json resp = json::parse(line);
          id = resp.at("id").get<std::int64_t>();
          probs = resp.at("probs").get<ProbVector>();
        } catch (const json::exception& e) {
          throw OracleError(std::string("malformed oracle response: ") + e.what(), line);
        }
        validate_probability_vector(probs, classes, "oracle response");
        responses[id] = std::move(probs);
      }
    };

    while (responses.size() < batch.size()) {
      consume_lines();
      if (responses.size() >= batch.size()) break;

      const std::int64_t remain = deadline - now_ms();
      if (remain <= 0)
        throw OracleError("oracle timeout during batch exchange: " + command,
                          read_buffer);

      struct pollfd pfds[2];
      int nfds = 0;
      pfds[nfds++] = {from_child, POLLIN, 0};
      if (written < outgoing.size()) pfds[nfds++] = {to_child, POLLOUT, 0};
      const int rc = ::poll(pfds, nfds, static_cast<int>(remain));
      if (rc <= 0)
        throw OracleError("oracle timeout during batch exchange: " + command,
                          read_buffer);

      if (pfds[0].revents & (POLLIN | POLLHUP)) {
        char chunk[8192];
        const ssize_t got = ::read(from_child, chunk, sizeof chunk);
        if (got <= 0) {
          consume_lines();
          if (responses.size() >= batch.size()) break;
          throw OracleError("oracle subprocess closed its output mid-batch: " + command,
                            read_buffer);
        }
        read_buffer.append(chunk, static_cast<std::size_t>(got));
      }
      if (nfds > 1 && (pfds[1].revents & (POLLOUT | POLLERR))) {
        const ssize_t put =
            ::write(to_child, outgoing.data() + written, outgoing.size() - written);
        if (put < 0) {
          if (errno == EPIPE)
            throw OracleError("oracle subprocess closed its input (broken pipe): " +
                              command);
          if (errno != EAGAIN && errno != EINTR)
            throw OracleError("write to oracle subprocess failed: " +
                              std::string(std::strerror(errno)));
        } else {
          written += static_cast<std::size_t>(put);
        }
      }
    }

    std::vector<ProbVector> out;
    out.reserve(batch.size());
    for (std::int64_t id : ids) {
      const auto it = responses.find(id);
      if (it == responses.end())
        throw OracleError("oracle response id mismatch (missing id " +
                          std::to_string(id) + ")");
      out.push_back(std::move(it->second));
    }
    return out;
  }
};

ExternalOracle::ExternalOracle(ExternalOracleConfig cfg) {
  if (cfg.command.empty()) throw ArgumentError("external oracle command is empty");
  if (cfg.procs < 1) throw ArgumentError("external oracle pool size must be >= 1");
  for (int i = 0; i < cfg.procs; ++i)
    pool_.push_back(std::make_unique<Subprocess>(cfg.command, cfg.timeout_ms));
  classes_ = pool_.front()->classes;
  for (const auto& p : pool_)
    if (p->classes != classes_)
      throw OracleError("oracle subprocesses disagree on class count");
  timeout_ms_ = cfg.timeout_ms;
}

ExternalOracle::~ExternalOracle() = default;

std::vector<ProbVector> ExternalOracle::evaluate(
    const std::vector<PointCloud>& batch) const {
  if (batch.empty()) return {};
  // Round-robin over the pool; the chosen subprocess is locked for the
  // whole batch so wire traffic stays serialized per process.
  Subprocess& proc = *pool_[next_.fetch_add(1) % pool_.size()];
  std::lock_guard<std::mutex> lock(proc.mutex);
  return proc.exchange(batch, timeout_ms_);
}

void run_oracle_server(const BuiltinClassifier& model, std::istream& in,
                       std::ostream& out) {
  json handshake;
  handshake["classes"] = model.num_classes();
  out << handshake.dump() << "\n" << std::flush;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      continue;  // a robust server skips garbage lines
    }
    PointCloud cloud;
    for (const auto& p : req.at("points"))
      cloud.points.push_back(Vec3(p.at(0).get<double>(), p.at(1).get<double>(),
                                  p.at(2).get<double>()));
    json resp;
    resp["id"] = req.at("id");
    resp["probs"] = model.probabilities(cloud);
    out << resp.dump() << "\n" << std::flush;
  }
}

}  // namespace pointprobe
