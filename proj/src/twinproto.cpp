#include "twinfal/twinproto.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinfal/error.hpp"
#include "twinfal/rng.hpp"

namespace twinfal {

using nlohmann::json;

namespace {

struct ChildProcess {
    pid_t pid = -1;
    int to_child = -1;    // parent writes requests here
    int from_child = -1;  // parent reads responses here

    ~ChildProcess() {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        if (pid > 0) {
            int status = 0;
            if (::waitpid(pid, &status, WNOHANG) == 0) {
                ::kill(pid, SIGKILL);
                ::waitpid(pid, &status, 0);
            }
        }
    }

    void close_stdin() {
        if (to_child >= 0) {
            ::close(to_child);
            to_child = -1;
        }
    }
};

ChildProcess spawn(const std::vector<std::string>& command) {
    if (command.empty()) throw ProtocolError("empty twin command");
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) {
        throw ProtocolError("cannot create pipes for the twin process");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw ProtocolError("cannot fork the twin process");
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        std::vector<char*> argv;
        argv.reserve(command.size() + 1);
        for (const auto& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
        argv.push_back(nullptr);
        ::execvp(argv[0], argv.data());
        ::_exit(127);
    }
    ChildProcess child;
    child.pid = pid;
    child.to_child = in_pipe[1];
    child.from_child = out_pipe[0];
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    return child;
}

// Buffered line reader over the child's stdout with a per-read deadline.
class LineReader {
  public:
    LineReader(int fd, int timeout_ms) : fd_(fd), timeout_ms_(timeout_ms) {}

    // Returns false on clean EOF; throws ProtocolError on timeout.
    bool next_line(std::string& line) {
        for (;;) {
            const auto pos = buffer_.find('\n');
            if (pos != std::string::npos) {
                line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return true;
            }
            struct pollfd pfd{fd_, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, timeout_ms_);
            if (ready == 0) {
                throw ProtocolError("twin process produced no output within " +
                                    std::to_string(timeout_ms_) + " ms");
            }
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError("poll on twin process failed");
            }
            char chunk[4096];
            const ssize_t got = ::read(fd_, chunk, sizeof(chunk));
            if (got < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError("read from twin process failed");
            }
            if (got == 0) {
                if (buffer_.empty()) return false;
                line = std::move(buffer_);
                buffer_.clear();
                return true;
            }
            buffer_.append(chunk, static_cast<std::size_t>(got));
        }
    }

  private:
    int fd_;
    int timeout_ms_;
    std::string buffer_;
};

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t wrote = ::write(fd, data.data() + off, data.size() - off);
        if (wrote < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("write to twin process failed (broken pipe?)");
        }
        off += static_cast<std::size_t>(wrote);
    }
}

std::vector<double> parse_state(const json& j, std::size_t request_id, std::size_t step,
                                int expected_dim) {
    if (!j.is_array() || static_cast<int>(j.size()) != expected_dim) {
        throw ProtocolError("response " + std::to_string(request_id) + ": state " +
                            std::to_string(step) + " has wrong dimension");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            throw ProtocolError("response " + std::to_string(request_id) +
                                ": non-finite state value");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

TwinDataset run_external_twin(const ExternalTwinOptions& opts, const SchemaSpec& schema,
                              const std::vector<std::vector<double>>& x0_pool,
                              const std::vector<int>& actions, std::size_t n,
                              std::uint64_t master_seed) {
    schema.validate();
    // A dead child must surface as ProtocolError, not SIGPIPE.
    static const bool sigpipe_ignored = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;
    if (x0_pool.size() < n) {
        throw ValidationError("x0 pool smaller than the requested twin count; each x0 is used at "
                              "most once");
    }
    if (actions.size() > static_cast<std::size_t>(schema.horizon)) {
        throw ValidationError("action sequence longer than the schema horizon");
    }

    ChildProcess child = spawn(opts.command);
    LineReader reader(child.from_child, opts.timeout_ms);

    // Handshake.
    std::string line;
    if (!reader.next_line(line)) {
        throw ProtocolError("twin process exited before the handshake");
    }
    json handshake;
    try {
        handshake = json::parse(line);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed handshake: ") + e.what());
    }
    if (!handshake.contains("protocol") || handshake["protocol"] != kProtocolName) {
        throw ProtocolError("twin speaks an unknown protocol");
    }
    if (handshake.contains("dims")) {
        const auto dims = handshake["dims"].get<std::vector<int>>();
        for (std::size_t s = 1; s <= actions.size(); ++s) {
            if (s > dims.size() || dims[s - 1] != schema.dims[s]) {
                throw ProtocolError("twin handshake dims do not match the schema");
            }
        }
    }

    TwinDataset out;
    out.schema = schema;
    out.actions = actions;
    out.provenance.source = "twinproto:" + opts.command.front();
    out.provenance.seed = master_seed;
    out.records.resize(n);

    std::vector<bool> received(n, false);
    std::size_t next_to_send = 0;
    std::size_t completed = 0;
    const auto window = static_cast<std::size_t>(std::max(1, opts.pipeline_window));

    auto send_request = [&](std::size_t id) {
        json req;
        req["id"] = id;
        req["x0"] = x0_pool[id];
        req["actions"] = actions;
        req["seed"] = wire_seed(master_seed, id);
        write_all(child.to_child, req.dump() + "\n");
    };

    try {
        while (completed < n) {
            while (next_to_send < n && next_to_send - completed < window) {
                send_request(next_to_send++);
            }
            if (!reader.next_line(line)) {
                throw ProtocolError("twin process closed its output with " +
                                    std::to_string(n - completed) + " of " + std::to_string(n) +
                                    " responses pending");
            }
            json resp;
            try {
                resp = json::parse(line);
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("malformed response line: ") + e.what());
            }
            if (!resp.contains("id") || !resp["id"].is_number_integer()) {
                throw ProtocolError("response without a request id");
            }
            const auto id = resp["id"].get<long long>();
            if (id < 0 || static_cast<std::size_t>(id) >= n) {
                throw ProtocolError("response for unknown request id " + std::to_string(id));
            }
            if (received[static_cast<std::size_t>(id)]) {
                throw ProtocolError("duplicate response for request id " + std::to_string(id));
            }
            if (resp.contains("error")) {
                throw ProtocolError("twin reported an error for request " + std::to_string(id) +
                                    ": " + resp["error"].get<std::string>());
            }
            if (!resp.contains("states") || !resp["states"].is_array() ||
                resp["states"].size() != actions.size()) {
                throw ProtocolError("response " + std::to_string(id) + ": expected " +
                                    std::to_string(actions.size()) + " states, got " +
                                    std::to_string(resp.contains("states") &&
                                                           resp["states"].is_array()
                                                       ? resp["states"].size()
                                                       : 0));
            }
            TwinTrajectory rec;
            rec.x0 = x0_pool[static_cast<std::size_t>(id)];
            rec.actions = actions;
            for (std::size_t s = 1; s <= actions.size(); ++s) {
                rec.states.push_back(parse_state(resp["states"][s - 1],
                                                 static_cast<std::size_t>(id), s,
                                                 schema.dims[s]));
            }
            out.records[static_cast<std::size_t>(id)] = std::move(rec);
            received[static_cast<std::size_t>(id)] = true;
            ++completed;
        }
    } catch (const ProtocolError& e) {
        throw ProtocolError(std::string(e.what()) + " (completed " + std::to_string(completed) +
                            "/" + std::to_string(n) + " requests)");
    }

    child.close_stdin();  // child exits on EOF; destructor reaps or kills
    return out;
}

}  // namespace twinfal
