#include "stepforge/wire.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "stepforge/errors.hpp"

namespace stepforge::env {

using ordered_json = nlohmann::ordered_json;

std::string EnvServer::handle_line(const std::string& line) {
    ordered_json reply;
    try {
        ordered_json req = ordered_json::parse(line);
        std::string cmd = req.at("cmd").get<std::string>();
        if (cmd == "init") {
            ProofState root = init_state(Statement{"wire", req.at("goal").get<std::string>()});
            states_.push_back(root);
            reply["ok"] = true;
            reply["state_id"] = static_cast<long>(states_.size() - 1);
            reply["pp"] = root.pp();
        } else if (cmd == "apply") {
            long id = req.at("state_id").get<long>();
            if (id < 0 || static_cast<std::size_t>(id) >= states_.size())
                throw Error("unknown state_id " + std::to_string(id));
            ApplyResult r = apply_tactic(states_[static_cast<std::size_t>(id)], req.at("tactic").get<std::string>());
            if (auto* adv = std::get_if<Advanced>(&r)) {
                states_.push_back(adv->state);
                reply["ok"] = true;
                reply["state_id"] = static_cast<long>(states_.size() - 1);
                reply["pp"] = adv->state.pp();
            } else if (is_solved(r)) {
                reply["ok"] = true;
                reply["solved"] = true;
            } else {
                reply["ok"] = false;
                reply["reason"] = std::get<Failed>(r).reason;
            }
        } else {
            throw Error("unknown cmd '" + cmd + "'");
        }
    } catch (const std::exception& e) {
        reply.clear();
        reply["ok"] = false;
        reply["reason"] = e.what();
    }
    return reply.dump();
}

void env_serve(std::istream& in, std::ostream& out) {
    EnvServer server;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out << server.handle_line(line) << '\n' << std::flush;
    }
}

SubprocessEnv::SubprocessEnv(const std::string& command, double timeout_s) : timeout_s_(timeout_s) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw BackendUnavailable("pipe() failed for '" + command + "'");
    pid_t pid = fork();
    if (pid < 0) throw BackendUnavailable("fork() failed for '" + command + "'");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    pid_ = pid;
    to_child_ = to_child[1];
    from_child_ = from_child[0];
    close(to_child[0]);
    close(from_child[1]);
}

SubprocessEnv::~SubprocessEnv() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        if (waitpid(static_cast<pid_t>(pid_), &status, WNOHANG) == 0) {
            kill(static_cast<pid_t>(pid_), SIGTERM);
            waitpid(static_cast<pid_t>(pid_), &status, 0);
        }
    }
}

std::string SubprocessEnv::round_trip(const std::string& request_line) {
    std::string msg = request_line + "\n";
    std::size_t written = 0;
    while (written < msg.size()) {
        ssize_t n = write(to_child_, msg.data() + written, msg.size() - written);
        if (n <= 0) throw BackendUnavailable("external env closed its stdin pipe");
        written += static_cast<std::size_t>(n);
    }

    auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s_);
    for (;;) {
        std::size_t nl = read_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return line;
        }
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) throw BackendUnavailable("external env request timed out");
        pollfd pfd{from_child_, POLLIN, 0};
        int pr = poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (pr < 0) throw BackendUnavailable("poll() on external env failed");
        if (pr == 0) throw BackendUnavailable("external env request timed out");
        char chunk[4096];
        ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n <= 0) throw BackendUnavailable("external env exited or closed stdout");
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

EnvState SubprocessEnv::init(const Statement& statement) {
    std::lock_guard<std::mutex> lock(mutex_);
    ordered_json req{{"cmd", "init"}, {"goal", statement.goal_text}};
    ordered_json resp = ordered_json::parse(round_trip(req.dump()), nullptr, false);
    if (resp.is_discarded() || !resp.contains("ok"))
        throw BackendUnavailable("malformed init response");
    if (!resp["ok"].get<bool>())
        throw BackendUnavailable("init refused: " + resp.value("reason", std::string("unknown")));
    EnvState s;
    s.pp = resp.at("pp").get<std::string>();
    s.fingerprint = s.pp;
    s.handle = resp.at("state_id").get<long>();
    return s;
}

EnvApplyResult SubprocessEnv::apply(const EnvState& state, const std::string& tactic) {
    std::lock_guard<std::mutex> lock(mutex_);
    ordered_json req{{"cmd", "apply"}, {"state_id", state.handle}, {"tactic", tactic}};
    ordered_json resp = ordered_json::parse(round_trip(req.dump()), nullptr, false);
    if (resp.is_discarded() || !resp.contains("ok"))
        throw BackendUnavailable("malformed apply response");
    if (!resp["ok"].get<bool>()) return EnvFailed{resp.value("reason", std::string("unknown"))};
    if (resp.value("solved", false)) return EnvSolved{};
    EnvState s;
    s.pp = resp.at("pp").get<std::string>();
    s.fingerprint = s.pp;
    s.handle = resp.at("state_id").get<long>();
    return EnvAdvanced{std::move(s)};
}

Statement SubprocessEnv::negation_of(const Statement& statement) {
    if (statement.negation_text)
        return Statement(statement.id + ".neg", *statement.negation_text, std::nullopt, statement.source_tag);
    throw MissingNegation(statement.id + ": external environment without a stored negation");
}

}  // namespace stepforge::env
