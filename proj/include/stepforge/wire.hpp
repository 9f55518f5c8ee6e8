#pragma once

#include <iosfwd>
#include <mutex>
#include <string>

#include "stepforge/env.hpp"

namespace stepforge::env {

// Newline-delimited JSON protocol for external provers, one request and one
// response record per line:
//
//   {"cmd":"init","goal":<string>}
//     -> {"ok":true,"state_id":<int>,"pp":<string>}
//   {"cmd":"apply","state_id":<int>,"tactic":<string>}
//     -> {"ok":true,"state_id":<int>,"pp":<string>}
//      | {"ok":true,"solved":true}
//      | {"ok":false,"reason":<string>}
//
// Any failure (parse errors included) answers {"ok":false,"reason":...}.

// Serves the toy environment over the protocol until EOF. One response
// line per request line, flushed immediately.
void env_serve(std::istream& in, std::ostream& out);

// Handles a single request record; exposed for protocol-level tests.
class EnvServer {
  public:
    std::string handle_line(const std::string& line);

  private:
    std::vector<ProofState> states_;
};

// Child-process adapter speaking the protocol over the child's stdin and
// stdout. Requests are serialized behind a mutex; a per-request timeout
// (default 30 s) turns a stuck child into BackendUnavailable.
class SubprocessEnv final : public TacticEnv {
  public:
    explicit SubprocessEnv(const std::string& command, double timeout_s = 30.0);
    ~SubprocessEnv() override;

    SubprocessEnv(const SubprocessEnv&) = delete;
    SubprocessEnv& operator=(const SubprocessEnv&) = delete;

    EnvState init(const Statement& statement) override;
    EnvApplyResult apply(const EnvState& state, const std::string& tactic) override;
    Statement negation_of(const Statement& statement) override;
    bool concurrent_safe() const override { return true; }

  private:
    std::string round_trip(const std::string& request_line);

    std::mutex mutex_;
    double timeout_s_;
    int to_child_ = -1;
    int from_child_ = -1;
    long pid_ = -1;
    std::string read_buffer_;
};

}  // namespace stepforge::env
