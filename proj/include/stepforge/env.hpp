#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "stepforge/oracle.hpp"
#include "stepforge/tactics.hpp"

namespace stepforge::env {

// A prover state as seen by the search engine. The toy environment carries
// the parsed state (feeding local policies and the linear critic); external
// adapters only have the server-side handle and pretty-print.
struct EnvState {
    std::string pp;
    std::string fingerprint;
    std::optional<ProofState> toy;
    long handle = -1;  // server-side state id for wire environments
};

struct EnvAdvanced {
    EnvState state;
};
struct EnvSolved {};
struct EnvFailed {
    std::string reason;
};
using EnvApplyResult = std::variant<EnvAdvanced, EnvSolved, EnvFailed>;

// Tactic-environment abstraction the search engine runs against.
class TacticEnv {
  public:
    virtual ~TacticEnv() = default;

    // Root state for a statement. Throws ParseError (toy) or
    // BackendUnavailable (wire) on failure.
    virtual EnvState init(const Statement& statement) = 0;

    virtual EnvApplyResult apply(const EnvState& state, const std::string& tactic) = 0;

    // Disproof target for a statement. Throws MissingNegation when the
    // environment cannot derive one.
    virtual Statement negation_of(const Statement& statement) = 0;

    // Whether concurrent calls are safe without external locking.
    virtual bool concurrent_safe() const = 0;
};

// Replays a tactic list through an environment from the statement's root;
// true iff every application advances and the last one solves.
bool env_replays_to_solved(TacticEnv& environment, const Statement& statement,
                           const std::vector<std::string>& tactics);

// The built-in decidable propositional prover. Pure functions over
// immutable values; safe for unrestricted concurrent use.
class ToyEnv final : public TacticEnv {
  public:
    EnvState init(const Statement& statement) override;
    EnvApplyResult apply(const EnvState& state, const std::string& tactic) override;
    Statement negation_of(const Statement& statement) override { return negate(statement); }
    bool concurrent_safe() const override { return true; }

    static EnvState wrap(ProofState state);
};

}  // namespace stepforge::env
