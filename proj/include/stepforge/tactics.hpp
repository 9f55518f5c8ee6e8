#pragma once

#include <string>
#include <variant>
#include <vector>

#include "stepforge/state.hpp"
#include "stepforge/statement.hpp"

namespace stepforge::env {

struct Advanced {
    ProofState state;
};
struct Solved {};
struct Failed {
    std::string reason;  // "inapplicable" or "unknown tactic"
};

// Tactic application result. Solved is returned exactly when the
// application leaves zero goals. Failures are never fatal; searches record
// them as dead edges.
using ApplyResult = std::variant<Advanced, Solved, Failed>;

inline bool is_advanced(const ApplyResult& r) { return std::holds_alternative<Advanced>(r); }
inline bool is_solved(const ApplyResult& r) { return std::holds_alternative<Solved>(r); }
inline bool is_failed(const ApplyResult& r) { return std::holds_alternative<Failed>(r); }

// Parses goal_text and returns the root state: one goal, no hypotheses.
// Throws ParseError on malformed goal_text.
ProofState init_state(const Statement& statement);

// Applies one tactic to the FIRST goal. Deterministic; pure.
//
// Tactic set:
//   intro <name>   target A -> B: add <name> : A, target becomes B
//   split          target A ∧ B: goal becomes two goals, A then B
//   left / right   target A ∨ B: keep the named disjunct
//   assumption     close the goal if some hypothesis equals the target
//   exact <name>   assumption naming the hypothesis
//   apply <name>   <name> : A -> B with target B: target becomes A
//
// A goal closed by assumption/exact is removed; Solved when the goal list
// empties. Side-condition failures give Failed("inapplicable"),
// unrecognized tactic text Failed("unknown tactic").
ApplyResult apply_tactic(const ProofState& state, const std::string& tactic);

// Every syntactically applicable tactic for the first goal, in a fixed
// order: intro < split < left < right < assumption < exact (ascending
// hypothesis index) < apply (ascending). assumption and exact appear only
// when they would close the goal. Deterministic.
std::vector<std::string> enumerate_tactics(const ProofState& state);

// Disproof target. Stored negation_text wins; otherwise the toy negation
// φ -> ⊥, with the id suffixed ".neg". Used by environments that can
// derive negations; external adapters without a stored negation throw
// MissingNegation.
Statement negate(const Statement& statement);

}  // namespace stepforge::env
