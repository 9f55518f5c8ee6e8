#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stepforge/tactics.hpp"

namespace stepforge::env {

// A verified (or candidate) tactic sequence for one statement.
struct ProofPath {
    std::string statement_id;
    std::vector<std::string> tactics;

    std::size_t length() const { return tactics.size(); }
};

// Replays tactics from the statement's root state and returns the full
// state sequence, root first. A proof of n tactics yields n+1 states ending
// at no_goals. Throws InvalidTrajectory when an application fails or
// tactics remain after the goals empty.
std::vector<ProofState> replay_path(const Statement& statement, const std::vector<std::string>& tactics);

// True iff the tactic list replays cleanly and ends at no_goals.
bool replays_to_solved(const Statement& statement, const std::vector<std::string>& tactics);

// Exhaustive breadth-first enumeration over enumerate_tactics with
// state-fingerprint memoization. Returns a shortest proof of at most
// depth_limit tactics, or nullopt when none exists within the limit.
// Ground truth for the search engine: every returned proof replays to
// Solved. depth_limit must be <= 12.
std::optional<ProofPath> oracle_search(const Statement& statement, int depth_limit);

}  // namespace stepforge::env
