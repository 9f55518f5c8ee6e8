#pragma once

#include <cstdint>
#include <vector>

#include "stepforge/rng.hpp"
#include "stepforge/statement.hpp"
#include "stepforge/formula.hpp"

namespace stepforge::corpus {

// Random formula over single-letter atoms starting at 'A'.
env::Formula random_formula(Rng& rng, int max_depth, int atom_count);

struct MixedCorpus {
    std::vector<env::Statement> statements;
    long provable = 0;  // per the oracle at the generation depth
};

// Half tactically provable statements (oracle-verified), half random
// unprovable ones, interleaved. Deterministic under seed.
MixedCorpus random_mixed(int count, std::uint64_t seed, int oracle_depth = 6, int atom_count = 3);

// Provable statements whose oracle-minimal proof length lies in
// [min_len, oracle_depth]: implication chains into and/or combinations of
// the introduced atoms.
std::vector<env::Statement> random_provable_deep(int count, std::uint64_t seed, int min_len,
                                                 int oracle_depth = 8, int atom_count = 4);

// Unprovable statements whose disproof succeeds: a few honest "⊥" goals
// (their derived negation ⊥ -> ⊥ closes in two tactics) plus statements
// with a provable stored negation.
std::vector<env::Statement> random_disprovable(int count, std::uint64_t seed, int oracle_depth = 6);

// Largest enumerate_tactics fan-out over all states reachable from the
// statement within depth_limit tactics.
int max_branching(const env::Statement& statement, int depth_limit);

}  // namespace stepforge::corpus
