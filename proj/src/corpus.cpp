#include "stepforge/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <unordered_set>

#include "stepforge/oracle.hpp"

namespace stepforge::corpus {

using env::Formula;

Formula random_formula(Rng& rng, int max_depth, int atom_count) {
    if (max_depth <= 1) {
        // Leaves are mostly atoms, occasionally falsum.
        if (rng.bounded(8) == 0) return Formula::falsum();
        return Formula::atom(static_cast<char>('A' + rng.bounded(static_cast<std::uint64_t>(atom_count))));
    }
    switch (rng.bounded(4)) {
        case 0: return Formula::implies(random_formula(rng, max_depth - 1, atom_count),
                                        random_formula(rng, max_depth - 1, atom_count));
        case 1: return Formula::conj(random_formula(rng, max_depth - 1, atom_count),
                                     random_formula(rng, max_depth - 1, atom_count));
        case 2: return Formula::disj(random_formula(rng, max_depth - 1, atom_count),
                                     random_formula(rng, max_depth - 1, atom_count));
        default: return random_formula(rng, 1, atom_count);
    }
}

namespace {

// A formula provable from hypotheses {pool}: an atom from the pool, a
// conjunction of two provable parts, or a disjunction with one provable
// side.
Formula derivable_formula(Rng& rng, const std::vector<char>& pool, int atom_count, int budget) {
    if (budget <= 0 || rng.bounded(3) == 0)
        return Formula::atom(pool[rng.bounded(pool.size())]);
    switch (rng.bounded(3)) {
        case 0:
            return Formula::conj(derivable_formula(rng, pool, atom_count, budget - 1),
                                 derivable_formula(rng, pool, atom_count, budget - 1));
        case 1:
            return Formula::disj(derivable_formula(rng, pool, atom_count, budget - 1),
                                 random_formula(rng, 2, atom_count));
        default:
            return Formula::disj(random_formula(rng, 2, atom_count),
                                 derivable_formula(rng, pool, atom_count, budget - 1));
    }
}

// Implication chain a1 -> a2 -> ... -> conclusion(a1..ak): provable with k
// intros plus the structural derivation of the conclusion.
Formula random_tautology(Rng& rng, int atom_count, int min_intros, int max_intros, int conclusion_budget) {
    int k = min_intros + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(max_intros - min_intros + 1)));
    std::vector<char> pool;
    for (int i = 0; i < k; ++i)
        pool.push_back(static_cast<char>('A' + rng.bounded(static_cast<std::uint64_t>(atom_count))));
    Formula f = derivable_formula(rng, pool, atom_count, conclusion_budget);
    for (int i = k - 1; i >= 0; --i) f = Formula::implies(Formula::atom(pool[static_cast<std::size_t>(i)]), f);
    return f;
}

std::string make_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", prefix, i);
    return buf;
}

}  // namespace

MixedCorpus random_mixed(int count, std::uint64_t seed, int oracle_depth, int atom_count) {
    Rng rng(seed);
    MixedCorpus corpus;
    int provable_quota = count / 2;
    int made = 0;
    while (made < count) {
        bool want_provable = (made % 2 == 0) && corpus.provable < provable_quota;
        Formula f = want_provable ? random_tautology(rng, atom_count, 1, 3, 2)
                                  : random_formula(rng, 3, atom_count);
        env::Statement s(make_id("mix", made), f.str(), std::nullopt, "toy-mixed");
        bool provable = env::oracle_search(s, oracle_depth).has_value();
        if (want_provable && !provable) continue;  // resample until the quota fills
        corpus.provable += provable ? 1 : 0;
        corpus.statements.push_back(std::move(s));
        ++made;
    }
    return corpus;
}

namespace {

// Dead-end side of a disjunction, built so every move inside it is forced:
// intro and split chains over atoms that never gain a matching hypothesis.
// Forced edges carry log-probability 0, so a likelihood-guided search keeps
// digging until the whole block is exhausted.
Formula noise_block(Rng& rng, int depth) {
    char far = static_cast<char>('U' + rng.bounded(6));  // U..Z, never introduced
    if (depth <= 0) return Formula::atom(far);
    if (rng.bounded(2) == 0) return Formula::implies(Formula::atom(far), noise_block(rng, depth - 1));
    return Formula::conj(noise_block(rng, depth - 1), noise_block(rng, depth - 1));
}

// Nested disjunction maze: exactly one side of each disjunction continues
// toward a provable core, the other is a noise block.
Formula maze_formula(Rng& rng, const std::vector<char>& pool, int depth, int noise_depth) {
    if (depth <= 0) {
        Formula core = Formula::atom(pool[rng.bounded(pool.size())]);
        if (rng.bounded(3) == 0)
            core = Formula::conj(core, Formula::atom(pool[rng.bounded(pool.size())]));
        return core;
    }
    Formula inner = maze_formula(rng, pool, depth - 1, noise_depth);
    Formula noise = noise_block(rng, noise_depth);
    if (rng.bounded(2) == 0) return Formula::disj(inner, noise);
    return Formula::disj(noise, inner);
}

}  // namespace

std::vector<env::Statement> random_provable_deep(int count, std::uint64_t seed, int min_len,
                                                 int oracle_depth, int atom_count) {
    Rng rng(seed);
    std::vector<env::Statement> out;
    std::unordered_set<std::string> seen;
    while (static_cast<int>(out.size()) < count) {
        int intros = 2 + static_cast<int>(rng.bounded(2));
        std::vector<char> pool;
        for (int i = 0; i < intros; ++i)
            pool.push_back(static_cast<char>('A' + rng.bounded(static_cast<std::uint64_t>(atom_count))));
        int cap = std::max(1, oracle_depth - intros - 2);
        int maze_depth = 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(cap)));
        // Deeper mazes get bulkier noise blocks, so their dead ends cost a
        // likelihood-guided search most of its expansion budget.
        int noise_depth = maze_depth <= 2 ? 3 : 5;
        Formula f = maze_formula(rng, pool, maze_depth, noise_depth);
        for (int i = intros - 1; i >= 0; --i)
            f = Formula::implies(Formula::atom(pool[static_cast<std::size_t>(i)]), f);
        env::Statement s(make_id("deep", static_cast<int>(out.size())), f.str(), std::nullopt, "toy-deep");
        if (!seen.insert(s.goal_text).second) continue;
        auto proof = env::oracle_search(s, oracle_depth);
        if (!proof || static_cast<int>(proof->length()) < min_len) continue;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<env::Statement> random_disprovable(int count, std::uint64_t seed, int oracle_depth) {
    Rng rng(seed);
    std::vector<env::Statement> out;
    for (int i = 0; i < count; ++i) {
        if (i % 3 == 0) {
            // Honest case: the derived toy negation ⊥ -> ⊥ is provable.
            out.emplace_back(make_id("dis", i), "⊥", std::nullopt, "toy-disprovable");
            continue;
        }
        // Unprovable goal with a provable stored negation.
        env::Statement s(make_id("dis", i), "", std::nullopt, "toy-disprovable");
        for (;;) {
            Formula goal = random_formula(rng, 3, 3);
            env::Statement probe("probe", goal.str());
            if (env::oracle_search(probe, oracle_depth)) continue;  // need an unprovable goal
            s.goal_text = goal.str();
            break;
        }
        for (;;) {
            Formula neg = random_tautology(rng, 3, 1, 3, 2);
            env::Statement probe("probe", neg.str());
            if (!env::oracle_search(probe, oracle_depth)) continue;  // need a provable negation
            s.negation_text = neg.str();
            break;
        }
        out.push_back(std::move(s));
    }
    return out;
}

int max_branching(const env::Statement& statement, int depth_limit) {
    env::ProofState root = env::init_state(statement);
    std::unordered_set<std::string> visited{root.fingerprint()};
    std::deque<std::pair<env::ProofState, int>> frontier{{root, 0}};
    int widest = 0;
    while (!frontier.empty()) {
        auto [state, depth] = std::move(frontier.front());
        frontier.pop_front();
        std::vector<std::string> tactics = env::enumerate_tactics(state);
        widest = std::max(widest, static_cast<int>(tactics.size()));
        if (depth == depth_limit) continue;
        for (const std::string& tactic : tactics) {
            env::ApplyResult r = env::apply_tactic(state, tactic);
            if (auto* adv = std::get_if<env::Advanced>(&r)) {
                if (visited.insert(adv->state.fingerprint()).second)
                    frontier.emplace_back(adv->state, depth + 1);
            }
        }
    }
    return widest;
}

}  // namespace stepforge::corpus
