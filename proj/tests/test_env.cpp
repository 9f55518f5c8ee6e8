#include <doctest.h>

#include <set>

#include "stepforge/corpus.hpp"
#include "stepforge/errors.hpp"
#include "stepforge/oracle.hpp"
#include "stepforge/tactics.hpp"

using namespace stepforge;
using namespace stepforge::env;

namespace {

ProofState state_of(const std::string& goal) { return init_state(Statement{"t", goal}); }

ProofState advance(const ProofState& s, const std::string& tactic) {
    ApplyResult r = apply_tactic(s, tactic);
    REQUIRE(is_advanced(r));
    return std::get<Advanced>(r).state;
}

// Independent of oracle_search: enumerate every tactic sequence up to
// `limit` by plain depth-first search, no memoization, and return the
// shortest solving length.
int dfs_min_proof(const ProofState& s, int limit) {
    if (limit == 0) return -1;
    int best = -1;
    for (const std::string& t : enumerate_tactics(s)) {
        ApplyResult r = apply_tactic(s, t);
        if (is_solved(r)) return 1;
        if (is_advanced(r)) {
            int sub = dfs_min_proof(std::get<Advanced>(r).state, limit - 1);
            if (sub >= 0 && (best < 0 || sub + 1 < best)) best = sub + 1;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("formula parse and print round-trip") {
    CHECK(parse_formula("A -> A").str() == "A -> A");
    CHECK(parse_formula("A -> (B -> A)").str() == "A -> B -> A");
    CHECK(parse_formula("(A -> B) -> A").str() == "(A -> B) -> A");
    CHECK(parse_formula("A /\\ B").str() == "A ∧ B");
    CHECK(parse_formula("A | B & C").str() == "A ∨ B ∧ C");
    CHECK(parse_formula("~A").str() == "A -> ⊥");
    CHECK(parse_formula("A ∧ (B ∨ C)").str() == "A ∧ (B ∨ C)");

    // left-assoc printing keeps structure distinguishable
    Formula left = Formula::conj(Formula::conj(Formula::atom('A'), Formula::atom('B')), Formula::atom('C'));
    Formula right = Formula::conj(Formula::atom('A'), Formula::conj(Formula::atom('B'), Formula::atom('C')));
    CHECK(left.str() == "A ∧ B ∧ C");
    CHECK(right.str() == "A ∧ (B ∧ C)");
    CHECK(parse_formula(left.str()) == left);
    CHECK(parse_formula(right.str()) == right);
}

TEST_CASE("formula round-trip property over random formulas") {
    Rng rng(2024);
    for (int i = 0; i < 500; ++i) {
        Formula f = corpus::random_formula(rng, 5, 5);
        Formula back = parse_formula(f.str());
        CHECK(back == f);
        CHECK(back.str() == f.str());
    }
}

TEST_CASE("parse errors carry byte positions") {
    try {
        parse_formula("A -> ");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position == 5);
    }
    CHECK_THROWS_AS(parse_formula(""), ParseError);
    CHECK_THROWS_AS(parse_formula("(A -> B"), ParseError);
    CHECK_THROWS_AS(parse_formula("A B"), ParseError);
    CHECK_THROWS_AS(parse_formula("a"), ParseError);
}

TEST_CASE("init_state") {
    ProofState s = state_of("A -> A");
    CHECK(s.goals().size() == 1);
    CHECK(s.goals()[0].hyps.empty());
    CHECK(s.pp() == "⊢ A -> A");

    ProofState s2 = state_of("A -> (B -> A)");
    CHECK(s2.goals().size() == 1);
    CHECK(s2.goals()[0].hyps.empty());

    CHECK_THROWS_AS(init_state(Statement{"bad", "A -> "}), ParseError);
}

TEST_CASE("apply_tactic rules") {
    ProofState impl = state_of("A -> A");
    ProofState with_hyp = advance(impl, "intro h");
    CHECK(with_hyp.pp() == "h : A ⊢ A");
    CHECK(is_solved(apply_tactic(with_hyp, "assumption")));
    CHECK(is_solved(apply_tactic(with_hyp, "exact h")));

    ProofState conj_goal = state_of("A ∧ B");
    ApplyResult split = apply_tactic(conj_goal, "split");
    REQUIRE(is_advanced(split));
    const ProofState& two = std::get<Advanced>(split).state;
    CHECK(two.goals().size() == 2);
    CHECK(two.goals()[0].pp() == "⊢ A");
    CHECK(two.goals()[1].pp() == "⊢ B");

    ProofState disj_goal = state_of("A ∨ B");
    CHECK(std::get<Advanced>(apply_tactic(disj_goal, "left")).state.pp() == "⊢ A");
    CHECK(std::get<Advanced>(apply_tactic(disj_goal, "right")).state.pp() == "⊢ B");
    CHECK(std::get<Failed>(apply_tactic(disj_goal, "assumption")).reason == "inapplicable");
    CHECK(std::get<Failed>(apply_tactic(disj_goal, "frobnicate")).reason == "unknown tactic");
    CHECK(std::get<Failed>(apply_tactic(disj_goal, "intro")).reason == "unknown tactic");

    // apply: h : A -> B with target B leaves target A
    ProofState nested = advance(state_of("(A -> B) -> B"), "intro h1");
    ApplyResult applied = apply_tactic(nested, "apply h1");
    REQUIRE(is_advanced(applied));
    CHECK(std::get<Advanced>(applied).state.pp() == "h1 : A -> B ⊢ A");

    // tactics act on the first goal only
    ProofState after_split = std::get<Advanced>(apply_tactic(state_of("(A -> A) ∧ B"), "split")).state;
    ProofState first_moved = advance(after_split, "intro h1");
    CHECK(first_moved.goals().size() == 2);
    CHECK(first_moved.goals()[0].pp() == "h1 : A ⊢ A");
    CHECK(first_moved.goals()[1].pp() == "⊢ B");
}

TEST_CASE("apply_tactic determinism") {
    ProofState s = advance(state_of("A -> A ∧ (B ∨ A)"), "intro h1");
    for (const std::string& t : enumerate_tactics(s)) {
        ApplyResult a = apply_tactic(s, t);
        ApplyResult b = apply_tactic(s, t);
        CHECK(a.index() == b.index());
        if (is_advanced(a))
            CHECK(std::get<Advanced>(a).state.fingerprint() == std::get<Advanced>(b).state.fingerprint());
    }
}

TEST_CASE("enumerate_tactics order and applicability") {
    ProofState closable = advance(state_of("A -> A"), "intro h");
    CHECK(enumerate_tactics(closable) == std::vector<std::string>{"assumption", "exact h"});

    CHECK(enumerate_tactics(state_of("A -> B")) == std::vector<std::string>{"intro h1"});
    CHECK(enumerate_tactics(state_of("A ∧ (B ∨ C)")) == std::vector<std::string>{"split"});

    // fixed order: intro < split < left < right < assumption < exact < apply
    ProofState rich = advance(state_of("(B -> A) -> (A -> A ∨ B)"), "intro h1");
    ProofState rich2 = advance(rich, "intro h2");
    CHECK(rich2.pp() == "h1 : B -> A, h2 : A ⊢ A ∨ B");
    CHECK(enumerate_tactics(rich2) == std::vector<std::string>{"left", "right"});

    ProofState target_a = advance(advance(state_of("(B -> A) -> (A -> A)"), "intro h1"), "intro h2");
    CHECK(enumerate_tactics(target_a) ==
          std::vector<std::string>{"assumption", "exact h2", "apply h1"});
}

TEST_CASE("intro generates fresh hypothesis names") {
    ProofState s = state_of("A -> (B -> (C -> A))");
    s = advance(s, "intro h1");
    s = advance(s, "intro h2");
    CHECK(enumerate_tactics(s).front() == "intro h3");
    // a colliding name is inapplicable rather than shadowing
    CHECK(std::get<Failed>(apply_tactic(s, "intro h1")).reason == "inapplicable");
}

TEST_CASE("negate") {
    Statement conj_neg{"c", "A ∧ (A -> ⊥)"};
    Statement negated = negate(conj_neg);
    CHECK(negated.id == "c.neg");
    CHECK(negated.goal_text == "A ∧ (A -> ⊥) -> ⊥");
    CHECK(parse_formula(negated.goal_text) ==
          Formula::implies(parse_formula(conj_neg.goal_text), Formula::falsum()));

    Statement stored{"s", "A", "B -> B", "tag"};
    CHECK(negate(stored).goal_text == "B -> B");
    CHECK(negate(stored).id == "s.neg");
}

TEST_CASE("oracle_search finds shortest proofs") {
    auto p1 = oracle_search(Statement{"t1", "A -> A"}, 4);
    REQUIRE(p1.has_value());
    CHECK(p1->tactics == std::vector<std::string>{"intro h1", "assumption"});
    CHECK(p1->length() == 2);

    auto p2 = oracle_search(Statement{"t2", "A -> (B -> A)"}, 4);
    REQUIRE(p2.has_value());
    CHECK(p2->length() == 3);

    CHECK_FALSE(oracle_search(Statement{"t3", "A"}, 8).has_value());
    CHECK_THROWS_AS(oracle_search(Statement{"t4", "A"}, 13), Error);
}

TEST_CASE("oracle soundness: every proof replays to Solved") {
    corpus::MixedCorpus corpus = corpus::random_mixed(40, 91, 6);
    long found = 0;
    for (const Statement& s : corpus.statements) {
        auto proof = oracle_search(s, 6);
        if (!proof) continue;
        ++found;
        CHECK(replays_to_solved(s, proof->tactics));
    }
    CHECK(found == corpus.provable);
    CHECK(found >= 20);
}

TEST_CASE("oracle minimality against exhaustive DFS enumeration") {
    std::vector<std::string> goals = {
        "A -> A", "A -> (B -> A)", "A ∧ B -> A ∧ B", "A -> A ∨ B",
        "A -> B -> A ∧ B", "⊥ -> ⊥", "(A -> B) -> (A -> B)",
    };
    for (const std::string& g : goals) {
        Statement s{"m", g};
        auto proof = oracle_search(s, 6);
        REQUIRE(proof.has_value());
        int brute = dfs_min_proof(init_state(s), 6);
        CHECK(brute == static_cast<int>(proof->length()));
    }
    // and a seeded batch of generated tautologies
    auto deep = corpus::random_provable_deep(10, 77, 3, 5);
    for (const Statement& s : deep) {
        auto proof = oracle_search(s, 5);
        REQUIRE(proof.has_value());
        CHECK(dfs_min_proof(init_state(s), static_cast<int>(proof->length())) ==
              static_cast<int>(proof->length()));
    }
}

TEST_CASE("fingerprint law") {
    Rng rng(5);
    std::vector<ProofState> states;
    for (int i = 0; i < 60; ++i) {
        Statement s{"f", corpus::random_formula(rng, 4, 4).str()};
        ProofState st = init_state(s);
        states.push_back(st);
        for (const std::string& t : enumerate_tactics(st)) {
            ApplyResult r = apply_tactic(st, t);
            if (is_advanced(r)) states.push_back(std::get<Advanced>(r).state);
        }
    }
    for (const ProofState& a : states) {
        for (const ProofState& b : states) {
            bool same_goals = a.goals() == b.goals();
            CHECK(same_goals == (a.fingerprint() == b.fingerprint()));
        }
    }
}

TEST_CASE("state pp parses back") {
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        Statement s{"r", corpus::random_formula(rng, 4, 3).str()};
        ProofState st = init_state(s);
        for (int step = 0; step < 4; ++step) {
            ProofState parsed = parse_state(st.pp());
            CHECK(parsed == st);
            CHECK(parsed.pp() == st.pp());
            auto tactics = st.no_goals() ? std::vector<std::string>{} : enumerate_tactics(st);
            if (tactics.empty()) break;
            ApplyResult r = apply_tactic(st, tactics[rng.bounded(tactics.size())]);
            if (!is_advanced(r)) break;
            st = std::get<Advanced>(r).state;
        }
    }
    CHECK(parse_state("no goals").no_goals());
    CHECK_THROWS_AS(parse_state("garbage without turnstile"), ParseError);
}
