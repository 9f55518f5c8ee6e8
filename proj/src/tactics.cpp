#include "stepforge/tactics.hpp"

#include <algorithm>
#include <sstream>

#include "stepforge/errors.hpp"

namespace stepforge::env {

ProofState init_state(const Statement& statement) {
    Formula target = parse_formula(statement.goal_text);
    return ProofState({Sequent{{}, target}});
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

bool has_hyp_named(const Sequent& goal, const std::string& name) {
    return std::any_of(goal.hyps.begin(), goal.hyps.end(),
                       [&](const Hypothesis& h) { return h.name == name; });
}

const Hypothesis* find_hyp(const Sequent& goal, const std::string& name) {
    for (const auto& h : goal.hyps) {
        if (h.name == name) return &h;
    }
    return nullptr;
}

// Replace the first goal with zero or more successors, keeping the rest.
ApplyResult rebuild(const ProofState& state, std::vector<Sequent> replacements) {
    std::vector<Sequent> goals = std::move(replacements);
    goals.insert(goals.end(), state.goals().begin() + 1, state.goals().end());
    if (goals.empty()) return Solved{};
    return Advanced{ProofState(std::move(goals))};
}

}  // namespace

ApplyResult apply_tactic(const ProofState& state, const std::string& tactic) {
    if (state.no_goals()) throw Error("apply_tactic on no_goals");
    const Sequent& goal = state.goals().front();
    const Formula& target = goal.target;
    std::vector<std::string> words = split_words(tactic);
    if (words.empty()) return Failed{"unknown tactic"};
    const std::string& head = words[0];

    if (head == "intro") {
        if (words.size() != 2) return Failed{"unknown tactic"};
        if (!target.is_implies()) return Failed{"inapplicable"};
        if (has_hyp_named(goal, words[1])) return Failed{"inapplicable"};
        Sequent next = goal;
        next.hyps.push_back({words[1], target.lhs()});
        next.target = target.rhs();
        return rebuild(state, {std::move(next)});
    }
    if (head == "split") {
        if (words.size() != 1) return Failed{"unknown tactic"};
        if (!target.is_and()) return Failed{"inapplicable"};
        Sequent first = goal, second = goal;
        first.target = target.lhs();
        second.target = target.rhs();
        return rebuild(state, {std::move(first), std::move(second)});
    }
    if (head == "left" || head == "right") {
        if (words.size() != 1) return Failed{"unknown tactic"};
        if (!target.is_or()) return Failed{"inapplicable"};
        Sequent next = goal;
        next.target = head == "left" ? target.lhs() : target.rhs();
        return rebuild(state, {std::move(next)});
    }
    if (head == "assumption") {
        if (words.size() != 1) return Failed{"unknown tactic"};
        for (const auto& h : goal.hyps) {
            if (h.formula == target) return rebuild(state, {});
        }
        return Failed{"inapplicable"};
    }
    if (head == "exact") {
        if (words.size() != 2) return Failed{"unknown tactic"};
        const Hypothesis* h = find_hyp(goal, words[1]);
        if (!h || !(h->formula == target)) return Failed{"inapplicable"};
        return rebuild(state, {});
    }
    if (head == "apply") {
        if (words.size() != 2) return Failed{"unknown tactic"};
        const Hypothesis* h = find_hyp(goal, words[1]);
        if (!h || !h->formula.is_implies() || !(h->formula.rhs() == target))
            return Failed{"inapplicable"};
        Sequent next = goal;
        next.target = h->formula.lhs();
        return rebuild(state, {std::move(next)});
    }
    return Failed{"unknown tactic"};
}

std::vector<std::string> enumerate_tactics(const ProofState& state) {
    if (state.no_goals()) throw Error("enumerate_tactics on no_goals");
    const Sequent& goal = state.goals().front();
    const Formula& target = goal.target;
    std::vector<std::string> out;

    if (target.is_implies()) {
        // Fresh hypothesis name: h<k> with the smallest k past the current count.
        std::size_t k = goal.hyps.size() + 1;
        std::string name = "h" + std::to_string(k);
        while (has_hyp_named(goal, name)) name = "h" + std::to_string(++k);
        out.push_back("intro " + name);
    }
    if (target.is_and()) out.push_back("split");
    if (target.is_or()) {
        out.push_back("left");
        out.push_back("right");
    }
    bool closable = std::any_of(goal.hyps.begin(), goal.hyps.end(),
                                [&](const Hypothesis& h) { return h.formula == target; });
    if (closable) out.push_back("assumption");
    for (const auto& h : goal.hyps) {
        if (h.formula == target) out.push_back("exact " + h.name);
    }
    for (const auto& h : goal.hyps) {
        if (h.formula.is_implies() && h.formula.rhs() == target) out.push_back("apply " + h.name);
    }
    return out;
}

Statement negate(const Statement& statement) {
    if (statement.negation_text) {
        return Statement(statement.id + ".neg", *statement.negation_text, std::nullopt, statement.source_tag);
    }
    Formula goal = parse_formula(statement.goal_text);
    Formula negated = Formula::implies(goal, Formula::falsum());
    return Statement(statement.id + ".neg", negated.str(), std::nullopt, statement.source_tag);
}

}  // namespace stepforge::env
