#include "stepforge/oracle.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "stepforge/errors.hpp"

namespace stepforge::env {

std::vector<ProofState> replay_path(const Statement& statement, const std::vector<std::string>& tactics) {
    std::vector<ProofState> states;
    states.push_back(init_state(statement));
    for (std::size_t i = 0; i < tactics.size(); ++i) {
        if (states.back().no_goals())
            throw InvalidTrajectory(statement.id + ": tactics remain after no_goals");
        ApplyResult r = apply_tactic(states.back(), tactics[i]);
        if (auto* adv = std::get_if<Advanced>(&r)) {
            states.push_back(adv->state);
        } else if (is_solved(r)) {
            states.push_back(ProofState());
        } else {
            throw InvalidTrajectory(statement.id + ": step " + std::to_string(i) + " failed: " +
                                    std::get<Failed>(r).reason + " (" + tactics[i] + ")");
        }
    }
    return states;
}

bool replays_to_solved(const Statement& statement, const std::vector<std::string>& tactics) {
    try {
        return replay_path(statement, tactics).back().no_goals();
    } catch (const Error&) {
        return false;
    }
}

std::optional<ProofPath> oracle_search(const Statement& statement, int depth_limit) {
    if (depth_limit < 0 || depth_limit > 12) throw Error("oracle_search: depth_limit must be in [0, 12]");

    struct Visited {
        ProofState state;
        std::string parent_fp;  // empty for the root
        std::string tactic;
        int depth;
    };
    std::unordered_map<std::string, Visited> visited;
    std::deque<std::string> frontier;

    ProofState root = init_state(statement);
    visited.emplace(root.fingerprint(), Visited{root, "", "", 0});
    frontier.push_back(root.fingerprint());

    auto reconstruct = [&](const std::string& fp, const std::string& last_tactic) {
        std::vector<std::string> tactics{last_tactic};
        std::string cur = fp;
        while (true) {
            const Visited& v = visited.at(cur);
            if (v.parent_fp.empty()) break;
            tactics.push_back(v.tactic);
            cur = v.parent_fp;
        }
        std::reverse(tactics.begin(), tactics.end());
        return ProofPath{statement.id, std::move(tactics)};
    };

    while (!frontier.empty()) {
        std::string fp = std::move(frontier.front());
        frontier.pop_front();
        const Visited v = visited.at(fp);
        if (v.depth == depth_limit) continue;
        for (const std::string& tactic : enumerate_tactics(v.state)) {
            ApplyResult r = apply_tactic(v.state, tactic);
            if (is_solved(r)) return reconstruct(fp, tactic);
            if (auto* adv = std::get_if<Advanced>(&r)) {
                const std::string& child_fp = adv->state.fingerprint();
                if (visited.count(child_fp)) continue;
                visited.emplace(child_fp, Visited{adv->state, fp, tactic, v.depth + 1});
                frontier.push_back(child_fp);
            }
        }
    }
    return std::nullopt;
}

}  // namespace stepforge::env
