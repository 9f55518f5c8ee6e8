#include "stepforge/env.hpp"

#include "stepforge/errors.hpp"

namespace stepforge::env {

EnvState ToyEnv::wrap(ProofState state) {
    EnvState s;
    s.pp = state.pp();
    s.fingerprint = state.fingerprint();
    s.toy = std::move(state);
    return s;
}

EnvState ToyEnv::init(const Statement& statement) { return wrap(init_state(statement)); }

EnvApplyResult ToyEnv::apply(const EnvState& state, const std::string& tactic) {
    if (!state.toy) throw Error("ToyEnv::apply on a non-toy state");
    ApplyResult r = apply_tactic(*state.toy, tactic);
    if (auto* adv = std::get_if<Advanced>(&r)) return EnvAdvanced{wrap(std::move(adv->state))};
    if (is_solved(r)) return EnvSolved{};
    return EnvFailed{std::get<Failed>(r).reason};
}

bool env_replays_to_solved(TacticEnv& environment, const Statement& statement,
                           const std::vector<std::string>& tactics) {
    if (tactics.empty()) return false;
    EnvState state = environment.init(statement);
    for (std::size_t i = 0; i < tactics.size(); ++i) {
        EnvApplyResult r = environment.apply(state, tactics[i]);
        if (std::holds_alternative<EnvSolved>(r)) return i + 1 == tactics.size();
        if (auto* adv = std::get_if<EnvAdvanced>(&r)) {
            state = std::move(adv->state);
            continue;
        }
        return false;
    }
    return false;
}

}  // namespace stepforge::env
