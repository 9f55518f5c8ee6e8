#include "stepforge/state.hpp"

#include "stepforge/errors.hpp"

namespace stepforge::env {

std::string Sequent::pp() const {
    std::string out;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        if (i) out += ", ";
        out += hyps[i].name;
        out += " : ";
        out += hyps[i].formula.str();
    }
    if (!hyps.empty()) out += ' ';
    out += "⊢ ";
    out += target.str();
    return out;
}

ProofState::ProofState(std::vector<Sequent> goals) : goals_(std::move(goals)) {
    if (goals_.empty()) {
        pp_ = "no goals";
        return;
    }
    for (std::size_t i = 0; i < goals_.size(); ++i) {
        if (i) pp_ += '\n';
        pp_ += goals_[i].pp();
    }
}

static Sequent parse_sequent(const std::string& line, std::size_t line_offset) {
    static const std::string kTurnstile = "⊢ ";
    Sequent seq{{}, Formula::falsum()};
    std::size_t target_start;
    if (line.rfind(kTurnstile, 0) == 0) {
        target_start = kTurnstile.size();
    } else {
        std::size_t sep = line.find(" " + kTurnstile);
        if (sep == std::string::npos)
            throw ParseError("sequent without turnstile", line_offset);
        std::size_t pos = 0;
        while (pos < sep) {
            std::size_t end = line.find(", ", pos);
            if (end == std::string::npos || end > sep) end = sep;
            std::size_t colon = line.find(" : ", pos);
            if (colon == std::string::npos || colon >= end)
                throw ParseError("hypothesis without ' : '", line_offset + pos);
            Hypothesis h{line.substr(pos, colon - pos), parse_formula(line.substr(colon + 3, end - colon - 3))};
            seq.hyps.push_back(std::move(h));
            pos = (end == sep) ? sep : end + 2;
        }
        target_start = sep + 1 + kTurnstile.size();
    }
    seq.target = parse_formula(line.substr(target_start));
    return seq;
}

ProofState parse_state(const std::string& pp) {
    if (pp == "no goals") return ProofState();
    std::vector<Sequent> goals;
    std::size_t pos = 0;
    while (pos <= pp.size()) {
        std::size_t nl = pp.find('\n', pos);
        std::size_t end = (nl == std::string::npos) ? pp.size() : nl;
        goals.push_back(parse_sequent(pp.substr(pos, end - pos), pos));
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return ProofState(std::move(goals));
}

}  // namespace stepforge::env
