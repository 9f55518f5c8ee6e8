#pragma once

#include <string>
#include <vector>

#include "stepforge/formula.hpp"

namespace stepforge::env {

struct Hypothesis {
    std::string name;
    Formula formula;

    bool operator==(const Hypothesis& o) const { return name == o.name && formula == o.formula; }
};

// One open goal: named hypotheses and a target formula.
struct Sequent {
    std::vector<Hypothesis> hyps;
    Formula target;

    // "h1 : A, h2 : B ⊢ C"; "⊢ C" when there are no hypotheses.
    std::string pp() const;

    bool operator==(const Sequent& o) const { return hyps == o.hyps && target == o.target; }
};

// Ordered list of open goals. Immutable by convention: tactic application
// returns fresh states. The pretty-print doubles as the fingerprint, so two
// states print identically iff their goal lists are structurally equal.
class ProofState {
  public:
    ProofState() : pp_("no goals") {}
    explicit ProofState(std::vector<Sequent> goals);

    const std::vector<Sequent>& goals() const { return goals_; }
    bool no_goals() const { return goals_.empty(); }

    // Goals joined by newline; the empty state prints "no goals".
    const std::string& pp() const { return pp_; }
    // Canonical serialization of all goals. Identical to pp().
    const std::string& fingerprint() const { return pp_; }

    bool operator==(const ProofState& o) const { return pp_ == o.pp_; }

  private:
    std::vector<Sequent> goals_;
    std::string pp_;
};

// Inverse of ProofState::pp(). Accepts exactly the printer's output format.
// Throws ParseError on anything else.
ProofState parse_state(const std::string& pp);

}  // namespace stepforge::env
