#include <doctest.h>

#include <map>
#include <sstream>

#include "stepforge/errors.hpp"
#include "stepforge/policy.hpp"
#include "stepforge/search.hpp"
#include "stepforge/wire.hpp"

using namespace stepforge;
using namespace stepforge::env;

#ifndef STEPFORGE_BIN
#define STEPFORGE_BIN "stepforge"
#endif

TEST_CASE("protocol: init and apply records") {
    EnvServer server;
    CHECK(server.handle_line(R"({"cmd":"init","goal":"A -> A"})") ==
          "{\"ok\":true,\"state_id\":0,\"pp\":\"⊢ A -> A\"}");
    CHECK(server.handle_line(R"({"cmd":"apply","state_id":0,"tactic":"intro h1"})") ==
          "{\"ok\":true,\"state_id\":1,\"pp\":\"h1 : A ⊢ A\"}");
    CHECK(server.handle_line(R"({"cmd":"apply","state_id":1,"tactic":"assumption"})") ==
          "{\"ok\":true,\"solved\":true}");
    CHECK(server.handle_line(R"({"cmd":"apply","state_id":1,"tactic":"split"})") ==
          "{\"ok\":false,\"reason\":\"inapplicable\"}");
    CHECK(server.handle_line(R"({"cmd":"apply","state_id":99,"tactic":"split"})") ==
          "{\"ok\":false,\"reason\":\"unknown state_id 99\"}");

    // malformed goal and malformed JSON both answer ok:false
    std::string bad_goal = server.handle_line(R"({"cmd":"init","goal":"A -> "})");
    CHECK(bad_goal.find("\"ok\":false") != std::string::npos);
    std::string bad_json = server.handle_line("{nope");
    CHECK(bad_json.find("\"ok\":false") != std::string::npos);
    std::string bad_cmd = server.handle_line(R"({"cmd":"quux"})");
    CHECK(bad_cmd.find("unknown cmd") != std::string::npos);
}

TEST_CASE("env_serve loops over a stream") {
    std::istringstream in(
        "{\"cmd\":\"init\",\"goal\":\"A ∧ B\"}\n"
        "\n"
        "{\"cmd\":\"apply\",\"state_id\":0,\"tactic\":\"split\"}\n");
    std::ostringstream out;
    env_serve(in, out);
    std::istringstream lines(out.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "{\"ok\":true,\"state_id\":0,\"pp\":\"⊢ A ∧ B\"}");
    REQUIRE(std::getline(lines, line));
    CHECK(line == "{\"ok\":true,\"state_id\":1,\"pp\":\"⊢ A\\n⊢ B\"}");
    CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("subprocess adapter against the real server binary") {
    SubprocessEnv remote(std::string(STEPFORGE_BIN) + " env-serve", 10.0);

    Statement st{"w1", "A -> A"};
    EnvState root = remote.init(st);
    CHECK(root.pp == "⊢ A -> A");
    CHECK(root.fingerprint == root.pp);
    CHECK(root.handle == 0);
    CHECK_FALSE(root.toy.has_value());

    EnvApplyResult r1 = remote.apply(root, "intro h1");
    REQUIRE(std::holds_alternative<EnvAdvanced>(r1));
    const EnvState& mid = std::get<EnvAdvanced>(r1).state;
    CHECK(mid.pp == "h1 : A ⊢ A");

    CHECK(std::holds_alternative<EnvSolved>(remote.apply(mid, "assumption")));
    CHECK(std::get<EnvFailed>(remote.apply(mid, "split")).reason == "inapplicable");
    CHECK(std::get<EnvFailed>(remote.apply(mid, "zap")).reason == "unknown tactic");

    CHECK(env_replays_to_solved(remote, st, {"intro h1", "assumption"}));
    CHECK_FALSE(env_replays_to_solved(remote, st, {"intro h1"}));

    CHECK_THROWS_AS(remote.init(Statement{"bad", "A -> "}), BackendUnavailable);

    // negation passthrough and the missing-negation error
    Statement with_neg{"w2", "A", "B -> B", ""};
    CHECK(remote.negation_of(with_neg).goal_text == "B -> B");
    CHECK_THROWS_AS(remote.negation_of(st), MissingNegation);
}

namespace {

// Proposes tactics from a fixed table keyed by pretty-print: stands in for
// a policy server when searching over a wire environment, where no parsed
// toy state is available.
class ScriptedPolicy final : public policy::PolicyBackend {
  public:
    explicit ScriptedPolicy(std::map<std::string, std::vector<std::string>> script)
        : script_(std::move(script)) {}

    std::vector<policy::TacticCandidate> sample(const env::EnvState& state, const policy::PromptRecord&,
                                                int n, double, Rng&) const override {
        auto it = script_.find(state.pp);
        if (it == script_.end()) return {};
        std::vector<policy::TacticCandidate> out;
        for (const auto& t : it->second) {
            out.push_back({t, -1.0, policy::LogprobKind::total});
            if (static_cast<int>(out.size()) == n) break;
        }
        return out;
    }

  private:
    std::map<std::string, std::vector<std::string>> script_;
};

}  // namespace

TEST_CASE("search runs end-to-end over the wire environment") {
    SubprocessEnv remote(std::string(STEPFORGE_BIN) + " env-serve", 10.0);
    ScriptedPolicy backend({
        {"⊢ A -> B -> A", {"intro h1"}},
        {"h1 : A ⊢ B -> A", {"split", "intro h2"}},
        {"h1 : A, h2 : B ⊢ A", {"exact h1"}},
    });
    search::SearchBudget budget;
    budget.passes = 1;
    budget.samples_per_expansion = 4;
    budget.max_expansions = 10;
    auto result = search::run_attempt(Statement{"wire", "A -> (B -> A)"}, remote, backend, nullptr, budget,
                                      0, 3);
    CHECK(result.outcome.terminated_by == search::TerminationCause::proof);
    REQUIRE(result.outcome.proof.has_value());
    CHECK(*result.outcome.proof == std::vector<std::string>{"intro h1", "intro h2", "exact h1"});
}

TEST_CASE("request timeout raises BackendUnavailable") {
    SubprocessEnv stuck("sleep 30", 0.2);
    CHECK_THROWS_AS(stuck.init(Statement{"t", "A"}), BackendUnavailable);
}
