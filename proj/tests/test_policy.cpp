#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepforge/corpus.hpp"
#include "stepforge/errors.hpp"
#include "stepforge/oracle.hpp"
#include "stepforge/policy.hpp"

using namespace stepforge;
using namespace stepforge::policy;

namespace {

env::EnvState toy_state(const std::string& goal) {
    return env::ToyEnv::wrap(env::init_state(env::Statement{"t", goal}));
}

std::vector<TacticCandidate> draw(const PolicyBackend& backend, const env::EnvState& state, int n,
                                  std::uint64_t seed, double temperature = 0.7) {
    Rng rng(seed);
    PromptRecord prompt = render_prompt("t", {}, state.pp);
    return sample_tactics(backend, state, prompt, n, temperature, rng);
}

}  // namespace

TEST_CASE("render_prompt is byte-identical to the reference example") {
    const std::string state_before =
        "m n : ℕ\n"
        "h : n = 2 * m + 1\n"
        "⊢ 8 | (2 * m + 1) * (2 * m + 1) - 1";
    PromptRecord rec =
        render_prompt("square_sub_one_divisible_eight", {"rw [h, pow_two]"}, state_before);
    const std::string expected =
        "---\n"
        "NAME: square_sub_one_divisible_eight\n"
        "\n"
        "---\n"
        "PROOF_BEFORE: rw [h, pow_two]\n"
        "\n"
        "---\n"
        "STATE_BEFORE: m n : ℕ\n"
        "h : n = 2 * m + 1\n"
        "⊢ 8 | (2 * m + 1) * (2 * m + 1) - 1\n"
        "\n"
        "---\n"
        "TACTIC:";
    CHECK(rec.rendered == expected);
    CHECK(rec.decl_name == "square_sub_one_divisible_eight");
    CHECK(rec.proof_before == "rw [h, pow_two]");
}

TEST_CASE("render_prompt field headers and joins") {
    PromptRecord empty = render_prompt("d", {}, std::string("⊢ A"));
    CHECK(empty.rendered.find("PROOF_BEFORE: \n\n---\n") != std::string::npos);
    CHECK(empty.proof_before.empty());

    PromptRecord two = render_prompt("d", {"intro h1", "assumption"}, std::string("⊢ A"));
    CHECK(two.proof_before == "intro h1\nassumption");

    // each header exactly once, in order
    const char* headers[] = {"NAME:", "PROOF_BEFORE:", "STATE_BEFORE:", "TACTIC:"};
    std::size_t last = 0;
    for (const char* h : headers) {
        std::size_t first = two.rendered.find(h);
        REQUIRE(first != std::string::npos);
        CHECK(two.rendered.find(h, first + 1) == std::string::npos);
        CHECK(first >= last);
        last = first;
    }
}

TEST_CASE("render_gptf_prompt") {
    env::ProofState s = env::init_state(env::Statement{"t1", "A -> A"});
    CHECK(render_gptf_prompt("t1", s) == "DECL t1\nGOAL ⊢ A -> A\nPROOFSTEP ");
    CHECK(render_gptf_prompt("", s) == "DECL \nGOAL ⊢ A -> A\nPROOFSTEP ");

    env::ApplyResult split = env::apply_tactic(env::init_state(env::Statement{"t2", "A ∧ B"}), "split");
    const env::ProofState& multi = std::get<env::Advanced>(split).state;
    CHECK(render_gptf_prompt("t2", multi) == "DECL t2\nGOAL ⊢ A\n⊢ B\nPROOFSTEP ");
}

TEST_CASE("heuristic policy proposes applicable tactics") {
    HeuristicPolicy backend;
    env::EnvState closable = env::ToyEnv::wrap(
        std::get<env::Advanced>(env::apply_tactic(env::init_state(env::Statement{"t", "A -> A"}), "intro h"))
            .state);
    std::vector<TacticCandidate> cands = draw(backend, closable, 32, 7);
    bool has_assumption = false;
    for (const auto& c : cands) {
        if (c.tactic == "assumption") has_assumption = true;
        CHECK(c.logprob <= 0.0);
        CHECK(std::isfinite(c.logprob));
    }
    CHECK(has_assumption);

    CHECK(draw(backend, closable, 1, 7).size() == 1);
    CHECK(draw(backend, toy_state("A"), 8, 7).empty());  // dead end: no proposal
}

TEST_CASE("local backends are deterministic under a seed") {
    HeuristicPolicy heuristic;
    LearnedPolicy learned;
    env::EnvState s = toy_state("A ∨ (B -> B)");
    for (const PolicyBackend* backend : {static_cast<const PolicyBackend*>(&heuristic),
                                         static_cast<const PolicyBackend*>(&learned)}) {
        auto a = draw(*backend, s, 4, 99);
        auto b = draw(*backend, s, 4, 99);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].tactic == b[i].tactic);
            CHECK(a[i].logprob == b[i].logprob);
        }
        auto c = draw(*backend, s, 4, 100);  // different seed may reorder
        CHECK(c.size() == a.size());
    }
}

TEST_CASE("learned policy: softmax mass over proposals stays within the enumerated mass") {
    LearnedPolicy backend;
    env::EnvState s = toy_state("(A -> B) -> (A ∨ B -> B) -> A ∧ B");
    auto cands = draw(backend, s, 32, 3);
    double mass = 0.0;
    for (const auto& c : cands) mass += std::exp(c.logprob);
    CHECK(mass <= 1.0 + 1e-9);
}

TEST_CASE("update_from_trajectories adds counts, order-independently") {
    LearnedPolicy base;
    env::Statement st{"s", "A -> A"};
    auto proof = env::oracle_search(st, 4);
    REQUIRE(proof.has_value());
    Trajectory traj{st, proof->tactics};

    LearnedPolicy unchanged = update_from_trajectories(base, {});
    CHECK(unchanged.total_count() == 0);

    LearnedPolicy once = update_from_trajectories(base, {traj});
    LearnedPolicy twice = update_from_trajectories(base, {traj, traj});
    std::string bucket = LearnedPolicy::bucket_of(env::init_state(st));
    CHECK(once.count(bucket, "intro") == 1);
    CHECK(twice.count(bucket, "intro") == 2);
    CHECK(twice.total_count() == 2 * once.total_count());

    Trajectory bad{st, {"split"}};
    CHECK_THROWS_AS(update_from_trajectories(base, {bad}), InvalidTrajectory);
}

TEST_CASE("learned policy concentrates on intro after replaying oracle proofs") {
    // 50 implication-heavy proofs from the oracle
    std::vector<Trajectory> proofs;
    Rng rng(41);
    while (proofs.size() < 50) {
        env::Formula f = corpus::random_formula(rng, 3, 3);
        env::Formula impl = env::Formula::implies(f, f);
        env::Statement st{"g" + std::to_string(proofs.size()), impl.str()};
        auto proof = env::oracle_search(st, 6);
        if (!proof) continue;
        proofs.push_back({st, proof->tactics});
    }
    LearnedPolicy trained = update_from_trajectories(LearnedPolicy{}, proofs);

    // recompute the expected count table by replaying the proofs by hand
    std::map<std::pair<std::string, std::string>, long> expected;
    for (const Trajectory& t : proofs) {
        auto states = env::replay_path(t.statement, t.tactics);
        for (std::size_t i = 0; i < t.tactics.size(); ++i)
            expected[{LearnedPolicy::bucket_of(states[i]), LearnedPolicy::head_of(t.tactics[i])}] += 1;
    }
    long expected_total = 0;
    for (const auto& [key, count] : expected) {
        CHECK(trained.count(key.first, key.second) == count);
        expected_total += count;
    }
    CHECK(trained.total_count() == expected_total);

    env::ProofState root = env::init_state(env::Statement{"q", "A -> A"});
    double p_intro = trained.head_probability(root, "intro");
    CHECK(p_intro > 1.0 / 7.0);  // above the uniform prior over tactic heads

    auto top = draw(trained, env::ToyEnv::wrap(root), 1, 11);
    REQUIRE(top.size() == 1);
    CHECK(top[0].tactic == "intro h1");
    CHECK(std::exp(top[0].logprob) > 0.99);  // sole applicable tactic
}

TEST_CASE("remote policy contract") {
    httplib::Server server;
    std::atomic<int> mode{0};
    server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::parse(req.body);
        REQUIRE(body.contains("prompt"));
        REQUIRE(body.contains("n"));
        REQUIRE(body.contains("temperature"));
        switch (mode.load()) {
            case 0:
                res.set_content(nlohmann::json{
                    {"candidates",
                     {{{"text", "intro h1"}, {"logprob", -1.2}, {"tokens", 4}},
                      {{"text", "assumption"}, {"logprob", -3.0}},
                      {{"text", "intro h1"}, {"logprob", -9.0}}}}}.dump(),
                    "application/json");
                break;
            case 1: res.set_content("{\"nope\":true}", "application/json"); break;
            default: res.status = 500; break;
        }
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemotePolicy backend("http://127.0.0.1:" + std::to_string(port), 5.0);
    env::EnvState s = toy_state("A -> A");

    auto cands = draw(backend, s, 8, 1);
    REQUIRE(cands.size() == 2);  // deduplicated by tactic text
    CHECK(cands[0].tactic == "intro h1");
    CHECK(cands[0].logprob == doctest::Approx(-0.3));  // total / tokens
    CHECK(cands[0].logprob_kind == LogprobKind::token_average);
    CHECK(cands[1].tactic == "assumption");
    CHECK(cands[1].logprob == doctest::Approx(-3.0));  // no token count: total
    CHECK(cands[1].logprob_kind == LogprobKind::total);

    mode = 1;
    CHECK_THROWS_AS(draw(backend, s, 8, 1), BackendUnavailable);
    mode = 2;
    CHECK_THROWS_AS(draw(backend, s, 8, 1), BackendUnavailable);

    server.stop();
    server_thread.join();

    RemotePolicy unreachable("http://127.0.0.1:1", 0.2);
    CHECK_THROWS_AS(draw(unreachable, s, 8, 1), BackendUnavailable);
}
