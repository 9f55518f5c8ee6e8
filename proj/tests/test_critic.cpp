#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepforge/corpus.hpp"
#include "stepforge/critic.hpp"
#include "stepforge/errors.hpp"
#include "stepforge/oracle.hpp"
#include "stepforge/search.hpp"

using namespace stepforge;
using namespace stepforge::critic;

namespace {

env::ProofState state_of(const std::string& goal) { return env::init_state(env::Statement{"t", goal}); }

StateRef ref_of(const env::ProofState& s) { return {s.fingerprint(), s.pp()}; }

PreferencePair make_pair(const env::ProofState& chosen, const env::ProofState& rejected,
                         PairKind kind = PairKind::path, const std::string& id = "p") {
    return {ref_of(chosen), ref_of(rejected), kind, id};
}

std::vector<env::ProofState> proof_states(const std::string& goal) {
    env::Statement s{"t", goal};
    auto proof = env::oracle_search(s, 8);
    REQUIRE(proof.has_value());
    return env::replay_path(s, proof->tactics);
}

}  // namespace

TEST_CASE("extract_path_pairs yields all ordered state pairs") {
    // 3 tactics -> 4 states -> 6 pairs
    std::vector<env::ProofState> states = proof_states("A -> (B -> A)");
    REQUIRE(states.size() == 4);
    auto pairs = extract_path_pairs(states, "t");
    REQUIRE(pairs.size() == 6);
    // lexicographic (i, j): first pair rejects the root, chooses s1
    CHECK(pairs[0].rejected.pp == states[0].pp());
    CHECK(pairs[0].chosen.pp == states[1].pp());
    CHECK(pairs[2].chosen.pp == "no goals");
    for (const auto& p : pairs) {
        CHECK(p.chosen.fingerprint != p.rejected.fingerprint);
        CHECK(p.kind == PairKind::path);
    }

    // single-tactic proof: two states, exactly the pair (no_goals, root)
    auto one = extract_path_pairs({state_of("A ∨ A"), env::ProofState()}, "s");
    REQUIRE(one.size() == 1);
    CHECK(one[0].chosen.pp == "no goals");
    CHECK(one[0].rejected.pp == "⊢ A ∨ A");

    CHECK_THROWS_AS(extract_path_pairs(env::Statement{"z", "A -> A"}, env::ProofPath{"z", {}}), NotAProof);
    CHECK_THROWS_AS(extract_path_pairs({state_of("A")}, "z"), NotAProof);
}

TEST_CASE("pair-count law over generated proofs") {
    auto deep = corpus::random_provable_deep(20, 13, 2, 7);
    for (const auto& s : deep) {
        auto proof = env::oracle_search(s, 7);
        REQUIRE(proof.has_value());
        auto pairs = extract_path_pairs(s, *proof);
        std::size_t m = proof->length() + 1;  // states on the path
        CHECK(pairs.size() == m * (m - 1) / 2);
    }
}

TEST_CASE("extract_sibling_pairs") {
    // Hand-built tree: root with children {on-path, dead1, dead2}; the
    // on-path child advances to the terminal.
    env::Statement st{"t", "A -> A ∨ B"};
    env::EnvState root = env::ToyEnv::wrap(env::init_state(st));
    search::SearchTree tree(root);
    env::ProofState s1 = std::get<env::Advanced>(env::apply_tactic(*root.toy, "intro h1")).state;
    int on_path = tree.add_node_raw(0, env::ToyEnv::wrap(s1), "intro h1", -0.1, search::NodeStatus::expanded);
    env::ProofState left = std::get<env::Advanced>(env::apply_tactic(s1, "left")).state;
    env::ProofState right = std::get<env::Advanced>(env::apply_tactic(s1, "right")).state;
    int dead1 = tree.add_node_raw(on_path, env::ToyEnv::wrap(left), "left", -0.5, search::NodeStatus::open);
    tree.add_node_raw(on_path, env::ToyEnv::wrap(right), "right", -0.6, search::NodeStatus::open);
    tree.add_terminal(on_path, "exact h1", -0.2);
    (void)dead1;

    env::ProofPath path{"t", {"intro h1", "exact h1"}};
    auto pairs = extract_sibling_pairs(tree, path);
    REQUIRE(pairs.size() == 2);  // the two dead siblings of the terminal
    for (const auto& p : pairs) {
        CHECK(p.kind == PairKind::sibling);
        CHECK(p.chosen.pp == "no goals");
    }

    // a sibling with a terminal descendant is excluded
    search::SearchTree tree2(root);
    int a = tree2.add_node_raw(0, env::ToyEnv::wrap(s1), "intro h1", -0.1, search::NodeStatus::expanded);
    int b = tree2.add_node_raw(a, env::ToyEnv::wrap(left), "left", -0.5, search::NodeStatus::expanded);
    tree2.add_terminal(a, "exact h1", -0.2);
    tree2.add_terminal(b, "assumption", -0.3);  // the "dead" sibling also reaches no_goals
    auto pairs2 = extract_sibling_pairs(tree2, path);
    CHECK(pairs2.empty());

    // a parent whose only child is on-path yields nothing
    search::SearchTree tree3(root);
    int c = tree3.add_node_raw(0, env::ToyEnv::wrap(s1), "intro h1", -0.1, search::NodeStatus::expanded);
    tree3.add_terminal(c, "exact h1", -0.2);
    CHECK(extract_sibling_pairs(tree3, path).empty());

    CHECK_THROWS_AS(extract_sibling_pairs(tree3, env::ProofPath{"t", {"split"}}), PathNotInTree);
}

TEST_CASE("hygiene subsamples no_goals pairs and dedups") {
    std::vector<PreferencePair> pairs;
    env::ProofState terminal;  // no goals
    for (int i = 0; i < 1000; ++i) {
        // 1000 distinct rejected states from (atom, implication-chain depth)
        char atom = static_cast<char>('A' + i % 26);
        int depth = i / 26;
        std::string goal(1, atom);
        for (int d = 0; d < depth; ++d) goal = std::string(1, atom) + " -> (" + goal + ")";
        pairs.push_back(make_pair(terminal, state_of(goal), PairKind::path, "h" + std::to_string(i)));
    }
    std::set<std::string> distinct;
    for (const auto& p : pairs) distinct.insert(p.rejected.fingerprint);
    REQUIRE(distinct.size() == 1000);

    auto kept = hygiene(pairs, 0.10, 7);
    CHECK(kept.size() == 100);

    auto all_kept = hygiene(pairs, 1.0, 7);
    CHECK(all_kept.size() == 1000);

    // all-duplicate input collapses to one
    std::vector<PreferencePair> dup(17, make_pair(state_of("A"), state_of("B")));
    CHECK(hygiene(dup, 1.0, 7).size() == 1);

    // deterministic under seed, order preserved
    auto again = hygiene(pairs, 0.10, 7);
    REQUIRE(again.size() == kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
        CHECK(again[i].rejected.fingerprint == kept[i].rejected.fingerprint);
}

TEST_CASE("score_state") {
    CriticParams zero;
    CHECK(score_state(zero, env::ProofState()) == std::numeric_limits<double>::infinity());
    CHECK(score_state(zero, state_of("A ∧ B")) == 0.0);

    CriticParams fewer_goals;
    fewer_goals.weights[0] = -1.0;  // penalize goal count
    env::ProofState one = state_of("A");
    env::ProofState two = std::get<env::Advanced>(env::apply_tactic(state_of("A ∧ B"), "split")).state;
    CHECK(score_state(fewer_goals, one) > score_state(fewer_goals, two));
}

TEST_CASE("gradient matches central finite differences") {
    auto deep = corpus::random_provable_deep(6, 3, 2, 6);
    std::vector<PreferencePair> pairs;
    for (const auto& s : deep) {
        auto proof = env::oracle_search(s, 6);
        auto p = extract_path_pairs(s, *proof);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    std::vector<FeatureVec> diffs = pair_feature_diffs(pairs);

    Rng rng(17);
    const double h = 1e-5;
    for (int point = 0; point < 10; ++point) {
        std::array<double, kFeatureDim> w;
        for (auto& v : w) v = 2.0 * rng.uniform() - 1.0;
        std::array<double, kFeatureDim> analytic = pairwise_gradient(diffs, w);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            std::array<double, kFeatureDim> wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            double fd = (pairwise_loss(diffs, wp) - pairwise_loss(diffs, wm)) / (2 * h);
            double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
            CHECK(std::abs(analytic[i] - fd) / denom < 1e-6);
        }
    }
}

TEST_CASE("parallel gradient agrees with the serial reference") {
    Rng rng(23);
    std::vector<FeatureVec> diffs(5000);
    for (auto& d : diffs) {
        for (auto& v : d) v = rng.uniform() - 0.5;
    }
    std::array<double, kFeatureDim> w;
    for (auto& v : w) v = rng.uniform() - 0.5;

    auto serial = pairwise_gradient_serial(diffs, w);
    auto blocked = pairwise_gradient(diffs, w);
    for (std::size_t i = 0; i < kFeatureDim; ++i)
        CHECK(blocked[i] == doctest::Approx(serial[i]).epsilon(1e-12));

    // the blocked kernel is bit-stable across repeated runs
    auto blocked2 = pairwise_gradient(diffs, w);
    for (std::size_t i = 0; i < kFeatureDim; ++i) CHECK(blocked[i] == blocked2[i]);
}

TEST_CASE("training drives separable pairs to near-zero loss") {
    // one pair with a clear feature gap: a bare atom against eight heavy goals
    env::ProofState small = state_of("A");
    env::Sequent heavy{{}, env::parse_formula(
        "(A -> B) ∧ (C ∨ D) ∧ (A -> (B -> C)) ∧ (D ∨ (A ∧ B))")};
    env::ProofState big(std::vector<env::Sequent>(8, heavy));
    std::vector<PreferencePair> pairs = {make_pair(small, big)};
    TrainingReport report = train_critic(pairs, 500, 0.1, 1);
    CHECK(report.final_loss < 0.05);
    CHECK_FALSE(report.degenerate);
    CHECK(pair_accuracy(report.params, pairs) == 1.0);
}

TEST_CASE("training is invariant to pair permutation") {
    auto deep = corpus::random_provable_deep(8, 29, 2, 6);
    std::vector<PreferencePair> pairs;
    for (const auto& s : deep) {
        auto proof = env::oracle_search(s, 6);
        auto p = extract_path_pairs(s, *proof);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    std::vector<PreferencePair> shuffled = pairs;
    Rng rng(5);
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.bounded(i)]);

    TrainingReport a = train_critic(pairs, 50, 0.3, 9);
    TrainingReport b = train_critic(shuffled, 50, 0.3, 9);
    for (std::size_t i = 0; i < kFeatureDim; ++i) CHECK(a.params.weights[i] == b.params.weights[i]);
    CHECK(a.final_loss == b.final_loss);
}

TEST_CASE("degenerate pairs are reported, loss floors at log 2") {
    std::vector<PreferencePair> pairs = {make_pair(state_of("A"), state_of("B"))};  // identical features
    TrainingReport report = train_critic(pairs, 100, 0.1, 2);
    CHECK(report.degenerate);
    CHECK(report.final_loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("pair_accuracy tie and symmetry rules") {
    std::vector<PreferencePair> no_terminal = {make_pair(state_of("A -> B"), state_of("A ∧ B"))};
    CriticParams zero;
    CHECK(pair_accuracy(zero, no_terminal) == 0.0);  // all ties count as incorrect

    // a non-tying critic scores exactly half of a symmetric set
    env::ProofState x = state_of("A");
    env::ProofState y = state_of("A ∧ (B -> C)");
    std::vector<PreferencePair> sym = {make_pair(x, y), make_pair(y, x)};
    CriticParams params;
    params.weights[1] = -1.0;
    CHECK(pair_accuracy(params, sym) == 0.5);
}

TEST_CASE("monotone loss is enforced at stable learning rates") {
    auto deep = corpus::random_provable_deep(5, 31, 2, 6);
    std::vector<PreferencePair> pairs;
    for (const auto& s : deep) {
        auto proof = env::oracle_search(s, 6);
        auto p = extract_path_pairs(s, *proof);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    TrainingReport report = train_critic(pairs, 200, kLrStabilityBound, 3);
    CHECK(report.final_loss <= report.initial_loss);
}

TEST_CASE("pairs JSONL round-trip") {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / "stepforge_pairs_test.jsonl";
    std::vector<PreferencePair> pairs = {
        make_pair(env::ProofState(), state_of("A ∨ B"), PairKind::path, "p1"),
        make_pair(state_of("A"), state_of("B -> C"), PairKind::sibling, "p2"),
    };
    write_pairs_jsonl(tmp.string(), pairs);
    auto loaded = load_pairs_jsonl(tmp.string());
    REQUIRE(loaded.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(loaded[i].chosen.pp == pairs[i].chosen.pp);
        CHECK(loaded[i].rejected.pp == pairs[i].rejected.pp);
        CHECK(loaded[i].kind == pairs[i].kind);
        CHECK(loaded[i].source_proof_id == pairs[i].source_proof_id);
    }
    fs::remove(tmp);
}

TEST_CASE("critic params save/load") {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / "stepforge_critic_test.json";
    CriticParams params;
    for (std::size_t i = 0; i < kFeatureDim; ++i) params.weights[i] = 0.25 * static_cast<double>(i);
    params.bias = -1.5;
    save_critic(tmp.string(), params);
    CriticParams loaded = load_critic(tmp.string());
    CHECK(loaded.weights == params.weights);
    CHECK(loaded.bias == params.bias);
    fs::remove(tmp);
}

TEST_CASE("remote critic contract") {
    httplib::Server server;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::parse(req.body);
        // score[i] = -length of the i-th pretty-print: order must be preserved
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& s : body.at("states"))
            scores.push_back(-static_cast<double>(s.get<std::string>().size()));
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteCritic remote("http://127.0.0.1:" + std::to_string(port), 5.0);
    std::vector<std::string> pps = {"⊢ A", "⊢ A ∧ B", "no goals"};
    auto scores = remote.score_batch(pps);
    REQUIRE(scores.size() == 3);
    for (std::size_t i = 0; i < pps.size(); ++i)
        CHECK(scores[i] == doctest::Approx(-static_cast<double>(pps[i].size())));

    server.stop();
    server_thread.join();
    CHECK_THROWS_AS(remote.score_batch({"x"}), BackendUnavailable);
}
