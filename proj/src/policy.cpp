#include "stepforge/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <semaphore>
#include <set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepforge/errors.hpp"

namespace stepforge::policy {

PromptRecord render_prompt(const std::string& decl, const std::vector<std::string>& proof_before,
                           const std::string& state_before) {
    PromptRecord rec;
    rec.decl_name = decl;
    for (std::size_t i = 0; i < proof_before.size(); ++i) {
        if (i) rec.proof_before += '\n';
        rec.proof_before += proof_before[i];
    }
    rec.state_before = state_before;
    rec.rendered = "---\nNAME: " + decl + "\n\n---\nPROOF_BEFORE: " + rec.proof_before +
                   "\n\n---\nSTATE_BEFORE: " + state_before + "\n\n---\nTACTIC:";
    return rec;
}

PromptRecord render_prompt(const std::string& decl, const std::vector<std::string>& proof_before,
                           const env::ProofState& state) {
    return render_prompt(decl, proof_before, state.pp());
}

std::string render_gptf_prompt(const std::string& decl, const std::string& pp) {
    return "DECL " + decl + "\nGOAL " + pp + "\nPROOFSTEP ";
}

std::string render_gptf_prompt(const std::string& decl, const env::ProofState& state) {
    return render_gptf_prompt(decl, state.pp());
}

std::vector<TacticCandidate> sample_tactics(const PolicyBackend& backend, const env::EnvState& state,
                                            const PromptRecord& context, int n, double temperature, Rng& rng) {
    if (n < 1) throw Error("sample_tactics: n must be >= 1");
    std::vector<TacticCandidate> raw = backend.sample(state, context, n, temperature, rng);
    std::vector<TacticCandidate> out;
    std::set<std::string> seen;
    for (auto& c : raw) {
        if (!std::isfinite(c.logprob) || c.logprob > 0.0) continue;
        if (!seen.insert(c.tactic).second) continue;
        out.push_back(std::move(c));
        if (out.size() == static_cast<std::size_t>(n)) break;
    }
    return out;
}

namespace {

// Gumbel-top-k over softmax(logit): order by logit + noise, report the
// noise-free log-softmax as each candidate's logprob.
std::vector<TacticCandidate> rank_by_gumbel(const std::vector<std::string>& tactics,
                                            const std::vector<double>& logits, int n,
                                            double noise_scale, Rng& rng) {
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double lse = 0.0;
    for (double l : logits) lse += std::exp(l - max_logit);
    lse = max_logit + std::log(lse);

    std::vector<double> keys(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) keys[i] = logits[i] + noise_scale * rng.gumbel();

    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return a < b;
    });

    std::vector<TacticCandidate> out;
    for (std::size_t rank = 0; rank < order.size() && rank < static_cast<std::size_t>(n); ++rank) {
        std::size_t i = order[rank];
        double lp = logits[i] - lse;
        out.push_back({tactics[i], std::min(lp, 0.0), LogprobKind::token_average});
    }
    return out;
}

const env::ProofState& require_toy(const env::EnvState& state, const char* who) {
    if (!state.toy) throw Error(std::string(who) + " requires a toy-environment state");
    return *state.toy;
}

}  // namespace

std::map<std::string, double> HeuristicPolicy::default_priors() {
    // Goal-closing moves first, then structure-opening ones.
    return {
        {"assumption", 2.0}, {"exact", 1.8}, {"intro", 1.2}, {"split", 0.8},
        {"apply", 0.5},      {"left", 0.2},  {"right", 0.2},
    };
}

std::vector<TacticCandidate> HeuristicPolicy::sample(const env::EnvState& state, const PromptRecord&,
                                                     int n, double temperature, Rng& rng) const {
    const env::ProofState& toy = require_toy(state, "HeuristicPolicy");
    std::vector<std::string> tactics = env::enumerate_tactics(toy);
    if (tactics.empty()) return {};
    std::vector<double> logits(tactics.size(), 0.0);
    for (std::size_t i = 0; i < tactics.size(); ++i) {
        auto it = priors_.find(LearnedPolicy::head_of(tactics[i]));
        double prior = it == priors_.end() ? 0.0 : it->second;
        logits[i] = prior / temperature;
    }
    return rank_by_gumbel(tactics, logits, n, noise_scale_, rng);
}

std::string LearnedPolicy::bucket_of(const env::ProofState& state) {
    if (state.no_goals()) return "terminal";
    const env::Sequent& goal = state.goals().front();
    const char* top = "?";
    switch (goal.target.kind()) {
        case env::Formula::Kind::Atom: top = "atom"; break;
        case env::Formula::Kind::Falsum: top = "falsum"; break;
        case env::Formula::Kind::Implies: top = "imp"; break;
        case env::Formula::Kind::And: top = "and"; break;
        case env::Formula::Kind::Or: top = "or"; break;
    }
    long hyps = std::min<long>(static_cast<long>(goal.hyps.size()), 4);
    long goals = std::min<long>(static_cast<long>(state.goals().size()), 4);
    return std::string(top) + "|h" + std::to_string(hyps) + "|g" + std::to_string(goals);
}

std::string LearnedPolicy::head_of(const std::string& tactic) {
    std::size_t sp = tactic.find(' ');
    return sp == std::string::npos ? tactic : tactic.substr(0, sp);
}

const std::vector<std::string>& LearnedPolicy::known_heads() {
    static const std::vector<std::string> heads = {"intro", "split", "left",  "right",
                                                   "assumption", "exact", "apply"};
    return heads;
}

long LearnedPolicy::count(const std::string& bucket, const std::string& head) const {
    auto it = counts_.find({bucket, head});
    return it == counts_.end() ? 0 : it->second;
}

long LearnedPolicy::total_count() const {
    long total = 0;
    for (const auto& [key, c] : counts_) total += c;
    return total;
}

double LearnedPolicy::head_probability(const env::ProofState& state, const std::string& head) const {
    std::string bucket = bucket_of(state);
    double numer = 0.0, denom = 0.0;
    for (const std::string& h : known_heads()) {
        double c = static_cast<double>(count(bucket, h)) + smoothing_;
        denom += c;
        if (h == head) numer = c;
    }
    return numer / denom;
}

std::vector<TacticCandidate> LearnedPolicy::sample(const env::EnvState& state, const PromptRecord&,
                                                   int n, double temperature, Rng& rng) const {
    const env::ProofState& toy = require_toy(state, "LearnedPolicy");
    std::vector<std::string> tactics = env::enumerate_tactics(toy);
    if (tactics.empty()) return {};
    std::string bucket = bucket_of(toy);
    std::vector<double> logits(tactics.size());
    for (std::size_t i = 0; i < tactics.size(); ++i) {
        double c = static_cast<double>(count(bucket, head_of(tactics[i]))) + smoothing_;
        logits[i] = std::log(c) / temperature;
    }
    return rank_by_gumbel(tactics, logits, n, 1.0, rng);
}

LearnedPolicy update_from_trajectories(const LearnedPolicy& backend, const std::vector<Trajectory>& proofs) {
    LearnedPolicy next = backend;
    for (const Trajectory& traj : proofs) {
        std::vector<env::ProofState> states = env::replay_path(traj.statement, traj.tactics);
        if (states.back().no_goals() == false)
            throw InvalidTrajectory(traj.statement.id + ": trajectory does not reach no_goals");
        for (std::size_t t = 0; t < traj.tactics.size(); ++t) {
            next.counts_[{LearnedPolicy::bucket_of(states[t]), LearnedPolicy::head_of(traj.tactics[t])}] += 1;
        }
    }
    return next;
}

RemotePolicy::RemotePolicy(std::string base_url, double timeout_s, int max_inflight)
    : base_url_(std::move(base_url)),
      timeout_s_(timeout_s),
      inflight_(std::make_shared<std::counting_semaphore<>>(std::max(1, max_inflight))) {}

namespace {
struct SlotGuard {
    std::counting_semaphore<>& sem;
    explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};
}  // namespace

std::vector<TacticCandidate> RemotePolicy::sample(const env::EnvState&, const PromptRecord& context,
                                                  int n, double temperature, Rng&) const {
    nlohmann::json body{{"prompt", context.rendered}, {"n", n}, {"temperature", temperature}};

    SlotGuard slot(*inflight_);
    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
    client.set_read_timeout(std::chrono::duration<double>(timeout_s_));
    auto res = client.Post("/generate", body.dump(), "application/json");

    if (!res || res->status != 200)
        throw BackendUnavailable("policy server " + base_url_ + " unavailable");
    nlohmann::json resp = nlohmann::json::parse(res->body, nullptr, false);
    if (resp.is_discarded() || !resp.contains("candidates") || !resp["candidates"].is_array())
        throw BackendUnavailable("policy server returned a malformed body");

    std::vector<TacticCandidate> out;
    for (const auto& c : resp["candidates"]) {
        if (!c.contains("text") || !c.contains("logprob"))
            throw BackendUnavailable("policy server candidate missing text/logprob");
        TacticCandidate cand;
        cand.tactic = c["text"].get<std::string>();
        double lp = c["logprob"].get<double>();
        if (!std::isfinite(lp) || lp > 0.0)
            throw BackendUnavailable("policy server reported an invalid logprob");
        if (c.contains("tokens") && c["tokens"].is_number_integer() && c["tokens"].get<long>() > 0) {
            cand.logprob = lp / static_cast<double>(c["tokens"].get<long>());
            cand.logprob_kind = LogprobKind::token_average;
        } else {
            cand.logprob = lp;
            cand.logprob_kind = LogprobKind::total;
        }
        out.push_back(std::move(cand));
    }
    return out;
}

}  // namespace stepforge::policy
