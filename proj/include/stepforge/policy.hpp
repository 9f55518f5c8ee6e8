#pragma once

#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include "stepforge/env.hpp"
#include "stepforge/rng.hpp"

namespace stepforge::policy {

// A rendered policy prompt. `rendered` carries the four field headers
// exactly once each, in order NAME, PROOF_BEFORE, STATE_BEFORE, TACTIC.
struct PromptRecord {
    std::string decl_name;
    std::string proof_before;  // prior tactics joined by newline
    std::string state_before;  // pretty-printed state
    std::string rendered;
};

// Template (byte-stable across runs and platforms):
//
//   ---
//   NAME: {decl}
//
//   ---
//   PROOF_BEFORE: {tactics joined by newline}
//
//   ---
//   STATE_BEFORE: {pp}
//
//   ---
//   TACTIC:
//
// An empty proof_before renders as the empty string after "PROOF_BEFORE: ".
PromptRecord render_prompt(const std::string& decl, const std::vector<std::string>& proof_before,
                           const std::string& state_before);
PromptRecord render_prompt(const std::string& decl, const std::vector<std::string>& proof_before,
                           const env::ProofState& state);

// Legacy proofstep template, kept for dataset interoperability:
// "DECL {decl}\nGOAL {pp}\nPROOFSTEP " (note the trailing space).
std::string render_gptf_prompt(const std::string& decl, const std::string& pp);
std::string render_gptf_prompt(const std::string& decl, const env::ProofState& state);

enum class LogprobKind { total, token_average };

struct TacticCandidate {
    std::string tactic;
    double logprob = 0.0;  // natural log, finite, <= 0
    LogprobKind logprob_kind = LogprobKind::token_average;
};

// A tactic generator. Implementations must return at most n candidates,
// deduplicated by tactic string, each with a finite non-positive logprob.
// An empty result means the backend has no proposal for this state; the
// search marks the node exhausted.
class PolicyBackend {
  public:
    virtual ~PolicyBackend() = default;
    virtual std::vector<TacticCandidate> sample(const env::EnvState& state, const PromptRecord& context,
                                                int n, double temperature, Rng& rng) const = 0;
};

// Validating front door over a backend: enforces n >= 1, dedups by tactic
// string, drops candidates with non-finite or positive logprob.
std::vector<TacticCandidate> sample_tactics(const PolicyBackend& backend, const env::EnvState& state,
                                            const PromptRecord& context, int n, double temperature, Rng& rng);

// Enumerates the applicable tactics and ranks them by a fixed per-head
// prior logit plus Gumbel noise (Gumbel-top-k sampling from the softmax of
// prior/temperature). noise_scale 0 gives the deterministic prior ranking.
// Reported logprobs are the noise-free log-softmax values.
class HeuristicPolicy final : public PolicyBackend {
  public:
    HeuristicPolicy() : priors_(default_priors()) {}
    HeuristicPolicy(std::map<std::string, double> priors, double noise_scale)
        : priors_(std::move(priors)), noise_scale_(noise_scale) {}

    static std::map<std::string, double> default_priors();

    std::vector<TacticCandidate> sample(const env::EnvState& state, const PromptRecord& context,
                                        int n, double temperature, Rng& rng) const override;

  private:
    std::map<std::string, double> priors_;
    double noise_scale_ = 1.0;
};

// Count-based learned backend. States are bucketed by (top connective of
// the first goal's target, hypothesis count clipped at 4, goal count
// clipped at 4); tactics by their head word. Sampling is a softmax over
// log-smoothed bucket counts at the given temperature, drawn without
// replacement via Gumbel keys.
class LearnedPolicy final : public PolicyBackend {
  public:
    explicit LearnedPolicy(double smoothing = 1.0) : smoothing_(smoothing) {}

    std::vector<TacticCandidate> sample(const env::EnvState& state, const PromptRecord& context,
                                        int n, double temperature, Rng& rng) const override;

    // P(head | state bucket) under the smoothed count table.
    double head_probability(const env::ProofState& state, const std::string& head) const;

    static std::string bucket_of(const env::ProofState& state);
    static std::string head_of(const std::string& tactic);
    static const std::vector<std::string>& known_heads();

    long count(const std::string& bucket, const std::string& head) const;
    long total_count() const;

    friend LearnedPolicy update_from_trajectories(const LearnedPolicy& backend,
                                                  const std::vector<struct Trajectory>& proofs);

  private:
    double smoothing_;
    std::map<std::pair<std::string, std::string>, long> counts_;
};

// A verified tactic sequence with the statement it proves.
struct Trajectory {
    env::Statement statement;
    std::vector<std::string> tactics;
};

// Returns a new backend whose count table adds one per (state bucket,
// tactic head) occurrence across all proofs. Every trajectory is replayed
// first; a failing replay throws InvalidTrajectory. Counts are additive,
// so the result is independent of trajectory order.
LearnedPolicy update_from_trajectories(const LearnedPolicy& backend, const std::vector<Trajectory>& proofs);

// HTTP client for a generation server:
//   POST {base}/generate  {"prompt":str,"n":int,"temperature":real}
//     -> {"candidates":[{"text":str,"logprob":real,"tokens":int?}, ...]}
// When the server supplies a token count the engine records the per-token
// average, otherwise the reported total; the kind is recorded per
// candidate. Non-200 responses and malformed bodies throw
// BackendUnavailable. In-flight requests are bounded process-wide.
class RemotePolicy final : public PolicyBackend {
  public:
    explicit RemotePolicy(std::string base_url, double timeout_s = 30.0, int max_inflight = 8);

    std::vector<TacticCandidate> sample(const env::EnvState& state, const PromptRecord& context,
                                        int n, double temperature, Rng& rng) const override;

  private:
    std::string base_url_;
    double timeout_s_;
    std::shared_ptr<std::counting_semaphore<>> inflight_;
};

}  // namespace stepforge::policy
