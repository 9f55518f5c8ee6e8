#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stepforge/env.hpp"
#include "stepforge/rng.hpp"

namespace stepforge::search {
class SearchTree;
}

namespace stepforge::critic {

enum class PairKind { path, sibling };

struct StateRef {
    std::string fingerprint;
    std::string pp;
};

// Training/evaluation record for the critic: the chosen state should score
// above the rejected one. Path pairs order two states on one successful
// proof path (deeper chosen); sibling pairs prefer an on-path state over a
// same-parent state that never reaches no_goals.
struct PreferencePair {
    StateRef chosen;
    StateRef rejected;
    PairKind kind = PairKind::path;
    std::string source_proof_id;
};

// --- state features ---------------------------------------------------

inline constexpr std::size_t kFeatureDim = 7;
inline constexpr int kFeatureVersion = 1;
using FeatureVec = std::array<double, kFeatureDim>;

// Clipped and scaled to [0, 1]:
//   [0] goal count            / 8
//   [1] total formula size    / 64   (targets and hypotheses, all goals)
//   [2] max target depth      / 16
//   [3] "->" count            / 32   (targets and hypotheses)
//   [4] "∧" count             / 32
//   [5] "∨" count             / 32
//   [6] hypothesis count      / 16   (all goals)
// no_goals maps to the zero vector.
FeatureVec features(const env::ProofState& state);

struct CriticParams {
    std::array<double, kFeatureDim> weights{};
    double bias = 0.0;
};

// dot(weights, features) + bias; no_goals scores +infinity, ordered above
// every finite score.
double score_state(const CriticParams& params, const env::ProofState& state);

// The linear value without the terminal sentinel. Used by training.
double raw_value(const CriticParams& params, const FeatureVec& f);

// --- pair extraction ---------------------------------------------------

// All C(m, 2) pairs over the m states of a successful proof path
// (root .. no_goals): for every i < j, (chosen = s_j, rejected = s_i), in
// lexicographic (i, j) order. Throws NotAProof when the path does not end
// at no_goals.
std::vector<PreferencePair> extract_path_pairs(const std::vector<env::ProofState>& path_states,
                                               const std::string& proof_id);
std::vector<PreferencePair> extract_path_pairs(const env::Statement& statement, const env::ProofPath& path);

// For each on-path state s_t (t >= 1) and each same-parent sibling that has
// no no_goals descendant in the tree, (chosen = s_t, rejected = sibling).
// Throws PathNotInTree when the tactic path does not lie inside the tree.
std::vector<PreferencePair> extract_sibling_pairs(const search::SearchTree& tree,
                                                  const env::ProofPath& path);

// Dedup by (chosen.fingerprint, rejected.fingerprint), keeping first
// occurrences, then uniformly subsample the pairs whose chosen state is
// no_goals down to ceil(fraction * their count) under the seed. Survivors
// keep their input order.
std::vector<PreferencePair> hygiene(const std::vector<PreferencePair>& pairs,
                                    double no_goals_keep_fraction, std::uint64_t seed);

// --- training ----------------------------------------------------------

// Stability bound for full-batch gradient descent on the clipped feature
// basis; monotone loss decrease is asserted for learning rates at or below
// this.
inline constexpr double kLrStabilityBound = 0.5;

struct TrainingReport {
    CriticParams params;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
    // Every pair had identical chosen/rejected features; the loss cannot
    // fall below log 2.
    bool degenerate = false;
};

// Full-batch gradient descent on mean pairwise logistic loss
// -log sigmoid(V(chosen) - V(rejected)). Deterministic under seed and
// invariant to input pair permutation. Features are recomputed from the
// stored pretty-prints. Throws SoundnessError if the per-epoch loss
// increases at a learning rate within the stability bound.
TrainingReport train_critic(const std::vector<PreferencePair>& pairs, int epochs, double learning_rate,
                            std::uint64_t seed);

// Mean gradient of the pairwise logistic loss at `params` over
// pre-computed feature differences. The plain serial loop is the reference
// implementation; the blocked variant runs the blocks in parallel and
// combines partials in block order, so its result does not depend on the
// thread count.
std::array<double, kFeatureDim> pairwise_gradient_serial(const std::vector<FeatureVec>& diffs,
                                                         const std::array<double, kFeatureDim>& weights);
std::array<double, kFeatureDim> pairwise_gradient(const std::vector<FeatureVec>& diffs,
                                                  const std::array<double, kFeatureDim>& weights);
double pairwise_loss(const std::vector<FeatureVec>& diffs, const std::array<double, kFeatureDim>& weights);

// Feature difference chosen - rejected for each pair, parsing states from
// their pretty-prints.
std::vector<FeatureVec> pair_feature_diffs(const std::vector<PreferencePair>& pairs);

// Fraction of pairs with V(chosen) > V(rejected); exact ties count as
// incorrect.
double pair_accuracy(const CriticParams& params, const std::vector<PreferencePair>& pairs);

// --- scorers -----------------------------------------------------------

// State scorer used by critic-guided search.
class CriticScorer {
  public:
    virtual ~CriticScorer() = default;
    virtual double score(const env::EnvState& state) const = 0;
};

// Scores through CriticParams. Requires toy states (or pretty-prints that
// parse back into them).
class LinearCritic final : public CriticScorer {
  public:
    LinearCritic() = default;
    explicit LinearCritic(CriticParams params) : params_(std::move(params)) {}

    double score(const env::EnvState& state) const override;
    const CriticParams& params() const { return params_; }

  private:
    CriticParams params_;
};

// HTTP client for a scoring server:
//   POST {base}/score  {"states":[<pp>, ...]} -> {"scores":[<real>, ...]}
// same length, same order. Non-200 or malformed bodies throw
// BackendUnavailable.
class RemoteCritic final : public CriticScorer {
  public:
    explicit RemoteCritic(std::string base_url, double timeout_s = 30.0);

    double score(const env::EnvState& state) const override;
    std::vector<double> score_batch(const std::vector<std::string>& pps) const;

  private:
    std::string base_url_;
    double timeout_s_;
};

// --- persistence --------------------------------------------------------

// Pair files: JSONL {"chosen":<pp>,"rejected":<pp>,"kind":"path"|"sibling",
// "proof_id":<string>}.
void write_pairs_jsonl(const std::string& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> load_pairs_jsonl(const std::string& path);

void save_critic(const std::string& path, const CriticParams& params);
CriticParams load_critic(const std::string& path);

}  // namespace stepforge::critic
