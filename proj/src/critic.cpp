#include "stepforge/critic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stepforge/errors.hpp"
#include "stepforge/search.hpp"

namespace stepforge::critic {

namespace {

void count_connectives(const env::Formula& f, double& implies, double& conj, double& disj) {
    switch (f.kind()) {
        case env::Formula::Kind::Atom:
        case env::Formula::Kind::Falsum: return;
        case env::Formula::Kind::Implies: implies += 1; break;
        case env::Formula::Kind::And: conj += 1; break;
        case env::Formula::Kind::Or: disj += 1; break;
    }
    count_connectives(f.lhs(), implies, conj, disj);
    count_connectives(f.rhs(), implies, conj, disj);
}

}  // namespace

FeatureVec features(const env::ProofState& state) {
    FeatureVec f{};
    if (state.no_goals()) return f;
    double goals = 0, size = 0, max_depth = 0, implies = 0, conj = 0, disj = 0, hyps = 0;
    for (const env::Sequent& goal : state.goals()) {
        goals += 1;
        size += goal.target.size();
        max_depth = std::max(max_depth, static_cast<double>(goal.target.depth()));
        count_connectives(goal.target, implies, conj, disj);
        for (const env::Hypothesis& h : goal.hyps) {
            hyps += 1;
            size += h.formula.size();
            count_connectives(h.formula, implies, conj, disj);
        }
    }
    f[0] = std::min(goals, 8.0) / 8.0;
    f[1] = std::min(size, 64.0) / 64.0;
    f[2] = std::min(max_depth, 16.0) / 16.0;
    f[3] = std::min(implies, 32.0) / 32.0;
    f[4] = std::min(conj, 32.0) / 32.0;
    f[5] = std::min(disj, 32.0) / 32.0;
    f[6] = std::min(hyps, 16.0) / 16.0;
    return f;
}

double raw_value(const CriticParams& params, const FeatureVec& f) {
    double v = params.bias;
    for (std::size_t i = 0; i < kFeatureDim; ++i) v += params.weights[i] * f[i];
    return v;
}

double score_state(const CriticParams& params, const env::ProofState& state) {
    if (state.no_goals()) return std::numeric_limits<double>::infinity();
    return raw_value(params, features(state));
}

std::vector<PreferencePair> extract_path_pairs(const std::vector<env::ProofState>& path_states,
                                               const std::string& proof_id) {
    if (path_states.size() < 2 || !path_states.back().no_goals())
        throw NotAProof(proof_id + ": path pairs need a verified proof ending at no_goals");
    std::vector<PreferencePair> pairs;
    const std::size_t m = path_states.size();
    pairs.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            PreferencePair p;
            p.chosen = {path_states[j].fingerprint(), path_states[j].pp()};
            p.rejected = {path_states[i].fingerprint(), path_states[i].pp()};
            p.kind = PairKind::path;
            p.source_proof_id = proof_id;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

std::vector<PreferencePair> extract_path_pairs(const env::Statement& statement, const env::ProofPath& path) {
    if (path.tactics.empty()) throw NotAProof(statement.id + ": zero-length path");
    std::vector<env::ProofState> states;
    try {
        states = env::replay_path(statement, path.tactics);
    } catch (const InvalidTrajectory& e) {
        throw NotAProof(e.what());
    }
    return extract_path_pairs(states, statement.id);
}

std::vector<PreferencePair> extract_sibling_pairs(const search::SearchTree& tree, const env::ProofPath& path) {
    // Locate the path inside the tree by walking tactic labels from the root.
    std::vector<int> on_path{0};
    for (const std::string& tactic : path.tactics) {
        const search::TreeNode& cur = tree.node(on_path.back());
        int next = -1;
        for (int child : cur.children) {
            if (tree.node(child).incoming_tactic == tactic) {
                next = child;
                break;
            }
        }
        if (next < 0) throw PathNotInTree(path.statement_id + ": tactic '" + tactic + "' not found in tree");
        on_path.push_back(next);
    }
    std::unordered_set<int> path_set(on_path.begin(), on_path.end());

    std::vector<PreferencePair> pairs;
    for (std::size_t t = 1; t < on_path.size(); ++t) {
        const search::TreeNode& s_t = tree.node(on_path[t]);
        const search::TreeNode& parent = tree.node(*s_t.parent);
        for (int sibling_id : parent.children) {
            if (path_set.count(sibling_id)) continue;
            if (tree.reaches_terminal(sibling_id)) continue;
            const search::TreeNode& sibling = tree.node(sibling_id);
            PreferencePair p;
            p.chosen = {s_t.state.fingerprint, s_t.state.pp};
            p.rejected = {sibling.state.fingerprint, sibling.state.pp};
            p.kind = PairKind::sibling;
            p.source_proof_id = path.statement_id;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

std::vector<PreferencePair> hygiene(const std::vector<PreferencePair>& pairs, double no_goals_keep_fraction,
                                    std::uint64_t seed) {
    if (no_goals_keep_fraction < 0.0 || no_goals_keep_fraction > 1.0)
        throw Error("hygiene: fraction must lie in [0, 1]");

    std::vector<PreferencePair> deduped;
    std::set<std::pair<std::string, std::string>> seen;
    for (const PreferencePair& p : pairs) {
        if (seen.insert({p.chosen.fingerprint, p.rejected.fingerprint}).second) deduped.push_back(p);
    }

    std::vector<std::size_t> terminal_idx;
    for (std::size_t i = 0; i < deduped.size(); ++i) {
        if (deduped[i].chosen.pp == "no goals") terminal_idx.push_back(i);
    }
    std::size_t keep = static_cast<std::size_t>(
        std::ceil(no_goals_keep_fraction * static_cast<double>(terminal_idx.size())));
    if (keep >= terminal_idx.size()) return deduped;

    Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(terminal_idx.size());
    std::vector<bool> drop(deduped.size(), false);
    for (std::size_t r = keep; r < order.size(); ++r) drop[terminal_idx[order[r]]] = true;

    std::vector<PreferencePair> out;
    out.reserve(deduped.size() - (terminal_idx.size() - keep));
    for (std::size_t i = 0; i < deduped.size(); ++i) {
        if (!drop[i]) out.push_back(std::move(deduped[i]));
    }
    return out;
}

std::vector<FeatureVec> pair_feature_diffs(const std::vector<PreferencePair>& pairs) {
    std::vector<FeatureVec> diffs;
    diffs.reserve(pairs.size());
    for (const PreferencePair& p : pairs) {
        FeatureVec c = features(env::parse_state(p.chosen.pp));
        FeatureVec r = features(env::parse_state(p.rejected.pp));
        FeatureVec d;
        for (std::size_t i = 0; i < kFeatureDim; ++i) d[i] = c[i] - r[i];
        diffs.push_back(d);
    }
    return diffs;
}

namespace {

// log(1 + exp(-m)), stable for large |m|
double softplus_neg(double m) {
    if (m > 0) return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr std::size_t kGradBlock = 1024;

std::array<double, kFeatureDim> block_partial(const std::vector<FeatureVec>& diffs,
                                              const std::array<double, kFeatureDim>& weights,
                                              std::size_t begin, std::size_t end) {
    std::array<double, kFeatureDim> g{};
    for (std::size_t p = begin; p < end; ++p) {
        double margin = 0.0;
        for (std::size_t i = 0; i < kFeatureDim; ++i) margin += weights[i] * diffs[p][i];
        double coeff = -sigmoid(-margin);
        for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] += coeff * diffs[p][i];
    }
    return g;
}

}  // namespace

std::array<double, kFeatureDim> pairwise_gradient_serial(const std::vector<FeatureVec>& diffs,
                                                         const std::array<double, kFeatureDim>& weights) {
    std::array<double, kFeatureDim> g = block_partial(diffs, weights, 0, diffs.size());
    for (double& v : g) v /= static_cast<double>(diffs.size());
    return g;
}

std::array<double, kFeatureDim> pairwise_gradient(const std::vector<FeatureVec>& diffs,
                                                  const std::array<double, kFeatureDim>& weights) {
    const std::size_t n = diffs.size();
    const std::size_t blocks = (n + kGradBlock - 1) / kGradBlock;
    std::vector<std::array<double, kFeatureDim>> partials(blocks);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long b = 0; b < static_cast<long>(blocks); ++b) {
        std::size_t begin = static_cast<std::size_t>(b) * kGradBlock;
        std::size_t end = std::min(begin + kGradBlock, n);
        partials[b] = block_partial(diffs, weights, begin, end);
    }
    // Combine in block order: the result is independent of the thread count.
    std::array<double, kFeatureDim> g{};
    for (const auto& partial : partials) {
        for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] += partial[i];
    }
    for (double& v : g) v /= static_cast<double>(n);
    return g;
}

double pairwise_loss(const std::vector<FeatureVec>& diffs, const std::array<double, kFeatureDim>& weights) {
    double total = 0.0;
    for (const FeatureVec& d : diffs) {
        double margin = 0.0;
        for (std::size_t i = 0; i < kFeatureDim; ++i) margin += weights[i] * d[i];
        total += softplus_neg(margin);
    }
    return total / static_cast<double>(diffs.size());
}

TrainingReport train_critic(const std::vector<PreferencePair>& pairs, int epochs, double learning_rate,
                            std::uint64_t seed) {
    if (pairs.empty()) throw Error("train_critic: need at least one pair");
    (void)seed;  // weights start at zero; the seed only tags the run

    // Canonical pair order makes the float accumulation, and therefore the
    // result, invariant to input permutation.
    std::vector<const PreferencePair*> sorted;
    sorted.reserve(pairs.size());
    for (const auto& p : pairs) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const PreferencePair* a, const PreferencePair* b) {
        if (a->chosen.fingerprint != b->chosen.fingerprint) return a->chosen.fingerprint < b->chosen.fingerprint;
        if (a->rejected.fingerprint != b->rejected.fingerprint)
            return a->rejected.fingerprint < b->rejected.fingerprint;
        return a->kind < b->kind;
    });
    std::vector<PreferencePair> canonical;
    canonical.reserve(sorted.size());
    for (const auto* p : sorted) canonical.push_back(*p);
    std::vector<FeatureVec> diffs = pair_feature_diffs(canonical);

    TrainingReport report;
    report.epochs = epochs;
    report.degenerate = std::all_of(diffs.begin(), diffs.end(), [](const FeatureVec& d) {
        return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
    });

    std::array<double, kFeatureDim> w{};
    report.initial_loss = pairwise_loss(diffs, w);
    double prev_loss = report.initial_loss;
    for (int e = 0; e < epochs; ++e) {
        std::array<double, kFeatureDim> g = pairwise_gradient(diffs, w);
        for (std::size_t i = 0; i < kFeatureDim; ++i) w[i] -= learning_rate * g[i];
        double loss = pairwise_loss(diffs, w);
        if (learning_rate <= kLrStabilityBound && loss > prev_loss + 1e-9)
            throw SoundnessError("train_critic: loss increased at a stable learning rate (epoch " +
                                 std::to_string(e) + ")");
        prev_loss = loss;
    }
    report.final_loss = prev_loss;
    report.params.weights = w;
    report.params.bias = 0.0;
    return report;
}

double pair_accuracy(const CriticParams& params, const std::vector<PreferencePair>& pairs) {
    if (pairs.empty()) throw Error("pair_accuracy: need at least one pair");
    std::size_t correct = 0;
    for (const PreferencePair& p : pairs) {
        double vc = score_state(params, env::parse_state(p.chosen.pp));
        double vr = score_state(params, env::parse_state(p.rejected.pp));
        if (vc > vr) ++correct;  // exact ties count as incorrect
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double LinearCritic::score(const env::EnvState& state) const {
    if (state.toy) return score_state(params_, *state.toy);
    return score_state(params_, env::parse_state(state.pp));
}

RemoteCritic::RemoteCritic(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

std::vector<double> RemoteCritic::score_batch(const std::vector<std::string>& pps) const {
    nlohmann::json body{{"states", pps}};
    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
    client.set_read_timeout(std::chrono::duration<double>(timeout_s_));
    auto res = client.Post("/score", body.dump(), "application/json");
    if (!res || res->status != 200) throw BackendUnavailable("critic server " + base_url_ + " unavailable");
    nlohmann::json resp = nlohmann::json::parse(res->body, nullptr, false);
    if (resp.is_discarded() || !resp.contains("scores") || !resp["scores"].is_array() ||
        resp["scores"].size() != pps.size())
        throw BackendUnavailable("critic server returned a malformed body");
    std::vector<double> scores;
    scores.reserve(pps.size());
    for (const auto& s : resp["scores"]) {
        if (!s.is_number()) throw BackendUnavailable("critic server returned a non-numeric score");
        scores.push_back(s.get<double>());
    }
    return scores;
}

double RemoteCritic::score(const env::EnvState& state) const { return score_batch({state.pp}).front(); }

void write_pairs_jsonl(const std::string& path, const std::vector<PreferencePair>& pairs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    for (const PreferencePair& p : pairs) {
        nlohmann::ordered_json j{{"chosen", p.chosen.pp},
                                 {"rejected", p.rejected.pp},
                                 {"kind", p.kind == PairKind::path ? "path" : "sibling"},
                                 {"proof_id", p.source_proof_id}};
        out << j.dump() << '\n';
    }
}

std::vector<PreferencePair> load_pairs_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<PreferencePair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        PreferencePair p;
        p.chosen.pp = j.at("chosen").get<std::string>();
        p.chosen.fingerprint = p.chosen.pp;
        p.rejected.pp = j.at("rejected").get<std::string>();
        p.rejected.fingerprint = p.rejected.pp;
        p.kind = j.at("kind").get<std::string>() == "sibling" ? PairKind::sibling : PairKind::path;
        p.source_proof_id = j.value("proof_id", std::string());
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void save_critic(const std::string& path, const CriticParams& params) {
    nlohmann::ordered_json j;
    j["feature_version"] = kFeatureVersion;
    j["weights"] = params.weights;
    j["bias"] = params.bias;
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

CriticParams load_critic(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("feature_version", -1) != kFeatureVersion)
        throw Error(path + ": critic feature basis version mismatch");
    CriticParams params;
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kFeatureDim) throw Error(path + ": weight dimension mismatch");
    std::copy(w.begin(), w.end(), params.weights.begin());
    params.bias = j.at("bias").get<double>();
    return params;
}

}  // namespace stepforge::critic
