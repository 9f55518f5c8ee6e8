#include "stepforge/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stepforge/errors.hpp"

namespace stepforge::search {

SearchTree::SearchTree(env::EnvState root) {
    TreeNode n;
    n.id = 0;
    n.state = std::move(root);
    nodes_.push_back(std::move(n));
    by_fingerprint_.emplace(nodes_.front().state.fingerprint, 0);
}

std::optional<int> SearchTree::find(const std::string& fingerprint) const {
    auto it = by_fingerprint_.find(fingerprint);
    if (it == by_fingerprint_.end()) return std::nullopt;
    return it->second;
}

std::optional<Arrival> SearchTree::offer_child(int parent_id, env::EnvState state, const std::string& tactic,
                                               double edge_logprob) {
    const TreeNode& parent = node(parent_id);
    double path_sum = parent.path_logprob_sum + edge_logprob;
    auto it = by_fingerprint_.find(state.fingerprint);
    if (it != by_fingerprint_.end()) {
        TreeNode& existing = node(it->second);
        if (existing.path_logprob_sum >= path_sum || existing.status != NodeStatus::open)
            return std::nullopt;
        // Better arrival at a still-open node: re-parent it.
        if (existing.parent) {
            auto& siblings = node(*existing.parent).children;
            siblings.erase(std::remove(siblings.begin(), siblings.end(), existing.id), siblings.end());
        }
        existing.parent = parent_id;
        existing.incoming_tactic = tactic;
        existing.edge_logprob = edge_logprob;
        existing.path_logprob_sum = path_sum;
        existing.depth = parent.depth + 1;
        node(parent_id).children.push_back(existing.id);
        return Arrival{existing.id, false, true};
    }
    TreeNode n;
    n.id = static_cast<int>(nodes_.size());
    n.state = std::move(state);
    n.parent = parent_id;
    n.incoming_tactic = tactic;
    n.edge_logprob = edge_logprob;
    n.path_logprob_sum = path_sum;
    n.depth = parent.depth + 1;
    by_fingerprint_.emplace(n.state.fingerprint, n.id);
    node(parent_id).children.push_back(n.id);
    int id = n.id;
    nodes_.push_back(std::move(n));
    return Arrival{id, true, false};
}

int SearchTree::add_terminal(int parent_id, const std::string& tactic, double edge_logprob) {
    return add_node_raw(parent_id, env::ToyEnv::wrap(env::ProofState()), tactic, edge_logprob,
                        NodeStatus::terminal);
}

int SearchTree::add_node_raw(int parent_id, env::EnvState state, const std::string& tactic,
                             double edge_logprob, NodeStatus status) {
    TreeNode n;
    n.id = static_cast<int>(nodes_.size());
    n.state = std::move(state);
    n.parent = parent_id;
    n.incoming_tactic = tactic;
    n.edge_logprob = edge_logprob;
    n.path_logprob_sum = node(parent_id).path_logprob_sum + edge_logprob;
    n.depth = node(parent_id).depth + 1;
    n.status = status;
    node(parent_id).children.push_back(n.id);
    int id = n.id;
    by_fingerprint_.emplace(n.state.fingerprint, n.id);
    nodes_.push_back(std::move(n));
    return id;
}

std::vector<int> SearchTree::path_to(int id) const {
    std::vector<int> path;
    for (std::optional<int> cur = id; cur; cur = node(*cur).parent) path.push_back(*cur);
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<std::string> SearchTree::tactics_to(int id) const {
    std::vector<std::string> tactics;
    for (int n : path_to(id)) {
        if (node(n).parent) tactics.push_back(node(n).incoming_tactic);
    }
    return tactics;
}

bool SearchTree::reaches_terminal(int id) const {
    const TreeNode& n = node(id);
    if (n.status == NodeStatus::terminal) return true;
    for (int c : n.children) {
        if (reaches_terminal(c)) return true;
    }
    return false;
}

std::string to_string(SearchMode mode) {
    switch (mode) {
        case SearchMode::BF: return "bf";
        case SearchMode::CG: return "cg";
        case SearchMode::BF_plus_CG: return "bf+cg";
    }
    return "?";
}

SearchMode parse_mode(const std::string& text) {
    if (text == "bf") return SearchMode::BF;
    if (text == "cg") return SearchMode::CG;
    if (text == "bf+cg") return SearchMode::BF_plus_CG;
    throw Error("unknown search mode '" + text + "' (expected bf, cg or bf+cg)");
}

void SearchBudget::validate() const {
    if (passes < 1 || samples_per_expansion < 1 || max_expansions < 1)
        throw Error("budget requires P >= 1, S >= 1, K >= 1");
    if (wall_clock_limit_s <= 0) throw Error("budget requires a positive wall clock limit");
    if (mode == SearchMode::BF_plus_CG && passes % 2 != 0)
        throw Error("bf+cg requires an even number of passes");
}

SearchBudget parse_budget(const std::string& text) {
    SearchBudget b;
    int fields[3];
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        std::size_t next = text.find('x', pos);
        std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        try {
            fields[i] = std::stoi(part);
        } catch (const std::exception&) {
            throw Error("malformed budget '" + text + "' (expected PxSxK)");
        }
        if (i < 2) {
            if (next == std::string::npos) throw Error("malformed budget '" + text + "' (expected PxSxK)");
            pos = next + 1;
        } else if (next != std::string::npos) {
            throw Error("malformed budget '" + text + "' (expected PxSxK)");
        }
    }
    b.passes = fields[0];
    b.samples_per_expansion = fields[1];
    b.max_expansions = fields[2];
    b.validate();
    return b;
}

std::string to_string(TerminationCause cause) {
    switch (cause) {
        case TerminationCause::proof: return "proof";
        case TerminationCause::budget_K: return "budget_K";
        case TerminationCause::budget_time: return "budget_time";
        case TerminationCause::frontier_empty: return "frontier_empty";
        case TerminationCause::infrastructure: return "infrastructure";
    }
    return "?";
}

double bf_priority(const TreeNode& node) {
    if (!node.parent) throw Error("bf_priority on the root");
    return node.path_logprob_sum / static_cast<double>(node.depth);
}

double cg_priority(const critic::CriticScorer& scorer, const TreeNode& node) {
    return scorer.score(node.state);
}

namespace {

struct HeapEntry {
    double priority;
    int depth;
    int id;

    // max-priority first; ties prefer lower depth, then lower node id
    bool operator<(const HeapEntry& o) const {
        if (priority != o.priority) return priority < o.priority;
        if (depth != o.depth) return depth > o.depth;
        return id > o.id;
    }
};

double node_priority(SearchMode mode, const critic::CriticScorer* scorer, const TreeNode& n) {
    if (!n.parent) return std::numeric_limits<double>::infinity();  // root expands first
    if (mode == SearchMode::CG) return cg_priority(*scorer, n);
    return bf_priority(n);
}

}  // namespace

AttemptResult run_attempt(const env::Statement& statement, env::TacticEnv& environment,
                          const policy::PolicyBackend& backend, const critic::CriticScorer* scorer,
                          const SearchBudget& budget, int pass_index, std::uint64_t seed,
                          const SearchConfig& config) {
    budget.validate();
    if (budget.mode == SearchMode::BF_plus_CG) throw Error("run_attempt takes a single-pass mode (bf or cg)");
    if (budget.mode == SearchMode::CG && scorer == nullptr) throw Error("critic-guided search requires a scorer");

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    AttemptOutcome out;
    out.statement_id = statement.id;
    out.pass_index = pass_index;
    out.mode = budget.mode;
    out.seed = seed;

    Rng rng(seed);
    auto tree = std::make_shared<SearchTree>(environment.init(statement));
    out.nodes_created = 1;

    std::priority_queue<HeapEntry> frontier;
    tree->node(0).search_priority = node_priority(budget.mode, scorer, tree->root());
    frontier.push({tree->root().search_priority, 0, 0});

    auto finish = [&](TerminationCause cause) {
        out.terminated_by = cause;
        out.wall_time_s = elapsed();
        AttemptResult res;
        res.outcome = std::move(out);
        if (config.keep_failed_trees) res.tree = tree;
        return res;
    };

    while (true) {
        if (out.expansions_used >= budget.max_expansions) return finish(TerminationCause::budget_K);
        if (elapsed() > budget.wall_clock_limit_s) return finish(TerminationCause::budget_time);

        // Pop entries until one still matches a live open node.
        int node_id = -1;
        while (!frontier.empty()) {
            HeapEntry e = frontier.top();
            frontier.pop();
            const TreeNode& n = tree->node(e.id);
            if (n.status != NodeStatus::open) continue;
            if (n.search_priority != e.priority) continue;  // stale after re-parent
            node_id = e.id;
            break;
        }
        if (node_id < 0) return finish(TerminationCause::frontier_empty);

        out.expansions_used += 1;
        TreeNode& current = tree->node(node_id);
        current.status = NodeStatus::expanded;

        policy::PromptRecord prompt =
            policy::render_prompt(statement.id, tree->tactics_to(node_id), current.state.pp);
        std::vector<policy::TacticCandidate> candidates = policy::sample_tactics(
            backend, current.state, prompt, budget.samples_per_expansion, config.temperature, rng);
        if (candidates.empty()) {
            tree->node(node_id).status = NodeStatus::exhausted;
            continue;
        }

        for (const policy::TacticCandidate& cand : candidates) {
            env::EnvApplyResult r = environment.apply(tree->node(node_id).state, cand.tactic);
            if (std::holds_alternative<env::EnvFailed>(r)) continue;
            if (std::holds_alternative<env::EnvSolved>(r)) {
                int terminal = tree->add_terminal(node_id, cand.tactic, cand.logprob);
                out.nodes_created += 1;
                std::vector<std::string> tactics = tree->tactics_to(terminal);
                if (!env_replays_to_solved(environment, statement, tactics))
                    throw ReplayMismatch(statement.id + ": reconstructed proof failed to replay");
                out.proof = std::move(tactics);
                out.terminated_by = TerminationCause::proof;
                out.wall_time_s = elapsed();
                AttemptResult res;
                res.outcome = std::move(out);
                res.tree = tree;
                return res;
            }
            auto& adv = std::get<env::EnvAdvanced>(r);
            std::optional<Arrival> arrival =
                tree->offer_child(node_id, std::move(adv.state), cand.tactic, cand.logprob);
            if (!arrival) continue;
            if (arrival->created) out.nodes_created += 1;
            TreeNode& child = tree->node(arrival->node_id);
            child.search_priority = node_priority(budget.mode, scorer, child);
            frontier.push({child.search_priority, child.depth, child.id});
        }
    }
}

namespace {

AttemptResult run_single_pass(const env::Statement& statement, env::TacticEnv& environment,
                              const policy::PolicyBackend& backend, const critic::CriticScorer* scorer,
                              const SearchBudget& budget, int pass_index, std::uint64_t statement_seed,
                              const SearchConfig& config) {
    SearchBudget single = budget;
    single.passes = 1;
    if (budget.mode == SearchMode::BF_plus_CG)
        single.mode = pass_index < budget.passes / 2 ? SearchMode::BF : SearchMode::CG;
    std::uint64_t seed = statement_seed + static_cast<std::uint64_t>(pass_index);
    try {
        return run_attempt(statement, environment, backend, scorer, single, pass_index, seed, config);
    } catch (const ReplayMismatch&) {
        throw;  // engine bug, never demoted to an infrastructure outcome
    } catch (const std::exception& e) {
        AttemptResult res;
        res.outcome.statement_id = statement.id;
        res.outcome.pass_index = pass_index;
        res.outcome.mode = single.mode;
        res.outcome.seed = seed;
        res.outcome.terminated_by = TerminationCause::infrastructure;
        res.outcome.error = e.what();
        return res;
    }
}

}  // namespace

std::vector<AttemptResult> run_passes(const env::Statement& statement, env::TacticEnv& environment,
                                      const policy::PolicyBackend& backend, const critic::CriticScorer* scorer,
                                      const SearchBudget& budget, std::uint64_t base_seed,
                                      const SearchConfig& config) {
    budget.validate();
    std::vector<AttemptResult> results;
    results.reserve(static_cast<std::size_t>(budget.passes));
    for (int p = 0; p < budget.passes; ++p)
        results.push_back(run_single_pass(statement, environment, backend, scorer, budget, p, base_seed, config));
    return results;
}

std::vector<std::vector<AttemptResult>> run_batch_serial(const std::vector<env::Statement>& statements,
                                                         env::TacticEnv& environment,
                                                         const policy::PolicyBackend& backend,
                                                         const critic::CriticScorer* scorer,
                                                         const SearchBudget& budget, std::uint64_t base_seed,
                                                         const SearchConfig& config) {
    budget.validate();
    std::vector<std::vector<AttemptResult>> results(statements.size());
    for (std::size_t i = 0; i < statements.size(); ++i) {
        std::uint64_t statement_seed = base_seed + 1000003ULL * i;
        results[i].reserve(static_cast<std::size_t>(budget.passes));
        for (int p = 0; p < budget.passes; ++p)
            results[i].push_back(
                run_single_pass(statements[i], environment, backend, scorer, budget, p, statement_seed, config));
    }
    return results;
}

std::vector<std::vector<AttemptResult>> run_batch(const std::vector<env::Statement>& statements,
                                                  env::TacticEnv& environment,
                                                  const policy::PolicyBackend& backend,
                                                  const critic::CriticScorer* scorer, const SearchBudget& budget,
                                                  std::uint64_t base_seed, const SearchConfig& config,
                                                  int threads) {
    budget.validate();
    std::vector<std::vector<AttemptResult>> results(statements.size());
    for (auto& r : results) r.resize(static_cast<std::size_t>(budget.passes));

    const long jobs = static_cast<long>(statements.size()) * budget.passes;
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#pragma omp parallel for schedule(dynamic)
#endif
    for (long j = 0; j < jobs; ++j) {
        std::size_t i = static_cast<std::size_t>(j) / static_cast<std::size_t>(budget.passes);
        int p = static_cast<int>(j % budget.passes);
        std::uint64_t statement_seed = base_seed + 1000003ULL * i;
        results[i][static_cast<std::size_t>(p)] =
            run_single_pass(statements[i], environment, backend, scorer, budget, p, statement_seed, config);
    }
    return results;
}

std::optional<std::size_t> shortest_proof_index(const std::vector<AttemptOutcome>& outcomes) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].proof) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& cand = outcomes[i];
        const auto& cur = outcomes[*best];
        if (cand.proof->size() < cur.proof->size() ||
            (cand.proof->size() == cur.proof->size() && cand.pass_index < cur.pass_index))
            best = i;
    }
    return best;
}

std::optional<std::vector<std::string>> shortest_proof(const std::vector<AttemptOutcome>& outcomes) {
    auto idx = shortest_proof_index(outcomes);
    if (!idx) return std::nullopt;
    return outcomes[*idx].proof;
}

bool same_outcome(const AttemptOutcome& a, const AttemptOutcome& b) {
    return a.statement_id == b.statement_id && a.pass_index == b.pass_index && a.mode == b.mode &&
           a.proof == b.proof && a.expansions_used == b.expansions_used && a.nodes_created == b.nodes_created &&
           a.terminated_by == b.terminated_by && a.seed == b.seed;
}

}  // namespace stepforge::search
