#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stepforge/critic.hpp"
#include "stepforge/env.hpp"
#include "stepforge/policy.hpp"

namespace stepforge::search {

enum class NodeStatus { open, expanded, exhausted, terminal };

struct TreeNode {
    int id = 0;
    env::EnvState state;
    std::optional<int> parent;      // absent for the root
    std::string incoming_tactic;
    double edge_logprob = 0.0;
    double path_logprob_sum = 0.0;  // sum of edge logprobs along the root path
    int depth = 0;                  // tactics from the root
    NodeStatus status = NodeStatus::open;
    std::vector<int> children;
    double search_priority = 0.0;   // cached selection priority, engine-managed
};

// What happened when a freshly generated state was offered to the tree.
struct Arrival {
    int node_id;
    bool created;  // a new node was added
    bool updated;  // an existing open node was re-parented to a better path
};

// DAG-deduplicated search tree. States are keyed by fingerprint; a repeat
// arrival is kept only when it carries a strictly higher path_logprob_sum,
// and only re-parents nodes that are still open — an expanded node keeps
// the subtree built under its original arrival.
class SearchTree {
  public:
    explicit SearchTree(env::EnvState root);

    const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    TreeNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(nodes_.size()); }
    const TreeNode& root() const { return nodes_.front(); }

    std::optional<int> find(const std::string& fingerprint) const;

    std::optional<Arrival> offer_child(int parent_id, env::EnvState state, const std::string& tactic,
                                       double edge_logprob);

    // Terminal no_goals child; always a fresh node.
    int add_terminal(int parent_id, const std::string& tactic, double edge_logprob);

    // Direct insertion that bypasses the dedup rule; used when rebuilding a
    // serialized tree.
    int add_node_raw(int parent_id, env::EnvState state, const std::string& tactic, double edge_logprob,
                     NodeStatus status);

    // Node ids from the root to `id`, inclusive.
    std::vector<int> path_to(int id) const;
    // Tactic labels along that path.
    std::vector<std::string> tactics_to(int id) const;

    // True when some descendant of `id` (or `id` itself) is a terminal node.
    bool reaches_terminal(int id) const;

  private:
    std::vector<TreeNode> nodes_;
    std::unordered_map<std::string, int> by_fingerprint_;
};

enum class SearchMode { BF, CG, BF_plus_CG };

std::string to_string(SearchMode mode);
SearchMode parse_mode(const std::string& text);  // "bf" | "cg" | "bf+cg"

// P x S x K: P independent passes, S tactic samples per expansion, K
// expansions per pass.
struct SearchBudget {
    int passes = 1;
    int samples_per_expansion = 32;
    int max_expansions = 600;
    double wall_clock_limit_s = 3600.0;
    SearchMode mode = SearchMode::BF;

    void validate() const;  // throws Error on violated invariants
};

// Parses the "PxSxK" budget syntax, e.g. "256x32x600".
SearchBudget parse_budget(const std::string& text);

enum class TerminationCause { proof, budget_K, budget_time, frontier_empty, infrastructure };

std::string to_string(TerminationCause cause);

// One independent search pass over one statement; the unit of all compute
// accounting.
struct AttemptOutcome {
    std::string statement_id;
    int pass_index = 0;
    SearchMode mode = SearchMode::BF;
    std::optional<std::vector<std::string>> proof;  // present iff terminated_by == proof
    int expansions_used = 0;
    double wall_time_s = 0.0;
    long nodes_created = 0;
    TerminationCause terminated_by = TerminationCause::frontier_empty;
    std::uint64_t seed = 0;
    std::string error;  // infrastructure failure detail
};

struct AttemptResult {
    AttemptOutcome outcome;
    std::shared_ptr<const SearchTree> tree;  // retained for successful attempts
};

struct SearchConfig {
    double temperature = 0.7;
    bool keep_failed_trees = false;
};

// Average log-likelihood of the tactics leading to the node. Root is
// selected unconditionally before any scored node, so it has no priority.
double bf_priority(const TreeNode& node);

// Critic grade of the node's state.
double cg_priority(const critic::CriticScorer& scorer, const TreeNode& node);

// One search pass. Selection pops the max-priority open node (ties: lower
// depth, then lower node id); the root expansion is unconditional and
// counts as expansion 1. Each expansion draws at most S candidates at the
// configured temperature and applies them in order; Advanced children
// enter the tree under the dedup rule; the first Solved reconstructs the
// tactic path, verifies it by replay and returns. The wall clock is
// checked between expansions. budget.mode must be BF or CG, budget.passes
// is ignored.
AttemptResult run_attempt(const env::Statement& statement, env::TacticEnv& environment,
                          const policy::PolicyBackend& backend, const critic::CriticScorer* scorer,
                          const SearchBudget& budget, int pass_index, std::uint64_t seed,
                          const SearchConfig& config = {});

// P independent attempts with seeds base_seed + pass_index. BF_plus_CG
// assigns the first P/2 passes to BF and the rest to CG. Attempts never
// share tree state; per-attempt infrastructure failures are recorded in
// the outcome without aborting the remaining passes.
std::vector<AttemptResult> run_passes(const env::Statement& statement, env::TacticEnv& environment,
                                      const policy::PolicyBackend& backend,
                                      const critic::CriticScorer* scorer, const SearchBudget& budget,
                                      std::uint64_t base_seed, const SearchConfig& config = {});

// Batch runners over many statements. Statement i derives its seed as
// base_seed + 1000003 * i, so results are independent of execution order.
// The serial loop is the reference implementation; run_batch distributes
// the flattened (statement, pass) jobs across OpenMP threads and returns
// identical results (wall times aside).
std::vector<std::vector<AttemptResult>> run_batch_serial(const std::vector<env::Statement>& statements,
                                                         env::TacticEnv& environment,
                                                         const policy::PolicyBackend& backend,
                                                         const critic::CriticScorer* scorer,
                                                         const SearchBudget& budget, std::uint64_t base_seed,
                                                         const SearchConfig& config = {});
std::vector<std::vector<AttemptResult>> run_batch(const std::vector<env::Statement>& statements,
                                                  env::TacticEnv& environment,
                                                  const policy::PolicyBackend& backend,
                                                  const critic::CriticScorer* scorer,
                                                  const SearchBudget& budget, std::uint64_t base_seed,
                                                  const SearchConfig& config = {}, int threads = 0);

// Index of the successful outcome with the fewest tactics, ties broken by
// earliest pass_index; nullopt when nothing succeeded.
std::optional<std::size_t> shortest_proof_index(const std::vector<AttemptOutcome>& outcomes);
std::optional<std::vector<std::string>> shortest_proof(const std::vector<AttemptOutcome>& outcomes);

// Outcome equality modulo wall time, for determinism checks.
bool same_outcome(const AttemptOutcome& a, const AttemptOutcome& b);

}  // namespace stepforge::search
