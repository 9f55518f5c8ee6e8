#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stepforge/analytics.hpp"
#include "stepforge/critic.hpp"
#include "stepforge/policy.hpp"
#include "stepforge/search.hpp"

namespace stepforge::iterate {

// Budget caps for the escalation schedule.
inline constexpr int kMaxExpansionsCap = 2000;
inline constexpr double kMaxTimeLimitCap = 3600.0;

struct RoundConfig {
    int round_index = 0;
    search::SearchBudget budget;
    double time_limit_s = 50.0;
    std::optional<double> rank_filter;  // fraction of unsolved to attempt, critic-ranked
};

// Escalating default ladder: K in {10, 50, 200, 600, 2000}, per-attempt
// time in {50, 120, 600, 1800, 3600} s.
std::vector<RoundConfig> default_schedule(int passes = 1, int samples = 8,
                                          search::SearchMode mode = search::SearchMode::BF);

// Throws Error unless budgets are non-decreasing and within the caps.
void validate_schedule(const std::vector<RoundConfig>& schedule);

// schedule[min(round_index, last)], with round_index stamped in.
RoundConfig schedule_budget(int round_index, const std::vector<RoundConfig>& schedule);

std::vector<RoundConfig> load_schedule_json(const std::string& path);

enum class StatementStatus { unsolved, proved, disproved, pruned };

// The problem pool plus the solved/pruned state machine. When a statement
// is resolved its negation partner (id + ".neg", or the base id for ".neg"
// entries) leaves the pool too.
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::vector<env::Statement> statements);

    static Dataset load_jsonl(const std::string& path);

    const std::vector<env::Statement>& statements() const { return statements_; }
    const env::Statement* find(const std::string& id) const;
    StatementStatus status(const std::string& id) const;

    std::vector<env::Statement> unsolved() const;
    long solved_count() const;

    // Marks the statement and prunes its partner; returns the number of
    // partner statements pruned.
    int mark_proved(const std::string& id);
    int mark_disproved(const std::string& id);

  private:
    int resolve(const std::string& id, StatementStatus status);

    std::vector<env::Statement> statements_;
    std::map<std::string, StatementStatus> status_;
};

struct ProofRecord {
    std::string id;                    // base statement id
    std::string direction = "proof";   // "proof" | "disproof"
    std::vector<std::string> tactics;  // proof of the statement or of its negation
    int round = 0;
    std::string mode = "bf";
    std::vector<int> history;          // stored lengths, oldest first; back() == tactics.size()

    int length() const { return static_cast<int>(tactics.size()); }
};

// Verified proofs, one record per statement. Inserting a proof and a
// disproof for the same id is an environment-soundness violation and
// throws.
class ProofStore {
  public:
    const ProofRecord* find(const std::string& id) const;
    bool has(const std::string& id) const { return find(id) != nullptr; }
    std::size_t size() const { return records_.size(); }

    void insert(ProofRecord record);

    // Replaces the stored tactics only when strictly shorter; history keeps
    // both lengths. Returns true when replaced.
    bool replace_if_shorter(const std::string& id, const std::vector<std::string>& tactics, int round,
                            const std::string& mode);

    // Records sorted by id.
    std::vector<ProofRecord> all() const;
    std::vector<analytics::ProofLengthRecord> length_records() const;

    void save_jsonl(const std::string& path) const;
    static ProofStore load_jsonl(const std::string& path);

  private:
    std::map<std::string, ProofRecord> records_;
};

// A successful attempt's tree, retained for preference-pair extraction.
struct SuccessTree {
    env::Statement attempted;  // the statement or its negation, as searched
    std::vector<std::string> tactics;
    int round = 0;
    int pass_index = 0;
    std::string mode = "bf";
    std::shared_ptr<const search::SearchTree> tree;
};

void write_trees_jsonl(const std::string& path, const std::vector<SuccessTree>& trees);
std::vector<SuccessTree> load_trees_jsonl(const std::string& path);

// Path pairs from every tree's proof plus sibling pairs from its tree.
std::vector<critic::PreferencePair> extract_all_pairs(const std::vector<SuccessTree>& trees);

struct RoundReport {
    int round_index = 0;
    int attempted = 0;
    int proved = 0;
    int disproved = 0;
    int pruned = 0;
    long cumulative_solved = 0;
    double cpu_seconds_total = 0.0;
};

struct RoundOptions {
    int threads = 0;               // 0: all cores; 1: the serial reference path
    double cores_per_attempt = 1.0;
    bool collect_trees = true;
    std::uint64_t base_seed = 0x5eed;
};

// One expert-iteration round: every selected unsolved statement is
// attempted; statements left unproved get a disproof attempt on their
// negation when one is derivable. Successes are verified, stored and
// pruned together with their negation partners; every attempt lands in the
// ledger. Per-statement failures never abort the round.
RoundReport run_round(Dataset& dataset, ProofStore& store, const RoundConfig& config,
                      env::TacticEnv& environment, const policy::PolicyBackend& backend,
                      const critic::CriticScorer* scorer, analytics::LedgerWriter* ledger,
                      std::vector<SuccessTree>* trees_out, const RoundOptions& options = {});

// Critic-ranked problem selection: scores each statement's root state and
// returns the top ceil(fraction * count) by descending score, ties by id.
std::vector<env::Statement> rank_unsolved(const critic::CriticScorer& scorer, env::TacticEnv& environment,
                                          const std::vector<env::Statement>& statements, double fraction);

// Re-searches solved statements and swaps in strictly shorter verified
// proofs. Returns the number of replacements.
int reprove_shorter(ProofStore& store, const Dataset& dataset, const RoundConfig& config,
                    env::TacticEnv& environment, const policy::PolicyBackend& backend,
                    const critic::CriticScorer* scorer, std::uint64_t base_seed,
                    const RoundOptions& options = {});

struct SftRecord {
    std::string prompt;
    std::string completion;
};

// One record per proof step across the store: the policy prompt at that
// step and the bare tactic as completion. Deterministic order (by id, then
// step).
std::vector<SftRecord> export_sft(const ProofStore& store, const Dataset& dataset,
                                  env::TacticEnv& environment);
void write_sft_jsonl(const std::string& path, const std::vector<SftRecord>& records);

struct IterateOptions {
    int rounds = 2;
    std::uint64_t seed = 0;
    RoundOptions round;
    double rank_fraction = 0.5;      // applied from round 2 once a critic exists
    double hygiene_fraction = 0.10;
    int critic_epochs = 400;
    double critic_lr = 0.5;
    bool reprove = false;
};

struct IterationResult {
    std::vector<RoundReport> reports;
    policy::LearnedPolicy final_policy{1.0};
    std::optional<critic::CriticParams> critic;
    std::vector<SuccessTree> trees;
};

// The driver: rounds follow the schedule; after each round the learned
// policy absorbs the new proofs and the critic retrains on all extracted
// pairs. Critic-ranked selection of the top rank_fraction starts at round
// 2 (the first round with a critic trained on earlier trees).
IterationResult run_expert_iteration(Dataset& dataset, ProofStore& store,
                                     const std::vector<RoundConfig>& schedule, env::TacticEnv& environment,
                                     const policy::LearnedPolicy& start_policy, const IterateOptions& options,
                                     analytics::LedgerWriter* ledger);

}  // namespace stepforge::iterate
