#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stepforge/search.hpp"

namespace stepforge::analytics {

struct LedgerHeader {
    double cores_per_attempt = 1.0;  // cpu_seconds = wall_time_s * this
    std::string note;                // free-form run metadata (provisioning ratios etc.)
};

// One search attempt as accounted in the run ledger. Disproof attempts are
// recorded against the base problem id (the ".neg" suffix is stripped into
// the direction field), so per-problem aggregation sees every attempt spent
// on the problem.
struct LedgerEntry {
    std::string statement_id;
    std::string direction = "proof";  // "proof" | "disproof"
    int round_index = 0;
    int pass_index = 0;
    std::string mode = "bf";
    bool valid = false;
    std::optional<int> proof_length;
    int expansions_used = 0;
    long nodes_created = 0;
    double wall_time_s = 0.0;
    double cpu_seconds = 0.0;
    std::string terminated_by;
    std::uint64_t seed = 0;
};

LedgerEntry make_entry(const search::AttemptOutcome& outcome, int round_index, double cores_per_attempt);

// Append-only JSONL ledger; writes are serialized, one record per line,
// header first.
class LedgerWriter {
  public:
    LedgerWriter(std::string path, LedgerHeader header);

    void append(const LedgerEntry& entry);
    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::mutex mutex_;
};

struct Ledger {
    LedgerHeader header;
    std::vector<LedgerEntry> entries;
};

Ledger load_ledger(const std::string& path);

// CPU time per successful proof for one problem: the sum of cpu_seconds
// over ALL of its attempts divided by the number of valid attempts; absent
// when nothing succeeded (such problems sit in the "remain unproven" row,
// not in this distribution).
std::optional<double> cpu_per_proof(const std::vector<LedgerEntry>& entries_for_one_statement);

// Shortest stored proof length per problem, used by all length statistics.
struct ProofLengthRecord {
    std::string statement_id;
    std::vector<int> history;  // stored lengths, oldest first
    std::string mode;          // mode of the search that found the current proof
};

// One contribution per statement at min(history).
std::map<int, long> length_histogram(const std::vector<ProofLengthRecord>& store);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
};

// Ordinary least squares of ln(count) against the bucket value over buckets
// with count >= min_count, via the closed-form normal equations. Throws
// InsufficientData below two qualifying points.
FitResult loglinear_fit(const std::map<int, double>& histogram, double min_count = 1.0);
FitResult loglinear_fit(const std::map<int, long>& histogram, long min_count = 1);

struct PassAtResult {
    std::map<int, double> fraction;  // N -> fraction of problems solved within N attempts
    std::vector<std::string> warnings;
};

// pass@N over a ledger: for each N, the fraction of problems with at least
// one valid attempt among their first N (attempts ordered by round, then
// direction, then pass index). Problems with fewer than N attempts are
// truncated to what they have, with a warning. Monotone non-decreasing in N.
PassAtResult pass_at_n(const std::vector<LedgerEntry>& entries, const std::vector<int>& n_values,
                       bool exclude_infrastructure = false);

struct SummaryReport {
    long dataset_size = 0;
    long proved = 0;
    long disproved = 0;
    long unsolved = 0;
    double cpu_days_solved = 0.0;
    double cpu_days_unsolved = 0.0;

    long total_solved() const { return proved + disproved; }
    double cpu_days_total() const { return cpu_days_solved + cpu_days_unsolved; }
    std::string to_csv() const;
};

// Problem counts and CPU-day shares partitioned by final status.
SummaryReport summary_table(const std::vector<LedgerEntry>& entries);

struct ModeMeans {
    std::optional<double> bf_mean;
    std::optional<double> cg_mean;
    long bf_solved = 0;
    long cg_solved = 0;
};

// Mean shortest-proof length per search mode, one contribution per
// (problem, mode) at that mode's shortest valid attempt.
ModeMeans mode_length_means(const std::vector<LedgerEntry>& entries);

// CSV emitters for the CLI.
std::string histogram_csv(const std::map<int, long>& histogram);
std::string fit_csv(const FitResult& fit);
std::string pass_at_csv(const PassAtResult& result);
std::string mode_means_csv(const ModeMeans& means);

}  // namespace stepforge::analytics
