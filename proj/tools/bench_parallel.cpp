// Compares the serial reference implementations against the OpenMP kernels:
// the batch attempt runner and the critic gradient. Verifies that both give
// the same results before reporting timings.
//
//   stepforge-bench [--statements N] [--pairs N] [--budget PxSxK] [--seed S]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stepforge/corpus.hpp"
#include "stepforge/critic.hpp"
#include "stepforge/oracle.hpp"
#include "stepforge/policy.hpp"
#include "stepforge/search.hpp"

using namespace stepforge;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int mismatched_outcomes(const std::vector<std::vector<search::AttemptResult>>& a,
                        const std::vector<std::vector<search::AttemptResult>>& b) {
    int bad = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t p = 0; p < a[i].size(); ++p)
            bad += search::same_outcome(a[i][p].outcome, b[i][p].outcome) ? 0 : 1;
    }
    return bad;
}

}  // namespace

int main(int argc, char** argv) {
    int n_statements = 48;
    int n_pairs = 200000;
    std::uint64_t seed = 1;
    std::string budget_str = "4x8x200";
    for (int i = 1; i < argc - 1; ++i) {
        if (!std::strcmp(argv[i], "--statements")) n_statements = std::atoi(argv[i + 1]);
        if (!std::strcmp(argv[i], "--pairs")) n_pairs = std::atoi(argv[i + 1]);
        if (!std::strcmp(argv[i], "--seed")) seed = std::strtoull(argv[i + 1], nullptr, 10);
        if (!std::strcmp(argv[i], "--budget")) budget_str = argv[i + 1];
    }

#ifdef _OPENMP
    int threads = omp_get_max_threads();
#else
    int threads = 1;
#endif
    std::printf("threads: %d\n", threads);

    // --- batch search: serial loop vs OpenMP over (statement, pass) jobs ---
    corpus::MixedCorpus corpus = corpus::random_mixed(n_statements, seed, 6);
    search::SearchBudget budget = search::parse_budget(budget_str);
    env::ToyEnv environment;
    policy::HeuristicPolicy backend;

    auto t0 = Clock::now();
    auto serial = search::run_batch_serial(corpus.statements, environment, backend, nullptr, budget, seed);
    double serial_s = seconds_since(t0);

    t0 = Clock::now();
    auto parallel = search::run_batch(corpus.statements, environment, backend, nullptr, budget, seed);
    double parallel_s = seconds_since(t0);

    int bad = mismatched_outcomes(serial, parallel);
    long solved = 0;
    for (const auto& per_statement : serial) {
        for (const auto& r : per_statement) solved += r.outcome.proof ? 1 : 0;
    }
    std::printf("search  %3dx%s: serial %.3fs  openmp %.3fs  speedup %.2fx  solved-attempts %ld  mismatches %d\n",
                n_statements, budget_str.c_str(), serial_s, parallel_s,
                parallel_s > 0 ? serial_s / parallel_s : 0.0, solved, bad);

    // --- critic gradient: serial reference vs blocked OpenMP reduction ---
    Rng rng(seed);
    std::vector<critic::FeatureVec> diffs(static_cast<std::size_t>(n_pairs));
    for (auto& d : diffs) {
        for (auto& v : d) v = rng.uniform() - 0.5;
    }
    std::array<double, critic::kFeatureDim> weights{};
    for (auto& w : weights) w = rng.uniform() - 0.5;

    const int reps = 50;
    t0 = Clock::now();
    std::array<double, critic::kFeatureDim> gs{};
    for (int r = 0; r < reps; ++r) gs = critic::pairwise_gradient_serial(diffs, weights);
    double grad_serial_s = seconds_since(t0);

    t0 = Clock::now();
    std::array<double, critic::kFeatureDim> gp{};
    for (int r = 0; r < reps; ++r) gp = critic::pairwise_gradient(diffs, weights);
    double grad_parallel_s = seconds_since(t0);

    double max_delta = 0;
    for (std::size_t i = 0; i < critic::kFeatureDim; ++i)
        max_delta = std::max(max_delta, std::abs(gs[i] - gp[i]));
    std::printf("gradient %d pairs x%d: serial %.3fs  openmp %.3fs  speedup %.2fx  max-delta %.2e\n",
                n_pairs, reps, grad_serial_s, grad_parallel_s,
                grad_parallel_s > 0 ? grad_serial_s / grad_parallel_s : 0.0, max_delta);

    if (bad != 0 || max_delta > 1e-12) {
        std::printf("FAIL: parallel kernels disagree with the serial reference\n");
        return 1;
    }
    std::printf("OK: parallel kernels match the serial reference\n");
    return 0;
}
