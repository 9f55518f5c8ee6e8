// stepforge: proof-search engine over a built-in decidable toy prover.
//
//   search <statements.jsonl>   independent passes over each statement
//   iterate <dataset.jsonl>     expert-iteration rounds with escalating budgets
//   extract-pairs <run-dir>     preference pairs from stored search trees
//   train-critic <pairs.jsonl>  pairwise-logistic critic training
//   export-sft <run-dir>        policy fine-tuning records from stored proofs
//   stats <run-dir>             CSV analytics over the run ledger
//   gen-corpus                  seeded toy statement generators
//   env-serve                   the toy prover over the line protocol (stdio)

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stepforge/analytics.hpp"
#include "stepforge/corpus.hpp"
#include "stepforge/critic.hpp"
#include "stepforge/errors.hpp"
#include "stepforge/iterate.hpp"
#include "stepforge/oracle.hpp"
#include "stepforge/policy.hpp"
#include "stepforge/search.hpp"
#include "stepforge/wire.hpp"

namespace fs = std::filesystem;
using namespace stepforge;

namespace {

std::uint64_t resolve_seed(std::uint64_t cli_seed, bool seed_given) {
    if (seed_given) return cli_seed;
    if (const char* envseed = std::getenv("STEPFORGE_SEED")) return std::strtoull(envseed, nullptr, 10);
    return 0;
}

struct PolicyChoice {
    std::string kind = "heuristic";
    std::string url;

    std::unique_ptr<policy::PolicyBackend> make() const {
        if (kind == "heuristic") return std::make_unique<policy::HeuristicPolicy>();
        if (kind == "learned") return std::make_unique<policy::LearnedPolicy>();
        if (kind == "remote") {
            if (url.empty()) throw Error("--policy remote requires --policy-url");
            return std::make_unique<policy::RemotePolicy>(url);
        }
        throw Error("unknown policy backend '" + kind + "'");
    }
};

struct CriticChoice {
    std::string kind = "none";
    std::string file;
    std::string url;

    std::unique_ptr<critic::CriticScorer> make() const {
        if (kind == "none") return nullptr;
        if (kind == "zero") return std::make_unique<critic::LinearCritic>();
        if (kind == "file") {
            if (file.empty()) throw Error("--critic file requires --critic-file");
            return std::make_unique<critic::LinearCritic>(critic::load_critic(file));
        }
        if (kind == "remote") {
            if (url.empty()) throw Error("--critic remote requires --critic-url");
            return std::make_unique<critic::RemoteCritic>(url);
        }
        throw Error("unknown critic backend '" + kind + "'");
    }
};

void copy_dataset(const std::string& src, const fs::path& dst) {
    if (fs::exists(dst) && fs::equivalent(src, dst)) return;
    fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        out.push_back(std::stoi(csv.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

int cmd_search(const std::string& dataset_path, const std::string& budget_str, const std::string& mode_str,
               std::uint64_t seed, double time_limit, const std::string& run_dir,
               const std::string& ledger_override, const PolicyChoice& policy_choice,
               const CriticChoice& critic_choice, int threads, double cores_per_attempt,
               double temperature) {
    search::SearchBudget budget = search::parse_budget(budget_str);
    budget.mode = search::parse_mode(mode_str);
    budget.wall_clock_limit_s = time_limit;
    budget.validate();

    fs::create_directories(run_dir);
    iterate::Dataset dataset = iterate::Dataset::load_jsonl(dataset_path);
    copy_dataset(dataset_path, fs::path(run_dir) / "dataset.jsonl");

    std::unique_ptr<policy::PolicyBackend> backend = policy_choice.make();
    std::unique_ptr<critic::CriticScorer> scorer = critic_choice.make();
    if ((budget.mode != search::SearchMode::BF) && !scorer)
        throw Error("critic-guided modes need --critic (zero, file or remote)");

    std::string ledger_path =
        ledger_override.empty() ? (fs::path(run_dir) / "ledger.jsonl").string() : ledger_override;
    analytics::LedgerWriter ledger(ledger_path, {cores_per_attempt, "search " + budget_str + " " + mode_str});

    env::ToyEnv environment;
    search::SearchConfig config;
    config.temperature = temperature;
    auto batch = search::run_batch(dataset.statements(), environment, *backend, scorer.get(), budget, seed,
                                   config, threads);

    iterate::ProofStore store;
    std::vector<iterate::SuccessTree> trees;
    long solved = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const env::Statement& statement = dataset.statements()[i];
        std::vector<search::AttemptOutcome> outcomes;
        for (const auto& r : batch[i]) {
            outcomes.push_back(r.outcome);
            ledger.append(analytics::make_entry(r.outcome, 0, cores_per_attempt));
        }
        auto best = search::shortest_proof_index(outcomes);
        if (!best) continue;
        ++solved;
        const auto& result = batch[i][*best];
        store.insert({statement.id, "proof", *result.outcome.proof, 0,
                      to_string(result.outcome.mode), {}});
        if (result.tree)
            trees.push_back({statement, *result.outcome.proof, 0, result.outcome.pass_index,
                             to_string(result.outcome.mode), result.tree});
    }
    store.save_jsonl((fs::path(run_dir) / "proofs.jsonl").string());
    iterate::write_trees_jsonl((fs::path(run_dir) / "trees.jsonl").string(), trees);
    std::cout << "solved " << solved << "/" << dataset.statements().size() << ", ledger at " << ledger_path
              << "\n";
    return 0;
}

int cmd_iterate(const std::string& dataset_path, int rounds, const std::string& schedule_path,
                std::uint64_t seed, const std::string& run_dir, const std::string& ledger_override,
                int threads, double cores_per_attempt, bool reprove, int passes, int samples,
                const std::string& mode_str) {
    fs::create_directories(run_dir);
    iterate::Dataset dataset = iterate::Dataset::load_jsonl(dataset_path);
    copy_dataset(dataset_path, fs::path(run_dir) / "dataset.jsonl");

    std::vector<iterate::RoundConfig> schedule =
        schedule_path.empty() ? iterate::default_schedule(passes, samples, search::parse_mode(mode_str))
                              : iterate::load_schedule_json(schedule_path);

    std::string ledger_path =
        ledger_override.empty() ? (fs::path(run_dir) / "ledger.jsonl").string() : ledger_override;
    analytics::LedgerWriter ledger(ledger_path, {cores_per_attempt, "iterate rounds=" + std::to_string(rounds)});

    iterate::IterateOptions options;
    options.rounds = rounds;
    options.seed = seed;
    options.round.threads = threads;
    options.round.cores_per_attempt = cores_per_attempt;
    options.reprove = reprove;

    env::ToyEnv environment;
    iterate::ProofStore store;
    iterate::IterationResult result = iterate::run_expert_iteration(
        dataset, store, schedule, environment, policy::LearnedPolicy{}, options, &ledger);

    store.save_jsonl((fs::path(run_dir) / "proofs.jsonl").string());
    iterate::write_trees_jsonl((fs::path(run_dir) / "trees.jsonl").string(), result.trees);
    if (result.critic) critic::save_critic((fs::path(run_dir) / "critic.json").string(), *result.critic);

    std::cout << "round,attempted,proved,disproved,pruned,cumulative_solved,cpu_seconds\n";
    for (const auto& r : result.reports)
        std::cout << r.round_index << ',' << r.attempted << ',' << r.proved << ',' << r.disproved << ','
                  << r.pruned << ',' << r.cumulative_solved << ',' << r.cpu_seconds_total << '\n';
    return 0;
}

int cmd_extract_pairs(const std::string& run_dir, double fraction, std::uint64_t seed,
                      const std::string& out_path) {
    auto trees = iterate::load_trees_jsonl((fs::path(run_dir) / "trees.jsonl").string());
    auto pairs = iterate::extract_all_pairs(trees);
    std::size_t raw = pairs.size();
    pairs = critic::hygiene(pairs, fraction, seed);
    std::string out = out_path.empty() ? (fs::path(run_dir) / "pairs.jsonl").string() : out_path;
    critic::write_pairs_jsonl(out, pairs);
    std::cout << "extracted " << raw << " pairs, " << pairs.size() << " after hygiene, wrote " << out
              << "\n";
    return 0;
}

int cmd_train_critic(const std::string& pairs_path, int epochs, double lr, std::uint64_t seed,
                     const std::string& out_path, double holdout) {
    auto pairs = critic::load_pairs_jsonl(pairs_path);
    if (pairs.empty()) throw Error(pairs_path + " holds no pairs");

    std::vector<critic::PreferencePair> train = pairs, held;
    if (holdout > 0.0) {
        Rng rng(seed + 1);
        auto order = rng.permutation(pairs.size());
        std::size_t held_count = static_cast<std::size_t>(holdout * static_cast<double>(pairs.size()));
        train.clear();
        for (std::size_t r = 0; r < order.size(); ++r)
            (r < held_count ? held : train).push_back(pairs[order[r]]);
        if (train.empty()) throw Error("holdout fraction leaves no training pairs");
    }

    critic::TrainingReport report = critic::train_critic(train, epochs, lr, seed);
    critic::save_critic(out_path, report.params);
    std::cout << "pairs,train_loss_initial,train_loss_final,train_accuracy";
    if (!held.empty()) std::cout << ",holdout_accuracy";
    std::cout << '\n';
    std::cout << train.size() << ',' << report.initial_loss << ',' << report.final_loss << ','
              << critic::pair_accuracy(report.params, train);
    if (!held.empty()) std::cout << ',' << critic::pair_accuracy(report.params, held);
    std::cout << '\n';
    if (report.degenerate) std::cerr << "warning: every pair had identical features\n";
    return 0;
}

int cmd_export_sft(const std::string& run_dir, const std::string& out_path) {
    iterate::Dataset dataset = iterate::Dataset::load_jsonl((fs::path(run_dir) / "dataset.jsonl").string());
    iterate::ProofStore store = iterate::ProofStore::load_jsonl((fs::path(run_dir) / "proofs.jsonl").string());
    env::ToyEnv environment;
    auto records = iterate::export_sft(store, dataset, environment);
    std::string out = out_path.empty() ? (fs::path(run_dir) / "sft.jsonl").string() : out_path;
    iterate::write_sft_jsonl(out, records);
    std::cout << "wrote " << records.size() << " records to " << out << "\n";
    return 0;
}

int cmd_stats(const std::string& run_dir, const std::string& ledger_override, bool table, bool hist,
              bool fit, const std::string& pass_at, bool mode_means, bool exclude_infrastructure) {
    std::string ledger_path =
        ledger_override.empty() ? (fs::path(run_dir) / "ledger.jsonl").string() : ledger_override;
    analytics::Ledger ledger = analytics::load_ledger(ledger_path);

    bool any = false;
    if (table) {
        std::cout << analytics::summary_table(ledger.entries).to_csv();
        any = true;
    }
    if (hist || fit) {
        fs::path proofs = fs::path(run_dir) / "proofs.jsonl";
        if (!fs::exists(proofs)) throw Error("no proofs.jsonl in " + run_dir);
        auto store = iterate::ProofStore::load_jsonl(proofs.string());
        auto histogram = analytics::length_histogram(store.length_records());
        if (hist) std::cout << analytics::histogram_csv(histogram);
        if (fit) std::cout << analytics::fit_csv(analytics::loglinear_fit(histogram));
        any = true;
    }
    if (!pass_at.empty()) {
        auto result = analytics::pass_at_n(ledger.entries, parse_int_list(pass_at), exclude_infrastructure);
        std::cout << analytics::pass_at_csv(result);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
        any = true;
    }
    if (mode_means) {
        std::cout << analytics::mode_means_csv(analytics::mode_length_means(ledger.entries));
        any = true;
    }
    if (!any) std::cout << analytics::summary_table(ledger.entries).to_csv();
    return 0;
}

int cmd_gen_corpus(const std::string& kind, int count, std::uint64_t seed, int min_len, int oracle_depth,
                   const std::string& out_path) {
    std::vector<env::Statement> statements;
    if (kind == "mixed") {
        statements = corpus::random_mixed(count, seed, oracle_depth).statements;
    } else if (kind == "deep") {
        statements = corpus::random_provable_deep(count, seed, min_len, oracle_depth);
    } else if (kind == "disprovable") {
        statements = corpus::random_disprovable(count, seed, oracle_depth);
    } else {
        throw Error("unknown corpus kind '" + kind + "' (mixed, deep, disprovable)");
    }
    std::ofstream out(out_path);
    if (!out) throw Error("cannot open " + out_path + " for writing");
    for (const auto& s : statements) {
        nlohmann::ordered_json j{{"id", s.id}, {"goal", s.goal_text}};
        if (s.negation_text) j["negation"] = *s.negation_text;
        j["source"] = s.source_tag;
        out << j.dump() << '\n';
    }
    std::cout << "wrote " << statements.size() << " statements to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tactic-tree proof search with expert iteration over a toy prover"};
    app.require_subcommand(1);

    // search
    auto* search_cmd = app.add_subcommand("search", "run P independent search passes per statement");
    std::string dataset_path, budget_str = "1x32x600", mode_str = "bf", run_dir = "run";
    std::string ledger_override, pairs_out, critic_out = "critic.json";
    std::uint64_t seed = 0;
    bool seed_given = false;
    double time_limit = 3600.0, cores_per_attempt = 1.0, temperature = 0.7;
    int threads = 0;
    PolicyChoice policy_choice;
    CriticChoice critic_choice;
    search_cmd->add_option("statements", dataset_path, "statements JSONL")->required();
    search_cmd->add_option("--budget", budget_str, "PxSxK, e.g. 256x32x600");
    search_cmd->add_option("--mode", mode_str, "bf | cg | bf+cg");
    search_cmd->add_option("--seed", seed, "base seed (STEPFORGE_SEED fallback)")
        ->each([&](const std::string&) { seed_given = true; });
    search_cmd->add_option("--time-limit-s", time_limit, "per-attempt wall clock limit");
    search_cmd->add_option("--run-dir", run_dir, "output directory");
    search_cmd->add_option("--ledger", ledger_override, "ledger path override");
    search_cmd->add_option("--policy", policy_choice.kind, "heuristic | learned | remote");
    search_cmd->add_option("--policy-url", policy_choice.url, "remote policy base url");
    search_cmd->add_option("--critic", critic_choice.kind, "zero | file | remote");
    search_cmd->add_option("--critic-file", critic_choice.file, "critic params JSON");
    search_cmd->add_option("--critic-url", critic_choice.url, "remote critic base url");
    search_cmd->add_option("--threads", threads, "0 = all cores, 1 = serial");
    search_cmd->add_option("--cores-per-attempt", cores_per_attempt, "cpu_seconds multiplier");
    search_cmd->add_option("--temperature", temperature, "sampling temperature");

    // iterate
    auto* iterate_cmd = app.add_subcommand("iterate", "expert-iteration rounds over a dataset");
    std::string iterate_dataset, schedule_path, iterate_mode = "bf";
    int rounds = 2, passes = 1, samples = 8;
    bool reprove = false;
    iterate_cmd->add_option("dataset", iterate_dataset, "dataset JSONL")->required();
    iterate_cmd->add_option("--rounds", rounds, "number of rounds");
    iterate_cmd->add_option("--schedule", schedule_path, "schedule JSON (defaults to the built-in ladder)");
    iterate_cmd->add_option("--seed", seed, "base seed (STEPFORGE_SEED fallback)")
        ->each([&](const std::string&) { seed_given = true; });
    iterate_cmd->add_option("--run-dir", run_dir, "output directory");
    iterate_cmd->add_option("--ledger", ledger_override, "ledger path override");
    iterate_cmd->add_option("--threads", threads, "0 = all cores, 1 = serial");
    iterate_cmd->add_option("--cores-per-attempt", cores_per_attempt, "cpu_seconds multiplier");
    iterate_cmd->add_option("--passes", passes, "passes per statement in the default schedule");
    iterate_cmd->add_option("--samples", samples, "tactic samples per expansion in the default schedule");
    iterate_cmd->add_option("--mode", iterate_mode, "default-schedule search mode");
    iterate_cmd->add_flag("--reprove", reprove, "re-search solved statements for shorter proofs");

    // extract-pairs
    auto* extract_cmd = app.add_subcommand("extract-pairs", "preference pairs from stored trees");
    std::string extract_run_dir;
    double fraction = 0.10;
    extract_cmd->add_option("run-dir", extract_run_dir, "run directory with trees.jsonl")->required();
    extract_cmd->add_option("--no-goals-fraction", fraction, "no_goals keep fraction");
    extract_cmd->add_option("--seed", seed, "subsample seed")->each([&](const std::string&) {
        seed_given = true;
    });
    extract_cmd->add_option("--out", pairs_out, "pairs output path");

    // train-critic
    auto* train_cmd = app.add_subcommand("train-critic", "train the pairwise-logistic critic");
    std::string pairs_path;
    int epochs = 400;
    double lr = 0.5, holdout = 0.0;
    train_cmd->add_option("pairs", pairs_path, "pairs JSONL")->required();
    train_cmd->add_option("--epochs", epochs, "full-batch epochs");
    train_cmd->add_option("--lr", lr, "learning rate");
    train_cmd->add_option("--seed", seed, "run seed")->each([&](const std::string&) { seed_given = true; });
    train_cmd->add_option("--out", critic_out, "critic params output");
    train_cmd->add_option("--holdout", holdout, "held-out fraction for accuracy reporting");

    // export-sft
    auto* sft_cmd = app.add_subcommand("export-sft", "policy training records from stored proofs");
    std::string sft_run_dir, sft_out;
    sft_cmd->add_option("run-dir", sft_run_dir, "run directory with proofs.jsonl")->required();
    sft_cmd->add_option("--out", sft_out, "output path");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "CSV analytics over a run ledger");
    std::string stats_run_dir, pass_at;
    bool table = false, hist = false, fit = false, mode_means = false, exclude_infra = false;
    stats_cmd->add_option("run-dir", stats_run_dir, "run directory")->required();
    stats_cmd->add_option("--ledger", ledger_override, "ledger path override");
    stats_cmd->add_flag("--table", table, "summary table");
    stats_cmd->add_flag("--hist", hist, "shortest-proof length histogram");
    stats_cmd->add_flag("--fit", fit, "log-linear fit of the length histogram");
    stats_cmd->add_option("--pass-at", pass_at, "comma-separated N values");
    stats_cmd->add_flag("--mode-means", mode_means, "per-mode mean shortest lengths");
    stats_cmd->add_flag("--exclude-infrastructure", exclude_infra,
                        "drop infrastructure-terminated attempts from pass@N");

    // gen-corpus
    auto* gen_cmd = app.add_subcommand("gen-corpus", "generate seeded toy statements");
    std::string gen_kind = "mixed", gen_out = "corpus.jsonl";
    int gen_count = 100, min_len = 4, oracle_depth = 6;
    gen_cmd->add_option("--kind", gen_kind, "mixed | deep | disprovable");
    gen_cmd->add_option("--count", gen_count, "statement count");
    gen_cmd->add_option("--seed", seed, "generator seed")->each([&](const std::string&) {
        seed_given = true;
    });
    gen_cmd->add_option("--min-len", min_len, "minimum oracle proof length (deep)");
    gen_cmd->add_option("--oracle-depth", oracle_depth, "oracle depth limit");
    gen_cmd->add_option("--out", gen_out, "output path");

    // env-serve
    auto* serve_cmd = app.add_subcommand("env-serve", "serve the toy prover over stdio");

    CLI11_PARSE(app, argc, argv);

    try {
        std::uint64_t effective_seed = resolve_seed(seed, seed_given);
        if (search_cmd->parsed())
            return cmd_search(dataset_path, budget_str, mode_str, effective_seed, time_limit, run_dir,
                              ledger_override, policy_choice, critic_choice, threads, cores_per_attempt,
                              temperature);
        if (iterate_cmd->parsed())
            return cmd_iterate(iterate_dataset, rounds, schedule_path, effective_seed, run_dir,
                               ledger_override, threads, cores_per_attempt, reprove, passes, samples,
                               iterate_mode);
        if (extract_cmd->parsed())
            return cmd_extract_pairs(extract_run_dir, fraction, effective_seed, pairs_out);
        if (train_cmd->parsed())
            return cmd_train_critic(pairs_path, epochs, lr, effective_seed, critic_out, holdout);
        if (sft_cmd->parsed()) return cmd_export_sft(sft_run_dir, sft_out);
        if (stats_cmd->parsed())
            return cmd_stats(stats_run_dir, ledger_override, table, hist, fit, pass_at, mode_means,
                             exclude_infra);
        if (gen_cmd->parsed())
            return cmd_gen_corpus(gen_kind, gen_count, effective_seed, min_len, oracle_depth, gen_out);
        if (serve_cmd->parsed()) {
            env::env_serve(std::cin, std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
