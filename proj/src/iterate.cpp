#include "stepforge/iterate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <nlohmann/json.hpp>

#include "stepforge/errors.hpp"

namespace stepforge::iterate {

using ordered_json = nlohmann::ordered_json;

std::vector<RoundConfig> default_schedule(int passes, int samples, search::SearchMode mode) {
    const int expansions[] = {10, 50, 200, 600, 2000};
    const double seconds[] = {50, 120, 600, 1800, 3600};
    std::vector<RoundConfig> schedule;
    for (int i = 0; i < 5; ++i) {
        RoundConfig cfg;
        cfg.round_index = i;
        cfg.budget.passes = passes;
        cfg.budget.samples_per_expansion = samples;
        cfg.budget.max_expansions = expansions[i];
        cfg.budget.mode = mode;
        cfg.budget.wall_clock_limit_s = seconds[i];
        cfg.time_limit_s = seconds[i];
        schedule.push_back(cfg);
    }
    return schedule;
}

void validate_schedule(const std::vector<RoundConfig>& schedule) {
    if (schedule.empty()) throw Error("schedule must not be empty");
    int prev_k = 0;
    double prev_t = 0.0;
    for (const RoundConfig& cfg : schedule) {
        cfg.budget.validate();
        if (cfg.budget.max_expansions > kMaxExpansionsCap)
            throw Error("schedule exceeds the K cap of " + std::to_string(kMaxExpansionsCap));
        if (cfg.time_limit_s > kMaxTimeLimitCap)
            throw Error("schedule exceeds the time cap of 3600 s");
        if (cfg.budget.max_expansions < prev_k || cfg.time_limit_s < prev_t)
            throw Error("schedule budgets must be non-decreasing");
        prev_k = cfg.budget.max_expansions;
        prev_t = cfg.time_limit_s;
    }
}

RoundConfig schedule_budget(int round_index, const std::vector<RoundConfig>& schedule) {
    validate_schedule(schedule);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max(round_index, 0)),
                                          schedule.size() - 1);
    RoundConfig cfg = schedule[i];
    cfg.round_index = round_index;
    return cfg;
}

std::vector<RoundConfig> load_schedule_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schedule " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<RoundConfig> schedule;
    int index = 0;
    for (const auto& row : j.at("rounds")) {
        RoundConfig cfg;
        cfg.round_index = index++;
        cfg.budget.passes = row.value("passes", 1);
        cfg.budget.samples_per_expansion = row.value("samples", 8);
        cfg.budget.max_expansions = row.at("max_expansions").get<int>();
        cfg.budget.mode = search::parse_mode(row.value("mode", std::string("bf")));
        cfg.time_limit_s = row.value("time_limit_s", 50.0);
        cfg.budget.wall_clock_limit_s = cfg.time_limit_s;
        if (row.contains("rank_filter")) cfg.rank_filter = row["rank_filter"].get<double>();
        schedule.push_back(cfg);
    }
    validate_schedule(schedule);
    return schedule;
}

Dataset::Dataset(std::vector<env::Statement> statements) : statements_(std::move(statements)) {
    for (const env::Statement& s : statements_) {
        if (s.id.empty()) throw Error("dataset statement with empty id");
        if (!status_.emplace(s.id, StatementStatus::unsolved).second)
            throw Error("duplicate statement id '" + s.id + "'");
    }
}

Dataset Dataset::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path);
    std::vector<env::Statement> statements;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        env::Statement s;
        s.id = j.at("id").get<std::string>();
        s.goal_text = j.at("goal").get<std::string>();
        if (j.contains("negation") && !j["negation"].is_null())
            s.negation_text = j["negation"].get<std::string>();
        s.source_tag = j.value("source", std::string());
        statements.push_back(std::move(s));
    }
    return Dataset(std::move(statements));
}

const env::Statement* Dataset::find(const std::string& id) const {
    for (const env::Statement& s : statements_) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

StatementStatus Dataset::status(const std::string& id) const {
    auto it = status_.find(id);
    if (it == status_.end()) throw Error("unknown statement id '" + id + "'");
    return it->second;
}

std::vector<env::Statement> Dataset::unsolved() const {
    std::vector<env::Statement> out;
    for (const env::Statement& s : statements_) {
        if (status_.at(s.id) == StatementStatus::unsolved) out.push_back(s);
    }
    return out;
}

long Dataset::solved_count() const {
    long n = 0;
    for (const auto& [id, st] : status_) {
        if (st == StatementStatus::proved || st == StatementStatus::disproved) ++n;
    }
    return n;
}

int Dataset::resolve(const std::string& id, StatementStatus status) {
    auto it = status_.find(id);
    if (it == status_.end()) throw Error("unknown statement id '" + id + "'");
    it->second = status;
    // Prune the negation partner if it is still in the pool.
    std::string partner = id.ends_with(".neg") ? id.substr(0, id.size() - 4) : id + ".neg";
    auto pit = status_.find(partner);
    if (pit != status_.end() && pit->second == StatementStatus::unsolved) {
        pit->second = StatementStatus::pruned;
        return 1;
    }
    return 0;
}

int Dataset::mark_proved(const std::string& id) { return resolve(id, StatementStatus::proved); }
int Dataset::mark_disproved(const std::string& id) { return resolve(id, StatementStatus::disproved); }

const ProofRecord* ProofStore::find(const std::string& id) const {
    auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
}

void ProofStore::insert(ProofRecord record) {
    auto it = records_.find(record.id);
    if (it != records_.end()) {
        if (it->second.direction != record.direction)
            throw SoundnessError(record.id + ": statement and its negation both verified");
        return;  // already stored; use replace_if_shorter for upgrades
    }
    if (record.history.empty()) record.history.push_back(record.length());
    records_.emplace(record.id, std::move(record));
}

bool ProofStore::replace_if_shorter(const std::string& id, const std::vector<std::string>& tactics,
                                    int round, const std::string& mode) {
    auto it = records_.find(id);
    if (it == records_.end()) throw Error("replace_if_shorter: no stored proof for '" + id + "'");
    if (static_cast<int>(tactics.size()) >= it->second.length()) return false;
    it->second.tactics = tactics;
    it->second.round = round;
    it->second.mode = mode;
    it->second.history.push_back(static_cast<int>(tactics.size()));
    return true;
}

std::vector<ProofRecord> ProofStore::all() const {
    std::vector<ProofRecord> out;
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back(rec);
    return out;
}

std::vector<analytics::ProofLengthRecord> ProofStore::length_records() const {
    std::vector<analytics::ProofLengthRecord> out;
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back({rec.id, rec.history, rec.mode});
    return out;
}

void ProofStore::save_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    for (const auto& [id, rec] : records_) {
        ordered_json j{{"id", rec.id},       {"direction", rec.direction}, {"tactics", rec.tactics},
                       {"length", rec.length()}, {"round", rec.round},     {"mode", rec.mode},
                       {"history", rec.history}};
        out << j.dump() << '\n';
    }
}

ProofStore ProofStore::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    ProofStore store;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        ProofRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.direction = j.value("direction", std::string("proof"));
        rec.tactics = j.at("tactics").get<std::vector<std::string>>();
        rec.round = j.value("round", 0);
        rec.mode = j.value("mode", std::string("bf"));
        if (j.contains("history")) rec.history = j["history"].get<std::vector<int>>();
        store.insert(std::move(rec));
    }
    return store;
}

void write_trees_jsonl(const std::string& path, const std::vector<SuccessTree>& trees) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    for (const SuccessTree& t : trees) {
        ordered_json nodes = ordered_json::array();
        for (int i = 0; i < t.tree->size(); ++i) {
            const search::TreeNode& n = t.tree->node(i);
            nodes.push_back(ordered_json{{"id", n.id},
                                         {"parent", n.parent ? ordered_json(*n.parent) : ordered_json(nullptr)},
                                         {"tactic", n.incoming_tactic},
                                         {"edge_logprob", n.edge_logprob},
                                         {"pp", n.state.pp},
                                         {"terminal", n.status == search::NodeStatus::terminal}});
        }
        ordered_json j{{"statement_id", t.attempted.id},
                       {"goal", t.attempted.goal_text},
                       {"tactics", t.tactics},
                       {"round", t.round},
                       {"pass_index", t.pass_index},
                       {"mode", t.mode},
                       {"nodes", nodes}};
        out << j.dump() << '\n';
    }
}

std::vector<SuccessTree> load_trees_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<SuccessTree> trees;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SuccessTree t;
        t.attempted.id = j.at("statement_id").get<std::string>();
        t.attempted.goal_text = j.at("goal").get<std::string>();
        t.tactics = j.at("tactics").get<std::vector<std::string>>();
        t.round = j.value("round", 0);
        t.pass_index = j.value("pass_index", 0);
        t.mode = j.value("mode", std::string("bf"));

        const auto& nodes = j.at("nodes");
        if (nodes.empty()) throw Error(path + ": tree without nodes");
        auto make_state = [](const nlohmann::json& n) {
            env::EnvState s;
            s.pp = n.at("pp").get<std::string>();
            s.fingerprint = s.pp;
            return s;
        };
        auto tree = std::make_shared<search::SearchTree>(make_state(nodes.at(0)));
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            const auto& n = nodes.at(i);
            int parent = n.at("parent").get<int>();
            tree->add_node_raw(parent, make_state(n), n.at("tactic").get<std::string>(),
                               n.value("edge_logprob", 0.0),
                               n.value("terminal", false) ? search::NodeStatus::terminal
                                                          : search::NodeStatus::expanded);
        }
        t.tree = tree;
        trees.push_back(std::move(t));
    }
    return trees;
}

std::vector<critic::PreferencePair> extract_all_pairs(const std::vector<SuccessTree>& trees) {
    std::vector<critic::PreferencePair> pairs;
    for (const SuccessTree& t : trees) {
        env::ProofPath path{t.attempted.id, t.tactics};
        std::vector<critic::PreferencePair> path_pairs = critic::extract_path_pairs(t.attempted, path);
        pairs.insert(pairs.end(), path_pairs.begin(), path_pairs.end());
        std::vector<critic::PreferencePair> sibling_pairs = critic::extract_sibling_pairs(*t.tree, path);
        pairs.insert(pairs.end(), sibling_pairs.begin(), sibling_pairs.end());
    }
    return pairs;
}

namespace {

// Everything one statement produced in a round, merged back under the
// serialized writer after the parallel section.
struct StatementRoundResult {
    std::vector<search::AttemptResult> proof_attempts;
    std::vector<search::AttemptResult> disproof_attempts;
    std::optional<std::size_t> proof_idx;
    std::optional<std::size_t> disproof_idx;
    env::Statement negation;
};

StatementRoundResult attempt_statement(const env::Statement& statement, const RoundConfig& config,
                                       env::TacticEnv& environment, const policy::PolicyBackend& backend,
                                       const critic::CriticScorer* scorer, std::uint64_t statement_seed) {
    search::SearchBudget budget = config.budget;
    budget.wall_clock_limit_s = config.time_limit_s;
    search::SearchConfig search_config;

    StatementRoundResult result;
    result.proof_attempts =
        search::run_passes(statement, environment, backend, scorer, budget, statement_seed, search_config);
    std::vector<search::AttemptOutcome> outcomes;
    for (const auto& r : result.proof_attempts) outcomes.push_back(r.outcome);
    result.proof_idx = search::shortest_proof_index(outcomes);

    if (!result.proof_idx) {
        try {
            result.negation = environment.negation_of(statement);
        } catch (const MissingNegation&) {
            return result;  // no disproof direction available
        }
        result.disproof_attempts = search::run_passes(result.negation, environment, backend, scorer, budget,
                                                      statement_seed + 500009ULL, search_config);
        std::vector<search::AttemptOutcome> neg_outcomes;
        for (const auto& r : result.disproof_attempts) neg_outcomes.push_back(r.outcome);
        result.disproof_idx = search::shortest_proof_index(neg_outcomes);
    }
    return result;
}

}  // namespace

RoundReport run_round(Dataset& dataset, ProofStore& store, const RoundConfig& config,
                      env::TacticEnv& environment, const policy::PolicyBackend& backend,
                      const critic::CriticScorer* scorer, analytics::LedgerWriter* ledger,
                      std::vector<SuccessTree>* trees_out, const RoundOptions& options) {
    std::vector<env::Statement> selection = dataset.unsolved();
    if (config.rank_filter && scorer)
        selection = rank_unsolved(*scorer, environment, selection, *config.rank_filter);

    RoundReport report;
    report.round_index = config.round_index;
    report.attempted = static_cast<int>(selection.size());

    std::vector<StatementRoundResult> results(selection.size());
    const std::uint64_t round_seed =
        options.base_seed + 7919ULL * static_cast<std::uint64_t>(config.round_index);

    auto job = [&](std::size_t i) {
        std::uint64_t statement_seed = round_seed + 1000003ULL * i;
        results[i] = attempt_statement(selection[i], config, environment, backend, scorer, statement_seed);
    };

    if (options.threads == 1) {
        for (std::size_t i = 0; i < selection.size(); ++i) job(i);
    } else {
#ifdef _OPENMP
        if (options.threads > 0) omp_set_num_threads(options.threads);
#pragma omp parallel for schedule(dynamic)
#endif
        for (long i = 0; i < static_cast<long>(selection.size()); ++i) job(static_cast<std::size_t>(i));
    }

    // Merge in selection order: ledger bytes and dataset updates are
    // deterministic regardless of the thread schedule.
    for (std::size_t i = 0; i < selection.size(); ++i) {
        const env::Statement& statement = selection[i];
        StatementRoundResult& r = results[i];

        auto record_attempts = [&](const std::vector<search::AttemptResult>& attempts) {
            for (const auto& attempt : attempts) {
                report.cpu_seconds_total += attempt.outcome.wall_time_s * options.cores_per_attempt;
                if (ledger)
                    ledger->append(analytics::make_entry(attempt.outcome, config.round_index,
                                                         options.cores_per_attempt));
            }
        };
        record_attempts(r.proof_attempts);
        record_attempts(r.disproof_attempts);

        auto keep_tree = [&](const search::AttemptResult& attempt, const env::Statement& attempted) {
            if (!trees_out || !options.collect_trees || !attempt.tree) return;
            trees_out->push_back(SuccessTree{attempted, *attempt.outcome.proof, config.round_index,
                                             attempt.outcome.pass_index, to_string(attempt.outcome.mode),
                                             attempt.tree});
        };

        if (r.proof_idx) {
            const auto& attempt = r.proof_attempts[*r.proof_idx];
            ProofRecord rec;
            rec.id = statement.id;
            rec.direction = "proof";
            rec.tactics = *attempt.outcome.proof;
            rec.round = config.round_index;
            rec.mode = to_string(attempt.outcome.mode);
            store.insert(std::move(rec));
            report.pruned += dataset.mark_proved(statement.id);
            report.proved += 1;
            keep_tree(attempt, statement);
        } else if (r.disproof_idx) {
            const auto& attempt = r.disproof_attempts[*r.disproof_idx];
            ProofRecord rec;
            rec.id = statement.id;
            rec.direction = "disproof";
            rec.tactics = *attempt.outcome.proof;
            rec.round = config.round_index;
            rec.mode = to_string(attempt.outcome.mode);
            store.insert(std::move(rec));
            report.pruned += dataset.mark_disproved(statement.id);
            report.disproved += 1;
            keep_tree(attempt, r.negation);
        }
    }
    report.cumulative_solved = dataset.solved_count();
    return report;
}

std::vector<env::Statement> rank_unsolved(const critic::CriticScorer& scorer, env::TacticEnv& environment,
                                          const std::vector<env::Statement>& statements, double fraction) {
    if (fraction < 0.0 || fraction > 1.0) throw Error("rank_unsolved: fraction must lie in [0, 1]");
    std::vector<std::pair<double, std::size_t>> scored(statements.size());
    for (std::size_t i = 0; i < statements.size(); ++i) {
        double score;
        try {
            score = scorer.score(environment.init(statements[i]));
        } catch (const Error&) {
            score = -std::numeric_limits<double>::infinity();
        }
        scored[i] = {score, i};
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return statements[a.second].id < statements[b.second].id;
    });
    std::size_t keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(statements.size())));
    keep = std::min(keep, statements.size());
    std::vector<env::Statement> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(statements[scored[i].second]);
    return out;
}

int reprove_shorter(ProofStore& store, const Dataset& dataset, const RoundConfig& config,
                    env::TacticEnv& environment, const policy::PolicyBackend& backend,
                    const critic::CriticScorer* scorer, std::uint64_t base_seed, const RoundOptions& options) {
    int replaced = 0;
    std::uint64_t seed = base_seed;
    for (const ProofRecord& rec : store.all()) {
        const env::Statement* base = dataset.find(rec.id);
        if (!base) continue;
        env::Statement target = rec.direction == "disproof" ? environment.negation_of(*base) : *base;
        search::SearchBudget budget = config.budget;
        budget.wall_clock_limit_s = config.time_limit_s;
        std::vector<search::AttemptResult> attempts =
            search::run_passes(target, environment, backend, scorer, budget, seed, {});
        seed += 1000003ULL;
        std::vector<search::AttemptOutcome> outcomes;
        for (const auto& a : attempts) outcomes.push_back(a.outcome);
        auto idx = search::shortest_proof_index(outcomes);
        if (!idx) continue;
        const auto& best = outcomes[*idx];
        if (store.replace_if_shorter(rec.id, *best.proof, config.round_index, to_string(best.mode)))
            ++replaced;
    }
    return replaced;
}

std::vector<SftRecord> export_sft(const ProofStore& store, const Dataset& dataset,
                                  env::TacticEnv& environment) {
    std::vector<SftRecord> records;
    for (const ProofRecord& rec : store.all()) {
        const env::Statement* base = dataset.find(rec.id);
        if (!base) throw Error("export_sft: statement '" + rec.id + "' not in dataset");
        env::Statement target = rec.direction == "disproof" ? environment.negation_of(*base) : *base;
        std::vector<env::ProofState> states = env::replay_path(target, rec.tactics);
        if (!states.back().no_goals()) throw InvalidTrajectory(rec.id + ": stored proof does not replay");
        for (std::size_t t = 0; t < rec.tactics.size(); ++t) {
            std::vector<std::string> before(rec.tactics.begin(),
                                            rec.tactics.begin() + static_cast<long>(t));
            policy::PromptRecord prompt = policy::render_prompt(target.id, before, states[t]);
            records.push_back({prompt.rendered, rec.tactics[t]});
        }
    }
    return records;
}

void write_sft_jsonl(const std::string& path, const std::vector<SftRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    for (const SftRecord& r : records) {
        ordered_json j{{"prompt", r.prompt}, {"completion", r.completion}};
        out << j.dump() << '\n';
    }
}

IterationResult run_expert_iteration(Dataset& dataset, ProofStore& store,
                                     const std::vector<RoundConfig>& schedule, env::TacticEnv& environment,
                                     const policy::LearnedPolicy& start_policy, const IterateOptions& options,
                                     analytics::LedgerWriter* ledger) {
    validate_schedule(schedule);
    IterationResult result;
    result.final_policy = start_policy;

    RoundOptions round_options = options.round;
    round_options.base_seed = options.seed;

    std::optional<critic::LinearCritic> trained_critic;
    for (int round = 0; round < options.rounds; ++round) {
        RoundConfig config = schedule_budget(round, schedule);
        // Critic-ranked selection needs a critic trained on earlier rounds.
        if (round >= 2 && trained_critic && !config.rank_filter) config.rank_filter = options.rank_fraction;

        std::size_t trees_before = result.trees.size();
        const critic::CriticScorer* scorer = trained_critic ? &*trained_critic : nullptr;
        RoundReport report = run_round(dataset, store, config, environment, result.final_policy, scorer,
                                       ledger, &result.trees, round_options);
        result.reports.push_back(report);

        // Fold the new proofs into the policy.
        std::vector<policy::Trajectory> trajectories;
        for (std::size_t i = trees_before; i < result.trees.size(); ++i)
            trajectories.push_back({result.trees[i].attempted, result.trees[i].tactics});
        result.final_policy = policy::update_from_trajectories(result.final_policy, trajectories);

        // Retrain the critic on everything extracted so far.
        if (!result.trees.empty()) {
            std::vector<critic::PreferencePair> pairs = extract_all_pairs(result.trees);
            pairs = critic::hygiene(pairs, options.hygiene_fraction, options.seed + 17);
            if (!pairs.empty()) {
                critic::TrainingReport training =
                    critic::train_critic(pairs, options.critic_epochs, options.critic_lr, options.seed);
                result.critic = training.params;
                trained_critic.emplace(training.params);
            }
        }

        if (options.reprove && store.size() > 0)
            reprove_shorter(store, dataset, config, environment, result.final_policy,
                            trained_critic ? &*trained_critic : nullptr,
                            options.seed + 90001ULL * static_cast<std::uint64_t>(round), round_options);
    }
    return result;
}

}  // namespace stepforge::iterate
