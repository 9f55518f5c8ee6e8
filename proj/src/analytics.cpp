#include "stepforge/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stepforge/errors.hpp"

namespace stepforge::analytics {

using ordered_json = nlohmann::ordered_json;

LedgerEntry make_entry(const search::AttemptOutcome& outcome, int round_index, double cores_per_attempt) {
    LedgerEntry e;
    e.statement_id = outcome.statement_id;
    if (e.statement_id.size() > 4 && e.statement_id.ends_with(".neg")) {
        e.statement_id.erase(e.statement_id.size() - 4);
        e.direction = "disproof";
    }
    e.round_index = round_index;
    e.pass_index = outcome.pass_index;
    e.mode = to_string(outcome.mode);
    e.valid = outcome.proof.has_value();
    if (outcome.proof) e.proof_length = static_cast<int>(outcome.proof->size());
    e.expansions_used = outcome.expansions_used;
    e.nodes_created = outcome.nodes_created;
    e.wall_time_s = outcome.wall_time_s;
    e.cpu_seconds = outcome.wall_time_s * cores_per_attempt;
    e.terminated_by = to_string(outcome.terminated_by);
    e.seed = outcome.seed;
    return e;
}

LedgerWriter::LedgerWriter(std::string path, LedgerHeader header) : path_(std::move(path)) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw Error("cannot open ledger " + path_ + " for writing");
    ordered_json j{{"type", "header"}, {"cores_per_attempt", header.cores_per_attempt}, {"note", header.note}};
    out << j.dump() << '\n';
}

void LedgerWriter::append(const LedgerEntry& e) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to ledger " + path_);
    ordered_json j{{"type", "attempt"},
                   {"statement_id", e.statement_id},
                   {"direction", e.direction},
                   {"round", e.round_index},
                   {"pass_index", e.pass_index},
                   {"mode", e.mode},
                   {"valid", e.valid},
                   {"proof_length", e.proof_length ? ordered_json(*e.proof_length) : ordered_json(nullptr)},
                   {"expansions_used", e.expansions_used},
                   {"nodes_created", e.nodes_created},
                   {"wall_time_s", e.wall_time_s},
                   {"cpu_seconds", e.cpu_seconds},
                   {"terminated_by", e.terminated_by},
                   {"seed", e.seed}};
    out << j.dump() << '\n';
}

Ledger load_ledger(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open ledger " + path);
    Ledger ledger;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        std::string type = j.value("type", "attempt");
        if (type == "header") {
            ledger.header.cores_per_attempt = j.value("cores_per_attempt", 1.0);
            ledger.header.note = j.value("note", std::string());
            saw_header = true;
            continue;
        }
        LedgerEntry e;
        e.statement_id = j.at("statement_id").get<std::string>();
        e.direction = j.value("direction", std::string("proof"));
        e.round_index = j.value("round", 0);
        e.pass_index = j.value("pass_index", 0);
        e.mode = j.value("mode", std::string("bf"));
        e.valid = j.value("valid", false);
        if (j.contains("proof_length") && !j["proof_length"].is_null())
            e.proof_length = j["proof_length"].get<int>();
        e.expansions_used = j.value("expansions_used", 0);
        e.nodes_created = j.value("nodes_created", 0L);
        e.wall_time_s = j.value("wall_time_s", 0.0);
        e.cpu_seconds = j.value("cpu_seconds", 0.0);
        e.terminated_by = j.value("terminated_by", std::string());
        e.seed = j.value("seed", std::uint64_t{0});
        ledger.entries.push_back(std::move(e));
    }
    (void)saw_header;
    return ledger;
}

std::optional<double> cpu_per_proof(const std::vector<LedgerEntry>& entries) {
    if (entries.empty()) throw Error("cpu_per_proof: need at least one attempt");
    double total = 0.0;
    long valid = 0;
    for (const LedgerEntry& e : entries) {
        total += e.cpu_seconds;
        valid += e.valid ? 1 : 0;
    }
    if (valid == 0) return std::nullopt;
    return total / static_cast<double>(valid);
}

std::map<int, long> length_histogram(const std::vector<ProofLengthRecord>& store) {
    std::map<int, long> hist;
    for (const ProofLengthRecord& rec : store) {
        if (rec.history.empty()) continue;
        int shortest = *std::min_element(rec.history.begin(), rec.history.end());
        hist[shortest] += 1;
    }
    return hist;
}

FitResult loglinear_fit(const std::map<int, double>& histogram, double min_count) {
    std::vector<double> xs, ys;
    for (const auto& [length, count] : histogram) {
        if (count < min_count || count <= 0.0) continue;
        xs.push_back(static_cast<double>(length));
        ys.push_back(std::log(count));
    }
    if (xs.size() < 2) throw InsufficientData("loglinear_fit: need at least two qualifying buckets");

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    FitResult fit;
    fit.n_points = static_cast<int>(xs.size());
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw InsufficientData("loglinear_fit: degenerate x values");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;

    double mean_y = sy / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r_squared = ss_tot == 0.0 ? (ss_res <= 1e-15 ? 1.0 : 0.0) : 1.0 - ss_res / ss_tot;
    return fit;
}

FitResult loglinear_fit(const std::map<int, long>& histogram, long min_count) {
    std::map<int, double> h;
    for (const auto& [k, v] : histogram) h[k] = static_cast<double>(v);
    return loglinear_fit(h, static_cast<double>(min_count));
}

namespace {

// Stable per-problem attempt order: round, then direction (proof attempts
// run before disproof attempts within a round), then pass index.
bool attempt_order(const LedgerEntry& a, const LedgerEntry& b) {
    if (a.round_index != b.round_index) return a.round_index < b.round_index;
    if (a.direction != b.direction) return a.direction == "proof";
    return a.pass_index < b.pass_index;
}

}  // namespace

PassAtResult pass_at_n(const std::vector<LedgerEntry>& entries, const std::vector<int>& n_values,
                       bool exclude_infrastructure) {
    std::map<std::string, std::vector<LedgerEntry>> by_statement;
    for (const LedgerEntry& e : entries) {
        if (exclude_infrastructure && e.terminated_by == "infrastructure") continue;
        by_statement[e.statement_id].push_back(e);
    }
    PassAtResult result;
    if (by_statement.empty()) {
        for (int n : n_values) result.fraction[n] = 0.0;
        return result;
    }
    int max_n = *std::max_element(n_values.begin(), n_values.end());
    for (auto& [id, attempts] : by_statement) {
        std::stable_sort(attempts.begin(), attempts.end(), attempt_order);
        if (static_cast<int>(attempts.size()) < max_n)
            result.warnings.push_back(id + ": only " + std::to_string(attempts.size()) +
                                      " attempts, pass@" + std::to_string(max_n) + " truncated");
    }
    for (int n : n_values) {
        long solved = 0;
        for (const auto& [id, attempts] : by_statement) {
            std::size_t limit = std::min<std::size_t>(attempts.size(), static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < limit; ++i) {
                if (attempts[i].valid) {
                    ++solved;
                    break;
                }
            }
        }
        result.fraction[n] = static_cast<double>(solved) / static_cast<double>(by_statement.size());
    }
    return result;
}

SummaryReport summary_table(const std::vector<LedgerEntry>& entries) {
    struct Acc {
        bool proved = false;
        bool disproved = false;
        double cpu = 0.0;
    };
    std::map<std::string, Acc> by_statement;
    for (const LedgerEntry& e : entries) {
        Acc& acc = by_statement[e.statement_id];
        acc.cpu += e.cpu_seconds;
        if (e.valid && e.direction == "proof") acc.proved = true;
        if (e.valid && e.direction == "disproof") acc.disproved = true;
    }
    SummaryReport report;
    report.dataset_size = static_cast<long>(by_statement.size());
    for (const auto& [id, acc] : by_statement) {
        bool solved = acc.proved || acc.disproved;
        if (acc.proved) {
            report.proved += 1;
        } else if (acc.disproved) {
            report.disproved += 1;
        } else {
            report.unsolved += 1;
        }
        (solved ? report.cpu_days_solved : report.cpu_days_unsolved) += acc.cpu / 86400.0;
    }
    return report;
}

std::string SummaryReport::to_csv() const {
    auto pct = [&](long n) {
        if (dataset_size == 0) return 0.0;
        return 100.0 * static_cast<double>(n) / static_cast<double>(dataset_size);
    };
    double total_days = cpu_days_total();
    auto share = [&](double days) { return total_days == 0.0 ? 0.0 : 100.0 * days / total_days; };
    std::ostringstream out;
    out << "row,count,percent,cpu_days,cpu_share_percent\n";
    out << "proved," << proved << ',' << pct(proved) << ",,\n";
    out << "disproved," << disproved << ',' << pct(disproved) << ",,\n";
    out << "total_solved," << total_solved() << ',' << pct(total_solved()) << ',' << cpu_days_solved << ','
        << share(cpu_days_solved) << '\n';
    out << "remain_unproven," << unsolved << ',' << pct(unsolved) << ',' << cpu_days_unsolved << ','
        << share(cpu_days_unsolved) << '\n';
    return out.str();
}

ModeMeans mode_length_means(const std::vector<LedgerEntry>& entries) {
    // (statement, mode) -> shortest valid proof length
    std::map<std::pair<std::string, std::string>, int> shortest;
    for (const LedgerEntry& e : entries) {
        if (!e.valid || !e.proof_length) continue;
        auto key = std::make_pair(e.statement_id, e.mode);
        auto it = shortest.find(key);
        if (it == shortest.end() || *e.proof_length < it->second) shortest[key] = *e.proof_length;
    }
    double bf_sum = 0, cg_sum = 0;
    ModeMeans means;
    for (const auto& [key, len] : shortest) {
        if (key.second == "bf") {
            bf_sum += len;
            means.bf_solved += 1;
        } else if (key.second == "cg") {
            cg_sum += len;
            means.cg_solved += 1;
        }
    }
    if (means.bf_solved > 0) means.bf_mean = bf_sum / static_cast<double>(means.bf_solved);
    if (means.cg_solved > 0) means.cg_mean = cg_sum / static_cast<double>(means.cg_solved);
    return means;
}

std::string histogram_csv(const std::map<int, long>& histogram) {
    std::ostringstream out;
    out << "length,count\n";
    for (const auto& [length, count] : histogram) out << length << ',' << count << '\n';
    return out.str();
}

std::string fit_csv(const FitResult& fit) {
    std::ostringstream out;
    out << "slope,intercept,r_squared,n_points\n";
    out << fit.slope << ',' << fit.intercept << ',' << fit.r_squared << ',' << fit.n_points << '\n';
    return out.str();
}

std::string pass_at_csv(const PassAtResult& result) {
    std::ostringstream out;
    out << "n,fraction\n";
    for (const auto& [n, fraction] : result.fraction) out << n << ',' << fraction << '\n';
    return out.str();
}

std::string mode_means_csv(const ModeMeans& means) {
    std::ostringstream out;
    out << "mode,solved,mean_shortest_length\n";
    out << "bf," << means.bf_solved << ',';
    if (means.bf_mean) out << *means.bf_mean;
    out << '\n';
    out << "cg," << means.cg_solved << ',';
    if (means.cg_mean) out << *means.cg_mean;
    out << '\n';
    return out.str();
}

}  // namespace stepforge::analytics
