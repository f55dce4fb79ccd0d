#include "modefuse/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace modefuse {

using nlohmann::json;

double accuracy(const PredictionSet& preds, const QuestionSet& qs) {
    return compute_weight(preds, qs).w;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
    return buf;
}

SimilarityReport similarity_report(const std::vector<PredictionSet>& preds) {
    if (preds.size() < 2) {
        throw ValidationError("similarity report needs at least two prediction sets");
    }
    SimilarityReport rep;
    rep.matrix = build_similarity_matrix(preds);
    const auto& ids = rep.matrix.mode_ids();

    std::ostringstream table;
    table << "mode";
    for (const auto& id : ids) table << "\t" << id;
    table << "\n";
    for (const auto& a : ids) {
        table << a;
        for (const auto& b : ids) {
            table << "\t";
            if (rep.matrix.has(a, b)) {
                table << format_percent(rep.matrix.at(a, b));
            } else {
                table << "n/a";
            }
        }
        table << "\n";
    }
    rep.table = table.str();
    rep.machine = rep.matrix.to_json();
    return rep;
}

SweepTable activation_sweep(const std::vector<std::vector<int>>& activations,
                            const std::vector<PredictionSet>& candidates,
                            const QuestionSet& qs) {
    if (candidates.empty()) throw ValidationError("activation sweep needs candidates");

    SweepTable out;
    for (const auto& p : candidates) out.candidate_ids.push_back(p.mode_id);

    for (const auto& vec : activations) {
        if (vec.size() != candidates.size()) {
            throw ValidationError("activation vector length " + std::to_string(vec.size()) +
                                  " does not match " + std::to_string(candidates.size()) +
                                  " candidates");
        }
        SweepRow row;
        row.activation = vec;
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (vec[i] != 0 && vec[i] != 1) {
                throw ValidationError("activation vectors must be 0/1");
            }
            if (vec[i]) row.mode_ids.push_back(candidates[i].mode_id);
        }
        if (row.mode_ids.empty()) {
            throw ValidationError("all-zero activation vector selects no mode");
        }
        EnsembleSpec spec = make_ensemble_spec(candidates, qs, row.mode_ids);
        const auto decisions = fuse(spec, candidates);
        int evaluated = 0;
        int correct = 0;
        for (const auto& [q_uid, d] : decisions) {
            const std::optional<int> truth = qs.truth_of(q_uid);
            if (!truth) continue;
            ++evaluated;
            if (d.r == *truth) ++correct;
        }
        if (evaluated == 0) {
            throw ValidationError("activation answered no labeled question");
        }
        row.accuracy = static_cast<double>(correct) / static_cast<double>(evaluated);
        row.evaluated = evaluated;
        out.rows.push_back(std::move(row));
    }

    std::stable_sort(out.rows.begin(), out.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.accuracy > b.accuracy; });
    return out;
}

std::vector<std::vector<int>> all_activations(std::size_t n) {
    if (n == 0 || n > 20) throw ValidationError("activation enumeration supports 1..20 candidates");
    std::vector<std::vector<int>> out;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        // The vector, read in candidate order, is the binary numeral of mask,
        // so enumeration ascends 001, 010, 011, ...
        std::vector<int> vec(n, 0);
        for (std::size_t i = 0; i < n; ++i) vec[n - 1 - i] = (mask >> i) & 1 ? 1 : 0;
        out.push_back(std::move(vec));
    }
    return out;
}

std::string SweepTable::table() const {
    std::ostringstream out;
    out << "activation\tmodes\taccuracy\tevaluated\n";
    for (const auto& row : rows) {
        for (int bit : row.activation) out << bit;
        out << "\t";
        for (std::size_t i = 0; i < row.mode_ids.size(); ++i) {
            if (i) out << ",";
            out << row.mode_ids[i];
        }
        out << "\t" << format_percent(row.accuracy) << "\t" << row.evaluated << "\n";
    }
    return out.str();
}

json SweepTable::to_json() const {
    json j;
    j["candidates"] = candidate_ids;
    json rows_j = json::array();
    for (const auto& row : rows) {
        json r;
        r["activation"] = row.activation;
        r["modes"] = row.mode_ids;
        r["accuracy"] = row.accuracy;
        r["evaluated"] = row.evaluated;
        rows_j.push_back(std::move(r));
    }
    j["rows"] = std::move(rows_j);
    return j;
}

namespace {

void write_submission_entries(const std::map<std::string, int>& entries,
                              const std::filesystem::path& out_json) {
    json j = json::object();
    for (const auto& [q_uid, answer] : entries) j[q_uid] = answer;
    if (out_json.has_parent_path()) {
        std::filesystem::create_directories(out_json.parent_path());
    }
    {
        std::ofstream out(out_json, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write submission " + out_json.string());
        out << j.dump(2) << "\n";
    }
    std::filesystem::path csv = out_json;
    csv.replace_extension(".csv");
    std::ofstream out(csv, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write submission " + csv.string());
    out << "q_uid,answer\n";
    for (const auto& [q_uid, answer] : entries) out << q_uid << "," << answer << "\n";
}

}  // namespace

void write_submission(const std::map<std::string, EnsembleDecision>& decisions,
                      const QuestionSet& qs, const std::filesystem::path& out_json) {
    std::map<std::string, int> entries;
    for (const auto& q : qs.questions()) {
        auto it = decisions.find(q.q_uid);
        if (it == decisions.end()) {
            throw ValidationError("no decision for question '" + q.q_uid + "'");
        }
        entries[q.q_uid] = it->second.r;
    }
    write_submission_entries(entries, out_json);
}

void write_submission(const std::map<std::string, EnsembleDecision>& decisions,
                      const std::filesystem::path& out_json) {
    std::map<std::string, int> entries;
    for (const auto& [q_uid, d] : decisions) entries[q_uid] = d.r;
    write_submission_entries(entries, out_json);
}

std::map<std::string, int> read_submission(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read submission " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ValidationError("submission is not a JSON object: " + path.string());
    }
    std::map<std::string, int> out;
    for (const auto& [q_uid, v] : j.items()) {
        if (!v.is_number_integer()) {
            throw ValidationError("submission answer for '" + q_uid + "' is not an integer");
        }
        out[q_uid] = v.get<int>();
    }
    return out;
}

}  // namespace modefuse
