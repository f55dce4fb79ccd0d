#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "modefuse/core.hpp"
#include "modefuse/ensemble.hpp"

namespace modefuse {

// Accuracy over labeled answered questions; by construction exactly
// compute_weight(preds, qs).w.
double accuracy(const PredictionSet& preds, const QuestionSet& qs);

// "0.759" -> "75.9%", one decimal.
std::string format_percent(double fraction);

// Similarity tables for >=2 prediction sets. Pairs without overlap render
// as "n/a" in the text table and null in the JSON export, never fatal.
struct SimilarityReport {
    SimilarityMatrix matrix;
    std::string table;          // tab-delimited, percent with 1 decimal
    nlohmann::json machine;     // raw fractions + overlap counts
};

SimilarityReport similarity_report(const std::vector<PredictionSet>& preds);

// One ensemble evaluation per activation vector over a fixed candidate list.
struct SweepRow {
    std::vector<int> activation;        // 0/1 per candidate, candidate order
    std::vector<std::string> mode_ids;  // the activated subset
    double accuracy = 0.0;
    int evaluated = 0;                  // labeled questions that got a decision
};

struct SweepTable {
    std::vector<std::string> candidate_ids;
    std::vector<SweepRow> rows;  // accuracy descending; ties keep vector order

    std::string table() const;  // tab-delimited text rendering
    nlohmann::json to_json() const;
};

// Evaluates each activation vector. Vectors must match the candidate count;
// all-zero vectors are rejected.
SweepTable activation_sweep(const std::vector<std::vector<int>>& activations,
                            const std::vector<PredictionSet>& candidates,
                            const QuestionSet& qs);

// Every 0/1 vector over n candidates except all-zeros, in binary order.
std::vector<std::vector<int>> all_activations(std::size_t n);

// Submission file: {"q_uid": answer, ...} with sorted keys, plus a CSV
// alternative next to it. Every question in qs must have a decision.
void write_submission(const std::map<std::string, EnsembleDecision>& decisions,
                      const QuestionSet& qs, const std::filesystem::path& out_json);

// Same files without a coverage check: one entry per decision.
void write_submission(const std::map<std::string, EnsembleDecision>& decisions,
                      const std::filesystem::path& out_json);

// Reads a submission back as q_uid -> answer.
std::map<std::string, int> read_submission(const std::filesystem::path& path);

}  // namespace modefuse
