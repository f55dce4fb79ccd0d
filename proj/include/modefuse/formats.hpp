#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "modefuse/backend.hpp"
#include "modefuse/core.hpp"
#include "modefuse/pipeline.hpp"

namespace modefuse {

// Question file: JSON array of records with "q_uid", "question",
// "option 0".."option 4", optional "video_ref" and "truth".
QuestionSet load_questions(const std::filesystem::path& path);

// Labels file: one JSON object mapping q_uid -> option index.
std::map<std::string, int> load_labels(const std::filesystem::path& path);

// Returns a copy of qs with the given labels attached. Labels for unknown
// q_uids are an error; existing labels may be overwritten.
QuestionSet apply_labels(const QuestionSet& qs, const std::map<std::string, int>& labels);

// A label-only question set (placeholder text) for ensemble arithmetic when
// no full question file is at hand; only truths are consulted there.
QuestionSet questions_from_labels(const std::map<std::string, int>& labels);

// Prediction file: {"mode_id": ..., "answers": {q_uid: index}}.
PredictionSet load_predictions(const std::filesystem::path& path);
void save_predictions(const PredictionSet& preds, const std::filesystem::path& path);

// Run records as JSONL, one record per line in q_uid order. canonical=true
// writes the reproducible view (no cache hits, no timing).
void save_records(const std::vector<RunRecord>& records, const std::filesystem::path& path,
                  bool canonical);
std::vector<RunRecord> load_records(const std::filesystem::path& path);

// One config file declares backends, modes, and paths. Relative paths are
// resolved against the config file's directory.
struct RunConfig {
    std::vector<BackendProfile> backends;
    std::vector<ModeConfig> modes;
    std::filesystem::path templates_dir;  // empty: builtin templates
    std::filesystem::path cache_dir;      // empty: caching disabled

    const ModeConfig& mode(const std::string& mode_id) const;

    static RunConfig from_file(const std::filesystem::path& path);
};

}  // namespace modefuse
