#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modefuse/backend.hpp"
#include "modefuse/cache.hpp"
#include "modefuse/core.hpp"
#include "modefuse/prompt.hpp"

namespace modefuse {

// Every ask issued for one stage of one question. The parallel vectors hold
// one entry per ask: index 0 is the original prompt, later indices re-asks
// carrying a format reminder.
struct StageTrace {
    std::string label;  // "preliminary" | "single" | "stage1" | "stage2"
    std::vector<std::string> prompts;
    std::vector<std::string> replies;
    std::vector<bool> cache_hits;
    std::vector<int> backend_attempts;

    int asks() const { return static_cast<int>(prompts.size()); }

    // canonical=true drops cache_hits; it is the reproducible view.
    nlohmann::json to_json(bool canonical = false) const;
    static StageTrace from_json(const nlohmann::json& j);
};

// The full artifact of one (mode, question): everything sent and received,
// plus the parsed outcome or the abstention reason.
struct RunRecord {
    std::string mode_id;
    std::string q_uid;
    std::vector<StageTrace> stages;
    std::optional<StructuredAnswer> parsed;
    std::string abstain_reason;  // non-empty exactly when parsed is absent
    double elapsed_ms = 0.0;     // wall clock, excluded from the canonical view

    bool abstained() const { return !parsed.has_value(); }

    nlohmann::json to_json(bool canonical = false) const;
    static RunRecord from_json(const nlohmann::json& j);
};

struct RunOptions {
    int workers = 8;
    int max_reasks = 3;  // re-asks after the first failed parse, then abstain
    ResponseCache* cache = nullptr;
    const PromptCatalog* catalog = nullptr;      // defaults to the builtin catalog
    std::filesystem::path checkpoint;            // empty disables checkpointing
};

struct ModeRunResult {
    PredictionSet predictions;          // abstentions excluded
    std::vector<RunRecord> records;     // q_uid-sorted, one per question
    std::uint64_t backend_calls = 0;    // asks actually sent (cache misses)
    std::uint64_t cache_hits = 0;
    std::uint64_t abstentions = 0;
    std::uint64_t resumed = 0;          // records taken from the checkpoint
};

// Executes one mode over the question set with a bounded worker pool.
// one_stage: render, ask, parse. two_stage: stage1 asks for the descriptive
// fields, stage2 receives stage1's parsed output verbatim and answers. Focus
// variants prepend one preliminary ask whose reply becomes focus notes for
// every main prompt. Parse failures re-ask then abstain; transport, auth and
// backend errors abort the run (the checkpoint keeps completed questions).
ModeRunResult run_mode(const ModeConfig& mode, const QuestionSet& qs,
                       const BackendRegistry& registry, const RunOptions& opts = {});

// Digest of a question set's canonical JSON; identifies inputs in manifests.
std::string question_set_digest(const QuestionSet& qs);

}  // namespace modefuse
