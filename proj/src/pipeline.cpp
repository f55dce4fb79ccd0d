#include "modefuse/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "modefuse/digest.hpp"
#include "modefuse/parser.hpp"

namespace modefuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

json StageTrace::to_json(bool canonical) const {
    json j;
    j["label"] = label;
    j["prompts"] = prompts;
    j["replies"] = replies;
    j["backend_attempts"] = backend_attempts;
    if (!canonical) {
        json hits = json::array();
        for (bool h : cache_hits) hits.push_back(h);
        j["cache_hits"] = std::move(hits);
    }
    return j;
}

StageTrace StageTrace::from_json(const json& j) {
    StageTrace t;
    try {
        t.label = j.at("label").get<std::string>();
        t.prompts = j.at("prompts").get<std::vector<std::string>>();
        t.replies = j.at("replies").get<std::vector<std::string>>();
        t.backend_attempts = j.at("backend_attempts").get<std::vector<int>>();
        if (j.contains("cache_hits")) {
            for (const auto& h : j.at("cache_hits")) t.cache_hits.push_back(h.get<bool>());
        }
        t.cache_hits.resize(t.prompts.size(), false);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad stage trace record: ") + e.what());
    }
    return t;
}

json RunRecord::to_json(bool canonical) const {
    json j;
    j["mode_id"] = mode_id;
    j["q_uid"] = q_uid;
    json stages_j = json::array();
    for (const auto& s : stages) stages_j.push_back(s.to_json(canonical));
    j["stages"] = std::move(stages_j);
    if (parsed) j["parsed"] = parsed->to_json();
    else j["abstain_reason"] = abstain_reason;
    if (!canonical) j["elapsed_ms"] = elapsed_ms;
    return j;
}

RunRecord RunRecord::from_json(const json& j) {
    RunRecord r;
    try {
        r.mode_id = j.at("mode_id").get<std::string>();
        r.q_uid = j.at("q_uid").get<std::string>();
        for (const auto& s : j.at("stages")) r.stages.push_back(StageTrace::from_json(s));
        if (j.contains("parsed")) r.parsed = StructuredAnswer::from_json(j.at("parsed"));
        else r.abstain_reason = j.value("abstain_reason", "unknown");
        r.elapsed_ms = j.value("elapsed_ms", 0.0);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad run record: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// run_mode
// ---------------------------------------------------------------------------

namespace {

struct AskCounters {
    std::atomic<std::uint64_t> backend_calls{0};
    std::atomic<std::uint64_t> cache_hits{0};
};

struct AskOutcome {
    CachedReply reply;
    bool cache_hit = false;
};

AskOutcome ask_raw(Backend& backend, ResponseCache* cache, const ModeConfig& mode,
                   const Question& q, Stage stage, const std::string& prompt,
                   AskCounters& counters) {
    const std::string key = cache_key(mode, q.q_uid, stage, prompt, backend.profile());
    if (cache) {
        if (auto hit = cache->lookup(key)) {
            counters.cache_hits.fetch_add(1);
            return {*hit, true};
        }
    }
    ModelRequest req;
    req.prompt = prompt;
    if (!q.video_ref.empty()) req.media.push_back(MediaRef{q.video_ref});
    req.sampling = mode.sampling;
    req.tag = q.q_uid;
    ModelReply reply = backend.invoke(req);
    counters.backend_calls.fetch_add(1);

    CachedReply stored;
    stored.text = reply.text;
    stored.attempts = reply.attempts;
    stored.prompt_tokens = reply.prompt_tokens;
    stored.completion_tokens = reply.completion_tokens;
    stored.model = backend.profile().model;
    if (cache) cache->store(key, stored);
    return {stored, false};
}

std::string describe_failure(const ParseResult& pr) {
    switch (pr.failure) {
        case ParseFailure::no_json_found: return "no JSON object found: " + pr.detail;
        case ParseFailure::missing_key: return "missing key: " + pr.detail;
        case ParseFailure::wrong_kind: return "wrong value kind: " + pr.detail;
        case ParseFailure::answer_out_of_range: return "answer out of range: " + pr.detail;
        case ParseFailure::none: break;
    }
    return "unparseable reply";
}

// Ask + parse with bounded re-asks. Returns the parse of the first reply
// that conforms; records every ask in the trace. nullopt means abstention.
std::optional<StructuredAnswer> ask_structured(Backend& backend, const RunOptions& opts,
                                               const ModeConfig& mode, const Question& q,
                                               Stage stage, const std::string& base_prompt,
                                               const OutputSchemaSpec& schema,
                                               Numbering numbering, StageTrace& trace,
                                               std::string& abstain_reason,
                                               AskCounters& counters) {
    std::string prompt = base_prompt;
    ParseResult last;
    for (int ask = 1; ask <= opts.max_reasks + 1; ++ask) {
        AskOutcome got = ask_raw(backend, opts.cache, mode, q, stage, prompt, counters);
        trace.prompts.push_back(prompt);
        trace.replies.push_back(got.reply.text);
        trace.cache_hits.push_back(got.cache_hit);
        trace.backend_attempts.push_back(got.reply.attempts);

        last = parse_structured(got.reply.text, schema, numbering);
        if (last.ok()) return last.value;
        prompt = base_prompt + format_reminder(ask + 1);
    }
    std::ostringstream reason;
    reason << to_string(stage) << ": " << describe_failure(last) << " after "
           << (opts.max_reasks + 1) << " asks";
    abstain_reason = reason.str();
    return std::nullopt;
}

RunRecord process_question(const ModeConfig& mode, const Question& q,
                           const PromptCatalog& catalog, Backend& backend,
                           Backend* focus_backend, const RunOptions& opts,
                           AskCounters& counters) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.mode_id = mode.mode_id;
    rec.q_uid = q.q_uid;

    std::string focus_notes;
    if (mode.focus_variant != FocusVariant::none) {
        StageTrace trace;
        trace.label = "preliminary";
        const std::string prompt = render_focus_prompt(catalog, mode, q);
        AskOutcome got = ask_raw(*focus_backend, opts.cache, mode, q, Stage::preliminary,
                                 prompt, counters);
        trace.prompts.push_back(prompt);
        trace.replies.push_back(got.reply.text);
        trace.cache_hits.push_back(got.cache_hit);
        trace.backend_attempts.push_back(got.reply.attempts);
        rec.stages.push_back(std::move(trace));
        focus_notes = got.reply.text;
    }

    const Numbering numbering = catalog.numbering_of(mode.prompt_style);
    std::optional<int> clip_count;
    if (mode.video_seconds) {
        clip_count = static_cast<int>(clip_plan(*mode.video_seconds, mode.clip_seconds).size());
    }

    if (mode.paradigm == Paradigm::one_stage) {
        StageTrace trace;
        trace.label = "single";
        const std::string prompt =
            render_prompt(catalog, mode, q, Stage::single, std::nullopt, focus_notes);
        const OutputSchemaSpec schema =
            build_output_schema(mode.cot_fields, Stage::single, clip_count);
        rec.parsed = ask_structured(backend, opts, mode, q, Stage::single, prompt, schema,
                                    numbering, trace, rec.abstain_reason, counters);
        rec.stages.push_back(std::move(trace));
    } else {
        StageTrace trace1;
        trace1.label = "stage1";
        const std::string prompt1 =
            render_prompt(catalog, mode, q, Stage::stage1, std::nullopt, focus_notes);
        const OutputSchemaSpec schema1 =
            build_output_schema(mode.cot_fields, Stage::stage1, clip_count);
        std::optional<StructuredAnswer> first =
            ask_structured(backend, opts, mode, q, Stage::stage1, prompt1, schema1,
                           numbering, trace1, rec.abstain_reason, counters);
        rec.stages.push_back(std::move(trace1));

        if (first) {
            // Stage2 sees exactly what stage1 produced, as canonical JSON.
            json payload;
            if (first->captions) {
                json arr = json::array();
                for (const auto& c : *first->captions) arr.push_back(c.text);
                payload["captions"] = std::move(arr);
            }
            if (first->summary) payload["summary"] = *first->summary;
            const std::string stage1_output = payload.dump(2);

            StageTrace trace2;
            trace2.label = "stage2";
            const std::string prompt2 =
                render_prompt(catalog, mode, q, Stage::stage2, stage1_output, focus_notes);
            const OutputSchemaSpec schema2 =
                build_output_schema(mode.cot_fields, Stage::stage2, clip_count);
            rec.parsed = ask_structured(backend, opts, mode, q, Stage::stage2, prompt2,
                                        schema2, numbering, trace2, rec.abstain_reason,
                                        counters);
            rec.stages.push_back(std::move(trace2));
            if (rec.parsed) {
                rec.parsed->captions = first->captions;
                rec.parsed->summary = first->summary;
            }
        }
    }

    rec.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace

ModeRunResult run_mode(const ModeConfig& mode, const QuestionSet& qs,
                       const BackendRegistry& registry, const RunOptions& opts) {
    mode.validate();
    if (opts.workers < 1) throw ConfigError("run_mode: workers must be >= 1");

    const PromptCatalog builtin_catalog = opts.catalog ? PromptCatalog() : PromptCatalog::builtin();
    const PromptCatalog& catalog = opts.catalog ? *opts.catalog : builtin_catalog;

    std::shared_ptr<Backend> backend = registry.get(mode.backend_id);
    std::shared_ptr<Backend> focus_backend;
    if (mode.focus_variant != FocusVariant::none) {
        focus_backend = registry.get(mode.focus_backend_id.value_or(mode.backend_id));
    }

    // Resume: records already in the checkpoint are taken as-is.
    std::map<std::string, RunRecord> done;
    if (!opts.checkpoint.empty() && std::filesystem::exists(opts.checkpoint)) {
        std::ifstream in(opts.checkpoint, std::ios::binary);
        if (!in) throw IoError("cannot read checkpoint " + opts.checkpoint.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;  // torn tail line from a killed run
            RunRecord r = RunRecord::from_json(j);
            if (r.mode_id == mode.mode_id && qs.contains(r.q_uid)) {
                done.insert_or_assign(r.q_uid, std::move(r));
            }
        }
    }

    std::ofstream checkpoint_out;
    std::mutex checkpoint_mu;
    if (!opts.checkpoint.empty()) {
        if (opts.checkpoint.has_parent_path()) {
            std::filesystem::create_directories(opts.checkpoint.parent_path());
        }
        // A killed run can leave a torn final line without a newline; start a
        // fresh line so the first appended record stays parseable.
        bool needs_newline = false;
        if (std::filesystem::exists(opts.checkpoint)) {
            std::ifstream probe(opts.checkpoint, std::ios::binary | std::ios::ate);
            if (probe && probe.tellg() > 0) {
                probe.seekg(-1, std::ios::end);
                char last = '\n';
                probe.get(last);
                needs_newline = last != '\n';
            }
        }
        checkpoint_out.open(opts.checkpoint, std::ios::binary | std::ios::app);
        if (!checkpoint_out) {
            throw IoError("cannot open checkpoint " + opts.checkpoint.string());
        }
        if (needs_newline) checkpoint_out << "\n";
    }

    const std::vector<Question>& questions = qs.questions();
    const std::size_t n = questions.size();
    std::vector<RunRecord> records(n);
    std::vector<char> from_checkpoint(n, 0);

    AskCounters counters;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex err_mu;
    std::exception_ptr first_error;

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            const Question& q = questions[i];
            if (auto it = done.find(q.q_uid); it != done.end()) {
                records[i] = it->second;
                from_checkpoint[i] = 1;
                continue;
            }
            try {
                records[i] = process_question(mode, q, catalog, *backend,
                                              focus_backend.get(), opts, counters);
                if (checkpoint_out.is_open()) {
                    const std::string line = records[i].to_json(false).dump();
                    std::lock_guard lock(checkpoint_mu);
                    checkpoint_out << line << "\n";
                    checkpoint_out.flush();
                }
            } catch (...) {
                {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
                abort.store(true);
                break;
            }
        }
    };

    const std::size_t pool = std::min<std::size_t>(static_cast<std::size_t>(opts.workers),
                                                   std::max<std::size_t>(n, 1));
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (first_error) std::rethrow_exception(first_error);

    ModeRunResult result;
    result.predictions.mode_id = mode.mode_id;
    result.records = std::move(records);  // questions_ is q_uid-sorted already
    result.backend_calls = counters.backend_calls.load();
    result.cache_hits = counters.cache_hits.load();
    for (std::size_t i = 0; i < n; ++i) {
        const RunRecord& r = result.records[i];
        if (from_checkpoint[i]) ++result.resumed;
        if (r.parsed) result.predictions.answers[r.q_uid] = r.parsed->answer;
        else ++result.abstentions;
    }
    return result;
}

std::string question_set_digest(const QuestionSet& qs) {
    return sha256_hex(qs.to_json().dump());
}

}  // namespace modefuse
