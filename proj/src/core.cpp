#include "modefuse/core.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace modefuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// QuestionSet
// ---------------------------------------------------------------------------

bool QuestionSet::contains(const std::string& q_uid) const {
    return index_.count(q_uid) != 0;
}

const Question* QuestionSet::find(const std::string& q_uid) const {
    auto it = index_.find(q_uid);
    return it == index_.end() ? nullptr : &questions_[it->second];
}

std::optional<int> QuestionSet::truth_of(const std::string& q_uid) const {
    const Question* q = find(q_uid);
    return q ? q->ground_truth : std::nullopt;
}

std::vector<const Question*> QuestionSet::labeled_subset() const {
    std::vector<const Question*> out;
    for (const auto& q : questions_) {
        if (q.ground_truth) out.push_back(&q);
    }
    return out;
}

std::size_t QuestionSet::labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(questions_.begin(), questions_.end(),
                      [](const Question& q) { return q.ground_truth.has_value(); }));
}

json QuestionSet::to_json() const {
    json arr = json::array();
    for (const auto& q : questions_) {
        json rec;
        rec["q_uid"] = q.q_uid;
        rec["question"] = q.question_text;
        for (int i = 0; i < kOptionCount; ++i) {
            rec["option " + std::to_string(i)] = q.options[static_cast<std::size_t>(i)];
        }
        rec["video_ref"] = q.video_ref;
        if (q.ground_truth) rec["truth"] = *q.ground_truth;
        arr.push_back(std::move(rec));
    }
    return arr;
}

QuestionSet validate_question_set(std::vector<Question> records) {
    std::sort(records.begin(), records.end(),
              [](const Question& a, const Question& b) { return a.q_uid < b.q_uid; });

    QuestionSet qs;
    for (auto& q : records) {
        if (q.q_uid.empty()) {
            throw ValidationError("question record has empty q_uid");
        }
        for (int i = 0; i < kOptionCount; ++i) {
            if (q.options[static_cast<std::size_t>(i)].empty()) {
                throw ValidationError("question '" + q.q_uid + "': option " +
                                      std::to_string(i) + " is empty (5 non-empty options required)");
            }
        }
        if (q.ground_truth && (*q.ground_truth < 0 || *q.ground_truth >= kOptionCount)) {
            throw ValidationError("question '" + q.q_uid + "': ground truth " +
                                  std::to_string(*q.ground_truth) + " out of range 0..4");
        }
        if (!qs.index_.emplace(q.q_uid, qs.questions_.size()).second) {
            throw ValidationError("duplicate q_uid '" + q.q_uid + "'");
        }
        qs.questions_.push_back(std::move(q));
    }
    return qs;
}

// ---------------------------------------------------------------------------
// CotFieldSet
// ---------------------------------------------------------------------------

const char* to_string(CotField f) {
    switch (f) {
        case CotField::caption: return "caption";
        case CotField::summary: return "summary";
        case CotField::reason: return "reason";
        case CotField::answer: return "answer";
        case CotField::confidence: return "confidence";
    }
    return "?";
}

bool CotFieldSet::has(CotField f) const {
    switch (f) {
        case CotField::caption: return caption;
        case CotField::summary: return summary;
        case CotField::reason: return reason;
        case CotField::answer: return answer;
        case CotField::confidence: return confidence;
    }
    return false;
}

std::vector<CotField> CotFieldSet::active() const {
    std::vector<CotField> out;
    for (CotField f : {CotField::caption, CotField::summary, CotField::reason,
                       CotField::answer, CotField::confidence}) {
        if (has(f)) out.push_back(f);
    }
    return out;
}

CotFieldSet CotFieldSet::stage1_subset() const {
    CotFieldSet s;
    s.caption = caption;
    s.summary = summary;
    s.reason = false;
    s.answer = false;
    s.confidence = false;
    return s;
}

CotFieldSet CotFieldSet::stage2_subset() const {
    CotFieldSet s;
    s.caption = false;
    s.summary = false;
    s.reason = reason;
    s.answer = answer;
    s.confidence = confidence;
    return s;
}

std::vector<std::string> CotFieldSet::names() const {
    std::vector<std::string> out;
    for (CotField f : active()) out.emplace_back(to_string(f));
    return out;
}

CotFieldSet CotFieldSet::from_names(const std::vector<std::string>& names) {
    CotFieldSet s;
    s.answer = false;
    for (const auto& n : names) {
        if (n == "caption" || n == "captions") s.caption = true;
        else if (n == "summary") s.summary = true;
        else if (n == "reason") s.reason = true;
        else if (n == "answer") s.answer = true;
        else if (n == "confidence") s.confidence = true;
        else throw ValidationError("unknown CoT field '" + n + "'");
    }
    if (!s.answer) {
        throw ValidationError("cot_fields must include 'answer'");
    }
    return s;
}

// ---------------------------------------------------------------------------
// ModeConfig
// ---------------------------------------------------------------------------

const char* to_string(Paradigm p) {
    return p == Paradigm::one_stage ? "one_stage" : "two_stage";
}

const char* to_string(PromptStyle s) {
    switch (s) {
        case PromptStyle::P1: return "P1";
        case PromptStyle::P2: return "P2";
        case PromptStyle::P3: return "P3";
    }
    return "?";
}

const char* to_string(FocusVariant v) {
    switch (v) {
        case FocusVariant::none: return "none";
        case FocusVariant::qa_focal: return "qa_focal";
        case FocusVariant::qa_focus: return "qa_focus";
    }
    return "?";
}

Paradigm paradigm_from_string(const std::string& s) {
    if (s == "one_stage") return Paradigm::one_stage;
    if (s == "two_stage") return Paradigm::two_stage;
    throw ValidationError("unknown paradigm '" + s + "' (expected one_stage or two_stage)");
}

PromptStyle prompt_style_from_string(const std::string& s) {
    if (s == "P1" || s == "p1") return PromptStyle::P1;
    if (s == "P2" || s == "p2") return PromptStyle::P2;
    if (s == "P3" || s == "p3") return PromptStyle::P3;
    throw ValidationError("unknown prompt style '" + s + "' (expected P1, P2 or P3)");
}

FocusVariant focus_variant_from_string(const std::string& s) {
    if (s == "none") return FocusVariant::none;
    if (s == "qa_focal") return FocusVariant::qa_focal;
    if (s == "qa_focus") return FocusVariant::qa_focus;
    throw ValidationError("unknown focus variant '" + s + "'");
}

void ModeConfig::validate() const {
    if (mode_id.empty()) throw ValidationError("mode with empty mode_id");
    if (backend_id.empty()) throw ValidationError("mode '" + mode_id + "': empty backend_id");
    if (!(clip_seconds > 0)) {
        throw ValidationError("mode '" + mode_id + "': clip_seconds must be > 0");
    }
    if (!cot_fields.answer) {
        throw ValidationError("mode '" + mode_id + "': cot_fields must request an answer");
    }
    if (paradigm == Paradigm::two_stage && !cot_fields.caption && !cot_fields.summary) {
        throw ValidationError("mode '" + mode_id +
                              "': two_stage requires caption or summary for stage 1");
    }
    if (sampling.temperature < 0) {
        throw ValidationError("mode '" + mode_id + "': temperature must be >= 0");
    }
    if (sampling.max_output_tokens <= 0) {
        throw ValidationError("mode '" + mode_id + "': max_output_tokens must be > 0");
    }
    if (video_seconds && !(*video_seconds > 0)) {
        throw ValidationError("mode '" + mode_id + "': video_seconds must be > 0");
    }
}

std::string ModeConfig::fingerprint_material() const {
    json j;
    j["paradigm"] = to_string(paradigm);
    j["prompt_style"] = to_string(prompt_style);
    j["cot_fields"] = cot_fields.names();
    j["focus_variant"] = to_string(focus_variant);
    j["clip_seconds"] = clip_seconds;
    j["temperature"] = sampling.temperature;
    j["max_output_tokens"] = sampling.max_output_tokens;
    if (video_seconds) j["video_seconds"] = *video_seconds;
    return j.dump();
}

json ModeConfig::to_json() const {
    json j;
    j["mode_id"] = mode_id;
    j["paradigm"] = to_string(paradigm);
    j["prompt_style"] = to_string(prompt_style);
    j["cot_fields"] = cot_fields.names();
    j["backend_id"] = backend_id;
    j["focus_variant"] = to_string(focus_variant);
    j["clip_seconds"] = clip_seconds;
    j["temperature"] = sampling.temperature;
    j["max_output_tokens"] = sampling.max_output_tokens;
    if (focus_backend_id) j["focus_backend_id"] = *focus_backend_id;
    if (video_seconds) j["video_seconds"] = *video_seconds;
    return j;
}

ModeConfig ModeConfig::from_json(const json& j) {
    ModeConfig m;
    try {
        m.mode_id = j.at("mode_id").get<std::string>();
        m.paradigm = paradigm_from_string(j.at("paradigm").get<std::string>());
        m.prompt_style = prompt_style_from_string(j.at("prompt_style").get<std::string>());
        m.cot_fields = CotFieldSet::from_names(j.at("cot_fields").get<std::vector<std::string>>());
        m.backend_id = j.at("backend_id").get<std::string>();
        if (j.contains("focus_variant")) {
            m.focus_variant = focus_variant_from_string(j.at("focus_variant").get<std::string>());
        }
        if (j.contains("clip_seconds")) m.clip_seconds = j.at("clip_seconds").get<double>();
        if (j.contains("temperature")) m.sampling.temperature = j.at("temperature").get<double>();
        if (j.contains("max_output_tokens")) {
            m.sampling.max_output_tokens = j.at("max_output_tokens").get<int>();
        }
        if (j.contains("focus_backend_id")) {
            m.focus_backend_id = j.at("focus_backend_id").get<std::string>();
        }
        if (j.contains("video_seconds")) m.video_seconds = j.at("video_seconds").get<double>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad mode record: ") + e.what());
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// StructuredAnswer
// ---------------------------------------------------------------------------

CotFieldSet StructuredAnswer::field_set() const {
    CotFieldSet s;
    s.caption = captions.has_value();
    s.summary = summary.has_value();
    s.reason = reason.has_value();
    s.answer = true;
    s.confidence = confidence.has_value();
    return s;
}

json StructuredAnswer::to_json() const {
    json j;
    if (captions) {
        json arr = json::array();
        for (const auto& c : *captions) {
            if (c.span) {
                arr.push_back(json{{"span", {c.span->first, c.span->second}}, {"text", c.text}});
            } else {
                arr.push_back(c.text);
            }
        }
        j["captions"] = std::move(arr);
    }
    if (summary) j["summary"] = *summary;
    if (reason) j["reason"] = *reason;
    j["answer"] = answer;
    if (confidence) j["confidence"] = *confidence;
    return j;
}

StructuredAnswer StructuredAnswer::from_json(const json& j) {
    StructuredAnswer a;
    try {
        if (j.contains("captions")) {
            std::vector<CaptionEntry> caps;
            for (const auto& c : j.at("captions")) {
                CaptionEntry e;
                if (c.is_string()) {
                    e.text = c.get<std::string>();
                } else {
                    e.text = c.at("text").get<std::string>();
                    if (c.contains("span")) {
                        e.span = std::make_pair(c.at("span").at(0).get<double>(),
                                                c.at("span").at(1).get<double>());
                    }
                }
                caps.push_back(std::move(e));
            }
            a.captions = std::move(caps);
        }
        if (j.contains("summary")) a.summary = j.at("summary").get<std::string>();
        if (j.contains("reason")) a.reason = j.at("reason").get<std::string>();
        a.answer = j.at("answer").get<int>();
        if (j.contains("confidence")) a.confidence = j.at("confidence").get<double>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad structured answer record: ") + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// PredictionSet
// ---------------------------------------------------------------------------

void PredictionSet::validate(const QuestionSet* qs) const {
    if (mode_id.empty()) throw ValidationError("prediction set with empty mode_id");
    for (const auto& [q_uid, ans] : answers) {
        if (ans < 0 || ans >= kOptionCount) {
            throw ValidationError("prediction set '" + mode_id + "': answer " +
                                  std::to_string(ans) + " for '" + q_uid +
                                  "' out of range 0..4");
        }
        if (qs && !qs->contains(q_uid)) {
            throw ValidationError("prediction set '" + mode_id + "': unknown q_uid '" +
                                  q_uid + "'");
        }
    }
}

json PredictionSet::to_json() const {
    json j;
    j["mode_id"] = mode_id;
    j["answers"] = json::object();
    for (const auto& [q_uid, ans] : answers) j["answers"][q_uid] = ans;
    return j;
}

PredictionSet PredictionSet::from_json(const json& j) {
    PredictionSet p;
    try {
        p.mode_id = j.at("mode_id").get<std::string>();
        for (const auto& [k, v] : j.at("answers").items()) {
            p.answers[k] = v.get<int>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad prediction set: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace modefuse
