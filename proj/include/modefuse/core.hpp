#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "modefuse/errors.hpp"

namespace modefuse {

inline constexpr int kOptionCount = 5;

// ---------------------------------------------------------------------------
// Question / QuestionSet
// ---------------------------------------------------------------------------

struct Question {
    std::string q_uid;
    std::string question_text;
    std::array<std::string, kOptionCount> options;
    std::string video_ref;                 // opaque URI or path, never decoded here
    std::optional<int> ground_truth;       // option index 0..4 when labeled
};

// Questions sorted by q_uid so every downstream artifact is independent of
// input file order.
class QuestionSet {
  public:
    QuestionSet() = default;

    const std::vector<Question>& questions() const { return questions_; }
    std::size_t size() const { return questions_.size(); }
    bool empty() const { return questions_.empty(); }

    bool contains(const std::string& q_uid) const;
    const Question* find(const std::string& q_uid) const;
    std::optional<int> truth_of(const std::string& q_uid) const;

    // Questions carrying a ground-truth label, in q_uid order.
    std::vector<const Question*> labeled_subset() const;
    std::size_t labeled_count() const;

    nlohmann::json to_json() const;

  private:
    friend QuestionSet validate_question_set(std::vector<Question> records);
    std::vector<Question> questions_;               // sorted by q_uid
    std::map<std::string, std::size_t> index_;      // q_uid -> position
};

// Validates invariants (5 non-empty options, unique q_uid, label in range)
// and returns the canonical, q_uid-sorted set. Errors name the offending
// q_uid.
QuestionSet validate_question_set(std::vector<Question> records);

// ---------------------------------------------------------------------------
// CoT field set
// ---------------------------------------------------------------------------

enum class CotField { caption, summary, reason, answer, confidence };

const char* to_string(CotField f);

// Which output items the model is asked to emit. `answer` is always on.
struct CotFieldSet {
    bool caption = false;
    bool summary = false;
    bool reason = false;
    bool answer = true;
    bool confidence = false;

    bool has(CotField f) const;
    std::vector<CotField> active() const;

    // Stage split for the two-pass paradigm: descriptive items first,
    // reasoning items second.
    CotFieldSet stage1_subset() const;
    CotFieldSet stage2_subset() const;

    bool operator==(const CotFieldSet&) const = default;

    std::vector<std::string> names() const;
    static CotFieldSet from_names(const std::vector<std::string>& names);
};

// ---------------------------------------------------------------------------
// ModeConfig
// ---------------------------------------------------------------------------

enum class Paradigm { one_stage, two_stage };
enum class PromptStyle { P1, P2, P3 };
enum class FocusVariant { none, qa_focal, qa_focus };

const char* to_string(Paradigm p);
const char* to_string(PromptStyle s);
const char* to_string(FocusVariant v);
Paradigm paradigm_from_string(const std::string& s);
PromptStyle prompt_style_from_string(const std::string& s);
FocusVariant focus_variant_from_string(const std::string& s);

struct SamplingParams {
    double temperature = 0.0;
    int max_output_tokens = 1024;

    bool operator==(const SamplingParams&) const = default;
};

// One complete answering recipe; the unit the ensemble indexes over.
struct ModeConfig {
    std::string mode_id;
    Paradigm paradigm = Paradigm::one_stage;
    PromptStyle prompt_style = PromptStyle::P1;
    CotFieldSet cot_fields;
    std::string backend_id;
    FocusVariant focus_variant = FocusVariant::none;
    double clip_seconds = 4.0;
    SamplingParams sampling;

    // Optional knobs. The focus preliminary call defaults to the mode's own
    // backend; video_seconds enables clip planning when the corpus has a
    // known fixed duration.
    std::optional<std::string> focus_backend_id;
    std::optional<double> video_seconds;

    // Throws ValidationError when invariants are violated.
    void validate() const;

    // Stable digest material covering every field that changes model-visible
    // behavior (everything except mode_id and backend_id).
    std::string fingerprint_material() const;

    nlohmann::json to_json() const;
    static ModeConfig from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// StructuredAnswer
// ---------------------------------------------------------------------------

struct CaptionEntry {
    std::optional<std::pair<double, double>> span;  // seconds, when stated
    std::string text;

    bool operator==(const CaptionEntry&) const = default;
};

// Parsed model output for one (mode, question, final stage). Exactly the
// fields requested by the mode's CotFieldSet are present.
struct StructuredAnswer {
    std::optional<std::vector<CaptionEntry>> captions;
    std::optional<std::string> summary;
    std::optional<std::string> reason;
    int answer = 0;                       // always 0-based here
    std::optional<double> confidence;     // clamped to [0,1]

    bool operator==(const StructuredAnswer&) const = default;

    CotFieldSet field_set() const;
    nlohmann::json to_json() const;
    static StructuredAnswer from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// PredictionSet
// ---------------------------------------------------------------------------

// One mode's answers, keyed by q_uid. std::map keeps key order stable.
struct PredictionSet {
    std::string mode_id;
    std::map<std::string, int> answers;

    // Checks answers in 0..4 and, when a QuestionSet is given, that every
    // key belongs to it.
    void validate(const QuestionSet* qs = nullptr) const;

    nlohmann::json to_json() const;
    static PredictionSet from_json(const nlohmann::json& j);
};

}  // namespace modefuse
