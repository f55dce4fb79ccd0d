#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modefuse/core.hpp"

namespace modefuse {

enum class Numbering { zero_based, one_based };
enum class Stage { single, stage1, stage2, preliminary };

const char* to_string(Numbering n);
const char* to_string(Stage s);

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

// A template body with {{slot}} markers plus the numbering convention its
// option list and answer instructions use. Template files may start with
// directive lines, e.g. "@numbering one_based"; everything after is body.
struct PromptTemplate {
    std::string id;  // "P1", "P2", "P3", "qa_focal", "qa_focus"
    std::string body;
    Numbering declared_numbering = Numbering::zero_based;

    // Parses directives and verifies every {{slot}} in the body is known.
    static PromptTemplate parse(std::string id, const std::string& file_text);
};

// Slot names a template body may reference.
const std::vector<std::string>& known_slots();

// Single-pass substitution. Every marker found in the body must have a
// binding; markers never appear in the output.
std::string render_template(const PromptTemplate& tpl,
                            const std::map<std::string, std::string>& bindings);

// The five stock templates, loadable from a directory of .txt assets or from
// the copies compiled into the library (identical content).
class PromptCatalog {
  public:
    static PromptCatalog builtin();
    // Loads p1.txt/p2.txt/p3.txt/qa_focal.txt/qa_focus.txt from dir; files
    // that are absent fall back to the builtin template of the same id.
    static PromptCatalog from_dir(const std::filesystem::path& dir);

    const PromptTemplate& for_style(PromptStyle style) const;
    const PromptTemplate& for_focus(FocusVariant variant) const;
    Numbering numbering_of(PromptStyle style) const;

  private:
    std::map<std::string, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Output schema
// ---------------------------------------------------------------------------

enum class ValueKind { string_list, string, integer, number };

struct SchemaKey {
    CotField field;
    std::string key;  // canonical JSON key ("captions", "summary", ...)
    ValueKind kind;
};

// The JSON object shape owed by the model at one stage.
struct OutputSchemaSpec {
    std::vector<SchemaKey> keys;          // canonical order
    std::optional<int> clip_count;        // caption list length when known

    bool has(CotField f) const;
    std::vector<std::string> key_names() const;
};

// Partitions the active fields per stage: descriptive items (caption,
// summary) belong to stage1, reasoning items (reason, answer, confidence)
// to stage2, and the single stage owes everything.
OutputSchemaSpec build_output_schema(const CotFieldSet& fields, Stage stage,
                                     std::optional<int> clip_count = std::nullopt);

// The instruction block embedded in prompts: a shape description plus a
// literal example object (models format more reliably with one).
std::string format_instructions(const OutputSchemaSpec& schema, Numbering numbering);

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

// Renders the main prompt for one (mode, question, stage). Pure: equal
// inputs yield byte-identical text. stage1_output is embedded verbatim for
// stage2; focus_notes, when non-empty, are prepended as an attention note.
std::string render_prompt(const PromptCatalog& catalog, const ModeConfig& mode,
                          const Question& q, Stage stage,
                          const std::optional<std::string>& stage1_output = std::nullopt,
                          const std::string& focus_notes = {});

// Renders the preliminary prompt of a focus variant. qa_focal sees the
// question and options; qa_focus sees neither.
std::string render_focus_prompt(const PromptCatalog& catalog, const ModeConfig& mode,
                                const Question& q);

// Option block as it appears in prompts, one line per option.
std::string render_options(const Question& q, Numbering numbering);

// Marker at the start of a re-ask note; the mock backend keys off it too.
inline constexpr const char* kReminderPrefix = "Reminder (attempt";

// Appended to a prompt when the previous reply failed to parse. Distinct per
// attempt so re-asks never collide with the original in the cache.
std::string format_reminder(int attempt);

// Contiguous, non-overlapping (start, end) ranges covering [0, duration];
// every clip is clip_seconds long except possibly the last.
std::vector<std::pair<double, double>> clip_plan(double duration_seconds,
                                                 double clip_seconds);

}  // namespace modefuse
