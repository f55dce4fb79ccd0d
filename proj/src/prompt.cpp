#include "modefuse/prompt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "builtin_templates.inc"

namespace modefuse {

const char* to_string(Numbering n) {
    return n == Numbering::zero_based ? "zero_based" : "one_based";
}

const char* to_string(Stage s) {
    switch (s) {
        case Stage::single: return "single";
        case Stage::stage1: return "stage1";
        case Stage::stage2: return "stage2";
        case Stage::preliminary: return "preliminary";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

const std::vector<std::string>& known_slots() {
    static const std::vector<std::string> slots = {
        "question", "options", "clip_seconds", "clip_index",
        "stage1_output", "focus_notes", "format_instructions",
    };
    return slots;
}

namespace {

bool is_known_slot(const std::string& name) {
    const auto& slots = known_slots();
    return std::find(slots.begin(), slots.end(), name) != slots.end();
}

// Finds the next {{name}} marker at or after pos. Returns npos when none.
std::size_t find_marker(const std::string& body, std::size_t pos, std::string& name,
                        std::size_t& end) {
    while (true) {
        std::size_t open = body.find("{{", pos);
        if (open == std::string::npos) return std::string::npos;
        std::size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) return std::string::npos;
        std::string candidate = body.substr(open + 2, close - open - 2);
        bool slot_like = !candidate.empty();
        for (char c : candidate) {
            if (!(std::islower(static_cast<unsigned char>(c)) || c == '_' ||
                  std::isdigit(static_cast<unsigned char>(c)))) {
                slot_like = false;
                break;
            }
        }
        if (slot_like) {
            name = std::move(candidate);
            end = close + 2;
            return open;
        }
        pos = open + 2;  // braces that are not a slot marker, e.g. JSON text
    }
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string id, const std::string& file_text) {
    PromptTemplate tpl;
    tpl.id = std::move(id);

    std::size_t pos = 0;
    while (pos < file_text.size() && file_text[pos] == '@') {
        std::size_t eol = file_text.find('\n', pos);
        std::string line = file_text.substr(pos, eol == std::string::npos
                                                     ? std::string::npos
                                                     : eol - pos);
        pos = eol == std::string::npos ? file_text.size() : eol + 1;

        std::istringstream iss(trim(line));
        std::string directive, value;
        iss >> directive >> value;
        if (directive == "@numbering") {
            if (value == "zero_based") tpl.declared_numbering = Numbering::zero_based;
            else if (value == "one_based") tpl.declared_numbering = Numbering::one_based;
            else throw ConfigError("template '" + tpl.id + "': bad @numbering value '" + value + "'");
        } else {
            throw ConfigError("template '" + tpl.id + "': unknown directive '" + directive + "'");
        }
    }
    tpl.body = file_text.substr(pos);

    std::string name;
    std::size_t end = 0;
    for (std::size_t at = 0; (at = find_marker(tpl.body, at, name, end)) != std::string::npos;
         at = end) {
        if (!is_known_slot(name)) {
            throw ConfigError("template '" + tpl.id + "': unknown slot '" + name + "'");
        }
    }
    return tpl;
}

std::string render_template(const PromptTemplate& tpl,
                            const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tpl.body.size());
    std::size_t pos = 0;
    std::string name;
    std::size_t end = 0;
    for (std::size_t at = 0; (at = find_marker(tpl.body, pos, name, end)) != std::string::npos;
         pos = end) {
        out.append(tpl.body, pos, at - pos);
        auto it = bindings.find(name);
        if (it == bindings.end()) {
            throw ValidationError("template '" + tpl.id + "': unbound slot '" + name + "'");
        }
        out.append(it->second);
    }
    out.append(tpl.body, pos, std::string::npos);
    return out;
}

PromptCatalog PromptCatalog::builtin() {
    PromptCatalog c;
    c.templates_.emplace("P1", PromptTemplate::parse("P1", detail::kBuiltinP1));
    c.templates_.emplace("P2", PromptTemplate::parse("P2", detail::kBuiltinP2));
    c.templates_.emplace("P3", PromptTemplate::parse("P3", detail::kBuiltinP3));
    c.templates_.emplace("qa_focal", PromptTemplate::parse("qa_focal", detail::kBuiltinQaFocal));
    c.templates_.emplace("qa_focus", PromptTemplate::parse("qa_focus", detail::kBuiltinQaFocus));
    return c;
}

PromptCatalog PromptCatalog::from_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("template directory not found: " + dir.string());
    }
    PromptCatalog c = builtin();
    static const std::pair<const char*, const char*> files[] = {
        {"P1", "p1.txt"}, {"P2", "p2.txt"}, {"P3", "p3.txt"},
        {"qa_focal", "qa_focal.txt"}, {"qa_focus", "qa_focus.txt"},
    };
    for (const auto& [id, filename] : files) {
        std::filesystem::path p = dir / filename;
        if (!std::filesystem::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("cannot read template file: " + p.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        c.templates_.insert_or_assign(id, PromptTemplate::parse(id, buf.str()));
    }
    return c;
}

const PromptTemplate& PromptCatalog::for_style(PromptStyle style) const {
    auto it = templates_.find(to_string(style));
    if (it == templates_.end()) {
        throw ConfigError(std::string("no template for style ") + to_string(style));
    }
    return it->second;
}

const PromptTemplate& PromptCatalog::for_focus(FocusVariant variant) const {
    if (variant == FocusVariant::none) {
        throw ValidationError("focus variant 'none' has no preliminary prompt");
    }
    auto it = templates_.find(to_string(variant));
    if (it == templates_.end()) {
        throw ConfigError(std::string("no template for focus variant ") + to_string(variant));
    }
    return it->second;
}

Numbering PromptCatalog::numbering_of(PromptStyle style) const {
    return for_style(style).declared_numbering;
}

// ---------------------------------------------------------------------------
// Output schema
// ---------------------------------------------------------------------------

bool OutputSchemaSpec::has(CotField f) const {
    return std::any_of(keys.begin(), keys.end(),
                       [f](const SchemaKey& k) { return k.field == f; });
}

std::vector<std::string> OutputSchemaSpec::key_names() const {
    std::vector<std::string> out;
    for (const auto& k : keys) out.push_back(k.key);
    return out;
}

OutputSchemaSpec build_output_schema(const CotFieldSet& fields, Stage stage,
                                     std::optional<int> clip_count) {
    if ((stage == Stage::single || stage == Stage::stage2) && !fields.answer) {
        throw ValidationError("output schema for an answering stage requires the answer field");
    }
    CotFieldSet owed = fields;
    if (stage == Stage::stage1) owed = fields.stage1_subset();
    if (stage == Stage::stage2) owed = fields.stage2_subset();

    OutputSchemaSpec spec;
    if (owed.caption) spec.keys.push_back({CotField::caption, "captions", ValueKind::string_list});
    if (owed.summary) spec.keys.push_back({CotField::summary, "summary", ValueKind::string});
    if (owed.reason) spec.keys.push_back({CotField::reason, "reason", ValueKind::string});
    if (owed.answer) spec.keys.push_back({CotField::answer, "answer", ValueKind::integer});
    if (owed.confidence) spec.keys.push_back({CotField::confidence, "confidence", ValueKind::number});
    if (owed.caption) spec.clip_count = clip_count;
    return spec;
}

namespace {

// Shape placeholder and example value per key, in the declared numbering.
std::string shape_line(const SchemaKey& k, Numbering numbering) {
    switch (k.field) {
        case CotField::caption:
            return "\"captions\": [\"<what happens in clip 1>\", \"<what happens in clip 2>\", \"...\"]";
        case CotField::summary:
            return "\"summary\": \"<a short summary of the entire video>\"";
        case CotField::reason:
            return "\"reason\": \"<why the chosen option is correct>\"";
        case CotField::answer:
            return numbering == Numbering::zero_based
                       ? "\"answer\": <the chosen option number, an integer from 0 to 4>"
                       : "\"answer\": <the chosen option number, an integer from 1 to 5>";
        case CotField::confidence:
            return "\"confidence\": <how certain you are, a number from 0.0 to 1.0>";
    }
    return {};
}

std::string example_value(const SchemaKey& k, Numbering numbering) {
    switch (k.field) {
        case CotField::caption:
            return "[\"C sorts screws on the table\", \"C starts assembling the shelf\"]";
        case CotField::summary:
            return "\"C lays out parts and assembles a shelf from them\"";
        case CotField::reason:
            return "\"most of the video shows assembly after the parts are sorted\"";
        case CotField::answer:
            return numbering == Numbering::zero_based ? "2" : "3";
        case CotField::confidence:
            return "0.8";
    }
    return {};
}

}  // namespace

std::string format_instructions(const OutputSchemaSpec& schema, Numbering numbering) {
    std::ostringstream out;
    out << "Respond with a single JSON object and nothing else, using exactly these keys:\n";
    out << "```json\n{\n";
    for (std::size_t i = 0; i < schema.keys.size(); ++i) {
        out << "  " << shape_line(schema.keys[i], numbering);
        if (i + 1 < schema.keys.size()) out << ",";
        out << "\n";
    }
    out << "}\n```\n";
    if (schema.has(CotField::caption) && schema.clip_count) {
        out << "The \"captions\" array must contain exactly " << *schema.clip_count
            << " entries, one per clip, in order.\n";
    }
    out << "For example:\n{";
    for (std::size_t i = 0; i < schema.keys.size(); ++i) {
        if (i) out << ", ";
        out << "\"" << schema.keys[i].key << "\": " << example_value(schema.keys[i], numbering);
    }
    out << "}";
    return out.str();
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_options(const Question& q, Numbering numbering) {
    std::ostringstream out;
    int base = numbering == Numbering::zero_based ? 0 : 1;
    for (int i = 0; i < kOptionCount; ++i) {
        if (i) out << "\n";
        out << (base + i) << ". " << q.options[static_cast<std::size_t>(i)];
    }
    return out.str();
}

namespace {

std::string format_number(double v) {
    char buf[32];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%g", v);
    }
    return buf;
}

}  // namespace

std::string render_prompt(const PromptCatalog& catalog, const ModeConfig& mode,
                          const Question& q, Stage stage,
                          const std::optional<std::string>& stage1_output,
                          const std::string& focus_notes) {
    if (stage == Stage::single && mode.paradigm != Paradigm::one_stage) {
        throw ValidationError("mode '" + mode.mode_id + "': stage 'single' requires one_stage");
    }
    if (stage != Stage::single && mode.paradigm != Paradigm::two_stage) {
        throw ValidationError("mode '" + mode.mode_id + "': staged rendering requires two_stage");
    }
    if (stage == Stage::stage2 && !stage1_output) {
        throw ValidationError("mode '" + mode.mode_id + "': stage2 requires stage1_output");
    }

    const PromptTemplate& tpl = catalog.for_style(mode.prompt_style);

    std::optional<int> clip_count;
    if (mode.video_seconds) {
        clip_count = static_cast<int>(clip_plan(*mode.video_seconds, mode.clip_seconds).size());
    }
    OutputSchemaSpec schema = build_output_schema(mode.cot_fields, stage, clip_count);

    std::map<std::string, std::string> bindings;
    bindings["question"] = q.question_text;
    bindings["options"] = render_options(q, tpl.declared_numbering);
    bindings["clip_seconds"] = format_number(mode.clip_seconds);
    bindings["clip_index"] = "";
    bindings["focus_notes"] =
        focus_notes.empty() ? std::string{}
                            : "Attention notes from a preliminary pass:\n" + focus_notes + "\n\n";
    bindings["stage1_output"] =
        stage == Stage::stage2
            ? "Findings from the first pass over the video:\n" + *stage1_output + "\n\n"
            : std::string{};
    bindings["format_instructions"] = format_instructions(schema, tpl.declared_numbering);
    return render_template(tpl, bindings);
}

std::string render_focus_prompt(const PromptCatalog& catalog, const ModeConfig& mode,
                                const Question& q) {
    const PromptTemplate& tpl = catalog.for_focus(mode.focus_variant);
    std::map<std::string, std::string> bindings;
    bindings["question"] = q.question_text;
    bindings["options"] = render_options(q, tpl.declared_numbering);
    bindings["clip_seconds"] = format_number(mode.clip_seconds);
    bindings["clip_index"] = "";
    bindings["focus_notes"] = "";
    bindings["stage1_output"] = "";
    bindings["format_instructions"] = "";
    return render_template(tpl, bindings);
}

std::string format_reminder(int attempt) {
    std::ostringstream out;
    out << "\n\n" << kReminderPrefix << " " << attempt
        << "): your previous reply could not be parsed. Respond with the single JSON "
           "object described above and nothing else.";
    return out.str();
}

std::vector<std::pair<double, double>> clip_plan(double duration_seconds,
                                                 double clip_seconds) {
    if (!(duration_seconds > 0)) throw ValidationError("clip_plan: duration must be > 0");
    if (!(clip_seconds > 0)) throw ValidationError("clip_plan: clip_seconds must be > 0");

    std::vector<std::pair<double, double>> out;
    auto n = static_cast<std::size_t>(std::ceil(duration_seconds / clip_seconds));
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double start = static_cast<double>(i) * clip_seconds;
        if (start >= duration_seconds) break;
        out.emplace_back(start, std::min(start + clip_seconds, duration_seconds));
    }
    return out;
}

}  // namespace modefuse
