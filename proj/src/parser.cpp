#include "modefuse/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>

#include <nlohmann/json.hpp>

namespace modefuse {

using nlohmann::json;

const char* to_string(ParseFailure f) {
    switch (f) {
        case ParseFailure::none: return "none";
        case ParseFailure::no_json_found: return "no_json_found";
        case ParseFailure::missing_key: return "missing_key";
        case ParseFailure::wrong_kind: return "wrong_kind";
        case ParseFailure::answer_out_of_range: return "answer_out_of_range";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Candidate extraction
// ---------------------------------------------------------------------------

namespace {

// All top-level balanced {...} spans, skipping over string literals.
std::vector<std::string> balanced_spans(const std::string& text) {
    std::vector<std::string> spans;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"' && depth > 0) {
            in_string = true;
        } else if (c == '{') {
            if (depth == 0) start = i;
            ++depth;
        } else if (c == '}') {
            if (depth > 0 && --depth == 0) {
                spans.push_back(text.substr(start, i - start + 1));
            }
        }
    }
    return spans;
}

std::string trim_ws(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> repair_candidates(const std::string& raw) {
    std::vector<std::string> out;
    auto push_unique = [&out](std::string s) {
        if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) {
            out.push_back(std::move(s));
        }
    };

    // Fenced blocks, in order of appearance. An optional language tag on the
    // opening line is dropped.
    std::size_t pos = 0;
    while (true) {
        std::size_t open = raw.find("```", pos);
        if (open == std::string::npos) break;
        std::size_t body_start = raw.find('\n', open + 3);
        if (body_start == std::string::npos) break;
        std::size_t close = raw.find("```", body_start);
        if (close == std::string::npos) break;
        std::string content = trim_ws(raw.substr(body_start + 1, close - body_start - 1));
        // Keep only brace-balanced fenced content; prose fences are useless
        // as JSON candidates.
        auto inner = balanced_spans(content);
        if (content.size() >= 2 && content.front() == '{' && content.back() == '}' &&
            inner.size() == 1 && inner.front() == content) {
            push_unique(content);
        } else {
            for (auto& span : inner) push_unique(std::move(span));
        }
        pos = close + 3;
    }

    auto spans = balanced_spans(raw);
    if (!spans.empty()) {
        push_unique(spans.front());
        push_unique(spans.back());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schema-directed extraction
// ---------------------------------------------------------------------------

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Accepted key spellings per field, canonical name first. Matching is
// case-insensitive; the table itself is documented in docs/formats.md.
const std::vector<std::string>& aliases_for(CotField f) {
    static const std::vector<std::string> caption = {"captions", "caption"};
    static const std::vector<std::string> summary = {"summary", "summarization"};
    static const std::vector<std::string> reason = {"reason", "reasoning", "rationale"};
    static const std::vector<std::string> answer = {"answer", "ans", "option", "selected_option"};
    static const std::vector<std::string> confidence = {"confidence", "conf", "confidence_level"};
    switch (f) {
        case CotField::caption: return caption;
        case CotField::summary: return summary;
        case CotField::reason: return reason;
        case CotField::answer: return answer;
        case CotField::confidence: return confidence;
    }
    return answer;
}

const json* find_key(const json& obj, CotField field) {
    for (const auto& alias : aliases_for(field)) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (lower(it.key()) == alias) return &it.value();
        }
    }
    return nullptr;
}

std::optional<double> to_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = trim_ws(v.get<std::string>());
        if (s.empty()) return std::nullopt;
        char* endp = nullptr;
        double d = std::strtod(s.c_str(), &endp);
        if (endp == s.c_str() + s.size()) return d;
    }
    return std::nullopt;
}

std::optional<int> to_integer(const json& v) {
    auto d = to_number(v);
    if (!d || !std::isfinite(*d) || *d != std::floor(*d)) return std::nullopt;
    return static_cast<int>(*d);
}

// One caption entry: either "text" or {"span": [a, b], "text": "..."}.
std::optional<CaptionEntry> to_caption(const json& v) {
    if (v.is_string()) return CaptionEntry{std::nullopt, v.get<std::string>()};
    if (v.is_object()) {
        CaptionEntry e;
        auto text = v.find("text");
        if (text == v.end() || !text->is_string()) return std::nullopt;
        e.text = text->get<std::string>();
        auto span = v.find("span");
        if (span != v.end()) {
            if (!span->is_array() || span->size() != 2 || !(*span)[0].is_number() ||
                !(*span)[1].is_number()) {
                return std::nullopt;
            }
            e.span = std::make_pair((*span)[0].get<double>(), (*span)[1].get<double>());
        }
        return e;
    }
    return std::nullopt;
}

ParseResult fail(ParseFailure f, std::string detail) {
    ParseResult r;
    r.failure = f;
    r.detail = std::move(detail);
    return r;
}

ParseResult extract(const json& obj, const OutputSchemaSpec& schema, Numbering numbering) {
    StructuredAnswer ans;
    for (const SchemaKey& key : schema.keys) {
        const json* v = find_key(obj, key.field);
        if (!v) return fail(ParseFailure::missing_key, "missing key '" + key.key + "'");

        switch (key.field) {
            case CotField::caption: {
                if (!v->is_array()) {
                    return fail(ParseFailure::wrong_kind, "'captions' is not a list");
                }
                std::vector<CaptionEntry> entries;
                for (const auto& item : *v) {
                    auto e = to_caption(item);
                    if (!e) {
                        return fail(ParseFailure::wrong_kind, "'captions' entry is not text");
                    }
                    entries.push_back(std::move(*e));
                }
                ans.captions = std::move(entries);
                break;
            }
            case CotField::summary:
            case CotField::reason: {
                if (!v->is_string()) {
                    return fail(ParseFailure::wrong_kind, "'" + key.key + "' is not a string");
                }
                if (key.field == CotField::summary) ans.summary = v->get<std::string>();
                else ans.reason = v->get<std::string>();
                break;
            }
            case CotField::answer: {
                auto n = to_integer(*v);
                if (!n) return fail(ParseFailure::wrong_kind, "'answer' is not an integer");
                int normalized = numbering == Numbering::one_based ? *n - 1 : *n;
                if (normalized < 0 || normalized >= kOptionCount) {
                    return fail(ParseFailure::answer_out_of_range,
                                "answer " + std::to_string(*n) + " outside the option range");
                }
                ans.answer = normalized;
                break;
            }
            case CotField::confidence: {
                auto d = to_number(*v);
                if (!d || !std::isfinite(*d)) {
                    return fail(ParseFailure::wrong_kind, "'confidence' is not a number");
                }
                ans.confidence = std::clamp(*d, 0.0, 1.0);
                break;
            }
        }
    }
    ParseResult r;
    r.value = std::move(ans);
    return r;
}

}  // namespace

ParseResult parse_structured(const std::string& raw, const OutputSchemaSpec& schema,
                             Numbering numbering) {
    auto candidates = repair_candidates(raw);
    if (candidates.empty()) {
        return fail(ParseFailure::no_json_found, "no balanced JSON object in reply");
    }

    ParseResult first_failure;
    bool have_failure = false;
    for (const auto& candidate : candidates) {
        json obj = json::parse(candidate, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) continue;
        ParseResult r = extract(obj, schema, numbering);
        if (r.ok()) return r;
        if (!have_failure) {
            first_failure = std::move(r);
            have_failure = true;
        }
    }
    if (have_failure) return first_failure;
    return fail(ParseFailure::no_json_found, "no candidate parsed as a JSON object");
}

std::string serialize_answer(const StructuredAnswer& answer) {
    return answer.to_json().dump();
}

}  // namespace modefuse
