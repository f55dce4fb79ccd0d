#pragma once

#include <string>
#include <vector>

#include "modefuse/core.hpp"
#include "modefuse/prompt.hpp"

namespace modefuse {

// Parse failures are ordinary outcomes, not exceptions: the pipeline re-asks
// and eventually abstains on them.
enum class ParseFailure {
    none,
    no_json_found,
    missing_key,
    wrong_kind,
    answer_out_of_range,
};

const char* to_string(ParseFailure f);

struct ParseResult {
    StructuredAnswer value;
    ParseFailure failure = ParseFailure::none;
    std::string detail;

    bool ok() const { return failure == ParseFailure::none; }
};

// Candidate JSON substrings in priority order: fenced code blocks first,
// then the first balanced brace span, then the last one. Brace matching is
// string-aware, so braces inside JSON strings do not confuse it.
std::vector<std::string> repair_candidates(const std::string& raw);

// Extracts a StructuredAnswer matching the schema from arbitrary model text.
// Key matching is case-insensitive with a documented alias table; answers
// declared one_based are normalized to 0-based here and nowhere else;
// confidence is clamped to [0,1]. Never substitutes a default answer.
ParseResult parse_structured(const std::string& raw, const OutputSchemaSpec& schema,
                             Numbering numbering);

// Canonical serialization of a parsed answer; parse_structured on the result
// with the answer's own schema round-trips exactly.
std::string serialize_answer(const StructuredAnswer& answer);

}  // namespace modefuse
