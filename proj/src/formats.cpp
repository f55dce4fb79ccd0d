#include "modefuse/formats.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace modefuse {

using nlohmann::json;

namespace {

json read_json_file(const std::filesystem::path& path, ExitCode parse_failure_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        if (parse_failure_kind == ExitCode::config) {
            throw ConfigError("not valid JSON: " + path.string());
        }
        throw ValidationError("not valid JSON: " + path.string());
    }
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("short write on " + path.string());
}

}  // namespace

QuestionSet load_questions(const std::filesystem::path& path) {
    json j = read_json_file(path, ExitCode::validation);
    if (!j.is_array()) {
        throw ValidationError("question file must be a JSON array: " + path.string());
    }
    std::vector<Question> records;
    records.reserve(j.size());
    for (const auto& rec : j) {
        Question q;
        try {
            q.q_uid = rec.at("q_uid").get<std::string>();
            q.question_text = rec.at("question").get<std::string>();
            for (int i = 0; i < kOptionCount; ++i) {
                q.options[static_cast<std::size_t>(i)] =
                    rec.at("option " + std::to_string(i)).get<std::string>();
            }
            q.video_ref = rec.value("video_ref", "");
            if (rec.contains("truth")) q.ground_truth = rec.at("truth").get<int>();
        } catch (const json::exception& e) {
            throw ValidationError("bad question record in " + path.string() + ": " + e.what());
        }
        records.push_back(std::move(q));
    }
    return validate_question_set(std::move(records));
}

std::map<std::string, int> load_labels(const std::filesystem::path& path) {
    json j = read_json_file(path, ExitCode::validation);
    if (!j.is_object()) {
        throw ValidationError("labels file must be a JSON object: " + path.string());
    }
    std::map<std::string, int> out;
    for (const auto& [q_uid, v] : j.items()) {
        if (!v.is_number_integer()) {
            throw ValidationError("label for '" + q_uid + "' is not an integer");
        }
        out[q_uid] = v.get<int>();
    }
    return out;
}

QuestionSet apply_labels(const QuestionSet& qs, const std::map<std::string, int>& labels) {
    std::vector<Question> records = qs.questions();
    for (const auto& [q_uid, truth] : labels) {
        auto it = std::find_if(records.begin(), records.end(),
                               [&](const Question& q) { return q.q_uid == q_uid; });
        if (it == records.end()) {
            throw ValidationError("label for unknown question '" + q_uid + "'");
        }
        it->ground_truth = truth;
    }
    return validate_question_set(std::move(records));
}

QuestionSet questions_from_labels(const std::map<std::string, int>& labels) {
    std::vector<Question> records;
    records.reserve(labels.size());
    for (const auto& [q_uid, truth] : labels) {
        Question q;
        q.q_uid = q_uid;
        q.question_text = "(label only)";
        for (int i = 0; i < kOptionCount; ++i) {
            q.options[static_cast<std::size_t>(i)] = "option " + std::to_string(i);
        }
        q.ground_truth = truth;
        records.push_back(std::move(q));
    }
    return validate_question_set(std::move(records));
}

PredictionSet load_predictions(const std::filesystem::path& path) {
    json j = read_json_file(path, ExitCode::validation);
    PredictionSet p = PredictionSet::from_json(j);
    p.validate(nullptr);
    return p;
}

void save_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
    write_text_file(path, preds.to_json().dump(2) + "\n");
}

void save_records(const std::vector<RunRecord>& records, const std::filesystem::path& path,
                  bool canonical) {
    std::ostringstream out;
    for (const auto& r : records) out << r.to_json(canonical).dump() << "\n";
    write_text_file(path, out.str());
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<RunRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ValidationError("bad record line in " + path.string());
        }
        out.push_back(RunRecord::from_json(j));
    }
    return out;
}

const ModeConfig& RunConfig::mode(const std::string& mode_id) const {
    for (const auto& m : modes) {
        if (m.mode_id == mode_id) return m;
    }
    throw ConfigError("unknown mode '" + mode_id + "'");
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    json j = read_json_file(path, ExitCode::config);
    if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path.string());

    RunConfig cfg;
    try {
        if (!j.contains("backends") || !j.at("backends").is_array()) {
            throw ConfigError("config needs a 'backends' array");
        }
        for (const auto& b : j.at("backends")) {
            cfg.backends.push_back(BackendProfile::from_json(b));
        }
        if (!j.contains("modes") || !j.at("modes").is_array()) {
            throw ConfigError("config needs a 'modes' array");
        }
        for (const auto& m : j.at("modes")) cfg.modes.push_back(ModeConfig::from_json(m));
        if (j.contains("templates_dir")) {
            cfg.templates_dir = j.at("templates_dir").get<std::string>();
        }
        if (j.contains("cache_dir")) cfg.cache_dir = j.at("cache_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError("bad config " + path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        // Mode/backend shape problems inside a config are config problems.
        throw ConfigError("bad config " + path.string() + ": " + e.what());
    }

    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    if (!cfg.templates_dir.empty() && cfg.templates_dir.is_relative()) {
        cfg.templates_dir = base / cfg.templates_dir;
    }
    if (!cfg.cache_dir.empty() && cfg.cache_dir.is_relative()) {
        cfg.cache_dir = base / cfg.cache_dir;
    }

    std::map<std::string, int> mode_ids;
    for (const auto& m : cfg.modes) {
        if (++mode_ids[m.mode_id] > 1) throw ConfigError("duplicate mode_id '" + m.mode_id + "'");
        auto backend_known = [&](const std::string& id) {
            return std::any_of(cfg.backends.begin(), cfg.backends.end(),
                               [&](const BackendProfile& b) { return b.backend_id == id; });
        };
        if (!backend_known(m.backend_id)) {
            throw ConfigError("mode '" + m.mode_id + "' references unknown backend '" +
                              m.backend_id + "'");
        }
        if (m.focus_backend_id && !backend_known(*m.focus_backend_id)) {
            throw ConfigError("mode '" + m.mode_id + "' references unknown focus backend '" +
                              *m.focus_backend_id + "'");
        }
    }
    return cfg;
}

}  // namespace modefuse
