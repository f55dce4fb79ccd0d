#include "modefuse/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "modefuse/digest.hpp"
#include "modefuse/parser.hpp"
#include "modefuse/prompt.hpp"

namespace modefuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

namespace {

MockAction mock_action_from_json(const json& v) {
    MockAction a;
    if (v.is_number_integer()) {
        a.kind = MockAction::Kind::answer;
        a.answer = v.get<int>();
        if (a.answer < 0 || a.answer >= kOptionCount) {
            throw ConfigError("mock script answer " + std::to_string(a.answer) +
                              " out of range 0..4");
        }
        return a;
    }
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "garbage") a.kind = MockAction::Kind::garbage;
        else if (s == "garbage_once") a.kind = MockAction::Kind::garbage_once;
        else if (s == "fail") a.kind = MockAction::Kind::fail;
        else throw ConfigError("unknown mock script action '" + s + "'");
        return a;
    }
    throw ConfigError("mock script entries must be an option index or an action name");
}

json mock_action_to_json(const MockAction& a) {
    switch (a.kind) {
        case MockAction::Kind::answer: return a.answer;
        case MockAction::Kind::garbage: return "garbage";
        case MockAction::Kind::garbage_once: return "garbage_once";
        case MockAction::Kind::fail: return "fail";
    }
    return nullptr;
}

}  // namespace

void BackendProfile::validate() const {
    if (backend_id.empty()) throw ConfigError("backend with empty backend_id");
    if (timeout_ms <= 0) throw ConfigError("backend '" + backend_id + "': timeout must be > 0");
    if (max_retries < 0) throw ConfigError("backend '" + backend_id + "': max_retries must be >= 0");
    if (max_in_flight < 1) {
        throw ConfigError("backend '" + backend_id + "': max_in_flight must be >= 1");
    }
    if (requests_per_second && !(*requests_per_second > 0)) {
        throw ConfigError("backend '" + backend_id + "': requests_per_second must be > 0");
    }
    if (kind == BackendKind::http && endpoint.empty()) {
        throw ConfigError("backend '" + backend_id + "': http backend requires an endpoint");
    }
}

json BackendProfile::to_json() const {
    json j;
    j["backend_id"] = backend_id;
    j["kind"] = kind == BackendKind::http ? "http" : "mock";
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    if (!auth_env.empty()) j["auth_env"] = auth_env;
    j["model"] = model;
    j["timeout_ms"] = timeout_ms;
    j["max_retries"] = max_retries;
    j["supports_video"] = supports_video;
    j["max_in_flight"] = max_in_flight;
    if (requests_per_second) j["requests_per_second"] = *requests_per_second;
    j["retry_backoff_ms"] = retry_backoff_ms;
    if (kind == BackendKind::mock) {
        j["seed"] = seed;
        if (mock_latency_ms > 0) j["mock_latency_ms"] = mock_latency_ms;
        if (!script.empty()) {
            json s = json::object();
            for (const auto& [tag, action] : script) s[tag] = mock_action_to_json(action);
            j["script"] = std::move(s);
        }
    }
    return j;
}

BackendProfile BackendProfile::from_json(const json& j) {
    BackendProfile p;
    try {
        p.backend_id = j.at("backend_id").get<std::string>();
        const std::string kind = j.value("kind", "mock");
        if (kind == "http") p.kind = BackendKind::http;
        else if (kind == "mock") p.kind = BackendKind::mock;
        else throw ConfigError("backend '" + p.backend_id + "': unknown kind '" + kind + "'");
        p.endpoint = j.value("endpoint", "");
        p.auth_env = j.value("auth_env", "");
        p.model = j.value("model", "");
        p.timeout_ms = j.value("timeout_ms", 60000);
        p.max_retries = j.value("max_retries", 3);
        p.supports_video = j.value("supports_video", false);
        p.max_in_flight = j.value("max_in_flight", 8);
        if (j.contains("requests_per_second")) {
            p.requests_per_second = j.at("requests_per_second").get<double>();
        }
        p.retry_backoff_ms = j.value("retry_backoff_ms", 250);
        p.seed = j.value("seed", std::uint64_t{0});
        p.mock_latency_ms = j.value("mock_latency_ms", 0);
        if (j.contains("script")) {
            for (const auto& [tag, v] : j.at("script").items()) {
                p.script[tag] = mock_action_from_json(v);
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad backend record: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Backend base: concurrency gate + pacing
// ---------------------------------------------------------------------------

Backend::Backend(BackendProfile profile) : profile_(std::move(profile)) {
    profile_.validate();
    next_slot_ = std::chrono::steady_clock::now();
}

void Backend::pace() {
    if (!profile_.requests_per_second) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / *profile_.requests_per_second));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(pace_mu_);
        slot = std::max(next_slot_, std::chrono::steady_clock::now());
        next_slot_ = slot + interval;
    }
    std::this_thread::sleep_until(slot);
}

ModelReply Backend::invoke(const ModelRequest& req) {
    {
        std::unique_lock lock(gate_mu_);
        gate_cv_.wait(lock, [this] { return in_flight_ < profile_.max_in_flight; });
        ++in_flight_;
    }
    const auto t0 = std::chrono::steady_clock::now();
    ModelReply reply;
    try {
        reply = perform(req);
    } catch (...) {
        {
            std::lock_guard lock(gate_mu_);
            --in_flight_;
        }
        gate_cv_.notify_one();
        throw;
    }
    {
        std::lock_guard lock(gate_mu_);
        --in_flight_;
    }
    gate_cv_.notify_one();
    reply.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return reply;
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

HttpBackend::HttpBackend(BackendProfile profile) : Backend(std::move(profile)) {
    const std::string& ep = this->profile().endpoint;
    const std::size_t scheme_end = ep.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend '" + this->profile().backend_id +
                          "': endpoint must include a scheme: " + ep);
    }
    const std::size_t path_start = ep.find('/', scheme_end + 3);
    host_ = path_start == std::string::npos ? ep : ep.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : ep.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

ModelReply HttpBackend::perform(const ModelRequest& req) {
    const BackendProfile& p = profile();

    std::string token;
    if (!p.auth_env.empty()) {
        const char* v = std::getenv(p.auth_env.c_str());
        if (!v || !*v) {
            throw AuthError("backend '" + p.backend_id + "': auth variable '" + p.auth_env +
                            "' is not set");
        }
        token = v;
    }

    json body;
    body["model"] = p.model;
    body["temperature"] = req.sampling.temperature;
    body["max_tokens"] = req.sampling.max_output_tokens;
    if (req.media.empty()) {
        body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
    } else {
        json parts = json::array();
        parts.push_back(json{{"type", "text"}, {"text", req.prompt}});
        for (const auto& m : req.media) {
            if (p.supports_video) {
                parts.push_back(json{{"type", "video_url"}, {"video_url", {{"url", m.uri}}}});
            } else {
                parts.push_back(json{{"type", "image_url"}, {"image_url", {{"url", m.uri}}}});
            }
        }
        body["messages"] = json::array({json{{"role", "user"}, {"content", std::move(parts)}}});
    }
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    thread_local std::mt19937_64 jitter_rng{std::random_device{}()};

    int attempts = 0;
    std::string last_error;
    for (;;) {
        ++attempts;
        pace();

        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::milliseconds(p.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(p.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(p.timeout_ms));

        auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                               "application/json");
        if (!res) {
            last_error = "backend '" + p.backend_id +
                         "': transport failure: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("backend '" + p.backend_id + "': HTTP " +
                            std::to_string(res->status) + " (authentication rejected)");
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "backend '" + p.backend_id + "': HTTP " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw BackendError("backend '" + p.backend_id + "': HTTP " +
                               std::to_string(res->status) + ": " + res->body.substr(0, 200));
        } else {
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("choices") ||
                !parsed["choices"].is_array() || parsed["choices"].empty()) {
                throw MalformedReplyError("backend '" + p.backend_id +
                                          "': response is not a chat completion: " +
                                          res->body.substr(0, 200));
            }
            const json& msg = parsed["choices"][0];
            if (!msg.contains("message") || !msg["message"].contains("content") ||
                !msg["message"]["content"].is_string()) {
                throw MalformedReplyError("backend '" + p.backend_id +
                                          "': completion has no message content");
            }
            ModelReply reply;
            reply.text = msg["message"]["content"].get<std::string>();
            reply.attempts = attempts;
            if (parsed.contains("usage") && parsed["usage"].is_object()) {
                const json& usage = parsed["usage"];
                if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number()) {
                    reply.prompt_tokens = usage["prompt_tokens"].get<long>();
                }
                if (usage.contains("completion_tokens") &&
                    usage["completion_tokens"].is_number()) {
                    reply.completion_tokens = usage["completion_tokens"].get<long>();
                }
            }
            return reply;
        }

        if (attempts > p.max_retries) {
            throw TransportError(last_error + " (gave up after " + std::to_string(attempts) +
                                 " attempts)", attempts);
        }
        const int base = p.retry_backoff_ms * (1 << std::min(attempts - 1, 6));
        std::uniform_int_distribution<int> jitter(0, std::max(1, base / 2));
        std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter(jitter_rng)));
    }
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

namespace {

std::atomic<std::uint64_t> g_mock_calls{0};

std::uint64_t scramble(std::uint64_t h) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
}

const char* kActionBank[] = {
    "sorts the parts laid out on the table", "washes vegetables at the sink",
    "folds laundry into neat piles",         "measures a plank before cutting",
    "stirs the pot on the stove",            "wipes the counter clean",
    "arranges tools on the pegboard",        "kneads dough on the board",
};
constexpr std::size_t kActionBankSize = sizeof(kActionBank) / sizeof(kActionBank[0]);

std::string bank_phrase(std::uint64_t h, std::size_t salt) {
    return std::string("C ") + kActionBank[scramble(h + salt * 0x9e3779b9ULL) % kActionBankSize];
}

}  // namespace

std::string mock_reply(const std::string& prompt, std::uint64_t seed,
                       const std::map<std::string, MockAction>& script,
                       const std::string& tag) {
    std::uint64_t h = scramble(fnv1a64(prompt) ^ scramble(seed + 0x517cc1b727220a95ULL));

    const MockAction* action = nullptr;
    if (auto it = script.find(tag); it != script.end()) action = &it->second;

    if (action && action->kind == MockAction::Kind::fail) {
        throw TransportError("mock backend: scripted failure for tag '" + tag + "'", 1);
    }
    const bool reasked = prompt.find(kReminderPrefix) != std::string::npos;
    if (action && (action->kind == MockAction::Kind::garbage ||
                   (action->kind == MockAction::Kind::garbage_once && !reasked))) {
        return "I watched the video but cannot commit to the requested structure. "
               "The person seems busy throughout and several options look plausible.";
    }

    // The last parseable JSON object in the prompt is the literal example from
    // the instruction block; its keys define the reply shape.
    json example;
    bool have_example = false;
    for (const auto& candidate : repair_candidates(prompt)) {
        json parsed = json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            example = std::move(parsed);
            have_example = true;
        }
    }
    if (!have_example) {
        // Free-form request (e.g. a focus preliminary): deterministic note.
        return "Note: pay attention to how " + bank_phrase(h, 1) + " and later " +
               bank_phrase(h, 2) + "; the transition between the two matters.";
    }

    auto wants = [&example](const char* key) {
        for (auto it = example.begin(); it != example.end(); ++it) {
            std::string k = it.key();
            std::transform(k.begin(), k.end(), k.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (k == key) return true;
        }
        return false;
    };

    const bool one_based = prompt.find("an integer from 1 to 5") != std::string::npos;
    int answer = action && action->kind == MockAction::Kind::answer
                     ? action->answer
                     : static_cast<int>(scramble(h + 0xa5a5) % kOptionCount);

    std::size_t caption_count = 3;
    {
        static const std::regex count_re(R"(exactly (\d+) entries)");
        std::smatch m;
        if (std::regex_search(prompt, m, count_re)) {
            caption_count = std::min<std::size_t>(std::stoul(m[1].str()), 64);
        }
    }

    nlohmann::ordered_json out;
    if (wants("captions")) {
        nlohmann::ordered_json caps = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < caption_count; ++i) caps.push_back(bank_phrase(h, 10 + i));
        out["captions"] = std::move(caps);
    }
    if (wants("summary")) {
        out["summary"] = "Across the video, " + bank_phrase(h, 3) + " and eventually " +
                         bank_phrase(h, 4) + ".";
    }
    if (wants("reason")) {
        out["reason"] = "The decisive stretch is where " + bank_phrase(h, 5) +
                        ", which matches this option best.";
    }
    out["answer"] = answer + (one_based ? 1 : 0);
    if (wants("confidence")) {
        out["confidence"] = static_cast<double>(scramble(h + 0x77) % 51 + 50) / 100.0;
    }

    const std::string body = out.dump();
    switch (scramble(h + 0xbeef) % 3) {
        case 0: return body;
        case 1: return "```json\n" + body + "\n```";
        default:
            return "After reviewing the clips, here is my conclusion.\n" + body +
                   "\nLet me know if another pass is needed.";
    }
}

MockBackend::MockBackend(BackendProfile profile) : Backend(std::move(profile)) {}

std::uint64_t MockBackend::total_calls() { return g_mock_calls.load(); }
void MockBackend::reset_total_calls() { g_mock_calls.store(0); }

ModelReply MockBackend::perform(const ModelRequest& req) {
    pace();
    calls_.fetch_add(1);
    g_mock_calls.fetch_add(1);
    const BackendProfile& p = profile();
    if (p.mock_latency_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(p.mock_latency_ms));
    }
    ModelReply reply;
    reply.text = mock_reply(req.prompt, p.seed, p.script, req.tag);
    reply.attempts = 1;
    reply.prompt_tokens = static_cast<long>(req.prompt.size() / 4);
    reply.completion_tokens = static_cast<long>(reply.text.size() / 4);
    return reply;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

BackendRegistry::BackendRegistry(std::vector<BackendProfile> profiles, bool offline)
    : profiles_(std::move(profiles)), offline_(offline) {
    std::map<std::string, int> seen;
    for (const auto& p : profiles_) {
        p.validate();
        if (++seen[p.backend_id] > 1) {
            throw ConfigError("duplicate backend_id '" + p.backend_id + "'");
        }
    }
}

bool BackendRegistry::has(const std::string& backend_id) const {
    return std::any_of(profiles_.begin(), profiles_.end(),
                       [&](const BackendProfile& p) { return p.backend_id == backend_id; });
}

std::shared_ptr<Backend> BackendRegistry::get(const std::string& backend_id) const {
    std::lock_guard lock(mu_);
    if (auto it = built_.find(backend_id); it != built_.end()) return it->second;
    for (const auto& p : profiles_) {
        if (p.backend_id != backend_id) continue;
        std::shared_ptr<Backend> b;
        if (p.kind == BackendKind::mock) {
            b = std::make_shared<MockBackend>(p);
        } else {
            if (offline_) {
                throw ConfigError("backend '" + backend_id +
                                  "' requires network access, which --offline forbids");
            }
            b = std::make_shared<HttpBackend>(p);
        }
        built_.emplace(backend_id, b);
        return b;
    }
    throw ConfigError("unknown backend_id '" + backend_id + "'");
}

}  // namespace modefuse
