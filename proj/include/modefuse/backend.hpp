#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "modefuse/core.hpp"

namespace modefuse {

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

enum class BackendKind { http, mock };

// Scripted behavior of the mock backend for a tagged request.
struct MockAction {
    enum class Kind { answer, garbage, garbage_once, fail };
    Kind kind = Kind::answer;
    int answer = 0;  // 0-based, for Kind::answer
};

struct BackendProfile {
    std::string backend_id;
    BackendKind kind = BackendKind::mock;
    std::string endpoint;   // http: base URL, e.g. "http://127.0.0.1:8080/v1"
    std::string auth_env;   // environment variable holding the bearer token; empty = none
    std::string model;
    int timeout_ms = 60000;
    int max_retries = 3;
    bool supports_video = false;

    // Concurrency contract: at most max_in_flight requests on the wire per
    // backend, optionally paced to requests_per_second.
    int max_in_flight = 8;
    std::optional<double> requests_per_second;
    int retry_backoff_ms = 250;

    // Mock-only knobs.
    std::uint64_t seed = 0;
    std::map<std::string, MockAction> script;  // tag (q_uid) -> behavior
    int mock_latency_ms = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static BackendProfile from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Request / reply
// ---------------------------------------------------------------------------

struct MediaRef {
    std::string uri;
};

struct ModelRequest {
    std::string prompt;
    std::vector<MediaRef> media;
    SamplingParams sampling;
    // Opaque routing tag (the q_uid). Ignored by HTTP backends; the mock
    // uses it to look up scripted behavior.
    std::string tag;
};

struct ModelReply {
    std::string text;          // raw, byte-exact; parsing happens downstream
    int attempts = 1;
    double latency_ms = 0.0;
    long prompt_tokens = -1;   // -1 when the endpoint reported no usage
    long completion_tokens = -1;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

// Base class owning the per-backend concurrency gate and pacing. Subclasses
// implement perform(); callers always go through invoke().
class Backend {
  public:
    explicit Backend(BackendProfile profile);
    virtual ~Backend() = default;

    const BackendProfile& profile() const { return profile_; }
    ModelReply invoke(const ModelRequest& req);

  protected:
    virtual ModelReply perform(const ModelRequest& req) = 0;

    // Blocks until a wire slot is due under the rate limit. Retried attempts
    // each pace separately.
    void pace();

  private:
    BackendProfile profile_;
    std::mutex gate_mu_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
    std::mutex pace_mu_;
    std::chrono::steady_clock::time_point next_slot_{};
};

// OpenAI-compatible chat-completions client. One wire dialect; vendor quirks
// belong in proxies or sibling subclasses, not here.
class HttpBackend : public Backend {
  public:
    explicit HttpBackend(BackendProfile profile);

  protected:
    ModelReply perform(const ModelRequest& req) override;

  private:
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // e.g. "/v1"
};

// Deterministic offline stand-in: the reply is a pure function of
// (prompt bytes, seed, script). It reads the JSON example embedded in the
// prompt to decide which keys to emit, so the whole pipeline runs with zero
// network access.
class MockBackend : public Backend {
  public:
    explicit MockBackend(BackendProfile profile);

    std::uint64_t calls() const { return calls_.load(); }
    static std::uint64_t total_calls();
    static void reset_total_calls();

  protected:
    ModelReply perform(const ModelRequest& req) override;

  private:
    std::atomic<std::uint64_t> calls_{0};
};

// Pure text generator behind MockBackend, exposed for direct testing.
std::string mock_reply(const std::string& prompt, std::uint64_t seed,
                       const std::map<std::string, MockAction>& script,
                       const std::string& tag);

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

class BackendRegistry {
  public:
    BackendRegistry() = default;
    explicit BackendRegistry(std::vector<BackendProfile> profiles, bool offline = false);

    bool has(const std::string& backend_id) const;
    // Builds the backend on first use. In offline runs, resolving an HTTP
    // profile is a config error.
    std::shared_ptr<Backend> get(const std::string& backend_id) const;

  private:
    std::vector<BackendProfile> profiles_;
    bool offline_ = false;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::shared_ptr<Backend>> built_;
};

}  // namespace modefuse
