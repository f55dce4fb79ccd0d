#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "modefuse/backend.hpp"
#include "modefuse/prompt.hpp"

namespace modefuse {

// What a cache entry preserves from a backend reply. Enough to replay
// parsing without the backend; timing is deliberately not stored.
struct CachedReply {
    std::string text;
    int attempts = 1;
    long prompt_tokens = -1;
    long completion_tokens = -1;
    std::string model;
};

// Pure digest over everything that determines a reply: the mode's behavior
// fingerprint, the question, the stage, the exact prompt bytes, and the
// profile's model + sampling. Any byte of prompt change changes the key.
std::string cache_key(const ModeConfig& mode, const std::string& q_uid, Stage stage,
                      const std::string& prompt, const BackendProfile& profile);

// On-disk content-addressed store: <root>/<key[0:2]>/<key>.json, written via
// temp file + rename so readers never observe partial entries. Readers need
// no lock; writes are serialized.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path root);

    std::optional<CachedReply> lookup(const std::string& key) const;
    void store(const std::string& key, const CachedReply& reply);

    const std::filesystem::path& root() const { return root_; }

  private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path root_;
    mutable std::mutex write_mu_;
};

}  // namespace modefuse
