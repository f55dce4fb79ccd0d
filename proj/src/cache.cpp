#include "modefuse/cache.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modefuse/digest.hpp"

namespace modefuse {

using nlohmann::json;

std::string cache_key(const ModeConfig& mode, const std::string& q_uid, Stage stage,
                      const std::string& prompt, const BackendProfile& profile) {
    json material;
    material["fingerprint"] = mode.fingerprint_material();
    material["q_uid"] = q_uid;
    material["stage"] = to_string(stage);
    material["prompt"] = prompt;
    material["model"] = profile.model;
    material["sampling"] = {
        {"temperature", mode.sampling.temperature},
        {"max_output_tokens", mode.sampling.max_output_tokens},
    };
    return sha256_hex(material.dump());
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError("cannot create cache directory " + root_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    if (key.size() < 3) throw ValidationError("cache key too short: " + key);
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CachedReply> ResponseCache::lookup(const std::string& key) const {
    const std::filesystem::path p = path_for(key);
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text")) {
        return std::nullopt;  // damaged entry; treat as a miss
    }
    CachedReply r;
    r.text = j.at("text").get<std::string>();
    r.attempts = j.value("attempts", 1);
    r.prompt_tokens = j.value("prompt_tokens", -1L);
    r.completion_tokens = j.value("completion_tokens", -1L);
    r.model = j.value("model", "");
    return r;
}

void ResponseCache::store(const std::string& key, const CachedReply& reply) {
    const std::filesystem::path p = path_for(key);

    json j;
    j["text"] = reply.text;
    j["attempts"] = reply.attempts;
    if (reply.prompt_tokens >= 0) j["prompt_tokens"] = reply.prompt_tokens;
    if (reply.completion_tokens >= 0) j["completion_tokens"] = reply.completion_tokens;
    if (!reply.model.empty()) j["model"] = reply.model;
    const std::string payload = j.dump(2);

    std::lock_guard lock(write_mu_);
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) {
        throw IoError("cannot create cache shard " + p.parent_path().string() + ": " +
                      ec.message());
    }
    const std::filesystem::path tmp = p.parent_path() / (key + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache entry " + tmp.string());
        out << payload;
        if (!out.flush()) throw IoError("short write on cache entry " + tmp.string());
    }
    std::filesystem::rename(tmp, p, ec);
    if (ec) throw IoError("cannot publish cache entry " + p.string() + ": " + ec.message());
}

}  // namespace modefuse
