#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace modefuse {

// Hex-encoded SHA-256, used for cache keys and content digests.
std::string sha256_hex(std::string_view data);

// FNV-1a 64-bit. Cheap, stable across platforms; used by the mock backend
// to derive deterministic replies from prompt bytes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace modefuse
