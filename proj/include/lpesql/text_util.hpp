#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lpesql {

/// 64-bit FNV-1a over the bytes of `data`, starting from `basis`.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Lower-case 16-digit hex rendering of a 64-bit value.
std::string hex64(std::uint64_t v);

/// Stable short digest of a prompt, used as a script key and in run logs.
std::string prompt_digest(std::string_view prompt);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Split `url` into "scheme://host[:port]" and the path ("/" when absent).
struct UrlParts {
  std::string origin;
  std::string path;
};
UrlParts split_url(const std::string& url);

/// Fixed two-decimal rendering ("66.67").
std::string format_fixed2(double v);

}  // namespace lpesql
