#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eventnav {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);

// Dedup key for event nodes: lowercase, whitespace collapsed, trimmed,
// trailing . ! ? removed. May return an empty string.
std::string normalize_text(std::string_view s);

// Collapses all whitespace (including newlines) so the text fits on one line.
std::string single_line(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view s);

// Lowercase alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view s);

std::size_t word_count(std::string_view s);

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

}  // namespace eventnav
