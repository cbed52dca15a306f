#include "eventnav/text.hpp"

#include <fmt/format.h>

#include <cctype>

#include "eventnav/error.hpp"

namespace eventnav {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::empty_sequence: return "EmptySequence";
    case Errc::malformed_text: return "MalformedText";
    case Errc::unknown_node: return "UnknownNode";
    case Errc::io_error: return "IoError";
    case Errc::format_error: return "FormatError";
    case Errc::missing_field: return "MissingField";
    case Errc::empty_subtask_list: return "EmptySubtaskList";
    case Errc::no_task_line: return "NoTaskLine";
    case Errc::no_subtasks: return "NoSubtasks";
    case Errc::non_monotone_numbering: return "NonMonotoneNumbering";
    case Errc::extraction_failed: return "ExtractionFailed";
    case Errc::backend_error: return "BackendError";
    case Errc::empty_text: return "EmptyText";
    case Errc::embedder_mismatch: return "EmbedderMismatch";
    case Errc::unparseable_proposal: return "UnparseableProposal";
    case Errc::duplicate_proposal: return "DuplicateProposal";
    case Errc::invalid_window: return "InvalidW";
    case Errc::invalid_multiplier: return "InvalidMultiplier";
    case Errc::no_path: return "NoPath";
    case Errc::unknown_viewpoint: return "UnknownViewpoint";
    case Errc::illegal_move: return "IllegalMove";
    case Errc::already_stopped: return "AlreadyStopped";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::degenerate_world: return "DegenerateWorld";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  if (pending && !out.empty()) out.push_back(' ');
  return out;
}

std::string normalize_text(std::string_view s) {
  std::string t = trim(s);
  while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?' || is_space(t.back()))) {
    t.pop_back();
  }
  return to_lower(trim(collapse_whitespace(t)));
}

std::string single_line(std::string_view s) { return trim(collapse_whitespace(s)); }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace eventnav
