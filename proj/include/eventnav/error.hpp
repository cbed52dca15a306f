#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eventnav {

enum class Errc {
  // kg_store
  empty_sequence,
  malformed_text,
  unknown_node,
  io_error,
  format_error,
  // extraction
  missing_field,
  empty_subtask_list,
  no_task_line,
  no_subtasks,
  non_monotone_numbering,
  extraction_failed,
  backend_error,
  // retrieval
  empty_text,
  embedder_mismatch,
  // planner
  unparseable_proposal,
  duplicate_proposal,
  // action loop / backtracking
  invalid_window,
  invalid_multiplier,
  no_path,
  unknown_viewpoint,
  // simulator
  illegal_move,
  already_stopped,
  length_mismatch,
  degenerate_world,
  // cli
  config_error,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// FormatError carries the 1-based line number of the offending record.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& message)
      : Error(Errc::format_error, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace eventnav
