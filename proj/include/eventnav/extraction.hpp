#pragma once
// Raw dataset records -> TaskSequence.
//
// Three record shapes are handled: structured (coarse text plus an ordered
// subtask list, ALFRED-style), unified (one paragraph holding both, R2R-style)
// and split (separate coarse field plus a paragraph, REVERIE-style).

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "eventnav/backend.hpp"
#include "eventnav/kg_store.hpp"

namespace eventnav {

using FieldValue = std::variant<std::string, std::vector<std::string>>;

struct RawRecord {
  Dataset dataset = Dataset::custom;
  std::string record_id;
  std::map<std::string, FieldValue> payload;
};

enum class RecordShape { structured, unified, split };

// Which payload fields hold what, per dataset.
struct FieldMapping {
  RecordShape shape = RecordShape::structured;
  std::string id_field = "id";
  std::string coarse_field = "goal";
  std::string subtasks_field = "subgoals";
  std::string paragraph_field = "instruction";
};

// ALFRED: structured goal/subgoals; R2R: unified instruction;
// REVERIE: split goal + instruction; custom: structured.
FieldMapping default_mapping(Dataset d);

TaskSequence parse_structured(const RawRecord& record, const FieldMapping& mapping);

std::string build_extraction_prompt(const RawRecord& record, const FieldMapping& mapping);

struct ListResponse {
  std::string coarse_text;
  std::vector<std::string> subtasks;
  friend bool operator==(const ListResponse&, const ListResponse&) = default;
};

ListResponse parse_list_response(std::string_view text);

// Canonical answer in the extraction output contract.
std::string format_reference_answer(const TaskSequence& seq);

TaskSequence extract_with_backend(const RawRecord& record, const FieldMapping& mapping,
                                  const TextBackend& backend);

TaskSequence extract_heuristic(const RawRecord& record, const FieldMapping& mapping);

struct ExtractionReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::pair<std::string, std::string>> rejects;  // (record_id, error)
};

enum class ExtractionMode { structured, heuristic, backend };

struct ExtractionOutput {
  std::vector<TaskSequence> sequences;
  ExtractionReport report;
};

// Reads a line-delimited dataset file. Each line is a JSON object whose
// string and string-list fields form the payload. Malformed lines and
// failed records are counted as rejects ("line N" ids for unreadable lines).
ExtractionOutput extract_file(const std::filesystem::path& path, Dataset dataset,
                              const FieldMapping& mapping, ExtractionMode mode,
                              const TextBackend* backend = nullptr);

}  // namespace eventnav
