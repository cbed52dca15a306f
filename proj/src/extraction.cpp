#include "eventnav/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

using detail::json;

FieldMapping default_mapping(Dataset d) {
  FieldMapping m;
  switch (d) {
    case Dataset::alfred:
    case Dataset::custom:
      m.shape = RecordShape::structured;
      break;
    case Dataset::r2r:
      m.shape = RecordShape::unified;
      m.id_field = "path_id";
      break;
    case Dataset::reverie:
      m.shape = RecordShape::split;
      break;
  }
  return m;
}

namespace {

const std::string* find_text(const RawRecord& r, const std::string& key) {
  auto it = r.payload.find(key);
  if (it == r.payload.end()) return nullptr;
  return std::get_if<std::string>(&it->second);
}

std::string require_text(const RawRecord& r, const std::string& key) {
  const std::string* s = find_text(r, key);
  if (!s) throw Error(Errc::missing_field, "record '" + r.record_id + "' has no text field '" + key + "'");
  return *s;
}

bool is_parse_error(Errc c) {
  return c == Errc::no_task_line || c == Errc::no_subtasks || c == Errc::non_monotone_numbering;
}

// Drops items that normalize to empty.
std::vector<std::string> clean_subtasks(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& s : items) {
    if (!normalize_text(s).empty()) out.push_back(single_line(s));
  }
  return out;
}

std::string source_block(std::string_view label, std::string_view text) {
  std::string b = "### SOURCE: ";
  b += label;
  b += '\n';
  b += trim(text);
  b += "\n### END SOURCE\n";
  return b;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Splits on '.', ';', the word "then" and ", and"; keeps fragments of 3+ words.
std::vector<std::string> split_fragments(std::string_view body) {
  std::vector<std::string> raw;
  std::string cur;
  const std::string lower = to_lower(body);
  std::size_t i = 0;
  auto flush = [&] {
    raw.push_back(cur);
    cur.clear();
  };
  while (i < body.size()) {
    const char c = body[i];
    if (c == '.' || c == ';') {
      flush();
      ++i;
      continue;
    }
    const bool word_start = i == 0 || !is_word_char(body[i - 1]);
    if (word_start && lower.compare(i, 4, "then") == 0 && (i + 4 == body.size() || !is_word_char(body[i + 4]))) {
      flush();
      i += 4;
      continue;
    }
    if (lower.compare(i, 5, ", and") == 0 && (i + 5 == body.size() || !is_word_char(body[i + 5]))) {
      flush();
      i += 5;
      continue;
    }
    cur.push_back(c);
    ++i;
  }
  flush();

  std::vector<std::string> out;
  for (auto& f : raw) {
    std::string t = single_line(f);
    while (!t.empty() && (t.front() == ',' || t.front() == ' ')) t.erase(t.begin());
    while (!t.empty() && (t.back() == ',' || t.back() == ' ')) t.pop_back();
    if (word_count(t) >= 3) out.push_back(std::move(t));
  }
  return out;
}

ListResponse parse_checked(std::string_view text) {
  ListResponse r = parse_list_response(text);
  r.subtasks = clean_subtasks(r.subtasks);
  if (r.subtasks.empty()) throw Error(Errc::no_subtasks, "all subtasks are empty after normalization");
  if (normalize_text(r.coarse_text).empty()) throw Error(Errc::no_task_line, "TASK line is empty");
  return r;
}

}  // namespace

TaskSequence parse_structured(const RawRecord& record, const FieldMapping& mapping) {
  TaskSequence seq;
  seq.dataset = record.dataset;
  seq.record_id = record.record_id;
  seq.coarse_text = single_line(require_text(record, mapping.coarse_field));
  if (normalize_text(seq.coarse_text).empty()) {
    throw Error(Errc::missing_field, "record '" + record.record_id + "' has an empty coarse field");
  }
  auto it = record.payload.find(mapping.subtasks_field);
  const auto* list = it == record.payload.end() ? nullptr : std::get_if<std::vector<std::string>>(&it->second);
  if (!list) {
    throw Error(Errc::missing_field,
                "record '" + record.record_id + "' has no list field '" + mapping.subtasks_field + "'");
  }
  seq.subtasks = clean_subtasks(*list);
  if (seq.subtasks.empty()) throw Error(Errc::empty_subtask_list, "record '" + record.record_id + "'");
  return seq;
}

std::string build_extraction_prompt(const RawRecord& record, const FieldMapping& mapping) {
  std::string p =
      "Split the navigation instruction below into one coarse-grained task and the ordered list of "
      "atomic subtasks needed to complete it.\n"
      "Each subtask is one short imperative step. Keep the order in which the steps appear in the "
      "source.\n";
  const std::string* coarse = find_text(record, mapping.coarse_field);
  const std::string* para = find_text(record, mapping.paragraph_field);
  std::string blocks;
  if (mapping.shape == RecordShape::split) {
    p += "The coarse-grained task is given in its own block; copy it into the TASK line.\n";
    blocks += source_block("coarse task", coarse ? *coarse : "");
    blocks += '\n';
    blocks += source_block("paragraph", para ? *para : "");
  } else if (mapping.shape == RecordShape::unified) {
    blocks += source_block("paragraph", para ? *para : "");
  } else {
    std::string joined = coarse ? *coarse : "";
    auto it = record.payload.find(mapping.subtasks_field);
    if (it != record.payload.end()) {
      if (const auto* list = std::get_if<std::vector<std::string>>(&it->second)) {
        for (const auto& s : *list) joined += "\n" + s;
      }
    }
    blocks += source_block("paragraph", joined);
  }
  p += '\n';
  p += blocks;
  p +=
      "\nReply in exactly this format and nothing else:\n"
      "TASK: <coarse-grained task>\n"
      "1. <first subtask>\n"
      "2. <second subtask>\n"
      "...\n";
  return p;
}

ListResponse parse_list_response(std::string_view text) {
  ListResponse r;
  bool have_task = false;
  std::optional<long> last_number;
  bool non_monotone = false;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (starts_with_ci(line, "task:")) {
      if (!have_task) {
        r.coarse_text = single_line(line.substr(5));
        have_task = !r.coarse_text.empty();
      }
      continue;
    }
    std::size_t d = 0;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')') &&
        (d + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[d + 1])))) {
      const long n = std::stol(line.substr(0, d));
      if (last_number && n <= *last_number) non_monotone = true;
      last_number = n;
      std::string item = single_line(line.substr(d + 1));
      if (!item.empty()) r.subtasks.push_back(std::move(item));
      continue;
    }
    if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ') {
      std::string item = single_line(line.substr(2));
      if (!item.empty()) r.subtasks.push_back(std::move(item));
    }
  }
  if (!have_task) throw Error(Errc::no_task_line, "response has no 'TASK:' line");
  if (non_monotone) throw Error(Errc::non_monotone_numbering, "subtask numbers are not strictly increasing");
  if (r.subtasks.empty()) throw Error(Errc::no_subtasks, "response lists no subtasks");
  return r;
}

std::string format_reference_answer(const TaskSequence& seq) {
  std::string out = "TASK: " + single_line(seq.coarse_text) + "\n";
  for (std::size_t i = 0; i < seq.subtasks.size(); ++i) {
    out += std::to_string(i + 1) + ". " + single_line(seq.subtasks[i]) + "\n";
  }
  return out;
}

TaskSequence extract_with_backend(const RawRecord& record, const FieldMapping& mapping,
                                  const TextBackend& backend) {
  const std::string prompt = build_extraction_prompt(record, mapping);
  ListResponse parsed;
  try {
    parsed = parse_checked(backend.complete(prompt));
  } catch (const Error& first) {
    if (!is_parse_error(first.code())) throw;
    const std::string retry = prompt + "\nYour previous reply could not be parsed (" + first.what() +
                              "). Reply again using exactly the format above.\n";
    try {
      parsed = parse_checked(backend.complete(retry));
    } catch (const Error& second) {
      if (!is_parse_error(second.code())) throw;
      throw Error(Errc::extraction_failed, "record '" + record.record_id + "': " + second.what());
    }
  }
  return TaskSequence{std::move(parsed.coarse_text), std::move(parsed.subtasks), record.dataset, record.record_id};
}

TaskSequence extract_heuristic(const RawRecord& record, const FieldMapping& mapping) {
  if (mapping.shape == RecordShape::structured) return parse_structured(record, mapping);
  TaskSequence seq;
  seq.dataset = record.dataset;
  seq.record_id = record.record_id;
  std::string body = require_text(record, mapping.paragraph_field);
  if (mapping.shape == RecordShape::split) {
    seq.coarse_text = trim(require_text(record, mapping.coarse_field));
  } else {
    const std::size_t end = body.find_first_of(".!?");
    seq.coarse_text = single_line(body.substr(0, end));
    body = end == std::string::npos ? std::string() : body.substr(end + 1);
  }
  if (normalize_text(seq.coarse_text).empty()) {
    throw Error(Errc::missing_field, "record '" + record.record_id + "' has no coarse task text");
  }
  seq.subtasks = split_fragments(body);
  if (seq.subtasks.empty()) throw Error(Errc::empty_subtask_list, "record '" + record.record_id + "'");
  return seq;
}

ExtractionOutput extract_file(const std::filesystem::path& path, Dataset dataset, const FieldMapping& mapping,
                              ExtractionMode mode, const TextBackend* backend) {
  if (mode == ExtractionMode::backend && !backend) {
    throw Error(Errc::config_error, "backend extraction requires a backend");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open: " + path.string());
  ExtractionOutput out;
  std::string line;
  std::size_t lineno = 0;
  auto reject = [&](std::string id, std::string why) {
    ++out.report.rejected;
    out.report.rejects.emplace_back(std::move(id), std::move(why));
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string line_id = "line " + std::to_string(lineno);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      reject(line_id, "FormatError: line " + std::to_string(lineno) + ": not a JSON object");
      continue;
    }
    RawRecord rec;
    rec.dataset = dataset;
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        rec.payload.emplace(key, value.get<std::string>());
      } else if (value.is_array() && std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); })) {
        rec.payload.emplace(key, value.get<std::vector<std::string>>());
      } else if (value.is_number_integer() && key == mapping.id_field) {
        rec.payload.emplace(key, std::to_string(value.get<long long>()));
      }
    }
    const std::string* id = find_text(rec, mapping.id_field);
    rec.record_id = id ? *id : line_id;
    try {
      switch (mode) {
        case ExtractionMode::structured: out.sequences.push_back(parse_structured(rec, mapping)); break;
        case ExtractionMode::heuristic: out.sequences.push_back(extract_heuristic(rec, mapping)); break;
        case ExtractionMode::backend: out.sequences.push_back(extract_with_backend(rec, mapping, *backend)); break;
      }
      ++out.report.accepted;
    } catch (const Error& e) {
      if (e.code() == Errc::backend_error) throw;
      reject(rec.record_id, e.what());
    }
  }
  return out;
}

}  // namespace eventnav
