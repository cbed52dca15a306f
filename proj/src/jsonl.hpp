#pragma once
// Line-delimited JSON helpers shared by the file formats.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "eventnav/error.hpp"

namespace eventnav::detail {

using json = nlohmann::json;

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open for writing: " + path.string());
  return out;
}

inline void write_line(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

// Calls fn(line_number, object) for every non-blank line. Parse failures and
// non-object lines become FormatError with the line number.
inline void for_each_record(const std::filesystem::path& path,
                            const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(lineno, "not a JSON object");
    fn(lineno, j);
  }
  if (in.bad()) throw Error(Errc::io_error, "read failed: " + path.string());
}

template <typename T>
T field(const json& j, const char* key, std::size_t lineno) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(lineno, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(lineno, std::string("bad type for field '") + key + "'");
  }
}

}  // namespace eventnav::detail
