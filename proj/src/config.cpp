#include "eventnav/config.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

using detail::json;

std::string_view backend_mode_name(BackendMode m) {
  switch (m) {
    case BackendMode::mock: return "mock";
    case BackendMode::replay: return "replay";
    case BackendMode::remote: return "remote";
  }
  return "?";
}

BackendMode parse_backend_mode(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "mock") return BackendMode::mock;
  if (l == "replay") return BackendMode::replay;
  if (l == "remote") return BackendMode::remote;
  throw Error(Errc::config_error, fmt::format("unknown backend mode '{}'", s));
}

std::string_view scope_name(KnowledgeScope s) {
  switch (s) {
    case KnowledgeScope::none: return "none";
    case KnowledgeScope::per_episode: return "per_episode";
    case KnowledgeScope::per_dataset: return "per_dataset";
    case KnowledgeScope::fused: return "fused";
  }
  return "?";
}

KnowledgeScope parse_scope(std::string_view s) {
  for (auto k : {KnowledgeScope::none, KnowledgeScope::per_episode, KnowledgeScope::per_dataset,
                 KnowledgeScope::fused}) {
    if (scope_name(k) == s) return k;
  }
  throw Error(Errc::config_error, fmt::format("unknown knowledge scope '{}'", s));
}

FieldMapping RunConfig::mapping_for(Dataset d) const {
  auto it = mappings.find(d);
  return it == mappings.end() ? default_mapping(d) : it->second;
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw Error(Errc::config_error, where + " must be an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& [k, _] : obj.items()) {
    if (!ok.count(k)) throw Error(Errc::config_error, fmt::format("unknown key '{}{}'", where.empty() ? "" : where + ".", k));
  }
}

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw json::type_error::create(302, "expected a boolean", &v);
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw json::type_error::create(302, "expected a non-negative integer", &v);
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw json::type_error::create(302, "expected an integer", &v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw json::type_error::create(302, "expected a string", &v);
    }
    out = v.get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::config_error, fmt::format("'{}.{}' has the wrong type", where, key));
  }
}

FieldMapping parse_mapping(const json& j, const std::string& where, Dataset d) {
  check_keys(j, where, {"shape", "id_field", "coarse_field", "subtasks_field", "paragraph_field"});
  FieldMapping m = default_mapping(d);
  std::string shape;
  read(j, where, "shape", shape);
  if (!shape.empty()) {
    if (shape == "structured") m.shape = RecordShape::structured;
    else if (shape == "unified") m.shape = RecordShape::unified;
    else if (shape == "split") m.shape = RecordShape::split;
    else throw Error(Errc::config_error, fmt::format("{}.shape: unknown shape '{}'", where, shape));
  }
  read(j, where, "id_field", m.id_field);
  read(j, where, "coarse_field", m.coarse_field);
  read(j, where, "subtasks_field", m.subtasks_field);
  read(j, where, "paragraph_field", m.paragraph_field);
  return m;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config_error, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "", {"seed", "jobs", "paths", "backend", "retrieval", "backtrack", "episode", "policy", "knowledge",
                        "eval", "world", "extraction"});
  RunConfig c;
  read(root, "", "seed", c.seed);
  read(root, "", "jobs", c.jobs);
  if (root.contains("paths")) {
    const auto& j = root["paths"];
    check_keys(j, "paths", {"kg", "index", "world", "episodes", "cassette", "cassette_dir", "out_dir"});
    read(j, "paths", "kg", c.paths.kg);
    read(j, "paths", "index", c.paths.index);
    read(j, "paths", "world", c.paths.world);
    read(j, "paths", "episodes", c.paths.episodes);
    read(j, "paths", "cassette", c.paths.cassette);
    read(j, "paths", "cassette_dir", c.paths.cassette_dir);
    read(j, "paths", "out_dir", c.paths.out_dir);
  }
  if (root.contains("backend")) {
    const auto& j = root["backend"];
    check_keys(j, "backend", {"mode", "endpoint", "model"});
    std::string mode = std::string(backend_mode_name(c.backend.mode));
    read(j, "backend", "mode", mode);
    c.backend.mode = parse_backend_mode(mode);
    read(j, "backend", "endpoint", c.backend.endpoint);
    read(j, "backend", "model", c.backend.model);
  }
  if (root.contains("retrieval")) {
    const auto& j = root["retrieval"];
    check_keys(j, "retrieval", {"dim", "topk", "seed"});
    read(j, "retrieval", "dim", c.retrieval.dim);
    read(j, "retrieval", "topk", c.retrieval.topk);
    read(j, "retrieval", "seed", c.retrieval.seed);
  }
  if (root.contains("backtrack")) {
    const auto& j = root["backtrack"];
    check_keys(j, "backtrack", {"x", "w_multiplier", "d_avg", "max_replans", "max_steps_per_subtask", "enabled"});
    read(j, "backtrack", "x", c.backtrack.x);
    read(j, "backtrack", "w_multiplier", c.backtrack.w_multiplier);
    read(j, "backtrack", "d_avg", c.backtrack.d_avg);
    read(j, "backtrack", "max_replans", c.backtrack.max_replans);
    read(j, "backtrack", "max_steps_per_subtask", c.backtrack.max_steps_per_subtask);
    read(j, "backtrack", "enabled", c.backtrack.enabled);
  }
  if (root.contains("episode")) {
    const auto& j = root["episode"];
    check_keys(j, "episode", {"max_subtasks", "max_steps"});
    read(j, "episode", "max_subtasks", c.episode.max_subtasks);
    read(j, "episode", "max_steps", c.episode.max_steps);
  }
  if (root.contains("policy")) {
    check_keys(root["policy"], "policy", {"epsilon"});
    read(root["policy"], "policy", "epsilon", c.epsilon);
  }
  if (root.contains("knowledge")) {
    const auto& j = root["knowledge"];
    check_keys(j, "knowledge", {"scope", "paraphrases"});
    std::string scope(scope_name(c.scope));
    read(j, "knowledge", "scope", scope);
    c.scope = parse_scope(scope);
    read(j, "knowledge", "paraphrases", c.paraphrases);
  }
  if (root.contains("eval")) {
    const auto& j = root["eval"];
    check_keys(j, "eval", {"x_values", "w_multipliers"});
    read(j, "eval", "x_values", c.x_values);
    read(j, "eval", "w_multipliers", c.w_multipliers);
  }
  if (root.contains("world")) {
    const auto& j = root["world"];
    check_keys(j, "world", {"viewpoints", "radius", "episodes"});
    read(j, "world", "viewpoints", c.world.viewpoints);
    read(j, "world", "radius", c.world.radius);
    read(j, "world", "episodes", c.world.episodes);
  }
  if (root.contains("extraction")) {
    const auto& j = root["extraction"];
    if (!j.is_object()) throw Error(Errc::config_error, "extraction must be an object");
    for (const auto& [name, m] : j.items()) {
      const auto d = parse_dataset(name);
      if (!d) throw Error(Errc::config_error, fmt::format("extraction: unknown dataset '{}'", name));
      c.mappings[*d] = parse_mapping(m, "extraction." + name, *d);
    }
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw Error(Errc::config_error, m); };
  if (c.retrieval.topk < 1) fail("retrieval.topk must be at least 1");
  if (c.retrieval.dim < 1) fail("retrieval.dim must be at least 1");
  if (!(c.backtrack.x > 0.0 && c.backtrack.x < 1.0)) fail("backtrack.x must lie in (0, 1)");
  if (!(c.backtrack.w_multiplier > 0.0)) fail("backtrack.w_multiplier must be positive");
  if (c.backtrack.d_avg < 0.0) fail("backtrack.d_avg must be non-negative");
  if (c.backtrack.max_replans < 0) fail("backtrack.max_replans must be non-negative");
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) fail("policy.epsilon must lie in [0, 1]");
  if (c.jobs < 1) fail("jobs must be at least 1");
  if (c.x_values.empty() || c.w_multipliers.empty()) fail("eval grids must be non-empty");
  for (double x : c.x_values) {
    if (!(x > 0.0 && x < 1.0)) fail(fmt::format("eval.x_values: {} is outside (0, 1)", x));
  }
  for (double w : c.w_multipliers) {
    if (!(w > 0.0)) fail(fmt::format("eval.w_multipliers: {} is not positive", w));
  }
  if (c.world.viewpoints < 2) fail("world.viewpoints must be at least 2");
  if (!(c.world.radius > 0.0)) fail("world.radius must be positive");
  const char* env_url = std::getenv("BACKEND_URL");
  if (c.backend.mode == BackendMode::remote && c.backend.endpoint.empty() && !(env_url && *env_url)) {
    fail("backend.mode=remote requires backend.endpoint (or BACKEND_URL)");
  }
}

SuiteSettings suite_settings(const RunConfig& c) {
  SuiteSettings s;
  s.topk = c.retrieval.topk;
  s.max_replans = c.backtrack.max_replans;
  s.max_steps_per_subtask = c.backtrack.max_steps_per_subtask;
  s.max_subtasks = c.episode.max_subtasks;
  s.max_episode_steps = c.episode.max_steps;
  s.epsilon = c.epsilon;
  s.seed = c.seed;
  s.paraphrases = c.paraphrases;
  s.d_avg = c.backtrack.d_avg;
  s.jobs = c.jobs;
  return s;
}

}  // namespace eventnav
