#pragma once
// Run configuration: JSON file, defaults, validation.
//
// {
//   "seed": 0, "jobs": 1,
//   "paths": {"kg": "", "index": "", "world": "", "episodes": "", "cassette": "", "cassette_dir": "", "out_dir": "."},
//   "backend": {"mode": "mock", "endpoint": "", "model": "gpt-3.5-turbo"},
//   "retrieval": {"dim": 256, "topk": 5, "seed": 0},
//   "backtrack": {"x": 0.25, "w_multiplier": 2.0, "d_avg": 0, "max_replans": 3, "max_steps_per_subtask": 0, "enabled": true},
//   "episode": {"max_subtasks": 0, "max_steps": 0},
//   "policy": {"epsilon": 0.0},
//   "knowledge": {"scope": "fused", "paraphrases": 1},
//   "eval": {"x_values": [0.1, 0.25, 0.5], "w_multipliers": [0.5, 1, 2, 4]},
//   "world": {"viewpoints": 100, "radius": 4.5, "episodes": 50},
//   "extraction": {"R2R": {"shape": "unified", "id_field": "path_id", "paragraph_field": "instruction"}}
// }
// Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eventnav/experiment.hpp"
#include "eventnav/extraction.hpp"

namespace eventnav {

enum class BackendMode { mock, replay, remote };

std::string_view backend_mode_name(BackendMode m);
BackendMode parse_backend_mode(std::string_view s);  // Error(config_error)

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  struct Paths {
    std::string kg, index, world, episodes, cassette, cassette_dir;
    std::string out_dir = ".";
  } paths;

  struct Backend {
    BackendMode mode = BackendMode::mock;
    std::string endpoint;
    std::string model = "gpt-3.5-turbo";
  } backend;

  struct Retrieval {
    long dim = 256;
    std::size_t topk = 5;
    std::uint64_t seed = 0;
  } retrieval;

  struct Backtrack {
    double x = 0.25;
    double w_multiplier = 2.0;
    double d_avg = 0.0;  // 0: measured from the episode suite
    int max_replans = 3;
    std::size_t max_steps_per_subtask = 0;
    bool enabled = true;
  } backtrack;

  struct EpisodeCaps {
    std::size_t max_subtasks = 0;
    std::size_t max_steps = 0;
  } episode;

  double epsilon = 0.0;

  KnowledgeScope scope = KnowledgeScope::fused;
  std::size_t paraphrases = 1;

  std::vector<double> x_values{0.1, 0.25, 0.5};
  std::vector<double> w_multipliers{0.5, 1.0, 2.0, 4.0};

  struct World {
    std::size_t viewpoints = 100;
    double radius = 4.5;
    std::size_t episodes = 50;
  } world;

  std::map<Dataset, FieldMapping> mappings;

  FieldMapping mapping_for(Dataset d) const;
};

// Throws Error(config_error) on unknown keys, wrong types or invalid values.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

// Invariants: topk >= 1, 0 < x < 1, w_multiplier > 0; remote mode needs an
// endpoint from the config or BACKEND_URL.
void validate(const RunConfig& config);

std::string_view scope_name(KnowledgeScope s);
KnowledgeScope parse_scope(std::string_view s);

SuiteSettings suite_settings(const RunConfig& config);

}  // namespace eventnav
