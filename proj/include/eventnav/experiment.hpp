#pragma once
// Episode-suite harness: knowledge construction per variant, seeded
// policies, parallel execution and TSV reports.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eventnav/episode.hpp"

namespace eventnav {

// Mean ground-truth hops per subtask over the suite.
double suite_d_avg(const NavGraph& graph, const std::vector<Episode>& episodes);

// Tags episodes R2R, REVERIE, ALFRED in turn.
void assign_datasets_round_robin(std::vector<Episode>& episodes);

// `count` extra renderings of the ground-truth sequence, each subtask text
// drawn from a random template over its target's caption.
std::vector<TaskSequence> paraphrase_sequences(const NavGraph& graph, const Episode& episode, std::size_t count,
                                               std::mt19937_64& rng);

// Ground-truth sequences plus paraphrases of the selected episodes.
EventGraph suite_knowledge(const NavGraph& graph, const std::vector<Episode>& episodes, std::size_t paraphrases,
                           std::uint64_t seed, std::optional<Dataset> only = std::nullopt);

enum class KnowledgeScope { none, per_episode, per_dataset, fused };

struct Variant {
  std::string name;
  PlanningMode planning = PlanningMode::planner;
  KnowledgeScope scope = KnowledgeScope::fused;
  bool backtracking = false;
  double x = 0.25;
  double w_multiplier = 2.0;
};

// base, base+planD, base+planS, base+planF, base+planF+backtrace.
std::vector<Variant> table_variants(double x, double w_multiplier);
// planF+backtrace for every (W multiplier, x) pair, multiplier outermost.
std::vector<Variant> grid_variants(const std::vector<double>& x_values, const std::vector<double>& w_multipliers);

struct SuiteSettings {
  std::size_t topk = 5;
  int max_replans = 3;
  std::size_t max_steps_per_subtask = 0;
  std::size_t max_subtasks = 0;
  std::size_t max_episode_steps = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::size_t paraphrases = 1;
  double d_avg = 0.0;  // 0: measured from the suite
  std::size_t jobs = 1;
};

struct VariantRun {
  Variant variant;
  std::size_t window = 0;
  std::size_t kg_edges = 0;  // largest graph any episode consulted
  std::vector<EpisodeResult> results;
  MetricsReport metrics;
};

// The policy is oracle for epsilon = 0, noisy otherwise, seeded from
// settings.seed and the episode id.
VariantRun run_variant(const NavGraph& graph, const std::vector<Episode>& episodes, const Variant& variant,
                       const SuiteSettings& settings, const Embedder& embedder, const TextBackend& backend);

// Calls fn(i) for i in [0, n) on `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

inline constexpr std::string_view kReportHeader = "variant\tSR\tNE\tTL\tSPL\tOSR\tGC\tPLWSR\tPLWGC";

std::string report_row(const std::string& variant, const MetricsReport& m);
std::string format_report(const std::vector<VariantRun>& runs);

}  // namespace eventnav
