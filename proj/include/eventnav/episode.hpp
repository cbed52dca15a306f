#pragma once
// Two-loop episode execution and the VLN metric suite.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "eventnav/backtrack.hpp"
#include "eventnav/planner.hpp"
#include "eventnav/retrieval.hpp"

namespace eventnav {

struct KnowledgeBase {
  EventGraph graph;
  RetrievalIndex subtasks;  // successors index
  RetrievalIndex starts;    // sequence_starts index
};

KnowledgeBase build_knowledge(EventGraph graph, const Embedder& embedder);

enum class PlanningMode {
  none,       // the coarse instruction is the only subtask
  planner,    // retrieval-augmented planning
  no_knowledge,  // planner with the KNOWLEDGE section forced empty
};

struct EpisodeConfig {
  BacktrackConfig backtrack;
  PlanningMode planning = PlanningMode::planner;
  std::size_t topk = 5;
  std::size_t max_subtasks = 0;       // 0: 2 * |gt_subtasks| + 2
  std::size_t max_episode_steps = 0;  // 0: max_subtasks * max_steps_per_subtask
};

using PolicyFactory = std::function<std::unique_ptr<AgentPolicy>(const Episode&)>;

struct SubtaskRecord {
  std::string text;
  SubtaskStatus status = SubtaskStatus::completed;
  bool confirmed = false;
};

struct EpisodeResult {
  std::string episode_id;
  bool success = false;
  bool errored = false;  // a component error ended the episode
  std::string diagnostic;
  std::vector<VpIndex> trajectory;
  double tl = 0.0;
  double ne = 0.0;
  std::vector<SubtaskRecord> subtasks;
  std::size_t steps = 0;
  int replans = 0;
  Trajectory log;
};

// Outer loop: retrieve (coarse instruction first, then the last completed
// subtask), propose, run the subtask, repeat until DONE, FailEpisode, the
// subtask cap or the step cap. Errors end the episode with errored = true.
// `knowledge` may be null for PlanningMode::none and no_knowledge.
EpisodeResult run_episode(const Episode& episode, const NavGraph& graph, const KnowledgeBase* knowledge,
                          const Embedder& embedder, const TextBackend& backend, const PolicyFactory& policies,
                          const EpisodeConfig& config);

struct MetricsReport {
  std::size_t episodes = 0;
  double sr = 0.0;
  double ne = 0.0;
  double tl = 0.0;
  double spl = 0.0;
  double osr = 0.0;
  double gc = 0.0;
  double plwsr = 0.0;
  double plwgc = 0.0;
};

// Recomputed from trajectories with geodesic distances. Results must match
// episodes by position and id (LengthMismatch).
MetricsReport compute_metrics(const std::vector<EpisodeResult>& results, const std::vector<Episode>& episodes,
                              const NavGraph& graph);

// One JSON object per step:
// {"R","S","action","episode","step","subtask","viewpoint"}; action is a
// viewpoint id or "STOP".
void save_trajectory_log(const NavGraph& graph, const std::vector<EpisodeResult>& results,
                         const std::filesystem::path& path);

}  // namespace eventnav
