#pragma once
// Dynamic backtracking: the per-step verdict over S and the recent R
// window, rollback to the subtask start, and the subtask execution loop.

#include <cstddef>
#include <string>
#include <vector>

#include "eventnav/action_loop.hpp"
#include "eventnav/kg_store.hpp"

namespace eventnav {

inline constexpr double kDefaultX = 0.25;
inline constexpr int kDefaultMaxReplans = 3;

struct BacktrackConfig {
  double x = kDefaultX;
  std::size_t window = 5;  // W
  int max_replans = kDefaultMaxReplans;
  std::size_t max_steps_per_subtask = 20;
  bool enabled = true;
};

// ceil(multiplier * d_avg). Throws InvalidMultiplier for multiplier <= 0 and
// InvalidW when d_avg <= 0.
std::size_t window_for(double d_avg, double multiplier);

// Mean ground-truth hops per subtask: R2R 2.35, REVERIE 3.57, ALFRED 8.26.
double dataset_d_avg(Dataset dataset);
// R2R uses 2 x D_avg; REVERIE and ALFRED use 1 x D_avg.
double dataset_w_multiplier(Dataset dataset);

// Validated config; max_steps_per_subtask = 0 selects 4 x W.
BacktrackConfig make_backtrack_config(double x, std::size_t window, int max_replans,
                                      std::size_t max_steps_per_subtask = 0, bool enabled = true);

struct SubtaskTrace {
  std::string subtask;
  VpIndex start = 0;
  std::vector<double> r_history;
  std::size_t actions = 0;
};

enum class Verdict { advance, backtrack, proceed, fail_episode };

std::string_view verdict_name(Verdict v);

// S = 1 always advances. Otherwise backtrack when the latest R is below x or
// the last W+1 R values strictly decrease; a backtrack with the replan budget
// spent becomes fail_episode. Pure.
Verdict decide(bool S, const SubtaskTrace& trace, const BacktrackConfig& config, int replans_used);

// Teleports back to the subtask start (charging the return path), clears the
// R history and counts the replan.
SimState rollback(const NavGraph& graph, SimState state, SubtaskTrace& trace, int& replans_used);

enum class SubtaskStatus { completed, backtracked, episode_failed, step_limit };

std::string_view status_name(SubtaskStatus s);

struct SubtaskRun {
  SubtaskStatus status = SubtaskStatus::completed;
  SubtaskTrace trace;
  bool confirmed = false;  // completed through S = 1
};

// Steps the policy until a verdict other than proceed. Hitting the per
// subtask cap counts as a backtrack; with backtracking disabled only S ends
// the subtask, and the cap ends it as an unconfirmed completion.
// `steps_left` is the remaining episode step budget.
SubtaskRun run_subtask(AgentPolicy& policy, const NavGraph& graph, SimState& state,
                       const InstructionPair& instruction, const BacktrackConfig& config, int& replans_used,
                       std::size_t& steps_left, Trajectory& trajectory, std::vector<Action>& history);

}  // namespace eventnav
