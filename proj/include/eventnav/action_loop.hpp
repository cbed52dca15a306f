#pragma once
// Action planning loop: agent policies emitting (action, S, R) per step,
// the R supervision schedule, and trajectory records.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "eventnav/simulator.hpp"

namespace eventnav {

struct InstructionPair {
  std::string coarse;
  std::string subtask;
};

struct Observation {
  VpIndex viewpoint = 0;
  std::vector<VpIndex> neighbors;
  std::string caption;
};

Observation observe(const NavGraph& graph, VpIndex viewpoint);

struct StepOutput {
  Action action = Stop{};
  bool S = false;
  double R = 0.5;
  friend bool operator==(const StepOutput&, const StepOutput&) = default;
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  // subtask_step is 0 on the first step of every (re)started subtask.
  virtual StepOutput step(const InstructionPair& instruction, const Observation& observation,
                          std::span<const Action> history, std::size_t subtask_step) = 0;
};

inline constexpr double kRStart = 0.5;

enum class Polarity { positive, negative };

// clamp(r_start + progress / (2W), 0, 1)
double schedule_value(long progress, std::size_t window, double r_start = kRStart);

// positive: r_start + i/(2W); negative: r_start - i/(2W); i = 1..W, clamped.
// Throws InvalidW for W < 1.
std::vector<double> supervision_schedule(std::size_t window, Polarity polarity, double r_start = kRStart);

// Maps a subtask text to one of the episode's ground-truth targets: exact
// normalized text first, then the longest target caption mentioned as a
// whole-token phrase.
class SubtaskGrounder {
 public:
  SubtaskGrounder(const NavGraph& graph, const Episode& episode);
  std::optional<VpIndex> ground(std::string_view subtask) const;

 private:
  std::unordered_map<std::string, VpIndex> by_text_;
  std::vector<std::pair<std::string, VpIndex>> captions_;  // longest first
};

// Walks the shortest path to the grounded target, one hop per step; S=1 on
// arrival; R follows the positive schedule with W = hops at subtask start.
// An ungroundable subtask yields Stop with S=0 and R=0.
class OraclePolicy final : public AgentPolicy {
 public:
  OraclePolicy(const NavGraph& graph, const Episode& episode);

  StepOutput step(const InstructionPair& instruction, const Observation& observation,
                  std::span<const Action> history, std::size_t subtask_step) override;

  std::optional<VpIndex> target() const noexcept { return target_; }
  std::size_t window() const noexcept { return window_; }

 private:
  void reset(const std::string& subtask, VpIndex from);

  const NavGraph& graph_;
  SubtaskGrounder grounder_;
  std::string active_;
  bool started_ = false;
  std::optional<VpIndex> target_;
  std::size_t window_ = 0;
};

// With probability epsilon per step the oracle's action is replaced by a
// uniformly random neighbor move. R moves by +-1/(2W) depending on whether
// the step reduced the geodesic distance to the target.
class NoisyPolicy final : public AgentPolicy {
 public:
  NoisyPolicy(const NavGraph& graph, const Episode& episode, double epsilon, std::uint64_t seed);

  StepOutput step(const InstructionPair& instruction, const Observation& observation,
                  std::span<const Action> history, std::size_t subtask_step) override;

 private:
  const std::vector<double>& distances_to(VpIndex target);

  const NavGraph& graph_;
  OraclePolicy oracle_;
  double epsilon_;
  std::mt19937_64 rng_;
  long progress_ = 0;
  std::unordered_map<VpIndex, std::vector<double>> dist_cache_;
};

struct Trajectory {
  std::vector<StepOutput> outputs;
  std::vector<Observation> observations;
  std::vector<std::string> subtasks;

  std::size_t size() const noexcept { return outputs.size(); }
};

Trajectory record_step(Trajectory trajectory, const StepOutput& output, const Observation& observation,
                       std::string subtask = {});

std::vector<Action> actions_of(const Trajectory& trajectory);

}  // namespace eventnav
