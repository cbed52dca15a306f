#include "eventnav/action_loop.hpp"

#include <algorithm>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"

namespace eventnav {

namespace {

std::string token_phrase(std::string_view text) {
  std::string out = " ";
  for (const auto& t : tokenize(text)) out += t + " ";
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Observation observe(const NavGraph& graph, VpIndex viewpoint) {
  Observation o;
  o.viewpoint = viewpoint;
  o.caption = graph.viewpoint(viewpoint).caption;
  for (const auto& n : graph.neighbors(viewpoint)) o.neighbors.push_back(n.to);
  return o;
}

double schedule_value(long progress, std::size_t window, double r_start) {
  if (window < 1) throw Error(Errc::invalid_window, "W must be at least 1");
  const double r = r_start + static_cast<double>(progress) / (2.0 * static_cast<double>(window));
  return std::clamp(r, 0.0, 1.0);
}

std::vector<double> supervision_schedule(std::size_t window, Polarity polarity, double r_start) {
  if (window < 1) throw Error(Errc::invalid_window, "W must be at least 1");
  std::vector<double> out;
  out.reserve(window);
  for (std::size_t i = 1; i <= window; ++i) {
    const long p = static_cast<long>(i);
    out.push_back(schedule_value(polarity == Polarity::positive ? p : -p, window, r_start));
  }
  return out;
}

SubtaskGrounder::SubtaskGrounder(const NavGraph& graph, const Episode& episode) {
  for (const auto& s : episode.gt_subtasks) {
    by_text_.emplace(normalize_text(s.text), s.target);
    const std::string phrase = token_phrase(graph.viewpoint(s.target).caption);
    if (phrase.size() > 1) captions_.emplace_back(phrase, s.target);
  }
  std::stable_sort(captions_.begin(), captions_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

std::optional<VpIndex> SubtaskGrounder::ground(std::string_view subtask) const {
  if (auto it = by_text_.find(normalize_text(subtask)); it != by_text_.end()) return it->second;
  const std::string phrase = token_phrase(subtask);
  for (const auto& [caption, target] : captions_) {
    if (phrase.find(caption) != std::string::npos) return target;
  }
  return std::nullopt;
}

OraclePolicy::OraclePolicy(const NavGraph& graph, const Episode& episode) : graph_(graph), grounder_(graph, episode) {}

void OraclePolicy::reset(const std::string& subtask, VpIndex from) {
  active_ = subtask;
  started_ = true;
  target_ = grounder_.ground(subtask);
  window_ = target_ ? shortest_path(graph_, from, *target_).path.size() - 1 : 0;
}

StepOutput OraclePolicy::step(const InstructionPair& instruction, const Observation& observation,
                              std::span<const Action>, std::size_t subtask_step) {
  if (subtask_step == 0 || !started_ || instruction.subtask != active_) reset(instruction.subtask, observation.viewpoint);
  if (!target_) return {Stop{}, false, 0.0};
  if (observation.viewpoint == *target_) return {Stop{}, true, 1.0};
  const auto path = shortest_path(graph_, observation.viewpoint, *target_).path;
  const std::size_t w = std::max<std::size_t>(window_, 1);
  const long i = static_cast<long>(std::min(subtask_step + 1, w));
  return {MoveTo{path[1]}, path[1] == *target_, schedule_value(i, w)};
}

NoisyPolicy::NoisyPolicy(const NavGraph& graph, const Episode& episode, double epsilon, std::uint64_t seed)
    : graph_(graph), oracle_(graph, episode), epsilon_(epsilon), rng_(seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(Errc::config_error, "epsilon must lie in [0, 1]");
}

const std::vector<double>& NoisyPolicy::distances_to(VpIndex target) {
  auto it = dist_cache_.find(target);
  if (it == dist_cache_.end()) it = dist_cache_.emplace(target, distances_from(graph_, target)).first;
  return it->second;
}

StepOutput NoisyPolicy::step(const InstructionPair& instruction, const Observation& observation,
                             std::span<const Action> history, std::size_t subtask_step) {
  if (subtask_step == 0) progress_ = 0;
  StepOutput out = oracle_.step(instruction, observation, history, subtask_step);
  if (uniform01(rng_) < epsilon_ && !observation.neighbors.empty()) {
    out.action = MoveTo{observation.neighbors[rng_() % observation.neighbors.size()]};
  }

  const auto target = oracle_.target();
  const std::size_t w = std::max<std::size_t>(oracle_.window(), 1);
  if (!target) {
    progress_ = std::max(progress_ - 1, -static_cast<long>(w));
    out.S = false;
    out.R = schedule_value(progress_, w);
    return out;
  }
  VpIndex next = observation.viewpoint;
  if (const auto* mv = std::get_if<MoveTo>(&out.action)) next = mv->target;
  const auto& dist = distances_to(*target);
  const bool arrived = next == *target;
  const bool closer = dist[next] < dist[observation.viewpoint];
  progress_ = std::clamp(progress_ + ((arrived || closer) ? 1 : -1), -static_cast<long>(w), static_cast<long>(w));
  out.S = arrived;
  out.R = schedule_value(progress_, w);
  return out;
}

Trajectory record_step(Trajectory trajectory, const StepOutput& output, const Observation& observation,
                       std::string subtask) {
  trajectory.outputs.push_back(output);
  trajectory.observations.push_back(observation);
  trajectory.subtasks.push_back(std::move(subtask));
  return trajectory;
}

std::vector<Action> actions_of(const Trajectory& trajectory) {
  std::vector<Action> out;
  out.reserve(trajectory.size());
  for (const auto& o : trajectory.outputs) out.push_back(o.action);
  return out;
}

}  // namespace eventnav
