#include "eventnav/backtrack.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "eventnav/error.hpp"

namespace eventnav {

std::size_t window_for(double d_avg, double multiplier) {
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
    throw Error(Errc::invalid_multiplier, fmt::format("w_multiplier must be positive, got {}", multiplier));
  }
  if (!(d_avg > 0.0) || !std::isfinite(d_avg)) {
    throw Error(Errc::invalid_window, fmt::format("d_avg must be positive, got {}", d_avg));
  }
  // The small slack keeps products like 3 * 1.0000000000000002 at 3.
  const double w = std::ceil(multiplier * d_avg - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(w));
}

double dataset_d_avg(Dataset dataset) {
  switch (dataset) {
    case Dataset::r2r: return 2.35;
    case Dataset::reverie: return 3.57;
    case Dataset::alfred: return 8.26;
    case Dataset::custom: break;
  }
  throw Error(Errc::config_error, "no default D_avg for the custom dataset");
}

double dataset_w_multiplier(Dataset dataset) { return dataset == Dataset::r2r ? 2.0 : 1.0; }

BacktrackConfig make_backtrack_config(double x, std::size_t window, int max_replans, std::size_t max_steps_per_subtask,
                                      bool enabled) {
  if (!(x > 0.0 && x < 1.0)) throw Error(Errc::config_error, fmt::format("backtrack x must lie in (0, 1), got {}", x));
  if (window < 1) throw Error(Errc::invalid_window, "W must be at least 1");
  if (max_replans < 0) throw Error(Errc::config_error, "max_replans must be non-negative");
  BacktrackConfig c;
  c.x = x;
  c.window = window;
  c.max_replans = max_replans;
  c.max_steps_per_subtask = max_steps_per_subtask ? max_steps_per_subtask : 4 * window;
  c.enabled = enabled;
  return c;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::advance: return "Advance";
    case Verdict::backtrack: return "Backtrack";
    case Verdict::proceed: return "Continue";
    case Verdict::fail_episode: return "FailEpisode";
  }
  return "?";
}

std::string_view status_name(SubtaskStatus s) {
  switch (s) {
    case SubtaskStatus::completed: return "completed";
    case SubtaskStatus::backtracked: return "backtracked";
    case SubtaskStatus::episode_failed: return "episode_failed";
    case SubtaskStatus::step_limit: return "step_limit";
  }
  return "?";
}

namespace {

bool falling_suffix(const std::vector<double>& r, std::size_t window) {
  if (r.size() < window + 1) return false;
  for (std::size_t i = r.size() - window; i < r.size(); ++i) {
    if (!(r[i] < r[i - 1])) return false;
  }
  return true;
}

Verdict escalate(int replans_used, const BacktrackConfig& config) {
  return replans_used >= config.max_replans ? Verdict::fail_episode : Verdict::backtrack;
}

}  // namespace

Verdict decide(bool S, const SubtaskTrace& trace, const BacktrackConfig& config, int replans_used) {
  if (S) return Verdict::advance;
  if (trace.r_history.empty()) return Verdict::proceed;
  if (trace.r_history.back() < config.x || falling_suffix(trace.r_history, config.window)) {
    return escalate(replans_used, config);
  }
  return Verdict::proceed;
}

SimState rollback(const NavGraph& graph, SimState state, SubtaskTrace& trace, int& replans_used) {
  if (trace.start >= graph.size()) throw Error(Errc::unknown_viewpoint, fmt::format("index {}", trace.start));
  state = teleport(graph, std::move(state), trace.start);
  trace.r_history.clear();
  trace.actions = 0;
  ++replans_used;
  return state;
}

SubtaskRun run_subtask(AgentPolicy& policy, const NavGraph& graph, SimState& state,
                       const InstructionPair& instruction, const BacktrackConfig& config, int& replans_used,
                       std::size_t& steps_left, Trajectory& trajectory, std::vector<Action>& history) {
  SubtaskRun run;
  run.trace.subtask = instruction.subtask;
  run.trace.start = state.position;
  for (std::size_t t = 0;; ++t) {
    Verdict v = Verdict::proceed;
    if (t == config.max_steps_per_subtask) {
      if (!config.enabled) return run;
      v = escalate(replans_used, config);
    } else {
      if (steps_left == 0) {
        run.status = SubtaskStatus::step_limit;
        return run;
      }
      const Observation obs = observe(graph, state.position);
      StepOutput out = policy.step(instruction, obs, history, t);
      out.R = std::clamp(out.R, 0.0, 1.0);
      // A Stop inside a subtask holds position; the episode-level Stop is
      // issued by the runner.
      if (std::holds_alternative<MoveTo>(out.action)) state = apply(graph, std::move(state), out.action);
      --steps_left;
      history.push_back(out.action);
      trajectory = record_step(std::move(trajectory), out, obs, instruction.subtask);
      run.trace.r_history.push_back(out.R);
      ++run.trace.actions;
      v = decide(out.S, run.trace, config, replans_used);
      if (!config.enabled && v != Verdict::advance) v = Verdict::proceed;
    }
    switch (v) {
      case Verdict::advance:
        run.confirmed = true;
        return run;
      case Verdict::backtrack:
        state = rollback(graph, std::move(state), run.trace, replans_used);
        run.status = SubtaskStatus::backtracked;
        return run;
      case Verdict::fail_episode:
        run.status = SubtaskStatus::episode_failed;
        return run;
      case Verdict::proceed:
        break;
    }
  }
}

}  // namespace eventnav
