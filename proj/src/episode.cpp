#include "eventnav/episode.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "eventnav/error.hpp"
#include "jsonl.hpp"

namespace eventnav {

KnowledgeBase build_knowledge(EventGraph graph, const Embedder& embedder) {
  KnowledgeBase kb;
  kb.graph = std::move(graph);
  kb.subtasks = build_index(kb.graph, embedder);
  kb.starts = build_start_index(kb.graph, embedder);
  return kb;
}

namespace {

std::vector<RetrievalHit> retrieve(const KnowledgeBase& kb, const Embedder& embedder, const PlanningContext& ctx,
                                   std::size_t k) {
  for (auto it = ctx.history.rbegin(); it != ctx.history.rend(); ++it) {
    if (it->outcome == SubtaskOutcome::completed) return query(kb.subtasks, kb.graph, embedder, it->text, k);
  }
  return query(kb.starts, kb.graph, embedder, ctx.coarse_task, k);
}

void run_planned(const Episode& episode, const NavGraph& graph, const KnowledgeBase* knowledge,
                 const Embedder& embedder, const TextBackend& backend, AgentPolicy& policy,
                 const EpisodeConfig& config, const BacktrackConfig& bt, SimState& state, std::size_t& steps_left,
                 EpisodeResult& result, std::vector<Action>& history) {
  const std::size_t max_subtasks = config.max_subtasks ? config.max_subtasks : 2 * episode.gt_subtasks.size() + 2;
  PlanningContext ctx;
  ctx.coarse_task = episode.coarse_instruction;
  int replans = 0;
  std::size_t completed = 0;
  while (completed < max_subtasks) {
    ctx.scene_caption = graph.viewpoint(state.position).caption;
    ctx.knowledge.clear();
    if (config.planning == PlanningMode::planner) {
      if (!knowledge) throw Error(Errc::config_error, "planner mode needs a knowledge base");
      ctx.knowledge = retrieve(*knowledge, embedder, ctx, config.topk);
    }
    ctx.replan_attempts = replans;
    const SubtaskProposal proposal =
        ctx.failed.empty() ? propose_next(backend, ctx, PlanMode::fresh)
                           : propose_next(backend, ctx, PlanMode::replan, ctx.failed.back());
    if (proposal.is_stop) {
      result.diagnostic = "planner signalled DONE";
      return;
    }
    const InstructionPair instr{episode.coarse_instruction, proposal.text};
    const SubtaskRun run =
        run_subtask(policy, graph, state, instr, bt, replans, steps_left, result.log, history);
    result.subtasks.push_back({proposal.text, run.status, run.confirmed});
    switch (run.status) {
      case SubtaskStatus::completed:
        ctx.history.push_back({proposal.text, SubtaskOutcome::completed});
        ctx.failed.clear();
        replans = 0;
        ++completed;
        break;
      case SubtaskStatus::backtracked:
        ctx.history.push_back({proposal.text, SubtaskOutcome::backtracked});
        ctx.failed.push_back(proposal.text);
        ++result.replans;
        break;
      case SubtaskStatus::episode_failed:
        result.diagnostic = "replan budget exhausted";
        return;
      case SubtaskStatus::step_limit:
        result.diagnostic = "episode step cap reached";
        return;
    }
  }
  result.diagnostic = "subtask cap reached";
}

}  // namespace

EpisodeResult run_episode(const Episode& episode, const NavGraph& graph, const KnowledgeBase* knowledge,
                          const Embedder& embedder, const TextBackend& backend, const PolicyFactory& policies,
                          const EpisodeConfig& config) {
  validate_episode(graph, episode);
  EpisodeResult result;
  result.episode_id = episode.id;
  SimState state = initial_state(graph, episode.start);
  std::vector<Action> history;
  try {
    BacktrackConfig bt = config.backtrack;
    if (bt.max_steps_per_subtask == 0) bt.max_steps_per_subtask = 4 * bt.window;
    const std::size_t max_subtasks = config.max_subtasks ? config.max_subtasks : 2 * episode.gt_subtasks.size() + 2;
    std::size_t steps_left = config.max_episode_steps ? config.max_episode_steps : max_subtasks * bt.max_steps_per_subtask;
    auto policy = policies(episode);
    if (config.planning == PlanningMode::none) {
      int replans = 0;
      const InstructionPair instr{episode.coarse_instruction, episode.coarse_instruction};
      const SubtaskRun run = run_subtask(*policy, graph, state, instr, bt, replans, steps_left, result.log, history);
      result.subtasks.push_back({instr.subtask, run.status, run.confirmed});
      result.replans = replans;
    } else {
      run_planned(episode, graph, knowledge, embedder, backend, *policy, config, bt, state, steps_left, result,
                  history);
    }
  } catch (const std::exception& e) {
    result.errored = true;
    result.diagnostic = e.what();
  }
  if (!state.stopped) state = apply(graph, std::move(state), Stop{});
  result.trajectory = state.trajectory;
  result.tl = state.tl;
  result.steps = result.log.size();
  result.ne = distances_from(graph, episode.goal)[state.position];
  result.success = !result.errored && result.ne <= episode.success_radius;
  return result;
}

MetricsReport compute_metrics(const std::vector<EpisodeResult>& results, const std::vector<Episode>& episodes,
                              const NavGraph& graph) {
  if (results.size() != episodes.size()) {
    throw Error(Errc::length_mismatch, fmt::format("{} results for {} episodes", results.size(), episodes.size()));
  }
  MetricsReport m;
  m.episodes = results.size();
  if (results.empty()) return m;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& e = episodes[i];
    if (r.episode_id != e.id) {
      throw Error(Errc::length_mismatch, fmt::format("result '{}' at position of episode '{}'", r.episode_id, e.id));
    }
    if (r.trajectory.empty()) throw Error(Errc::length_mismatch, "empty trajectory for '" + e.id + "'");
    const auto to_goal = distances_from(graph, e.goal);
    const double ne = to_goal[r.trajectory.back()];
    const double s = (!r.errored && ne <= e.success_radius) ? 1.0 : 0.0;
    const double l = to_goal[e.start];
    const double p = r.tl;
    const double w = std::max(p, l) > 0.0 ? l / std::max(p, l) : 1.0;
    bool oracle = false;
    for (VpIndex v : r.trajectory) oracle = oracle || to_goal[v] <= e.success_radius;
    std::size_t reached = 0;
    for (VpIndex v : r.trajectory) {
      if (reached < e.gt_subtasks.size() && v == e.gt_subtasks[reached].target) ++reached;
    }
    const double gc = e.gt_subtasks.empty() ? 0.0 : static_cast<double>(reached) / e.gt_subtasks.size();
    m.sr += s;
    m.ne += ne;
    m.tl += p;
    m.spl += s * w;
    m.osr += oracle ? 1.0 : 0.0;
    m.gc += gc;
    m.plwsr += s * w;
    m.plwgc += gc * w;
  }
  const double n = static_cast<double>(results.size());
  for (double* v : {&m.sr, &m.ne, &m.tl, &m.spl, &m.osr, &m.gc, &m.plwsr, &m.plwgc}) *v /= n;
  return m;
}

void save_trajectory_log(const NavGraph& graph, const std::vector<EpisodeResult>& results,
                         const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& r : results) {
    const auto& log = r.log;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& o = log.outputs[i];
      detail::json j;
      j["episode"] = r.episode_id;
      j["step"] = i;
      j["viewpoint"] = graph.viewpoint(log.observations[i].viewpoint).id;
      const auto* mv = std::get_if<MoveTo>(&o.action);
      j["action"] = mv ? graph.viewpoint(mv->target).id : std::string("STOP");
      j["S"] = o.S;
      j["R"] = o.R;
      j["subtask"] = log.subtasks[i];
      detail::write_line(out, j);
    }
  }
  detail::finish(out, path);
}

}  // namespace eventnav
