#include "eventnav/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"

namespace eventnav {

double suite_d_avg(const NavGraph& graph, const std::vector<Episode>& episodes) {
  std::size_t hops = 0;
  std::size_t subtasks = 0;
  for (const auto& e : episodes) {
    VpIndex at = e.start;
    for (const auto& s : e.gt_subtasks) {
      hops += shortest_path(graph, at, s.target).path.size() - 1;
      at = s.target;
      ++subtasks;
    }
  }
  if (subtasks == 0) throw Error(Errc::config_error, "suite has no subtasks");
  return static_cast<double>(hops) / static_cast<double>(subtasks);
}

void assign_datasets_round_robin(std::vector<Episode>& episodes) {
  constexpr Dataset order[] = {Dataset::r2r, Dataset::reverie, Dataset::alfred};
  for (std::size_t i = 0; i < episodes.size(); ++i) episodes[i].dataset = order[i % 3];
}

std::vector<TaskSequence> paraphrase_sequences(const NavGraph& graph, const Episode& episode, std::size_t count,
                                               std::mt19937_64& rng) {
  std::vector<TaskSequence> out;
  for (std::size_t k = 0; k < count; ++k) {
    TaskSequence seq = gt_sequence(episode);
    seq.record_id = fmt::format("{}#p{}", episode.id, k + 1);
    for (std::size_t i = 0; i < seq.subtasks.size(); ++i) {
      const auto& caption = graph.viewpoint(episode.gt_subtasks[i].target).caption;
      seq.subtasks[i] = subtask_text(rng() % kSubtaskTemplates, caption);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

EventGraph suite_knowledge(const NavGraph& graph, const std::vector<Episode>& episodes, std::size_t paraphrases,
                           std::uint64_t seed, std::optional<Dataset> only) {
  EventGraph kg;
  std::mt19937_64 rng(seed);
  for (const auto& e : episodes) {
    // Draw for every episode so a subset sees the same paraphrases as the
    // full suite.
    auto extra = paraphrase_sequences(graph, e, paraphrases, rng);
    if (only && e.dataset != *only) continue;
    insert_sequence(kg, gt_sequence(e));
    for (const auto& s : extra) insert_sequence(kg, s);
  }
  return kg;
}

std::vector<Variant> table_variants(double x, double w_multiplier) {
  return {
      {"base", PlanningMode::none, KnowledgeScope::none, false, x, w_multiplier},
      {"base+planD", PlanningMode::no_knowledge, KnowledgeScope::none, false, x, w_multiplier},
      {"base+planS", PlanningMode::planner, KnowledgeScope::per_dataset, false, x, w_multiplier},
      {"base+planF", PlanningMode::planner, KnowledgeScope::fused, false, x, w_multiplier},
      {"base+planF+backtrace", PlanningMode::planner, KnowledgeScope::fused, true, x, w_multiplier},
  };
}

std::vector<Variant> grid_variants(const std::vector<double>& x_values, const std::vector<double>& w_multipliers) {
  std::vector<Variant> out;
  for (double w : w_multipliers) {
    for (double x : x_values) {
      out.push_back({fmt::format("planF+backtrace x={:g} W={:g}xDavg", x, w), PlanningMode::planner,
                     KnowledgeScope::fused, true, x, w});
    }
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

VariantRun run_variant(const NavGraph& graph, const std::vector<Episode>& episodes, const Variant& variant,
                       const SuiteSettings& settings, const Embedder& embedder, const TextBackend& backend) {
  VariantRun run;
  run.variant = variant;
  if (episodes.empty()) return run;
  const double d_avg = settings.d_avg > 0.0 ? settings.d_avg : suite_d_avg(graph, episodes);
  run.window = window_for(d_avg, variant.w_multiplier);

  EpisodeConfig cfg;
  cfg.backtrack = make_backtrack_config(variant.x, run.window, settings.max_replans, settings.max_steps_per_subtask,
                                        variant.backtracking);
  cfg.planning = variant.planning;
  cfg.topk = settings.topk;
  cfg.max_subtasks = settings.max_subtasks;
  cfg.max_episode_steps = settings.max_episode_steps;

  std::map<Dataset, KnowledgeBase> shared;
  switch (variant.scope) {
    case KnowledgeScope::fused:
      shared.emplace(Dataset::custom,
                     build_knowledge(suite_knowledge(graph, episodes, settings.paraphrases, settings.seed), embedder));
      break;
    case KnowledgeScope::per_dataset:
      for (const auto& e : episodes) {
        if (shared.count(e.dataset)) continue;
        shared.emplace(e.dataset, build_knowledge(suite_knowledge(graph, episodes, settings.paraphrases,
                                                                  settings.seed, e.dataset),
                                                  embedder));
      }
      break;
    case KnowledgeScope::per_episode:
    case KnowledgeScope::none:
      break;
  }
  for (const auto& [_, kb] : shared) run.kg_edges = std::max(run.kg_edges, kb.graph.edge_count());

  const PolicyFactory policies = [&](const Episode& e) -> std::unique_ptr<AgentPolicy> {
    if (settings.epsilon == 0.0) return std::make_unique<OraclePolicy>(graph, e);
    return std::make_unique<NoisyPolicy>(graph, e, settings.epsilon, settings.seed ^ fnv1a64(e.id));
  };

  run.results.resize(episodes.size());
  std::mutex mu;
  parallel_for(episodes.size(), settings.jobs, [&](std::size_t i) {
    const Episode& e = episodes[i];
    const KnowledgeBase* kb = nullptr;
    KnowledgeBase own;
    if (variant.scope == KnowledgeScope::per_episode) {
      EventGraph g;
      insert_sequence(g, gt_sequence(e));
      own = build_knowledge(std::move(g), embedder);
      kb = &own;
      std::lock_guard lock(mu);
      run.kg_edges = std::max(run.kg_edges, own.graph.edge_count());
    } else if (variant.scope == KnowledgeScope::fused) {
      kb = &shared.at(Dataset::custom);
    } else if (variant.scope == KnowledgeScope::per_dataset) {
      kb = &shared.at(e.dataset);
    }
    run.results[i] = run_episode(e, graph, kb, embedder, backend, policies, cfg);
  });
  run.metrics = compute_metrics(run.results, episodes, graph);
  return run;
}

std::string report_row(const std::string& variant, const MetricsReport& m) {
  return fmt::format("{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\n", variant, m.sr, m.ne, m.tl,
                     m.spl, m.osr, m.gc, m.plwsr, m.plwgc);
}

std::string format_report(const std::vector<VariantRun>& runs) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : runs) out += report_row(r.variant.name, r.metrics);
  return out;
}

}  // namespace eventnav
