#include "eventnav/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <functional>
#include <queue>
#include <random>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

using detail::json;

VpIndex NavGraph::add_viewpoint(std::string id, const Eigen::Vector3d& position, std::string caption) {
  if (by_id_.count(id)) throw Error(Errc::config_error, "duplicate viewpoint id '" + id + "'");
  const VpIndex i = viewpoints_.size();
  by_id_.emplace(id, i);
  viewpoints_.push_back({std::move(id), position, std::move(caption)});
  adjacency_.emplace_back();
  return i;
}

void NavGraph::add_edge(VpIndex a, VpIndex b) {
  if (a >= size() || b >= size()) throw Error(Errc::unknown_viewpoint, "edge endpoint out of range");
  if (a == b) throw Error(Errc::config_error, "self-loop at '" + viewpoints_[a].id + "'");
  if (edge_length(a, b)) return;
  const double len = (viewpoints_[a].position - viewpoints_[b].position).norm();
  auto insert = [&](VpIndex from, VpIndex to) {
    auto& adj = adjacency_[from];
    auto it = std::lower_bound(adj.begin(), adj.end(), to, [&](const Neighbor& n, VpIndex t) {
      return viewpoints_[n.to].id < viewpoints_[t].id;
    });
    adj.insert(it, Neighbor{to, len});
  };
  insert(a, b);
  insert(b, a);
  ++edge_count_;
}

std::optional<VpIndex> NavGraph::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

VpIndex NavGraph::require(const std::string& id) const {
  auto i = find(id);
  if (!i) throw Error(Errc::unknown_viewpoint, "'" + id + "'");
  return *i;
}

std::optional<double> NavGraph::edge_length(VpIndex a, VpIndex b) const {
  for (const auto& n : adjacency_.at(a)) {
    if (n.to == b) return n.length;
  }
  return std::nullopt;
}

namespace {

constexpr VpIndex kNone = static_cast<VpIndex>(-1);

using QueueItem = std::pair<double, VpIndex>;
using MinQueue = std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>>;

void check_index(const NavGraph& g, VpIndex i) {
  if (i >= g.size()) throw Error(Errc::unknown_viewpoint, "index " + std::to_string(i));
}

std::vector<VpIndex> unwind(const std::vector<VpIndex>& pred, VpIndex to) {
  std::vector<VpIndex> path;
  for (VpIndex v = to; v != kNone; v = pred[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

PathResult shortest_path(const NavGraph& graph, VpIndex from, VpIndex to) {
  check_index(graph, from);
  check_index(graph, to);
  std::vector<double> dist(graph.size(), kUnreachable);
  std::vector<VpIndex> pred(graph.size(), kNone);
  std::vector<bool> done(graph.size(), false);
  auto ids_less = [&](VpIndex u, VpIndex w) {
    const auto pu = unwind(pred, u);
    const auto pw = unwind(pred, w);
    return std::lexicographical_compare(pu.begin(), pu.end(), pw.begin(), pw.end(), [&](VpIndex x, VpIndex y) {
      return graph.viewpoint(x).id < graph.viewpoint(y).id;
    });
  };
  MinQueue q;
  dist[from] = 0.0;
  q.emplace(0.0, from);
  while (!q.empty()) {
    const auto [d, u] = q.top();
    q.pop();
    if (done[u] || d > dist[u]) continue;
    done[u] = true;
    if (u == to) break;
    for (const auto& n : graph.neighbors(u)) {
      if (done[n.to]) continue;
      const double nd = dist[u] + n.length;
      if (nd < dist[n.to]) {
        dist[n.to] = nd;
        pred[n.to] = u;
        q.emplace(nd, n.to);
      } else if (nd == dist[n.to] && ids_less(u, pred[n.to])) {
        pred[n.to] = u;
      }
    }
  }
  if (dist[to] == kUnreachable) {
    throw Error(Errc::no_path, graph.viewpoint(from).id + " -> " + graph.viewpoint(to).id);
  }
  return {unwind(pred, to), dist[to]};
}

std::vector<double> distances_from(const NavGraph& graph, VpIndex source) {
  check_index(graph, source);
  std::vector<double> dist(graph.size(), kUnreachable);
  MinQueue q;
  dist[source] = 0.0;
  q.emplace(0.0, source);
  while (!q.empty()) {
    const auto [d, u] = q.top();
    q.pop();
    if (d > dist[u]) continue;
    for (const auto& n : graph.neighbors(u)) {
      const double nd = d + n.length;
      if (nd < dist[n.to]) {
        dist[n.to] = nd;
        q.emplace(nd, n.to);
      }
    }
  }
  return dist;
}

std::vector<std::vector<VpIndex>> connected_components(const NavGraph& graph) {
  std::vector<std::vector<VpIndex>> comps;
  std::vector<bool> seen(graph.size(), false);
  for (VpIndex s = 0; s < graph.size(); ++s) {
    if (seen[s]) continue;
    std::vector<VpIndex> comp{s};
    seen[s] = true;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      for (const auto& n : graph.neighbors(comp[i])) {
        if (!seen[n.to]) {
          seen[n.to] = true;
          comp.push_back(n.to);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

SimState initial_state(const NavGraph& graph, VpIndex start) {
  check_index(graph, start);
  SimState s;
  s.position = start;
  s.trajectory.push_back(start);
  return s;
}

SimState apply(const NavGraph& graph, SimState state, const Action& action) {
  if (state.stopped) throw Error(Errc::already_stopped, "agent has already stopped");
  if (const auto* mv = std::get_if<MoveTo>(&action)) {
    check_index(graph, mv->target);
    const auto len = graph.edge_length(state.position, mv->target);
    if (!len) {
      throw Error(Errc::illegal_move,
                  graph.viewpoint(state.position).id + " is not adjacent to " + graph.viewpoint(mv->target).id);
    }
    state.position = mv->target;
    state.trajectory.push_back(mv->target);
    state.tl += *len;
  } else {
    state.stopped = true;
  }
  ++state.steps;
  return state;
}

SimState teleport(const NavGraph& graph, SimState state, VpIndex target) {
  check_index(graph, target);
  if (state.stopped) throw Error(Errc::already_stopped, "agent has already stopped");
  if (target == state.position) return state;
  state.tl += shortest_path(graph, state.position, target).length;
  state.position = target;
  state.trajectory.push_back(target);
  return state;
}

void validate_episode(const NavGraph& graph, const Episode& e) {
  check_index(graph, e.start);
  check_index(graph, e.goal);
  if (e.gt_subtasks.empty()) throw Error(Errc::config_error, "episode '" + e.id + "' has no subtasks");
  for (const auto& s : e.gt_subtasks) check_index(graph, s.target);
  if (e.gt_subtasks.back().target != e.goal) {
    throw Error(Errc::config_error, "episode '" + e.id + "': last subtask target is not the goal");
  }
}

TaskSequence gt_sequence(const Episode& e) {
  TaskSequence seq;
  seq.coarse_text = e.coarse_instruction;
  for (const auto& s : e.gt_subtasks) seq.subtasks.push_back(s.text);
  seq.dataset = e.dataset;
  seq.record_id = e.id;
  return seq;
}

NavGraph generate_world(std::size_t n, double radius, std::uint64_t seed) {
  static constexpr std::array rooms{"kitchen", "bedroom",  "bathroom", "hallway", "living room",
                                    "dining room", "office", "laundry room", "garage", "staircase"};
  static constexpr std::array objects{"sofa",   "lamp",   "table",     "painting", "plant",    "fireplace",
                                      "mirror", "window", "bookshelf", "armchair", "rug",      "cabinet"};
  if (n < 2) throw Error(Errc::degenerate_world, "need at least 2 viewpoints");
  std::mt19937_64 rng(seed);
  constexpr double kBox = 30.0;
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) {
    const double x = uniform01(rng) * kBox;
    const double y = uniform01(rng) * kBox;
    p = Eigen::Vector3d(x, y, 0.0);
  }
  NavGraph full;
  for (std::size_t i = 0; i < n; ++i) full.add_viewpoint(std::to_string(i), pts[i], "");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((pts[i] - pts[j]).norm() <= radius) full.add_edge(i, j);
    }
  }
  auto comps = connected_components(full);
  const auto largest = std::max_element(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    return a.size() < b.size();
  });
  if (largest->size() < 2) throw Error(Errc::degenerate_world, "largest component has fewer than 2 viewpoints");

  const int width = std::max<int>(4, static_cast<int>(std::to_string(n).size()));
  NavGraph g;
  std::vector<VpIndex> remap(n, kNone);
  for (std::size_t k = 0; k < largest->size(); ++k) {
    const VpIndex old = (*largest)[k];
    const std::string caption = fmt::format("{} {} {}", rooms[rng() % rooms.size()], objects[rng() % objects.size()], k);
    remap[old] = g.add_viewpoint(fmt::format("vp{:0{}}", k, width), pts[old], caption);
  }
  for (VpIndex old : *largest) {
    for (const auto& nb : full.neighbors(old)) {
      if (old < nb.to) g.add_edge(remap[old], remap[nb.to]);
    }
  }
  return g;
}

std::string subtask_text(std::size_t template_index, const std::string& caption) {
  static constexpr std::array verbs{"walk to the", "go to the", "head to the", "move toward the"};
  return fmt::format("{} {}", verbs[template_index % verbs.size()], caption);
}

std::string coarse_text(const std::string& caption) { return "find the " + caption; }

std::vector<Episode> generate_episodes(const NavGraph& graph, std::size_t m, std::uint64_t seed) {
  if (graph.size() < 2) throw Error(Errc::degenerate_world, "world has fewer than 2 viewpoints");
  std::mt19937_64 rng(seed);
  std::vector<Episode> out;
  out.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    constexpr int kAttempts = 10000;
    int attempt = 0;
    VpIndex start = 0;
    VpIndex goal = 0;
    for (; attempt < kAttempts; ++attempt) {
      start = rng() % graph.size();
      goal = rng() % graph.size();
      if (start == goal) continue;
      const double d = distances_from(graph, start)[goal];
      if (d != kUnreachable && d >= kMinEpisodeDistance) break;
    }
    if (attempt == kAttempts) throw Error(Errc::degenerate_world, "no viewpoint pair at least 6 m apart");
    const auto sp = shortest_path(graph, start, goal);
    const std::size_t hops = sp.path.size() - 1;
    Episode ep;
    ep.id = fmt::format("ep{:04}", e);
    ep.start = start;
    ep.goal = goal;
    ep.coarse_instruction = coarse_text(graph.viewpoint(goal).caption);
    for (std::size_t h = kMaxHopsPerSubtask;; h += kMaxHopsPerSubtask) {
      const std::size_t at = std::min(h, hops);
      const VpIndex wp = sp.path[at];
      ep.gt_subtasks.push_back({subtask_text(0, graph.viewpoint(wp).caption), wp});
      if (at == hops) break;
    }
    out.push_back(std::move(ep));
  }
  return out;
}

void save_world(const NavGraph& graph, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  detail::write_line(out, json{{"record", "header"}, {"format", kWorldFormat}});
  for (const auto& v : graph.viewpoints()) {
    detail::write_line(out, json{{"record", "viewpoint"},
                                 {"id", v.id},
                                 {"x", v.position.x()},
                                 {"y", v.position.y()},
                                 {"z", v.position.z()},
                                 {"caption", v.caption}});
  }
  for (VpIndex a = 0; a < graph.size(); ++a) {
    for (const auto& n : graph.neighbors(a)) {
      if (a < n.to) detail::write_line(out, json{{"record", "edge"}, {"a", graph.viewpoint(a).id}, {"b", graph.viewpoint(n.to).id}});
    }
  }
  detail::finish(out, path);
}

NavGraph load_world(const std::filesystem::path& path) {
  NavGraph g;
  bool have_header = false;
  detail::for_each_record(path, [&](std::size_t ln, const json& j) {
    const auto kind = detail::field<std::string>(j, "record", ln);
    if (!have_header) {
      if (kind != "header" || detail::field<std::string>(j, "format", ln) != kWorldFormat) {
        throw FormatError(ln, "expected vln-world/1 header");
      }
      have_header = true;
      return;
    }
    try {
      if (kind == "viewpoint") {
        g.add_viewpoint(detail::field<std::string>(j, "id", ln),
                        Eigen::Vector3d(detail::field<double>(j, "x", ln), detail::field<double>(j, "y", ln),
                                        detail::field<double>(j, "z", ln)),
                        detail::field<std::string>(j, "caption", ln));
      } else if (kind == "edge") {
        g.add_edge(g.require(detail::field<std::string>(j, "a", ln)), g.require(detail::field<std::string>(j, "b", ln)));
      } else {
        throw FormatError(ln, "unknown record kind '" + kind + "'");
      }
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(ln, e.what());
    }
  });
  if (!have_header) throw FormatError(1, "missing header record");
  return g;
}

void save_episodes(const NavGraph& graph, const std::vector<Episode>& episodes, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& e : episodes) {
    json gt = json::array();
    for (const auto& s : e.gt_subtasks) gt.push_back(json{{"text", s.text}, {"target", graph.viewpoint(s.target).id}});
    detail::write_line(out, json{{"record", "episode"},
                                 {"id", e.id},
                                 {"start", graph.viewpoint(e.start).id},
                                 {"goal", graph.viewpoint(e.goal).id},
                                 {"coarse_instruction", e.coarse_instruction},
                                 {"gt_subtasks", gt},
                                 {"success_radius", e.success_radius},
                                 {"dataset", dataset_name(e.dataset)}});
  }
  detail::finish(out, path);
}

std::vector<Episode> load_episodes(const NavGraph& graph, const std::filesystem::path& path) {
  std::vector<Episode> out;
  detail::for_each_record(path, [&](std::size_t ln, const json& j) {
    if (detail::field<std::string>(j, "record", ln) != "episode") throw FormatError(ln, "expected episode record");
    try {
      Episode e;
      e.id = detail::field<std::string>(j, "id", ln);
      e.start = graph.require(detail::field<std::string>(j, "start", ln));
      e.goal = graph.require(detail::field<std::string>(j, "goal", ln));
      e.coarse_instruction = detail::field<std::string>(j, "coarse_instruction", ln);
      for (const auto& s : detail::field<json>(j, "gt_subtasks", ln)) {
        e.gt_subtasks.push_back({detail::field<std::string>(s, "text", ln),
                                 graph.require(detail::field<std::string>(s, "target", ln))});
      }
      if (j.contains("success_radius")) e.success_radius = detail::field<double>(j, "success_radius", ln);
      if (j.contains("dataset")) {
        const auto ds = detail::field<std::string>(j, "dataset", ln);
        auto d = parse_dataset(ds);
        if (!d) throw FormatError(ln, "unknown dataset '" + ds + "'");
        e.dataset = *d;
      }
      validate_episode(graph, e);
      out.push_back(std::move(e));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(ln, e.what());
    }
  });
  return out;
}

}  // namespace eventnav
