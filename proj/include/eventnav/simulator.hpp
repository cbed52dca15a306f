#pragma once
// Metric navigation graph, agent state transitions and synthetic worlds.
//
// World file (one JSON object per line):
//   {"format":"vln-world/1","record":"header"}
//   {"caption":"...","id":"vp0003","record":"viewpoint","x":1.0,"y":2.0,"z":0.0}
//   {"a":"vp0003","b":"vp0007","record":"edge"}
// Episode file:
//   {"coarse_instruction":"...","dataset":"R2R","goal":"vp0042","gt_subtasks":[{"target":"vp0010","text":"..."}],
//    "id":"ep0001","record":"episode","start":"vp0003","success_radius":3.0}

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "eventnav/kg_store.hpp"

namespace eventnav {

using VpIndex = std::size_t;

struct Viewpoint {
  std::string id;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::string caption;
};

struct Neighbor {
  VpIndex to = 0;
  double length = 0.0;
};

// Undirected; edge length is the Euclidean distance between endpoints.
class NavGraph {
 public:
  VpIndex add_viewpoint(std::string id, const Eigen::Vector3d& position, std::string caption);
  void add_edge(VpIndex a, VpIndex b);

  std::size_t size() const noexcept { return viewpoints_.size(); }
  const Viewpoint& viewpoint(VpIndex i) const { return viewpoints_.at(i); }
  const std::vector<Viewpoint>& viewpoints() const noexcept { return viewpoints_; }
  std::optional<VpIndex> find(const std::string& id) const;
  // Throws UnknownViewpoint.
  VpIndex require(const std::string& id) const;

  // Sorted by neighbor id.
  const std::vector<Neighbor>& neighbors(VpIndex i) const { return adjacency_.at(i); }
  std::optional<double> edge_length(VpIndex a, VpIndex b) const;
  std::size_t edge_count() const noexcept { return edge_count_; }

 private:
  std::vector<Viewpoint> viewpoints_;
  std::unordered_map<std::string, VpIndex> by_id_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t edge_count_ = 0;
};

struct PathResult {
  std::vector<VpIndex> path;
  double length = 0.0;
};

// Minimal total length; equal-length paths broken by the lexicographically
// smallest viewpoint id sequence. Throws NoPath.
PathResult shortest_path(const NavGraph& graph, VpIndex from, VpIndex to);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// Geodesic distance from `source` to every viewpoint (kUnreachable if none).
std::vector<double> distances_from(const NavGraph& graph, VpIndex source);

std::vector<std::vector<VpIndex>> connected_components(const NavGraph& graph);

struct MoveTo {
  VpIndex target = 0;
  friend bool operator==(const MoveTo&, const MoveTo&) = default;
};
struct Stop {
  friend bool operator==(const Stop&, const Stop&) = default;
};
using Action = std::variant<MoveTo, Stop>;

struct SimState {
  VpIndex position = 0;
  std::vector<VpIndex> trajectory;  // visited viewpoints, starting at the start
  double tl = 0.0;                  // traversed length plus rollback charges
  std::size_t steps = 0;
  bool stopped = false;
};

SimState initial_state(const NavGraph& graph, VpIndex start);

// MoveTo must target a neighbor (IllegalMove); Stop freezes the state and any
// later action throws AlreadyStopped.
SimState apply(const NavGraph& graph, SimState state, const Action& action);

// Relocates the agent and charges the shortest return path to tl.
SimState teleport(const NavGraph& graph, SimState state, VpIndex target);

struct GtSubtask {
  std::string text;
  VpIndex target = 0;
};

struct Episode {
  std::string id;
  VpIndex start = 0;
  VpIndex goal = 0;
  std::string coarse_instruction;
  std::vector<GtSubtask> gt_subtasks;
  double success_radius = 3.0;
  Dataset dataset = Dataset::custom;
};

// Throws UnknownViewpoint for indices outside the graph, and
// Error(config_error) when gt_subtasks is empty or does not end at the goal.
void validate_episode(const NavGraph& graph, const Episode& episode);

// Ground-truth sequence as a KG record.
TaskSequence gt_sequence(const Episode& episode);

// Seeded random geometric graph in a 30 m box; only the largest connected
// component is kept. Throws DegenerateWorld if it has fewer than 2 viewpoints.
NavGraph generate_world(std::size_t n, double radius, std::uint64_t seed);

inline constexpr double kMinEpisodeDistance = 6.0;
inline constexpr std::size_t kMaxHopsPerSubtask = 3;

std::string subtask_text(std::size_t template_index, const std::string& caption);
inline constexpr std::size_t kSubtaskTemplates = 4;
std::string coarse_text(const std::string& caption);

// Start/goal at least 6 m apart; a waypoint every <= 3 hops along the
// shortest path; texts templated from waypoint captions.
std::vector<Episode> generate_episodes(const NavGraph& graph, std::size_t m, std::uint64_t seed);

inline constexpr std::string_view kWorldFormat = "vln-world/1";

void save_world(const NavGraph& graph, const std::filesystem::path& path);
NavGraph load_world(const std::filesystem::path& path);
void save_episodes(const NavGraph& graph, const std::vector<Episode>& episodes, const std::filesystem::path& path);
std::vector<Episode> load_episodes(const NavGraph& graph, const std::filesystem::path& path);

}  // namespace eventnav
