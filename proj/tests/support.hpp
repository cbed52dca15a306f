#pragma once
// Seeded generators and small fixtures shared by the test binaries.

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eventnav/kg_store.hpp"
#include "eventnav/simulator.hpp"

namespace testsupport {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eventnav_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Texts drawn from a small vocabulary so sequences share nodes.
inline std::string random_phrase(std::mt19937_64& rng, std::size_t vocab) {
  static const char* verbs[] = {"walk to", "enter", "exit", "turn left at", "pass", "stop by", "climb", "open"};
  static const char* things[] = {"kitchen", "bedroom", "sofa", "door", "stairs", "hallway", "table", "window"};
  const std::size_t v = rng() % 8;
  const std::size_t t = rng() % 8;
  const std::size_t k = rng() % std::max<std::size_t>(vocab, 1);
  return fmt::format("{} the {} {}", verbs[v], things[t], k);
}

inline std::vector<eventnav::TaskSequence> random_sequences(std::uint64_t seed, std::size_t count,
                                                            std::size_t vocab = 20) {
  std::mt19937_64 rng(seed);
  constexpr eventnav::Dataset ds[] = {eventnav::Dataset::alfred, eventnav::Dataset::r2r, eventnav::Dataset::reverie};
  std::vector<eventnav::TaskSequence> out;
  for (std::size_t i = 0; i < count; ++i) {
    eventnav::TaskSequence s;
    s.coarse_text = fmt::format("find the goal {}", rng() % (vocab + 1));
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t j = 0; j < n; ++j) s.subtasks.push_back(random_phrase(rng, vocab));
    s.dataset = ds[rng() % 3];
    s.record_id = fmt::format("rec{}", i);
    out.push_back(std::move(s));
  }
  return out;
}

// v0 - v1 - ... - v(n-1), unit spacing on the x axis.
inline eventnav::NavGraph path_graph(std::size_t n) {
  eventnav::NavGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.add_viewpoint(fmt::format("v{}", i), Eigen::Vector3d(static_cast<double>(i), 0, 0), fmt::format("room {}", i));
  }
  for (std::size_t i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

// Single-subtask episode from start to goal on any graph.
inline eventnav::Episode simple_episode(const eventnav::NavGraph& g, eventnav::VpIndex start,
                                        eventnav::VpIndex goal, std::string id = "ep") {
  eventnav::Episode e;
  e.id = std::move(id);
  e.start = start;
  e.goal = goal;
  e.coarse_instruction = eventnav::coarse_text(g.viewpoint(goal).caption);
  e.gt_subtasks.push_back({eventnav::subtask_text(0, g.viewpoint(goal).caption), goal});
  return e;
}

}  // namespace testsupport
