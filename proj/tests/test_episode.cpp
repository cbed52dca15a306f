#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "eventnav/episode.hpp"
#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "metrics_oracle.hpp"
#include "support.hpp"

using namespace eventnav;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::config_error;
}

PolicyFactory oracle_factory(const NavGraph& g) {
  return [&g](const Episode& e) { return std::make_unique<OraclePolicy>(g, e); };
}

PolicyFactory noisy_factory(const NavGraph& g, double eps, std::uint64_t seed) {
  return [&g, eps, seed](const Episode& e) { return std::make_unique<NoisyPolicy>(g, e, eps, seed ^ fnv1a64(e.id)); };
}

KnowledgeBase episode_knowledge(const Episode& e, const Embedder& emb) {
  EventGraph kg;
  insert_sequence(kg, gt_sequence(e));
  return build_knowledge(std::move(kg), emb);
}

EpisodeConfig default_config(std::size_t window = 5) {
  EpisodeConfig c;
  c.backtrack = make_backtrack_config(0.25, window, 3);
  return c;
}

void check_close(const MetricsReport& a, const MetricsReport& b) {
  CHECK(a.episodes == b.episodes);
  CHECK(a.sr == doctest::Approx(b.sr).epsilon(1e-9));
  CHECK(a.ne == doctest::Approx(b.ne).epsilon(1e-9));
  CHECK(a.tl == doctest::Approx(b.tl).epsilon(1e-9));
  CHECK(a.spl == doctest::Approx(b.spl).epsilon(1e-9));
  CHECK(a.osr == doctest::Approx(b.osr).epsilon(1e-9));
  CHECK(a.gc == doctest::Approx(b.gc).epsilon(1e-9));
  CHECK(a.plwsr == doctest::Approx(b.plwsr).epsilon(1e-9));
  CHECK(a.plwgc == doctest::Approx(b.plwgc).epsilon(1e-9));
}

}  // namespace

TEST_CASE("oracle end to end on per-episode knowledge") {
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = generate_world(100, 4.5, seed);
    const auto eps = generate_episodes(g, 10, seed + 1);
    std::vector<EpisodeResult> results;
    for (const auto& e : eps) {
      const auto kb = episode_knowledge(e, emb);
      const auto r = run_episode(e, g, &kb, emb, mock, oracle_factory(g), default_config());
      CHECK(r.success);
      CHECK_FALSE(r.errored);
      CHECK(r.replans == 0);
      // The planner reproduces the ground-truth subtask sequence.
      REQUIRE(r.subtasks.size() == e.gt_subtasks.size());
      for (std::size_t i = 0; i < r.subtasks.size(); ++i) {
        CHECK(normalize_text(r.subtasks[i].text) == normalize_text(e.gt_subtasks[i].text));
        CHECK(r.subtasks[i].confirmed);
      }
      // Trajectory is the concatenation of shortest paths between waypoints.
      std::vector<VpIndex> expected{e.start};
      VpIndex at = e.start;
      for (const auto& s : e.gt_subtasks) {
        const auto p = shortest_path(g, at, s.target).path;
        expected.insert(expected.end(), p.begin() + 1, p.end());
        at = s.target;
      }
      CHECK(r.trajectory == expected);
      CHECK(r.tl == doctest::Approx(shortest_path(g, e.start, e.goal).length).epsilon(1e-12));
      CHECK(r.ne == 0.0);
      results.push_back(r);
    }
    const auto m = compute_metrics(results, eps, g);
    CHECK(m.sr == 1.0);
    CHECK(m.spl == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.gc == 1.0);
  }
}

TEST_CASE("empty knowledge ends the episode at the start") {
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  const auto g = generate_world(100, 4.5, 7);
  const auto kb = build_knowledge(EventGraph{}, emb);
  for (const auto& e : generate_episodes(g, 10, 7)) {
    const auto r = run_episode(e, g, &kb, emb, mock, oracle_factory(g), default_config());
    CHECK(r.subtasks.empty());
    CHECK(r.trajectory == std::vector<VpIndex>{e.start});
    CHECK(r.success == (distances_from(g, e.goal)[e.start] <= 3.0));
    CHECK_FALSE(r.success);
  }
  // A start already within the radius succeeds without moving.
  auto near = testsupport::simple_episode(testsupport::path_graph(5), 1, 3);
  const auto pg = testsupport::path_graph(5);
  const auto r = run_episode(near, pg, &kb, emb, mock, oracle_factory(pg), default_config());
  CHECK(r.success);
  CHECK(r.ne == 2.0);
}

TEST_CASE("planning modes") {
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  const auto g = generate_world(100, 4.5, 11);
  const auto e = generate_episodes(g, 1, 11)[0];
  const auto kb = episode_knowledge(e, emb);

  auto cfg = default_config();
  cfg.planning = PlanningMode::none;
  auto r = run_episode(e, g, nullptr, emb, mock, oracle_factory(g), cfg);
  CHECK(r.success);
  REQUIRE(r.subtasks.size() == 1);
  CHECK(r.subtasks[0].text == e.coarse_instruction);

  cfg.planning = PlanningMode::no_knowledge;
  r = run_episode(e, g, &kb, emb, mock, oracle_factory(g), cfg);
  CHECK(r.subtasks.empty());
  CHECK(r.diagnostic == "planner signalled DONE");

  cfg.planning = PlanningMode::planner;
  r = run_episode(e, g, nullptr, emb, mock, oracle_factory(g), cfg);
  CHECK(r.errored);
  CHECK_FALSE(r.success);
  CHECK(r.diagnostic.find("knowledge base") != std::string::npos);
}

TEST_CASE("component errors become failed results") {
  const HashingEmbedder emb;
  const auto g = generate_world(100, 4.5, 12);
  const auto e = generate_episodes(g, 1, 12)[0];
  const auto kb = episode_knowledge(e, emb);
  const ReplayBackend empty(Cassette{});
  const auto r = run_episode(e, g, &kb, emb, empty, oracle_factory(g), default_config());
  CHECK(r.errored);
  CHECK_FALSE(r.success);
  CHECK(r.diagnostic.find("BackendError") != std::string::npos);
  CHECK(r.trajectory == std::vector<VpIndex>{e.start});

  const PolicyFactory broken = [](const Episode&) -> std::unique_ptr<AgentPolicy> {
    throw Error(Errc::no_path, "policy refused");
  };
  const MockPlannerBackend mock;
  const auto r2 = run_episode(e, g, &kb, emb, mock, broken, default_config());
  CHECK(r2.errored);
  CHECK(r2.diagnostic.find("policy refused") != std::string::npos);
}

TEST_CASE("backtracking recovers from a wrong first proposal") {
  // Knowledge says the first subtask is followed by a detour that the
  // oracle cannot ground, so the planner must re-plan.
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  const auto g = testsupport::path_graph(10);
  Episode e = testsupport::simple_episode(g, 0, 6);
  e.gt_subtasks = {{"walk to the room 3", 3}, {"walk to the room 6", 6}};
  EventGraph kg;
  insert_sequence(kg, gt_sequence(e));
  for (int i = 0; i < 3; ++i) insert_sequence(kg, {e.coarse_instruction, {"walk to the room 3", "open the fridge"}, Dataset::custom, "x"});
  const auto kb = build_knowledge(std::move(kg), emb);
  const auto r = run_episode(e, g, &kb, emb, mock, oracle_factory(g), default_config());
  CHECK(r.success);
  // After room 6 the retrieved knowledge offers the detour again; once it
  // fails the only remaining successor is already completed, so DONE.
  REQUIRE(r.subtasks.size() == 4);
  CHECK(r.subtasks[1].text == "open the fridge");
  CHECK(r.subtasks[1].status == SubtaskStatus::backtracked);
  CHECK(r.subtasks[2].text == "walk to the room 6");
  CHECK(r.subtasks[2].status == SubtaskStatus::completed);
  CHECK(r.subtasks[3].status == SubtaskStatus::backtracked);
  CHECK(r.replans == 2);
  CHECK(r.diagnostic == "planner signalled DONE");

  auto off = default_config();
  off.backtrack.enabled = false;
  off.backtrack.max_steps_per_subtask = 4;
  const auto r_off = run_episode(e, g, &kb, emb, mock, oracle_factory(g), off);
  // Without backtracking the detour runs to the cap and counts as done.
  REQUIRE(r_off.subtasks.size() >= 2);
  CHECK(r_off.subtasks[1].text == "open the fridge");
  CHECK(r_off.subtasks[1].status == SubtaskStatus::completed);
  CHECK_FALSE(r_off.subtasks[1].confirmed);
  CHECK(r_off.replans == 0);
  CHECK(r_off.steps > r.steps);
}

TEST_CASE("property: episodes terminate within their budgets") {
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto g = generate_world(100, 4.5, seed);
    const auto eps = generate_episodes(g, 15, seed);
    EventGraph kg;
    for (const auto& e : eps) insert_sequence(kg, gt_sequence(e));
    const auto kb = build_knowledge(std::move(kg), emb);
    for (bool enabled : {true, false}) {
      auto cfg = default_config(1 + seed % 4);
      cfg.backtrack.enabled = enabled;
      cfg.backtrack.max_replans = static_cast<int>(seed % 3);
      for (const auto& e : eps) {
        const auto r = run_episode(e, g, &kb, emb, mock, noisy_factory(g, 1.0, seed), cfg);
        const std::size_t max_subtasks = 2 * e.gt_subtasks.size() + 2;
        CHECK(r.steps <= max_subtasks * cfg.backtrack.max_steps_per_subtask);
        std::size_t completed = 0;
        for (const auto& s : r.subtasks) completed += s.status == SubtaskStatus::completed;
        CHECK(completed <= max_subtasks);
        CHECK(r.trajectory.front() == e.start);
        CHECK_FALSE(r.errored);
        if (!enabled) CHECK(r.replans == 0);
      }
    }
  }
}

TEST_CASE("metric examples") {
  // a-b-c straight, plus a bent detour a-d-c of length 2.5.
  NavGraph g;
  g.add_viewpoint("a", {0, 0, 0}, "a");
  g.add_viewpoint("b", {1, 0, 0}, "b");
  g.add_viewpoint("c", {2, 0, 0}, "c");
  g.add_viewpoint("d", {1, 0.75, 0}, "d");
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 3);
  g.add_edge(3, 2);
  const auto e = testsupport::simple_episode(g, 0, 2, "e");

  EpisodeResult straight;
  straight.episode_id = "e";
  straight.trajectory = {0, 1, 2};
  straight.tl = 2.0;
  auto m = compute_metrics({straight}, {e}, g);
  CHECK(m.sr == 1.0);
  CHECK(m.spl == 1.0);

  EpisodeResult detour = straight;
  detour.trajectory = {0, 3, 2};
  detour.tl = 2.5;
  m = compute_metrics({detour}, {e}, g);
  CHECK(m.sr == 1.0);
  CHECK(m.spl == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.plwsr == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.plwgc == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(m.tl == 2.5);

  const auto pg = testsupport::path_graph(6);
  const auto far = testsupport::simple_episode(pg, 0, 5, "f");
  EpisodeResult stayed;
  stayed.episode_id = "f";
  stayed.trajectory = {0};
  m = compute_metrics({stayed}, {far}, pg);
  CHECK(m.sr == 0.0);
  CHECK(m.ne == 5.0);
  CHECK(m.osr == 0.0);
  CHECK(m.gc == 0.0);

  EpisodeResult wandered = stayed;
  wandered.trajectory = {0, 1, 2, 1, 0};
  wandered.tl = 4.0;
  m = compute_metrics({wandered}, {far}, pg);
  CHECK(m.sr == 0.0);
  CHECK(m.osr == 1.0);

  EpisodeResult at_goal = stayed;
  at_goal.trajectory = {0, 1, 2, 3, 4, 5};
  at_goal.tl = 5.0;
  at_goal.errored = true;
  CHECK(compute_metrics({at_goal}, {far}, pg).sr == 0.0);
  at_goal.errored = false;
  m = compute_metrics({at_goal}, {far}, pg);
  CHECK(m.ne == 0.0);
  CHECK(m.sr == 1.0);

  CHECK(compute_metrics({}, {}, pg).episodes == 0);
  CHECK(code_of([&] { compute_metrics({stayed}, {}, pg); }) == Errc::length_mismatch);
  CHECK(code_of([&] { compute_metrics({straight}, {far}, pg); }) == Errc::length_mismatch);
}

TEST_CASE("property: metrics match an independent recomputation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = generate_world(100, 4.5, seed);
    const auto eps = generate_episodes(g, 100, seed);
    const auto dist = testsupport::all_pairs(g);
    for (std::uint64_t k = 0; k < 4; ++k) {
      const auto results = testsupport::random_results(g, eps, seed * 10 + k);
      const auto m = compute_metrics(results, eps, g);
      check_close(m, testsupport::reference_metrics(results, eps, dist));
      CHECK(m.spl <= m.sr);
      CHECK(m.plwsr <= m.sr);
      for (double f : {m.sr, m.spl, m.osr, m.gc, m.plwsr, m.plwgc}) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
      }
    }
  }
}

TEST_CASE("trajectory log lines") {
  const HashingEmbedder emb;
  const MockPlannerBackend mock;
  const auto g = testsupport::path_graph(4);
  const auto e = testsupport::simple_episode(g, 0, 3, "p");
  const auto kb = episode_knowledge(e, emb);
  const auto r = run_episode(e, g, &kb, emb, mock, oracle_factory(g), default_config());
  const auto dir = testsupport::temp_dir("trajlog");
  save_trajectory_log(g, {r}, dir / "t.jsonl");
  const auto text = testsupport::slurp(dir / "t.jsonl");
  CHECK(text.substr(0, text.find('\n')) ==
        R"({"R":0.6666666666666666,"S":false,"action":"v1","episode":"p","step":0,"subtask":"walk to the room 3","viewpoint":"v0"})");
  std::size_t lines = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.size() == 7);
    CHECK(j["step"] == lines);
  }
  CHECK(lines == 3);
}
