#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <initializer_list>
#include <sstream>

#include "eventnav/cli.hpp"
#include "eventnav/config.hpp"
#include "eventnav/error.hpp"
#include "eventnav/retrieval.hpp"
#include "support.hpp"

using namespace eventnav;
using testsupport::slurp;
using testsupport::spit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = EVENTNAV_TEST_DATA;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"eventnav"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_error);
    return e.what();
  }
  FAIL("expected a config error for " << text);
  return {};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const auto d = parse_config("{}");
  CHECK(d.retrieval.topk == 5);
  CHECK(d.backtrack.x == 0.25);
  CHECK(d.backtrack.w_multiplier == 2.0);
  CHECK(d.backend.mode == BackendMode::mock);
  CHECK(d.scope == KnowledgeScope::fused);
  CHECK(d.x_values == std::vector<double>{0.1, 0.25, 0.5});
  CHECK(d.w_multipliers == std::vector<double>{0.5, 1.0, 2.0, 4.0});

  const auto c = parse_config(R"({"seed": 7, "retrieval": {"topk": 3}, "backtrack": {"x": 0.5, "enabled": false},
    "knowledge": {"scope": "per_dataset"}, "extraction": {"R2R": {"paragraph_field": "text"}}})");
  CHECK(c.seed == 7);
  CHECK(c.retrieval.topk == 3);
  CHECK(c.backtrack.x == 0.5);
  CHECK_FALSE(c.backtrack.enabled);
  CHECK(c.scope == KnowledgeScope::per_dataset);
  CHECK(c.mapping_for(Dataset::r2r).paragraph_field == "text");
  CHECK(c.mapping_for(Dataset::alfred).subtasks_field == default_mapping(Dataset::alfred).subtasks_field);

  const auto s = suite_settings(c);
  CHECK(s.topk == 3);
  CHECK(s.seed == 7);
}

TEST_CASE("config errors") {
  CHECK(config_error(R"({"sed": 1})").find("unknown key 'sed'") != std::string::npos);
  CHECK(config_error(R"({"retrieval": {"top_k": 1}})").find("retrieval.top_k") != std::string::npos);
  CHECK(config_error(R"({"retrieval": {"topk": "5"}})").find("wrong type") != std::string::npos);
  CHECK(config_error(R"({"retrieval": {"topk": -1}})").find("wrong type") != std::string::npos);
  CHECK(config_error(R"({"backtrack": {"enabled": 1}})").find("wrong type") != std::string::npos);
  CHECK(config_error(R"({"retrieval": {"topk": 0}})").find("topk") != std::string::npos);
  CHECK(config_error(R"({"backtrack": {"x": 0}})").find("backtrack.x") != std::string::npos);
  CHECK(config_error(R"({"backtrack": {"x": 1.0}})").find("backtrack.x") != std::string::npos);
  CHECK(config_error(R"({"backtrack": {"w_multiplier": 0}})").find("w_multiplier") != std::string::npos);
  CHECK(config_error(R"({"eval": {"x_values": [0.2, 1.5]}})").find("x_values") != std::string::npos);
  CHECK(config_error(R"({"eval": {"w_multipliers": []}})").find("non-empty") != std::string::npos);
  CHECK(config_error(R"({"policy": {"epsilon": 2}})").find("epsilon") != std::string::npos);
  CHECK(config_error(R"({"knowledge": {"scope": "galaxy"}})").find("galaxy") != std::string::npos);
  CHECK(config_error(R"({"extraction": {"MARS": {}}})").find("MARS") != std::string::npos);
  CHECK(config_error(R"({"extraction": {"R2R": {"shape": "round"}}})").find("round") != std::string::npos);
  CHECK(config_error("[1, 2]").find("object") != std::string::npos);
  CHECK(config_error("{").find("not valid JSON") != std::string::npos);

  ::unsetenv("BACKEND_URL");
  CHECK(config_error(R"({"backend": {"mode": "remote"}})").find("endpoint") != std::string::npos);
  CHECK(parse_config(R"({"backend": {"mode": "remote", "endpoint": "http://127.0.0.1:1"}})").backend.mode ==
        BackendMode::remote);
  ::setenv("BACKEND_URL", "http://127.0.0.1:1", 1);
  CHECK(parse_config(R"({"backend": {"mode": "remote"}})").backend.endpoint.empty());
  ::unsetenv("BACKEND_URL");

  CHECK(parse_backend_mode("Replay") == BackendMode::replay);
  CHECK_THROWS_AS(parse_backend_mode("psychic"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(Errc::config_error) == kExitConfig);
  CHECK(exit_code_for(Errc::invalid_window) == kExitConfig);
  CHECK(exit_code_for(Errc::backend_error) == kExitBackend);
  CHECK(exit_code_for(Errc::format_error) == kExitData);

  const auto dir = testsupport::temp_dir("cli_exit");
  CHECK(cli({"--topk", "0", "stats", "--kg", "x"}).code == kExitConfig);
  CHECK(cli({"--backtrack-x", "1.5", "stats", "--kg", "x"}).code == kExitConfig);
  CHECK(cli({"--mode", "psychic", "stats", "--kg", "x"}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"stats"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);

  spit(dir / "bad.json", R"({"retrieval": {"topk": 0}})");
  const auto bad_cfg = cli({"--config", (dir / "bad.json").string(), "stats", "--kg", "x"});
  CHECK(bad_cfg.code == kExitConfig);
  CHECK(bad_cfg.err.find("ConfigError") != std::string::npos);

  const auto missing = cli({"stats", "--kg", (dir / "missing.jsonl").string()});
  CHECK(missing.code == kExitData);
  CHECK(missing.err.find("error: ") == 0);

  spit(dir / "broken.jsonl", "{\"format\":\"vln-eventkg/1\",\"record\":\"header\"}\nnot json\n");
  CHECK(cli({"stats", "--kg", (dir / "broken.jsonl").string()}).code == kExitData);

  CHECK(cli({"extract", "--dataset", "MARS", "--input", (kData / "r2r.jsonl").string(), "--out",
             (dir / "x.jsonl").string()})
            .code == kExitConfig);
  CHECK(cli({"extract", "--dataset", "R2R", "--method", "backend", "--input", (kData / "r2r.jsonl").string(), "--out",
             (dir / "x.jsonl").string()})
            .code == kExitConfig);

  // An empty cassette has no answer for the first extraction prompt.
  spit(dir / "empty_cassette.jsonl", "");
  const auto miss = cli({"--mode", "replay", "extract", "--dataset", "R2R", "--method", "backend", "--input",
                         (kData / "r2r.jsonl").string(), "--out", (dir / "x.jsonl").string(), "--cassette",
                         (dir / "empty_cassette.jsonl").string()});
  CHECK(miss.code == kExitBackend);
  CHECK(miss.err.find("BackendError") != std::string::npos);

  CHECK(cli({"--mode", "replay", "run", "--world", "w", "--episodes", "e"}).code == kExitData);
  CHECK(cli({"run"}).code == kExitConfig);
}

TEST_CASE("knowledge pipeline goldens") {
  const auto dir = testsupport::temp_dir("cli_kg");
  const auto p = [&](const char* name) { return (dir / name).string(); };

  auto a = cli({"extract", "--dataset", "ALFRED", "--method", "structured", "--input", (kData / "alfred.jsonl").string(),
                "--out", p("a.jsonl"), "--report", p("a_report.json")});
  CHECK(a.code == 0);
  CHECK(a.out == "accepted\t3\nrejected\t3\n");
  CHECK(a.err.find("reject a4: EmptySubtaskList") != std::string::npos);
  CHECK(a.err.find("reject line 6: FormatError") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(p("a_report.json")));
  CHECK(report["accepted"] == 3);
  CHECK(report["rejected"] == 3);
  CHECK(report["rejects"].size() == 3);
  CHECK(report["rejects"][1]["record_id"] == "a5");
  CHECK(lines_of(slurp(p("a.jsonl")))[0] ==
        R"({"coarse_text":"Put a washed apple in the fridge","dataset":"ALFRED","record_id":"a1","subtasks":["pick up the apple","wash the apple","put apple in fridge"]})");

  auto r = cli({"extract", "--dataset", "R2R", "--input", (kData / "r2r.jsonl").string(), "--out", p("r.jsonl")});
  CHECK(r.code == 0);
  CHECK(r.out == "accepted\t3\nrejected\t1\n");
  CHECK(lines_of(slurp(p("r.jsonl")))[0] ==
        R"({"coarse_text":"Go to the fridge","dataset":"R2R","record_id":"101","subtasks":["Exit the bedroom","Walk past the sofa","Enter the kitchen"]})");

  auto b = cli({"build-kg", "--sequences", p("a.jsonl"), p("r.jsonl"), "--out", p("kg.jsonl")});
  CHECK(b.code == 0);
  CHECK(b.out == "nodes\t20\nedges\t11\n");
  CHECK(lines_of(slurp(p("kg.jsonl")))[0] == R"({"format":"vln-eventkg/1","record":"header"})");

  CHECK(cli({"build-kg", "--sequences", p("a.jsonl"), "--out", p("ka.jsonl")}).code == 0);
  CHECK(cli({"build-kg", "--sequences", p("r.jsonl"), "--out", p("kr.jsonl")}).code == 0);
  auto m = cli({"merge", "--inputs", p("ka.jsonl"), p("kr.jsonl"), "--out", p("merged.jsonl")});
  CHECK(m.code == 0);
  CHECK(m.out == b.out);
  CHECK(slurp(p("merged.jsonl")) == slurp(p("kg.jsonl")));

  const auto st = cli({"stats", "--kg", p("kg.jsonl")});
  CHECK(st.code == 0);
  CHECK(st.out == "nodes\t20\nedges\t11\nsequences\t6\nsequences.ALFRED\t3\nsequences.R2R\t3\n");

  const auto q = cli({"query", "--kg", p("kg.jsonl"), "--text", "pick up the apple", "--k", "2", "--format", "tsv"});
  CHECK(q.code == 0);
  CHECK(q.out ==
        "hit\t1\t1\t1.000000\tpick up the apple\n"
        "succ\t1\t2\t2\twash the apple\n"
        "hit\t2\t6\t0.714286\tpick up the mug\n"
        "succ\t2\t7\t1\theat the mug in the microwave\n");

  const auto ix = cli({"index", "--kg", p("kg.jsonl"), "--out", p("kg.index")});
  CHECK(ix.code == 0);
  const auto qi = cli({"query", "--kg", p("kg.jsonl"), "--index", p("kg.index"), "--text", "pick up the apple", "--k",
                       "2", "--format", "tsv"});
  CHECK(qi.out == q.out);
  const auto table = cli({"query", "--kg", p("kg.jsonl"), "--text", "pick up the apple", "--format", "table"});
  CHECK(table.out.rfind("rank  similarity node     text\n", 0) == 0);
  CHECK(cli({"--topk", "1", "query", "--kg", p("kg.jsonl"), "--text", "pick up the apple", "--format", "tsv"}).out ==
        "hit\t1\t1\t1.000000\tpick up the apple\nsucc\t1\t2\t2\twash the apple\n");
  CHECK(cli({"query", "--kg", p("kg.jsonl"), "--text", "pick", "--k", "0"}).code == kExitData);

  // A second run writes byte-identical files.
  const auto first = slurp(p("kg.jsonl"));
  const auto first_index = slurp(p("kg.index"));
  CHECK(cli({"build-kg", "--sequences", p("a.jsonl"), p("r.jsonl"), "--out", p("kg.jsonl")}).code == 0);
  CHECK(cli({"index", "--kg", p("kg.jsonl"), "--out", p("kg.index")}).code == 0);
  CHECK(slurp(p("kg.jsonl")) == first);
  CHECK(slurp(p("kg.index")) == first_index);
}

TEST_CASE("gen-world and run") {
  const auto dir = testsupport::temp_dir("cli_run");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  const auto g = cli({"--seed", "3", "gen-world", "--world-out", p("w.jsonl"), "--episodes-out", p("e.jsonl"),
                      "--episodes", "12"});
  REQUIRE(g.code == 0);
  CHECK(g.out.find("episodes\t12\n") != std::string::npos);
  const auto world = slurp(p("w.jsonl"));
  REQUIRE(cli({"--seed", "3", "gen-world", "--world-out", p("w2.jsonl"), "--episodes-out", p("e2.jsonl"), "--episodes",
               "12"})
              .code == 0);
  CHECK(slurp(p("w2.jsonl")) == world);
  CHECK(slurp(p("e2.jsonl")) == slurp(p("e.jsonl")));

  spit(dir / "per_episode.json", R"({"knowledge": {"scope": "per_episode"}})");
  const auto oracle = cli({"--config", p("per_episode.json"), "run", "--world", p("w.jsonl"), "--episodes", p("e.jsonl"), "--out-dir", p("oracle")});
  REQUIRE(oracle.code == 0);
  const auto rows = lines_of(slurp(dir / "oracle" / "report.tsv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == kReportHeader);
  CHECK(rows[1].rfind("run\t1.0000\t0.0000\t", 0) == 0);
  CHECK(oracle.out == slurp(dir / "oracle" / "report.tsv"));

  const auto noisy = cli({"run", "--world", p("w.jsonl"), "--episodes", p("e.jsonl"), "--out-dir", p("noisy"),
                          "--epsilon", "0.3"});
  REQUIRE(noisy.code == 0);
  const auto log = lines_of(slurp(dir / "noisy" / "trajectories.jsonl"));
  REQUIRE_FALSE(log.empty());
  for (const auto& line : log) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"episode", "step", "viewpoint", "subtask", "action", "S", "R"}) CHECK(j.contains(key));
    CHECK(j["R"].get<double>() >= 0.0);
    CHECK(j["R"].get<double>() <= 1.0);
  }
  REQUIRE(cli({"--jobs", "4", "run", "--world", p("w.jsonl"), "--episodes", p("e.jsonl"), "--out-dir", p("noisy4"),
               "--epsilon", "0.3"})
              .code == 0);
  CHECK(slurp(dir / "noisy4" / "trajectories.jsonl") == slurp(dir / "noisy" / "trajectories.jsonl"));
  CHECK(slurp(dir / "noisy4" / "report.tsv") == slurp(dir / "noisy" / "report.tsv"));

  CHECK(cli({"run", "--world", p("w.jsonl"), "--episodes", p("e.jsonl"), "--epsilon", "1.5"}).code == kExitConfig);
}

TEST_CASE("eval writes the variant table, the grid and per-variant cassettes") {
  const auto dir = testsupport::temp_dir("cli_eval");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  REQUIRE(cli({"gen-world", "--world-out", p("w.jsonl"), "--episodes-out", p("e.jsonl"), "--episodes", "12"}).code == 0);
  spit(dir / "cfg.json", nlohmann::json{{"paths", {{"cassette_dir", p("cassettes")}}}}.dump());
  const auto ev = cli({"--config", p("cfg.json"), "eval", "--world", p("w.jsonl"), "--episodes", p("e.jsonl"),
                       "--out-dir", p("out"), "--epsilon", "0.3"});
  REQUIRE(ev.code == 0);

  const auto table = lines_of(slurp(dir / "out" / "variants.tsv"));
  REQUIRE(table.size() == 6);
  CHECK(table[0] == kReportHeader);
  const char* names[] = {"base", "base+planD", "base+planS", "base+planF", "base+planF+backtrace"};
  for (std::size_t i = 0; i < 5; ++i) CHECK(table[i + 1].substr(0, table[i + 1].find('\t')) == names[i]);

  const auto grid = lines_of(slurp(dir / "out" / "grid.tsv"));
  REQUIRE(grid.size() == 13);
  std::size_t row = 1;
  for (const char* w : {"0.5", "1", "2", "4"}) {
    for (const char* x : {"0.1", "0.25", "0.5"}) {
      CHECK(grid[row].rfind(fmt::format("planF+backtrace x={} W={}xDavg\t", x, w), 0) == 0);
      ++row;
    }
  }

  std::map<std::string, std::size_t> edges;
  for (const auto& line : lines_of(slurp(dir / "out" / "knowledge.tsv"))) {
    if (line.rfind("variant\t", 0) == 0) continue;
    const auto tab = line.find('\t');
    edges[line.substr(0, tab)] = std::stoul(line.substr(tab + 1));
  }
  CHECK(edges.at("base+planD") == 0);
  CHECK(edges.at("base+planS") > 0);
  CHECK(edges.at("base+planF") > edges.at("base+planS"));

  std::size_t prompts = 0;
  for (const auto& line : lines_of(slurp(dir / "cassettes" / "base_planD.jsonl"))) {
    const auto prompt = nlohmann::json::parse(line)["prompt"].get<std::string>();
    CHECK(prompt.find(std::string("KNOWLEDGE:\n") + std::string(kNoKnowledge) + "\n") != std::string::npos);
    ++prompts;
  }
  CHECK(prompts > 0);
  std::size_t with_knowledge = 0;
  for (const auto& line : lines_of(slurp(dir / "cassettes" / "base_planF.jsonl"))) {
    const auto prompt = nlohmann::json::parse(line)["prompt"].get<std::string>();
    with_knowledge += prompt.find(std::string(kNoKnowledge)) == std::string::npos;
  }
  CHECK(with_knowledge > 0);

  // Replaying the recorded cassettes reproduces every report byte for byte.
  const auto replay = cli({"--config", p("cfg.json"), "--mode", "replay", "eval", "--world", p("w.jsonl"), "--episodes",
                           p("e.jsonl"), "--out-dir", p("replayed"), "--epsilon", "0.3"});
  REQUIRE(replay.code == 0);
  CHECK(replay.out == ev.out);
  for (const char* f : {"variants.tsv", "grid.tsv", "knowledge.tsv"}) {
    CHECK(slurp(dir / "replayed" / f) == slurp(dir / "out" / f));
  }
}
