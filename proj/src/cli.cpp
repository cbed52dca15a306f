#include "eventnav/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "eventnav/config.hpp"
#include "eventnav/experiment.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

namespace fs = std::filesystem;

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::config_error:
    case Errc::invalid_window:
    case Errc::invalid_multiplier:
      return kExitConfig;
    case Errc::backend_error:
    case Errc::extraction_failed:
    case Errc::unparseable_proposal:
    case Errc::duplicate_proposal:
      return kExitBackend;
    default:
      return kExitData;
  }
}

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> topk;
  std::optional<double> backtrack_x;
  std::optional<double> w_mult;
  std::optional<std::string> mode;
  std::optional<std::size_t> jobs;
};

RunConfig resolve_config(const GlobalFlags& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.topk) c.retrieval.topk = *g.topk;
  if (g.backtrack_x) c.backtrack.x = *g.backtrack_x;
  if (g.w_mult) c.backtrack.w_multiplier = *g.w_mult;
  if (g.mode) c.backend.mode = parse_backend_mode(*g.mode);
  if (g.jobs) c.jobs = *g.jobs;
  validate(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto out = detail::open_out(path);
  out << text;
  detail::finish(out, path);
}

// Planner backend for run/eval. Replay reads `cassette`.
std::unique_ptr<TextBackend> make_backend(const RunConfig& c, const std::string& cassette) {
  switch (c.backend.mode) {
    case BackendMode::mock:
      return std::make_unique<MockPlannerBackend>();
    case BackendMode::replay:
      if (cassette.empty()) throw Error(Errc::config_error, "replay mode needs a cassette path");
      return std::make_unique<ReplayBackend>(load_cassette(cassette));
    case BackendMode::remote: {
      RemoteSettings s = remote_settings_from_env();
      if (!c.backend.endpoint.empty()) s.endpoint = c.backend.endpoint;
      s.model = c.backend.model;
      return std::make_unique<RemoteBackend>(std::move(s));
    }
  }
  throw Error(Errc::config_error, "unknown backend mode");
}

std::string slug(std::string_view name) {
  std::string s;
  for (char ch : name) s += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  return s;
}

ExtractionMode parse_method(const std::string& m) {
  if (m == "structured") return ExtractionMode::structured;
  if (m == "heuristic") return ExtractionMode::heuristic;
  if (m == "backend") return ExtractionMode::backend;
  throw Error(Errc::config_error, "unknown extraction method '" + m + "'");
}

Dataset require_dataset(const std::string& s) {
  const auto d = parse_dataset(s);
  if (!d) throw Error(Errc::config_error, "unknown dataset '" + s + "'");
  return *d;
}

struct Suite {
  NavGraph graph;
  std::vector<Episode> episodes;
};

Suite load_suite(const RunConfig& c, const std::string& world, const std::string& episodes) {
  const std::string w = world.empty() ? c.paths.world : world;
  const std::string e = episodes.empty() ? c.paths.episodes : episodes;
  if (w.empty() || e.empty()) throw Error(Errc::config_error, "world and episodes paths are required");
  Suite s;
  s.graph = load_world(w);
  s.episodes = load_episodes(s.graph, e);
  return s;
}

void print_query(std::ostream& out, const std::vector<RetrievalHit>& hits, const std::string& format) {
  if (format == "table" || format == "both") {
    out << fmt::format("{:<5} {:<10} {:<8} {}\n", "rank", "similarity", "node", "text");
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const auto& h = hits[r];
      out << fmt::format("{:<5} {:<10.6f} {:<8} {}\n", r + 1, h.similarity, h.node->id, single_line(h.node->text));
      for (const auto& s : h.successors) {
        out << fmt::format("{:<25}-> {} (weight {})\n", "", single_line(s.node->text), s.weight);
      }
    }
    if (hits.empty()) out << kNoKnowledge << "\n";
  }
  if (format == "tsv" || format == "both") {
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const auto& h = hits[r];
      out << fmt::format("hit\t{}\t{}\t{:.6f}\t{}\n", r + 1, h.node->id, h.similarity, single_line(h.node->text));
      for (const auto& s : h.successors) {
        out << fmt::format("succ\t{}\t{}\t{}\t{}\n", r + 1, s.node->id, s.weight, single_line(s.node->text));
      }
    }
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-knowledge navigation toolkit", "eventnav"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "Run config (JSON)");
  app.add_option("--seed", g.seed, "Seed for generation and policies");
  app.add_option("--topk", g.topk, "Retrieved hits per query");
  app.add_option("--backtrack-x", g.backtrack_x, "Backtrack threshold on R");
  app.add_option("--w-mult", g.w_mult, "Window as a multiple of D_avg");
  app.add_option("--mode", g.mode, "Planner backend")->check(CLI::IsMember({"mock", "replay", "remote"}));
  app.add_option("--jobs", g.jobs, "Episode worker threads");

  // extract
  auto* extract = app.add_subcommand("extract", "Dataset records to task sequences");
  std::string ex_dataset, ex_input, ex_out, ex_method = "heuristic", ex_report, ex_cassette;
  extract->add_option("--dataset", ex_dataset, "ALFRED, R2R, REVERIE or custom")->required();
  extract->add_option("--input", ex_input, "Line-delimited dataset file")->required();
  extract->add_option("--out", ex_out, "Task sequence file")->required();
  extract->add_option("--method", ex_method, "structured, heuristic or backend")
      ->check(CLI::IsMember({"structured", "heuristic", "backend"}));
  extract->add_option("--report", ex_report, "Extraction report (JSON)");
  extract->add_option("--cassette", ex_cassette, "Cassette to replay from or record into");

  auto* build = app.add_subcommand("build-kg", "Task sequences to an event graph");
  std::vector<std::string> bk_inputs;
  std::string bk_out;
  build->add_option("--sequences", bk_inputs, "Task sequence files")->required();
  build->add_option("--out", bk_out, "Graph file")->required();

  auto* merge_cmd = app.add_subcommand("merge", "Union of event graphs");
  std::vector<std::string> mg_inputs;
  std::string mg_out;
  merge_cmd->add_option("--inputs", mg_inputs, "Graph files")->required();
  merge_cmd->add_option("--out", mg_out, "Graph file")->required();

  auto* stats_cmd = app.add_subcommand("stats", "Graph counts");
  std::string st_kg;
  stats_cmd->add_option("--kg", st_kg, "Graph file")->required();

  auto* index_cmd = app.add_subcommand("index", "Build a retrieval index file");
  std::string ix_kg, ix_out, ix_kind = "successors";
  index_cmd->add_option("--kg", ix_kg, "Graph file")->required();
  index_cmd->add_option("--out", ix_out, "Index file")->required();
  index_cmd->add_option("--kind", ix_kind, "successors or starts")->check(CLI::IsMember({"successors", "starts"}));

  auto* query_cmd = app.add_subcommand("query", "Top-k similar events and their successors");
  std::string q_kg, q_text, q_index, q_format = "both";
  std::optional<std::size_t> q_k;
  query_cmd->add_option("--kg", q_kg, "Graph file")->required();
  query_cmd->add_option("--text", q_text, "Query text")->required();
  query_cmd->add_option("--k", q_k, "Hits (defaults to --topk)");
  query_cmd->add_option("--index", q_index, "Prebuilt index file");
  query_cmd->add_option("--format", q_format, "table, tsv or both")->check(CLI::IsMember({"table", "tsv", "both"}));

  auto* gen = app.add_subcommand("gen-world", "Synthetic world and episodes");
  std::string gw_world, gw_episodes;
  std::optional<std::size_t> gw_n, gw_m;
  std::optional<double> gw_radius;
  bool gw_untagged = false;
  gen->add_option("--world-out", gw_world, "World file")->required();
  gen->add_option("--episodes-out", gw_episodes, "Episode file")->required();
  gen->add_option("--viewpoints", gw_n, "Viewpoints before pruning");
  gen->add_option("--radius", gw_radius, "Edge radius in meters");
  gen->add_option("--episodes", gw_m, "Episode count");
  gen->add_flag("--untagged", gw_untagged, "Leave episodes tagged custom");

  auto* run_cmd = app.add_subcommand("run", "Run the episode suite once");
  std::string r_world, r_episodes, r_out;
  std::optional<double> r_eps;
  bool r_no_bt = false;
  run_cmd->add_option("--world", r_world, "World file");
  run_cmd->add_option("--episodes", r_episodes, "Episode file");
  run_cmd->add_option("--out-dir", r_out, "Report directory");
  run_cmd->add_option("--epsilon", r_eps, "Noisy policy epsilon");
  run_cmd->add_flag("--no-backtrack", r_no_bt, "Disable backtracking");

  auto* eval_cmd = app.add_subcommand("eval", "Variant table and x/W grid");
  std::string e_world, e_episodes, e_out;
  std::optional<double> e_eps;
  eval_cmd->add_option("--world", e_world, "World file");
  eval_cmd->add_option("--episodes", e_episodes, "Episode file");
  eval_cmd->add_option("--out-dir", e_out, "Report directory");
  eval_cmd->add_option("--epsilon", e_eps, "Noisy policy epsilon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig cfg = resolve_config(g);
    const HashingEmbedder embedder(cfg.retrieval.dim, cfg.retrieval.seed);

    if (*extract) {
      const Dataset d = require_dataset(ex_dataset);
      const ExtractionMode method = parse_method(ex_method);
      std::unique_ptr<TextBackend> backend;
      std::unique_ptr<RecordingBackend> recorder;
      const std::string cassette = ex_cassette.empty() ? cfg.paths.cassette : ex_cassette;
      if (method == ExtractionMode::backend) {
        if (cfg.backend.mode == BackendMode::mock) {
          throw Error(Errc::config_error, "backend extraction needs --mode replay or remote");
        }
        backend = make_backend(cfg, cassette);
        if (cfg.backend.mode == BackendMode::remote && !cassette.empty()) {
          recorder = std::make_unique<RecordingBackend>(*backend);
        }
      }
      const TextBackend* used = recorder ? recorder.get() : backend.get();
      const auto result = extract_file(ex_input, d, cfg.mapping_for(d), method, used);
      save_sequences(result.sequences, ex_out);
      if (recorder) save_cassette(recorder->cassette(), cassette);
      if (!ex_report.empty()) {
        detail::json j;
        j["accepted"] = result.report.accepted;
        j["rejected"] = result.report.rejected;
        j["rejects"] = detail::json::array();
        for (const auto& [id, msg] : result.report.rejects) j["rejects"].push_back({{"record_id", id}, {"error", msg}});
        write_text(ex_report, j.dump(2) + "\n");
      }
      out << fmt::format("accepted\t{}\nrejected\t{}\n", result.report.accepted, result.report.rejected);
      for (const auto& [id, msg] : result.report.rejects) err << fmt::format("reject {}: {}\n", id, msg);
      return kExitOk;
    }

    if (*build) {
      EventGraph kg;
      for (const auto& in : bk_inputs) {
        for (const auto& s : load_sequences(in)) insert_sequence(kg, s);
      }
      save_graph(kg, bk_out);
      out << fmt::format("nodes\t{}\nedges\t{}\n", kg.nodes().size(), kg.edge_count());
      return kExitOk;
    }

    if (*merge_cmd) {
      EventGraph kg;
      for (const auto& in : mg_inputs) kg = merge(kg, load_graph(in));
      save_graph(kg, mg_out);
      out << fmt::format("nodes\t{}\nedges\t{}\n", kg.nodes().size(), kg.edge_count());
      return kExitOk;
    }

    if (*stats_cmd) {
      const auto s = stats(load_graph(st_kg));
      out << fmt::format("nodes\t{}\nedges\t{}\nsequences\t{}\n", s.node_count, s.edge_count, s.sequence_count);
      for (const auto& [d, n] : s.sequences_per_dataset) out << fmt::format("sequences.{}\t{}\n", dataset_name(d), n);
      return kExitOk;
    }

    if (*index_cmd) {
      const EventGraph kg = load_graph(ix_kg);
      const auto index = ix_kind == "starts" ? build_start_index(kg, embedder) : build_index(kg, embedder);
      save_index(index, ix_out);
      out << fmt::format("vectors\t{}\ndim\t{}\n", index.size(), index.dimension());
      return kExitOk;
    }

    if (*query_cmd) {
      const EventGraph kg = load_graph(q_kg);
      const auto index = q_index.empty() ? build_index(kg, embedder) : load_index(q_index);
      const auto hits = query(index, kg, embedder, q_text, q_k.value_or(cfg.retrieval.topk));
      print_query(out, hits, q_format);
      return kExitOk;
    }

    if (*gen) {
      const NavGraph world =
          generate_world(gw_n.value_or(cfg.world.viewpoints), gw_radius.value_or(cfg.world.radius), cfg.seed);
      auto episodes = generate_episodes(world, gw_m.value_or(cfg.world.episodes), cfg.seed + 1);
      if (!gw_untagged) assign_datasets_round_robin(episodes);
      save_world(world, gw_world);
      save_episodes(world, episodes, gw_episodes);
      out << fmt::format("viewpoints\t{}\nedges\t{}\nepisodes\t{}\n", world.size(), world.edge_count(),
                         episodes.size());
      return kExitOk;
    }

    if (*run_cmd) {
      const Suite suite = load_suite(cfg, r_world, r_episodes);
      SuiteSettings settings = suite_settings(cfg);
      if (r_eps) settings.epsilon = *r_eps;
      if (!(settings.epsilon >= 0.0 && settings.epsilon <= 1.0)) {
        throw Error(Errc::config_error, "epsilon must lie in [0, 1]");
      }
      Variant v;
      v.name = "run";
      v.planning = PlanningMode::planner;
      v.scope = cfg.scope;
      v.backtracking = cfg.backtrack.enabled && !r_no_bt;
      v.x = cfg.backtrack.x;
      v.w_multiplier = cfg.backtrack.w_multiplier;
      if (v.scope == KnowledgeScope::none) v.planning = PlanningMode::no_knowledge;
      auto backend = make_backend(cfg, cfg.paths.cassette);
      RecordingBackend recorder(*backend);
      const bool record = cfg.backend.mode != BackendMode::replay && !cfg.paths.cassette.empty();
      const TextBackend& used = record ? static_cast<const TextBackend&>(recorder) : *backend;
      const VariantRun r = run_variant(suite.graph, suite.episodes, v, settings, embedder, used);
      const fs::path dir = r_out.empty() ? fs::path(cfg.paths.out_dir) : fs::path(r_out);
      fs::create_directories(dir);
      const std::string report = format_report({r});
      write_text(dir / "report.tsv", report);
      save_trajectory_log(suite.graph, r.results, dir / "trajectories.jsonl");
      if (record) save_cassette(recorder.cassette(), cfg.paths.cassette);
      out << report;
      return kExitOk;
    }

    if (*eval_cmd) {
      const Suite suite = load_suite(cfg, e_world, e_episodes);
      SuiteSettings settings = suite_settings(cfg);
      if (e_eps) settings.epsilon = *e_eps;
      if (!(settings.epsilon >= 0.0 && settings.epsilon <= 1.0)) {
        throw Error(Errc::config_error, "epsilon must lie in [0, 1]");
      }
      const fs::path dir = e_out.empty() ? fs::path(cfg.paths.out_dir) : fs::path(e_out);
      fs::create_directories(dir);
      const std::string cassette_dir = cfg.paths.cassette_dir;
      auto run_all = [&](const std::vector<Variant>& variants) {
        std::vector<VariantRun> runs;
        for (const auto& v : variants) {
          const std::string cassette =
              cassette_dir.empty() ? cfg.paths.cassette : (fs::path(cassette_dir) / (slug(v.name) + ".jsonl")).string();
          auto backend = make_backend(cfg, cassette);
          RecordingBackend recorder(*backend);
          const bool record = cfg.backend.mode != BackendMode::replay && !cassette_dir.empty();
          const TextBackend& used = record ? static_cast<const TextBackend&>(recorder) : *backend;
          runs.push_back(run_variant(suite.graph, suite.episodes, v, settings, embedder, used));
          if (record) {
            fs::create_directories(cassette_dir);
            save_cassette(recorder.cassette(), cassette);
          }
        }
        return runs;
      };
      const auto table = run_all(table_variants(cfg.backtrack.x, cfg.backtrack.w_multiplier));
      const auto grid = run_all(grid_variants(cfg.x_values, cfg.w_multipliers));
      const std::string table_tsv = format_report(table);
      const std::string grid_tsv = format_report(grid);
      write_text(dir / "variants.tsv", table_tsv);
      write_text(dir / "grid.tsv", grid_tsv);
      std::string edges = "variant\tkg_edges\tW\n";
      for (const auto* runs : {&table, &grid}) {
        for (const auto& r : *runs) edges += fmt::format("{}\t{}\t{}\n", r.variant.name, r.kg_edges, r.window);
      }
      write_text(dir / "knowledge.tsv", edges);
      out << table_tsv << "\n" << grid_tsv;
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace eventnav
