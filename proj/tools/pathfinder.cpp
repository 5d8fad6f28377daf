// pathfinder command-line tool. JSON goes to stdout, logs to stderr.
// Exit codes: 0 ok, 1 internal error, 2 bad flags, 3 backend failure,
// 4 bad input data.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "pathfinder/diagnosis.hpp"
#include "pathfinder/parallel.hpp"
#include "pathfinder/remote.hpp"
#include "pathfinder/synthetic.hpp"
#include "pathfinder/triage.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pathfinder;

namespace {

// Raised for flag combinations CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string backends_file;
  std::string backend;  // "mock" or a base URL shared by every kind
  int workers = default_workers();
  std::string log_level = "info";
};

struct ResolvedBackends {
  BackendConfig config;
  std::string source;
};

ResolvedBackends resolve_backends(const GlobalOptions& g) {
  if (!g.backends_file.empty() && !g.backend.empty()) {
    throw UsageError("--backends and --backend are mutually exclusive");
  }
  ResolvedBackends r;
  try {
    if (!g.backends_file.empty()) {
      r.config = load_backend_config(g.backends_file);
      r.source = g.backends_file;
    } else if (!g.backend.empty()) {
      r.config = BackendConfig::all_mock();
      if (g.backend != "mock") {
        for (auto k : kAllBackendKinds) {
          if (k == BackendKind::rephraser) continue;
          auto& ep = r.config.endpoints[k];
          ep.mode = BackendEndpoint::Mode::remote;
          ep.url = g.backend;
        }
      }
      r.source = "--backend " + g.backend;
    } else if (const char* env = std::getenv("PATHFINDER_BACKENDS"); env && *env) {
      r.config = load_backend_config(env);
      r.source = std::string("PATHFINDER_BACKENDS=") + env;
    } else {
      r.config = BackendConfig::all_mock();
      r.source = "default (all mock)";
    }
    r.config.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("backend config: ") + e.what());
  }
  return r;
}

json base_config(const std::string& command, const GlobalOptions& g,
                 const ResolvedBackends& b) {
  return {{"command", command},
          {"seed", g.seed},
          {"workers", g.workers},
          {"log_level", g.log_level},
          {"backends_source", b.source},
          {"backends", json::parse(backend_config_to_json(b.config))}};
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

std::array<int, 4> parse_mix(const std::string& text) {
  std::array<int, 4> mix{};
  std::stringstream ss(text);
  std::string part;
  int k = 0;
  while (std::getline(ss, part, ',')) {
    if (k >= 4) throw UsageError("--mix takes four comma-separated weights");
    try {
      std::size_t used = 0;
      mix[k] = std::stoi(part, &used);
      if (used != part.size() || mix[k] < 0) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--mix weight '" + part + "' is not a non-negative integer");
    }
    ++k;
  }
  if (k != 4) throw UsageError("--mix takes four comma-separated weights");
  return mix;
}

SlideRaster load_slide_logged(const std::string& dir) {
  spdlog::info("loading slide {}", dir);
  SlideRaster s = load_slide(dir);
  spdlog::debug("slide {}: {} level(s), base {}x{}", s.slide_id, s.levels.size(),
                s.levels.front().width, s.levels.front().height);
  return s;
}

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_logger_mt("pathfinder");
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");
  spdlog::set_default_logger(logger);

  CLI::App app{"pathfinder: multi-agent slide triage, navigation and diagnosis"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master seed (default 0)");
  app.add_option("--backends", g.backends_file, "Backend config JSON (else $PATHFINDER_BACKENDS)");
  app.add_option("--backend", g.backend, "'mock' or a base URL serving every agent");
  app.add_option("--workers", g.workers, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "Log level")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic slide dataset");
  int synth_count = 40;
  std::string synth_mix = "1,1,1,1";
  std::string synth_out;
  int synth_size = kDefaultSynthSide;
  synth->add_option("--count", synth_count, "Number of slides")->check(CLI::NonNegativeNumber);
  synth->add_option("--mix", synth_mix, "Class weights I,II,III,IV");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--size", synth_size, "Slide side in pixels")->check(CLI::Range(512, 8192));

  // triage
  auto* triage = app.add_subcommand("triage", "Benign/risky verdict for one slide");
  std::string slide_dir;
  double threshold = kTriageThreshold;
  triage->add_option("--slide", slide_dir, "Slide directory")->required();
  triage->add_option("--threshold", threshold, "Risky when score >= threshold")
      ->check(CLI::Range(0.0, 1.0));

  // heatmap
  auto* heatmap = app.add_subcommand("heatmap", "First-iteration importance map as a PGM");
  std::string heatmap_out;
  int grid_side = kDefaultGridSide;
  heatmap->add_option("--slide", slide_dir, "Slide directory")->required();
  heatmap->add_option("--out", heatmap_out, "Output PGM path")->required();
  heatmap->add_option("--grid", grid_side, "Grid side")->check(CLI::Range(1, 512));

  // trajectories
  auto* trajs = app.add_subcommand("trajectories", "Generate trajectories as JSONL");
  int n = 5;
  int length = kDefaultTrajectoryLength;
  std::string sampler = "text_conditioned";
  std::string viewports;
  std::string traj_out;
  trajs->add_option("--slide", slide_dir, "Slide directory")->required();
  trajs->add_option("--n", n, "Number of trajectories")->check(CLI::PositiveNumber);
  trajs->add_option("--length", length, "Steps per trajectory")->check(CLI::PositiveNumber);
  trajs->add_option("--sampler", sampler, "Sampler")
      ->check(CLI::IsMember({"text_conditioned", "vision_only", "imitated", "exhaustive"}));
  trajs->add_option("--viewports", viewports, "Viewport log (imitated sampler)");
  trajs->add_option("--out", traj_out, "Output JSONL path")->required();

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Full pipeline on one slide");
  std::string diag_traj_out;
  diagnose->add_option("--slide", slide_dir, "Slide directory")->required();
  diagnose->add_option("--n", n, "Number of trajectories")->check(CLI::PositiveNumber);
  diagnose->add_option("--length", length, "Steps per trajectory")->check(CLI::PositiveNumber);
  diagnose->add_option("--threshold", threshold, "Triage threshold")->check(CLI::Range(0.0, 1.0));
  diagnose->add_option("--trajectory-out", diag_traj_out, "Also write the trajectories here");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Repeated-subset evaluation of a dataset");
  std::string dataset;
  EvalConfig ec;
  std::string report_out;
  evaluate_cmd->add_option("--dataset", dataset, "Manifest JSON")->required();
  evaluate_cmd->add_option("--runs", ec.runs, "Evaluation runs")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--subset", ec.subset, "Trajectories voted per run")
      ->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--pool", ec.pool, "Trajectories generated per slide")
      ->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--length", length, "Steps per trajectory")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--sampler", sampler, "Sampler")
      ->check(CLI::IsMember({"text_conditioned", "vision_only", "exhaustive"}));
  evaluate_cmd->add_option("--threshold", threshold, "Triage threshold")
      ->check(CLI::Range(0.0, 1.0));
  evaluate_cmd->add_option("--out", report_out, "Report JSON path");

  // serve-mock
  auto* serve = app.add_subcommand("serve-mock", "Serve the configured backends over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    const ResolvedBackends rb = resolve_backends(g);

    if (*synth) {
      const auto mix = parse_mix(synth_mix);
      if (synth_count > 0 && mix[0] + mix[1] + mix[2] + mix[3] == 0) {
        throw UsageError("--mix weights sum to zero");
      }
      json cfg = base_config("synth", g, rb);
      cfg["count"] = synth_count;
      cfg["mix"] = mix;
      cfg["out"] = synth_out;
      cfg["size"] = synth_size;
      spdlog::info("writing {} synthetic slides to {}", synth_count, synth_out);
      std::vector<DatasetEntry> entries;
      try {
        entries = synthesize_dataset(synth_count, mix, g.seed, synth_out, synth_size);
      } catch (const fs::filesystem_error& e) {
        throw DataError(e.what());
      }
      std::array<int, 4> per_class{};
      for (const auto& e : entries) ++per_class[index_of(e.label)];
      emit({{"config", cfg},
            {"manifest", (fs::path(synth_out) / "manifest.json").string()},
            {"count", entries.size()},
            {"per_class", {{"I", per_class[0]}, {"II", per_class[1]},
                           {"III", per_class[2]}, {"IV", per_class[3]}}}});
      return 0;
    }

    if (*serve) {
      json cfg = base_config("serve-mock", g, rb);
      cfg["host"] = host;
      cfg["port"] = port;
      StubServer server(make_backends(rb.config));
      int bound = 0;
      try {
        bound = server.start(host, port);
      } catch (const std::exception& e) {
        throw UsageError(std::string("cannot bind: ") + e.what());
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      emit({{"config", cfg}, {"url", server.url()}, {"port", bound}});
      spdlog::info("serving on {}; Ctrl-C to stop", server.url());
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      spdlog::info("stopped after {} request(s)", server.request_count());
      return 0;
    }

    const Backends backends = make_backends(rb.config);

    if (*triage) {
      json cfg = base_config("triage", g, rb);
      cfg["slide"] = slide_dir;
      cfg["threshold"] = threshold;
      const SlideRaster slide = load_slide_logged(slide_dir);
      Rng rng(triage_stream_seed(g.seed));
      const PaddedGrid grid = prepare_triage_input(slide, *backends.embedder, rng);
      spdlog::debug("triage grid {}x{} ({} padded rows)", grid.side, grid.side, grid.pad_count);
      const TriageVerdict v = run_triage(grid, *backends.triage, threshold);
      emit({{"config", cfg}, {"risky", v.risky}, {"score", v.score}});
      return 0;
    }

    if (*heatmap) {
      json cfg = base_config("heatmap", g, rb);
      cfg["slide"] = slide_dir;
      cfg["out"] = heatmap_out;
      cfg["grid"] = grid_side;
      const SlideRaster slide = load_slide_logged(slide_dir);
      const CellMask empty(grid_side);
      const Heatmap h = navigator_call(*backends.navigator, slide.thumbnail, empty,
                                       std::nullopt, backends.embedder->dim());
      const ImportanceMap map = scores_from_heatmap(h, grid_side);
      double peak = 0;
      for (double s : map.scores) peak = std::max(peak, s);
      std::vector<std::uint8_t> gray(map.scores.size(), 0);
      if (peak > 0) {
        for (std::size_t i = 0; i < gray.size(); ++i) {
          gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * map.scores[i] / peak));
        }
      }
      write_pgm(heatmap_out, grid_side, grid_side, gray);
      emit({{"config", cfg}, {"out", heatmap_out}, {"side", grid_side},
            {"max_score", peak}, {"scores", map.scores}});
      return 0;
    }

    if (*trajs) {
      TrajectoryOptions opts;
      opts.length = length;
      opts.sampler = sampler_kind_from_string(sampler);
      if (opts.sampler == SamplerKind::imitated) {
        if (viewports.empty()) throw UsageError("--sampler imitated requires --viewports");
        opts.sampler_options.viewports = read_viewport_log(viewports);
      } else if (!viewports.empty()) {
        throw UsageError("--viewports only applies to --sampler imitated");
      }
      json cfg = base_config("trajectories", g, rb);
      cfg["slide"] = slide_dir;
      cfg["n"] = n;
      cfg["length"] = length;
      cfg["sampler"] = sampler;
      cfg["viewports"] = viewports.empty() ? json(nullptr) : json(viewports);
      cfg["out"] = traj_out;
      const SlideRaster slide = load_slide_logged(slide_dir);
      const TrajectorySet set = generate_set(slide, n, backends, opts, g.seed, g.workers);
      write_trajectories(set, traj_out);
      std::size_t steps = 0;
      for (const auto& t : set.trajectories) steps += t.steps.size();
      emit({{"config", cfg}, {"out", traj_out}, {"slide_id", set.slide_id},
            {"trajectories", set.trajectories.size()}, {"steps", steps}});
      return 0;
    }

    if (*diagnose) {
      json cfg = base_config("diagnose", g, rb);
      cfg["slide"] = slide_dir;
      cfg["n"] = n;
      cfg["length"] = length;
      cfg["threshold"] = threshold;
      const SlideRaster slide = load_slide_logged(slide_dir);
      PipelineConfig pc;
      pc.n = n;
      pc.trajectory.length = length;
      pc.triage_threshold = threshold;
      pc.seed = g.seed;
      pc.workers = g.workers;
      const PipelineResult r = run_pipeline(slide, backends, pc);
      json out = pipeline_result_to_json(r);
      out["trajectory_file"] = nullptr;
      if (!diag_traj_out.empty() && r.trajectories) {
        write_trajectories(*r.trajectories, diag_traj_out);
        out["trajectory_file"] = diag_traj_out;
      }
      out["config"] = cfg;
      emit(out);
      return 0;
    }

    if (*evaluate_cmd) {
      if (ec.subset > ec.pool) {
        throw UsageError("--subset (" + std::to_string(ec.subset) + ") exceeds --pool (" +
                         std::to_string(ec.pool) + ")");
      }
      ec.seed = g.seed;
      ec.workers = g.workers;
      ec.trajectory.length = length;
      ec.trajectory.sampler = sampler_kind_from_string(sampler);
      ec.triage_threshold = threshold;
      json cfg = base_config("evaluate", g, rb);
      cfg["dataset"] = dataset;
      cfg["runs"] = ec.runs;
      cfg["subset"] = ec.subset;
      cfg["pool"] = ec.pool;
      cfg["length"] = length;
      cfg["sampler"] = sampler;
      cfg["threshold"] = threshold;
      cfg["out"] = report_out.empty() ? json(nullptr) : json(report_out);
      const auto entries = read_manifest(dataset);
      spdlog::info("evaluating {} slides ({} runs, subset {} of {})", entries.size(),
                   ec.runs, ec.subset, ec.pool);
      const auto t0 = std::chrono::steady_clock::now();
      const EvalReport rep = evaluate(entries, backends, ec);
      spdlog::info("done in {:.1f}s: mean accuracy {:.4f} (std {:.4f})",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(),
                   rep.mean_accuracy, rep.std_accuracy);
      const json report = report_to_json(rep);
      if (!report_out.empty()) {
        std::ofstream f(report_out);
        if (!f) throw DataError("cannot write " + report_out);
        f << report.dump(2) << '\n';
      }
      emit({{"config", cfg}, {"report", report}});
      return 0;
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    emit({{"error", {{"category", "usage"}, {"message", e.what()}}}});
    return 2;
  } catch (const BackendError& e) {
    spdlog::error("backend failure: {}", e.what());
    emit({{"error", {{"category", "backend"}, {"message", e.what()}}}});
    return 3;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    emit({{"error", {{"category", "data"}, {"message", e.what()}}}});
    return 4;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    emit({{"error", {{"category", "usage"}, {"message", e.what()}}}});
    return 2;
  } catch (const std::exception& e) {
    spdlog::critical("internal error: {}", e.what());
    emit({{"error", {{"category", "internal"}, {"message", e.what()}}}});
    return 1;
  }
  return 0;
}
