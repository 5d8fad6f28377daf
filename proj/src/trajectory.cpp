#include "pathfinder/trajectory.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pathfinder/parallel.hpp"

namespace pathfinder {

using json = nlohmann::json;

std::vector<std::string> Trajectory::descriptions() const {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.description);
  return out;
}

Trajectory generate_trajectory(const SlideRaster& slide, const Backends& b,
                               const TrajectoryOptions& opt, std::uint64_t seed) {
  if (!b.describer || !b.embedder) {
    throw std::invalid_argument("describer and embedder backends required");
  }
  const int g = opt.sampler_options.grid_side;
  Sampler sampler(opt.sampler, slide, b, opt.sampler_options);
  int length = opt.length;
  if (opt.sampler == SamplerKind::exhaustive) {
    length = sampler.remaining();
    if (length == 0) throw DataError("no foreground cells on slide " + slide.slide_id);
  } else if (length < 1 || length > g * g) {
    throw std::invalid_argument("trajectory length must be in 1.." + std::to_string(g * g));
  }

  Rng rng(seed);
  Trajectory traj{slide.slide_id, seed, {}};
  EmbeddingState state = init_embedding(b.embedder->dim());
  for (int t = 1; t <= length; ++t) {
    try {
      const Cell cell = sampler.next(state, rng);
      const PatchCoord coord = cell_to_patch(cell, slide, g);
      TrajectoryStep step{t, cell, coord, describer_call(*b.describer, extract_patch(slide, coord)),
                          std::nullopt};
      if (opt.rephrase && b.rephraser) {
        step.rephrased = rephraser_call(*b.rephraser, step.description);
      }
      state = update_embedding(std::move(state), embedder_call(*b.embedder, step.description));
      traj.steps.push_back(std::move(step));
    } catch (const BackendError& e) {
      throw TrajectoryAborted("trajectory " + std::to_string(seed) + " aborted at step " +
                                  std::to_string(t) + ": " + e.what(),
                              std::move(traj));
    }
  }
  return traj;
}

TrajectorySet generate_set(const SlideRaster& slide, int n, const Backends& backends,
                           const TrajectoryOptions& options, std::uint64_t base_seed,
                           int workers) {
  if (n < 1) throw std::invalid_argument("trajectory count must be >= 1");
  TrajectorySet set{slide.slide_id, std::vector<Trajectory>(static_cast<std::size_t>(n))};
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t k) {
    set.trajectories[k] = generate_trajectory(slide, backends, options, base_seed ^ k);
  });
  return set;
}

std::string trajectories_to_jsonl(const TrajectorySet& set) {
  std::ostringstream out;
  for (const auto& traj : set.trajectories) {
    for (const auto& s : traj.steps) {
      json line = {{"slide_id", traj.slide_id},
                   {"traj_seed", traj.seed},
                   {"iteration", s.iteration},
                   {"cell", {s.cell.row, s.cell.col}},
                   {"patch", {{"level", s.patch.level},
                              {"x", s.patch.x},
                              {"y", s.patch.y},
                              {"size", s.patch.size}}},
                   {"description", s.description},
                   {"rephrased", s.rephrased ? json(*s.rephrased) : json(nullptr)}};
      out << line.dump() << '\n';
    }
  }
  return out.str();
}

void write_trajectories(const TrajectorySet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << trajectories_to_jsonl(set);
  if (!out) throw DataError("write failed for " + path.string());
}

TrajectorySet trajectories_from_jsonl(const std::string& text) {
  TrajectorySet set;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto slide_id = j.at("slide_id").get<std::string>();
      const auto seed = j.at("traj_seed").get<std::uint64_t>();
      TrajectoryStep s;
      s.iteration = j.at("iteration").get<int>();
      const auto& cell = j.at("cell");
      if (!cell.is_array() || cell.size() != 2) {
        throw DataError("cell must be a [row, col] pair");
      }
      s.cell = {cell[0].get<int>(), cell[1].get<int>()};
      const auto& p = j.at("patch");
      s.patch = {p.at("level").get<int>(), p.at("x").get<int>(), p.at("y").get<int>(),
                 p.at("size").get<int>()};
      s.description = j.at("description").get<std::string>();
      if (j.contains("rephrased") && !j.at("rephrased").is_null()) {
        s.rephrased = j.at("rephrased").get<std::string>();
      }
      if (set.trajectories.empty()) set.slide_id = slide_id;
      if (set.trajectories.empty() || set.trajectories.back().seed != seed ||
          set.trajectories.back().slide_id != slide_id) {
        set.trajectories.push_back({slide_id, seed, {}});
      }
      auto& steps = set.trajectories.back().steps;
      if (!steps.empty() && s.iteration <= steps.back().iteration) {
        throw DataError("iteration not increasing");
      }
      steps.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw DataError("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return set;
}

TrajectorySet read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return trajectories_from_jsonl(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pathfinder
