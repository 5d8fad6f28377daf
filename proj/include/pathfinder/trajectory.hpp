#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/backends.hpp"
#include "pathfinder/navigator.hpp"
#include "pathfinder/slide_io.hpp"

namespace pathfinder {

struct TrajectoryStep {
  int iteration = 0;  // 1-based
  Cell cell;
  PatchCoord patch;   // at the 10x level
  std::string description;
  std::optional<std::string> rephrased;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
  std::string slide_id;
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;

  std::vector<std::string> descriptions() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TrajectorySet {
  std::string slide_id;
  std::vector<Trajectory> trajectories;

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

inline constexpr int kDefaultTrajectoryLength = 10;

struct TrajectoryOptions {
  int length = kDefaultTrajectoryLength;
  SamplerKind sampler = SamplerKind::text_conditioned;
  SamplerOptions sampler_options;
  bool rephrase = true;  // only when a rephraser backend is configured
};

/// A backend failed mid-trajectory; `partial` holds the completed steps.
class TrajectoryAborted : public BackendError {
 public:
  TrajectoryAborted(const std::string& what, Trajectory partial)
      : BackendError(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// Navigate -> crop -> describe -> (rephrase) -> mask -> aggregate, `length`
/// times (for the exhaustive sampler: once per foreground cell). The
/// embedding state is fed by the original description text.
Trajectory generate_trajectory(const SlideRaster& slide, const Backends& backends,
                               const TrajectoryOptions& options, std::uint64_t seed);

/// Trajectory k uses seed base_seed XOR k. `workers` > 1 runs trajectories
/// concurrently; the result does not depend on it.
TrajectorySet generate_set(const SlideRaster& slide, int n, const Backends& backends,
                           const TrajectoryOptions& options, std::uint64_t base_seed,
                           int workers = 1);

/// JSONL, one step per line: {slide_id, traj_seed, iteration, cell: [i, j],
/// patch: {level, x, y, size}, description, rephrased}.
void write_trajectories(const TrajectorySet& set, const std::filesystem::path& path);
std::string trajectories_to_jsonl(const TrajectorySet& set);
TrajectorySet read_trajectories(const std::filesystem::path& path);
TrajectorySet trajectories_from_jsonl(const std::string& text);

}  // namespace pathfinder
