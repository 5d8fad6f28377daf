#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/backends.hpp"
#include "pathfinder/diagnosis_class.hpp"
#include "pathfinder/triage.hpp"
#include "pathfinder/trajectory.hpp"

namespace pathfinder {

struct Prediction {
  std::uint64_t trajectory_seed = 0;
  DiagnosisClass label = DiagnosisClass::II;
};

struct VoteResult {
  DiagnosisClass label = DiagnosisClass::II;
  std::array<int, 4> tally{};  // indexed by index_of(class)
  bool tie_broken = false;
};

/// The diagnoser answered with text that is not one of the post-triage
/// options (II, III, IV).
class UnmappableResponse : public MalformedResponse {
 public:
  using MalformedResponse::MalformedResponse;
};

/// Fixed diagnosis prompt. Descriptions are emitted in order, one "- "
/// bullet per line (embedded newlines are flattened to spaces).
std::string assemble_prompt(const std::vector<std::string>& descriptions);

Prediction diagnose_trajectory(const Trajectory& traj, const DiagnoserBackend& backend);

/// Plurality label; ties go to the most severe tied class.
VoteResult majority_vote(const std::vector<Prediction>& preds);
VoteResult majority_vote(const std::vector<DiagnosisClass>& labels);

struct PipelineConfig {
  int n = 5;
  TrajectoryOptions trajectory;
  TriageInputOptions triage;
  double triage_threshold = kTriageThreshold;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct PipelineResult {
  DiagnosisClass label = DiagnosisClass::I;
  TriageVerdict verdict;
  std::optional<TrajectorySet> trajectories;
  std::vector<Prediction> predictions;
  std::optional<VoteResult> vote;
};

/// A backend failed after triage; `partial` holds what completed.
class PipelineAborted : public BackendError {
 public:
  PipelineAborted(const std::string& what, PipelineResult partial)
      : BackendError(what), partial_(std::move(partial)) {}
  const PipelineResult& partial() const { return partial_; }

 private:
  PipelineResult partial_;
};

/// Seed of the RNG stream that tops up triage patches, derived from the
/// pipeline seed. Trajectories use the pipeline seed itself as base seed.
std::uint64_t triage_stream_seed(std::uint64_t seed);

/// Triage gate; benign slides stop at class I without touching the other
/// agents, risky slides go through n trajectories and a majority vote.
PipelineResult run_pipeline(const SlideRaster& slide, const Backends& backends,
                            const PipelineConfig& config);

nlohmann::json vote_to_json(const VoteResult& vote);
nlohmann::json pipeline_result_to_json(const PipelineResult& result);

struct DatasetEntry {
  std::string slide_dir;
  DiagnosisClass label = DiagnosisClass::I;
  std::shared_ptr<const SlideRaster> slide;  // loaded from slide_dir when null
};

/// Manifest: JSON list of {slide_dir, label}; relative slide_dir values are
/// resolved against the manifest's directory. Labels are "I".."IV" or 1..4.
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<DatasetEntry>& entries);

struct EvalConfig {
  int runs = 10;
  int subset = 5;
  int pool = 20;
  std::uint64_t seed = 0;
  int workers = 1;
  TrajectoryOptions trajectory;
  TriageInputOptions triage;
  double triage_threshold = kTriageThreshold;
};

struct SlideOutcome {
  std::string slide_id;
  std::string slide_dir;
  DiagnosisClass truth = DiagnosisClass::I;
  TriageVerdict verdict;
  std::vector<DiagnosisClass> pool;          // empty when triaged benign
  std::vector<DiagnosisClass> run_labels;    // one per run
  std::vector<bool> run_tie_broken;
};

struct EvalReport {
  EvalConfig config;
  std::vector<double> run_accuracy;
  double mean_accuracy = 0;
  double std_accuracy = 0;  // population standard deviation over runs
  double accuracy = 0;      // pooled over every (run, slide) decision
  double micro_precision = 0;
  double micro_recall = 0;
  double micro_f1 = 0;
  std::array<std::array<long long, 4>, 4> confusion{};  // [truth][predicted]
  std::vector<SlideOutcome> slides;
};

/// Each slide gets a pool of trajectories (seeded from derive_seed(seed,
/// slide index)) diagnosed once; each run then votes over a random subset
/// of the pool. Triage-negative slides count as class I predictions.
EvalReport evaluate(const std::vector<DatasetEntry>& dataset, const Backends& backends,
                    const EvalConfig& config);

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace pathfinder
