#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/backends.hpp"
#include "pathfinder/common.hpp"
#include "pathfinder/slide_io.hpp"

namespace pathfinder {

inline constexpr int kDefaultGridSide = 16;

/// G x G non-negative scores plus the cells already selected.
struct ImportanceMap {
  int side = 0;
  std::vector<double> scores;  // row-major
  CellMask mask;

  static ImportanceMap zeros(int side);
  double score(Cell c) const { return scores[static_cast<std::size_t>(c.row) * side + c.col]; }
  double& score(Cell c) { return scores[static_cast<std::size_t>(c.row) * side + c.col]; }
};

/// Sampling distribution over the grid; masked cells carry exactly 0.
struct ProbabilityGrid {
  int side = 0;
  std::vector<double> probs;  // row-major

  double prob(Cell c) const { return probs[static_cast<std::size_t>(c.row) * side + c.col]; }
};

/// Running mean of description embeddings. count == 0 means unconditioned.
struct EmbeddingState {
  std::vector<double> mean;
  int count = 0;

  int dim() const { return static_cast<int>(mean.size()); }
  bool conditioned() const { return count > 0; }
};

enum class SamplerKind { text_conditioned, vision_only, imitated, exhaustive };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& s);

/// One logged pathologist viewport, in base-level pixels.
struct ViewportRecord {
  std::string case_id;
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  double zoom = 1.0;
  double t_start = 0.0;
  double t_end = 0.0;
};

std::vector<ViewportRecord> read_viewport_log(const std::filesystem::path& path);
void write_viewport_log(const std::filesystem::path& path,
                        const std::vector<ViewportRecord>& records);

/// p(cell) = score / sum of unmasked scores; uniform over unmasked cells when
/// that sum is zero. Throws std::invalid_argument when every cell is masked.
ProbabilityGrid normalize_map(const ImportanceMap& map);

/// Inverse CDF over row-major cell order with one uniform draw.
Cell sample_cell(const ProbabilityGrid& probs, Rng& rng);

ImportanceMap mask_cell(ImportanceMap map, Cell cell);

EmbeddingState init_embedding(int dim);
EmbeddingState update_embedding(EmbeddingState state, const std::vector<double>& v);

/// Block means of the heatmap over a G x G partition.
ImportanceMap scores_from_heatmap(const Heatmap& heatmap, int grid_side = kDefaultGridSide);

/// Dwell time per cell: each record's (t_end - t_start) is split over the
/// cells its rectangle overlaps, proportionally to overlap area. Cells span
/// integer pixel ranges [floor(k*W/G), floor((k+1)*W/G)) of the base level.
ImportanceMap imitated_weights(const std::vector<ViewportRecord>& records,
                               const SlideRaster& slide,
                               int grid_side = kDefaultGridSide);

/// Thumbnail-cell to 10x-level patch: x = round(j*W/G), y = round(i*H/G),
/// size = floor(min(W, H)/G), clamped in bounds.
PatchCoord cell_to_patch(Cell cell, const SlideRaster& slide,
                         int grid_side = kDefaultGridSide);

/// Copy of the thumbnail with the masked cells painted black.
RgbImage mask_thumbnail(const RgbImage& thumbnail, const CellMask& mask);

struct SamplerOptions {
  int grid_side = kDefaultGridSide;
  double saturation_threshold = kBackgroundSaturation;
  std::vector<ViewportRecord> viewports;  // imitated sampler only
};

/// Incremental cell selection for one trajectory. Every returned cell is
/// masked before the next call.
///   text_conditioned: one navigator call per selection, conditioned on the
///                     current embedding state once it has any descriptions;
///   vision_only:      one unconditioned navigator call, then draws without
///                     replacement from that fixed map;
///   imitated:         draws without replacement from dwell-time weights;
///   exhaustive:       every foreground cell, row-major.
class Sampler {
 public:
  Sampler(SamplerKind kind, const SlideRaster& slide, const Backends& backends,
          SamplerOptions options = {});

  Cell next(const EmbeddingState& state, Rng& rng);
  /// Cells still selectable (for exhaustive: foreground cells not yet taken).
  int remaining() const;
  const CellMask& mask() const { return mask_; }
  SamplerKind kind() const { return kind_; }

 private:
  SamplerKind kind_;
  const SlideRaster& slide_;
  const Backends& backends_;
  SamplerOptions options_;
  CellMask mask_;
  std::optional<ImportanceMap> fixed_;  // vision_only / imitated
  std::vector<Cell> foreground_;        // exhaustive
  std::size_t cursor_ = 0;
};

/// Selects k cells (all foreground cells for exhaustive). For
/// text_conditioned each selection is described and embedded so that
/// `state` conditions the following navigator call.
std::vector<Cell> run_sampler(SamplerKind kind, const SlideRaster& slide,
                              EmbeddingState& state, const Backends& backends,
                              int k, Rng& rng, const SamplerOptions& options = {});

}  // namespace pathfinder
