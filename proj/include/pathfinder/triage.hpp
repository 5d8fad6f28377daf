#pragma once

#include "pathfinder/backends.hpp"
#include "pathfinder/features.hpp"
#include "pathfinder/slide_io.hpp"

namespace pathfinder {

struct TriageVerdict {
  bool risky = false;
  double score = 0.0;
};

inline constexpr double kTriageThreshold = 0.5;

struct TriageInputOptions {
  double magnification = kWorkingMagnification;
  int patch_size = kTriagePatchSize;
  double saturation_threshold = kBackgroundSaturation;
  int minimum_patches = kMinPatches;
  int retry_budget = kRetryBudget;
};

/// tile -> filter_background -> ensure_min_patches -> sort_spatial -> embed.
FeatureMatrix build_feature_matrix(const SlideRaster& slide,
                                   const EmbedderBackend& embedder, Rng& rng,
                                   const TriageInputOptions& options = {});

/// build_feature_matrix followed by pad_features.
PaddedGrid prepare_triage_input(const SlideRaster& slide,
                                const EmbedderBackend& embedder, Rng& rng,
                                const TriageInputOptions& options = {});

/// Risky when score >= threshold; ties go to further examination.
TriageVerdict run_triage(const PaddedGrid& grid, const TriageBackend& backend,
                         double threshold = kTriageThreshold);

}  // namespace pathfinder
