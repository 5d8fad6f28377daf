#include "pathfinder/triage.hpp"

namespace pathfinder {

FeatureMatrix build_feature_matrix(const SlideRaster& slide,
                                   const EmbedderBackend& embedder, Rng& rng,
                                   const TriageInputOptions& opt) {
  const int level = find_level(slide, opt.magnification);
  auto coords = tile_slide(slide, level, opt.patch_size);
  coords = filter_background(slide, coords, opt.saturation_threshold);
  MinPatchOptions min_opt;
  min_opt.minimum = opt.minimum_patches;
  min_opt.level_index = level;
  min_opt.patch_size = opt.patch_size;
  min_opt.threshold = opt.saturation_threshold;
  min_opt.retry_budget = opt.retry_budget;
  coords = sort_spatial(ensure_min_patches(slide, std::move(coords), min_opt, rng));
  if (coords.empty()) throw DataError("no foreground patches on " + slide.slide_id);

  FeatureMatrix f;
  f.dim = embedder.dim();
  f.values.reserve(coords.size() * static_cast<std::size_t>(f.dim));
  for (const auto& c : coords) {
    const Embedding v = embedder_call(embedder, extract_patch(slide, c));
    f.values.insert(f.values.end(), v.begin(), v.end());
  }
  f.coords = std::move(coords);
  return f;
}

PaddedGrid prepare_triage_input(const SlideRaster& slide,
                                const EmbedderBackend& embedder, Rng& rng,
                                const TriageInputOptions& options) {
  return pad_features(build_feature_matrix(slide, embedder, rng, options));
}

TriageVerdict run_triage(const PaddedGrid& grid, const TriageBackend& backend,
                         double threshold) {
  const double score = triage_call(backend, grid);
  return {score >= threshold, score};
}

}  // namespace pathfinder
