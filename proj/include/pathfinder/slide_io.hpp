#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/common.hpp"

namespace pathfinder {

/// Row-major 8-bit RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h);

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

using LevelRaster = RgbImage;

/// Multi-level raster standing in for a WSI pyramid. Levels are ordered from
/// highest to lowest resolution; `thumbnail` is the 512x512 overview used by
/// the navigator.
struct SlideRaster {
  std::string slide_id;
  std::vector<LevelRaster> levels;
  std::vector<double> magnification;  // one per level, e.g. 10.0 for 10x
  RgbImage thumbnail;

  friend bool operator==(const SlideRaster&, const SlideRaster&) = default;
};

struct PatchCoord {
  int level = 0;
  int x = 0;
  int y = 0;
  int size = 0;

  friend bool operator==(const PatchCoord&, const PatchCoord&) = default;
};

struct PatchPixels {
  PatchCoord coord;
  std::vector<std::uint8_t> pixels;  // size * size * 3
};

/// Axis-aligned region painted by synth_slide. Labels 1..4 are lesions of
/// that diagnosis class; label 0 is normal, lightly stained tissue.
struct LesionRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  int label = 1;
};

inline constexpr int kThumbnailSide = 512;
inline constexpr double kBackgroundSaturation = 15.0;
inline constexpr int kMinPatches = 150;
inline constexpr int kRetryBudget = 10000;
inline constexpr int kTriagePatchSize = 512;
inline constexpr double kWorkingMagnification = 10.0;

// PPM/PGM codecs (binary P6 / P5, maxval 255).
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& gray);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path,
                                   int& width, int& height);

/// Reads a slide directory (meta.json + one P6 PPM per level + thumbnail).
SlideRaster load_slide(const std::filesystem::path& dir);
void write_slide(const SlideRaster& slide, const std::filesystem::path& dir);

/// Deterministic synthetic slide: pale glass everywhere outside the given
/// regions. The single level is tagged 10x; the thumbnail is a box-filtered
/// 512x512 downsample.
SlideRaster synth_slide(int width, int height,
                        const std::vector<LesionRect>& lesions,
                        std::uint64_t seed, std::string slide_id = "synthetic");

/// Box-filter resample to an arbitrary size (area average when shrinking,
/// replication when growing).
RgbImage resample(const RgbImage& src, int width, int height);

/// Index of the level with the given magnification; DataError if absent.
int find_level(const SlideRaster& slide, double magnification);

/// Non-overlapping row-major grid; partial edge tiles are dropped.
std::vector<PatchCoord> tile_slide(const SlideRaster& slide, int level_index,
                                   int patch_size);

/// Mean per-pixel HSV saturation on a 0-255 scale.
double saturation(const PatchPixels& patch);
double pixel_saturation(std::uint8_t r, std::uint8_t g, std::uint8_t b);
/// Same as saturation(extract_patch(slide, coord)) without the copy.
double region_saturation(const SlideRaster& slide, const PatchCoord& coord);

std::vector<PatchCoord> filter_background(
    const SlideRaster& slide, const std::vector<PatchCoord>& coords,
    double threshold = kBackgroundSaturation);

struct MinPatchOptions {
  int minimum = kMinPatches;
  int level_index = 0;
  int patch_size = kTriagePatchSize;
  double threshold = kBackgroundSaturation;
  int retry_budget = kRetryBudget;
};

/// Tops `kept` up to `minimum` with randomly placed (possibly overlapping)
/// patches that pass the saturation filter. Throws DataError
/// "insufficient foreground" when the draw budget runs out.
std::vector<PatchCoord> ensure_min_patches(const SlideRaster& slide,
                                           std::vector<PatchCoord> kept,
                                           const MinPatchOptions& options,
                                           Rng& rng);

/// Row-major order: (y, x) ascending.
std::vector<PatchCoord> sort_spatial(std::vector<PatchCoord> coords);

PatchPixels extract_patch(const SlideRaster& slide, const PatchCoord& coord);

/// Throws std::out_of_range if the coordinate does not fit its level.
void check_coord(const SlideRaster& slide, const PatchCoord& coord);

}  // namespace pathfinder
