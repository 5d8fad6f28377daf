#pragma once

#include <cstdint>
#include <array>
#include <filesystem>
#include <vector>

#include "pathfinder/diagnosis.hpp"
#include "pathfinder/slide_io.hpp"

namespace pathfinder {

struct SyntheticCase {
  SlideRaster slide;
  std::vector<LesionRect> lesions;
  DiagnosisClass label = DiagnosisClass::I;
};

inline constexpr int kDefaultSynthSide = 1024;

/// One slide whose diagnosis is `label`: a block of normal tissue covering
/// the central 80% of each axis, a primary lesion of that class covering
/// roughly 3-5% of the slide, plus (for classes II-IV) a larger benign nevus
/// decoy elsewhere in the tissue. `lesions` lists the tissue block first.
SyntheticCase make_synthetic_case(DiagnosisClass label, std::uint64_t seed,
                                  int side = kDefaultSynthSide,
                                  const std::string& slide_id = "synthetic");

/// Class of slide k for `count` slides over the weighted mix (weights for
/// I..IV). Largest-remainder apportionment, classes interleaved.
std::vector<DiagnosisClass> class_schedule(int count, const std::array<int, 4>& mix);

/// Writes `count` slides under out_dir/slide_NNN and out_dir/manifest.json.
std::vector<DatasetEntry> synthesize_dataset(int count, const std::array<int, 4>& mix,
                                             std::uint64_t seed,
                                             const std::filesystem::path& out_dir,
                                             int side = kDefaultSynthSide);

}  // namespace pathfinder
