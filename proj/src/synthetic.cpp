#include "pathfinder/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace pathfinder {

namespace {

// Lesions sit inside the tissue block [side/10, 9*side/10).
LesionRect place(Rng& rng, int side, double min_frac, double max_frac, int label) {
  const int margin = side / 8;
  auto extent = [&] {
    return static_cast<int>(side * (min_frac + (max_frac - min_frac) * rng.uniform()));
  };
  LesionRect r;
  r.width = extent();
  r.height = extent();
  r.x = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(side - 2 * margin - r.width) + 1));
  r.y = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(side - 2 * margin - r.height) + 1));
  r.label = label;
  return r;
}

bool apart(const LesionRect& a, const LesionRect& b, int gap) {
  return a.x + a.width + gap <= b.x || b.x + b.width + gap <= a.x ||
         a.y + a.height + gap <= b.y || b.y + b.height + gap <= a.y;
}

}  // namespace

SyntheticCase make_synthetic_case(DiagnosisClass label, std::uint64_t seed, int side,
                                  const std::string& slide_id) {
  if (side < 256) throw std::invalid_argument("synthetic slide side must be >= 256");
  Rng rng(seed);
  SyntheticCase c;
  c.label = label;
  const int t0 = side / 10;
  c.lesions.push_back({t0, t0, side - 2 * t0, side - 2 * t0, 0});
  const LesionRect primary = place(rng, side, 0.17, 0.22, static_cast<int>(label));
  c.lesions.push_back(primary);
  if (label != DiagnosisClass::I) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const LesionRect decoy = place(rng, side, 0.22, 0.30, 1);
      if (apart(primary, decoy, side / 32)) {
        c.lesions.push_back(decoy);
        break;
      }
    }
  }
  c.slide = synth_slide(side, side, c.lesions, splitmix64(seed), slide_id);
  return c;
}

std::vector<DiagnosisClass> class_schedule(int count, const std::array<int, 4>& mix) {
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  const int total = std::accumulate(mix.begin(), mix.end(), 0);
  if (total <= 0 || std::any_of(mix.begin(), mix.end(), [](int w) { return w < 0; })) {
    throw std::invalid_argument("class mix needs non-negative weights with a positive sum");
  }
  std::array<int, 4> quota{};
  std::array<long long, 4> remainder{};
  int assigned = 0;
  for (int k = 0; k < 4; ++k) {
    quota[k] = static_cast<int>(static_cast<long long>(count) * mix[k] / total);
    remainder[k] = static_cast<long long>(count) * mix[k] % total;
    assigned += quota[k];
  }
  while (assigned < count) {
    const auto k = static_cast<std::size_t>(
        std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++quota[k];
    remainder[k] = -1;
    ++assigned;
  }
  std::vector<DiagnosisClass> out;
  while (static_cast<int>(out.size()) < count) {
    for (int k = 0; k < 4; ++k) {
      if (quota[k] > 0) {
        --quota[k];
        out.push_back(kAllClasses[k]);
      }
    }
  }
  return out;
}

std::vector<DatasetEntry> synthesize_dataset(int count, const std::array<int, 4>& mix,
                                             std::uint64_t seed,
                                             const std::filesystem::path& out_dir,
                                             int side) {
  const auto labels = class_schedule(count, mix);
  std::filesystem::create_directories(out_dir);
  std::vector<DatasetEntry> entries;
  for (int k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "slide_%03d", k);
    const SyntheticCase c =
        make_synthetic_case(labels[k], derive_seed(seed, static_cast<std::uint64_t>(k)), side, name);
    write_slide(c.slide, out_dir / name);
    entries.push_back({name, labels[k], nullptr});
  }
  write_manifest(out_dir / "manifest.json", entries);
  for (auto& e : entries) e.slide_dir = (out_dir / e.slide_dir).string();
  return entries;
}

}  // namespace pathfinder
