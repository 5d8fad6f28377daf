#include "pathfinder/slide_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

namespace pathfinder {

namespace fs = std::filesystem;
using json = nlohmann::json;

RgbImage::RgbImage(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be >= 1");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path) {
  PnmHeader h;
  h.magic = pnm_token(in);
  try {
    h.width = std::stoi(pnm_token(in));
    h.height = std::stoi(pnm_token(in));
    h.maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw DataError("malformed PNM header in " + path.string());
  }
  if (h.width < 1 || h.height < 1) {
    throw DataError("invalid PNM dimensions in " + path.string());
  }
  if (h.maxval != 255) {
    throw DataError("unsupported PNM maxval " + std::to_string(h.maxval) +
                    " in " + path.string());
  }
  return h;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic != "P6") {
    throw DataError("non-RGB payload in " + path.string() + " (magic " +
                    h.magic + ")");
  }
  RgbImage img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw DataError("truncated pixel data in " + path.string());
  }
  return img;
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_pgm(const fs::path& path, int width, int height,
               const std::vector<std::uint8_t>& gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("PGM buffer size does not match dimensions");
  }
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::uint8_t> read_pgm(const fs::path& path, int& width,
                                   int& height) {
  auto in = open_in(path);
  const PnmHeader h = read_pnm_header(in, path);
  if (h.magic != "P5") throw DataError("not a binary PGM: " + path.string());
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(h.width) * h.height);
  in.read(reinterpret_cast<char*>(gray.data()),
          static_cast<std::streamsize>(gray.size()));
  if (in.gcount() != static_cast<std::streamsize>(gray.size())) {
    throw DataError("truncated pixel data in " + path.string());
  }
  width = h.width;
  height = h.height;
  return gray;
}

SlideRaster load_slide(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) {
    throw DataError("missing metadata file " + meta_path.string());
  }
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + meta_path.string() + ": " + e.what());
  }

  SlideRaster slide;
  try {
    slide.slide_id = meta.at("slide_id").get<std::string>();
    const auto& levels = meta.at("levels");
    if (!levels.is_array() || levels.empty()) {
      throw DataError("meta.json declares no levels");
    }
    std::size_t present = 0;
    for (const auto& lv : levels) {
      if (fs::exists(dir / lv.at("file").get<std::string>())) ++present;
    }
    if (present != levels.size()) {
      throw DataError("level count mismatch: meta.json declares " +
                      std::to_string(levels.size()) + " levels but " +
                      std::to_string(present) + " payloads exist in " +
                      dir.string());
    }
    for (const auto& lv : levels) {
      const auto file = dir / lv.at("file").get<std::string>();
      RgbImage img = read_ppm(file);
      const int w = lv.at("width").get<int>();
      const int h = lv.at("height").get<int>();
      if (img.width != w || img.height != h) {
        throw DataError("level dimension mismatch in " + file.string() +
                        ": declared " + std::to_string(w) + "x" +
                        std::to_string(h) + ", payload " +
                        std::to_string(img.width) + "x" +
                        std::to_string(img.height));
      }
      const double mag = lv.at("magnification").get<double>();
      if (!(mag > 0.0)) throw DataError("magnification must be positive");
      slide.levels.push_back(std::move(img));
      slide.magnification.push_back(mag);
    }
    slide.thumbnail = read_ppm(dir / meta.at("thumbnail").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("malformed " + meta_path.string() + ": " + e.what());
  }
  if (slide.thumbnail.width != kThumbnailSide ||
      slide.thumbnail.height != kThumbnailSide) {
    throw DataError("thumbnail must be 512x512");
  }
  for (std::size_t i = 1; i < slide.levels.size(); ++i) {
    if (slide.levels[i].width > slide.levels[i - 1].width) {
      throw DataError("levels must be ordered from highest resolution");
    }
  }
  return slide;
}

void write_slide(const SlideRaster& slide, const fs::path& dir) {
  if (slide.levels.size() != slide.magnification.size()) {
    throw std::invalid_argument("one magnification per level required");
  }
  fs::create_directories(dir);
  json meta;
  meta["slide_id"] = slide.slide_id;
  meta["levels"] = json::array();
  for (std::size_t i = 0; i < slide.levels.size(); ++i) {
    const std::string file = "level" + std::to_string(i) + ".ppm";
    write_ppm(dir / file, slide.levels[i]);
    meta["levels"].push_back({{"width", slide.levels[i].width},
                              {"height", slide.levels[i].height},
                              {"magnification", slide.magnification[i]},
                              {"file", file}});
  }
  write_ppm(dir / "thumbnail.ppm", slide.thumbnail);
  meta["thumbnail"] = "thumbnail.ppm";
  auto out = open_out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

RgbImage resample(const RgbImage& src, int width, int height) {
  RgbImage dst(width, height);
  for (int v = 0; v < height; ++v) {
    const Span ys = grid_span(v, src.height, height);
    const int y0 = ys.begin;
    const int y1 = std::max(ys.end, y0 + 1);
    for (int u = 0; u < width; ++u) {
      const Span xs = grid_span(u, src.width, width);
      const int x0 = xs.begin;
      const int x1 = std::max(xs.end, x0 + 1);
      std::array<std::uint64_t, 3> acc{};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const auto o = src.offset(x, y);
          for (int c = 0; c < 3; ++c) acc[c] += src.pixels[o + c];
        }
      }
      const auto n = static_cast<std::uint64_t>(y1 - y0) * (x1 - x0);
      const auto o = dst.offset(u, v);
      for (int c = 0; c < 3; ++c) {
        dst.pixels[o + c] = static_cast<std::uint8_t>((acc[c] + n / 2) / n);
      }
    }
  }
  return dst;
}

namespace {

struct StainStyle {
  double hue;         // degrees
  double saturation;  // 0..1
  double value;       // 0..1
};

// Hue encodes the lesion class; saturation rises with severity. Normal
// stroma clears the background filter but stays below the stained level.
constexpr std::array<StainStyle, 5> kStains{{
    {345.0, 0.11, 0.92},  // 0   normal stroma
    {30.0, 0.28, 0.80},   // I   nevus, brown and pale
    {330.0, 0.55, 0.86},  // II  pink-magenta
    {282.0, 0.66, 0.78},  // III purple
    {232.0, 0.76, 0.70},  // IV  deep blue
}};

std::array<std::uint8_t, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
  s = std::clamp(s, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto q = [](double t) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  };
  return {q(r + m), q(g + m), q(b + m)};
}

// Symmetric noise in [-1, 1) from a 64-bit hash.
double unit_noise(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace

SlideRaster synth_slide(int width, int height,
                        const std::vector<LesionRect>& lesions,
                        std::uint64_t seed, std::string slide_id) {
  if (width < 64 || height < 64) {
    throw std::invalid_argument("synthetic slides must be at least 64x64");
  }
  for (const auto& r : lesions) {
    if (r.x < 0 || r.y < 0 || r.width < 1 || r.height < 1 ||
        r.x + r.width > width || r.y + r.height > height) {
      throw std::out_of_range("out-of-bounds lesion rectangle");
    }
    if (r.label < 0 || r.label > 4) {
      throw std::invalid_argument("lesion label must be in 0..4");
    }
  }

  // Label map (255 = glass); later rectangles paint over earlier ones.
  std::vector<std::uint8_t> label(static_cast<std::size_t>(width) * height, 255);
  for (const auto& r : lesions) {
    for (int y = r.y; y < r.y + r.height; ++y) {
      std::fill_n(label.begin() + static_cast<std::ptrdiff_t>(y) * width + r.x,
                  r.width, static_cast<std::uint8_t>(r.label));
    }
  }

  RgbImage level(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint64_t h0 =
          splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(y) << 32) |
                                       static_cast<std::uint32_t>(x)));
      const std::uint64_t h1 = splitmix64(h0);
      const std::uint64_t h2 = splitmix64(h1);
      const std::uint64_t h3 = splitmix64(h2);
      const auto o = level.offset(x, y);
      const int cls = label[static_cast<std::size_t>(y) * width + x];
      if (cls == 255) {
        // Pale, nearly neutral glass and stroma.
        const int base[3] = {238, 233, 236};
        const std::uint64_t hs[3] = {h0, h1, h2};
        for (int c = 0; c < 3; ++c) {
          const int n = static_cast<int>(hs[c] % 7) - 3;
          level.pixels[o + c] = static_cast<std::uint8_t>(base[c] + n);
        }
        continue;
      }
      const StainStyle& st = kStains[cls];
      double hue = st.hue + 6.0 * unit_noise(h0);
      double sat = st.saturation + 0.05 * unit_noise(h1);
      double val = st.value + 0.06 * unit_noise(h2);
      if (cls > 0 && h3 % 100 < 6) {  // nuclei
        val *= 0.62;
        sat = std::min(sat + 0.08, 0.95);
      }
      const auto rgb = hsv_to_rgb(hue, sat, val);
      for (int c = 0; c < 3; ++c) level.pixels[o + c] = rgb[c];
    }
  }

  SlideRaster slide;
  slide.slide_id = std::move(slide_id);
  slide.thumbnail = resample(level, kThumbnailSide, kThumbnailSide);
  slide.levels.push_back(std::move(level));
  slide.magnification.push_back(kWorkingMagnification);
  return slide;
}

int find_level(const SlideRaster& slide, double magnification) {
  for (std::size_t i = 0; i < slide.magnification.size(); ++i) {
    if (std::fabs(slide.magnification[i] - magnification) < 1e-9) {
      return static_cast<int>(i);
    }
  }
  std::ostringstream msg;
  msg << "slide " << slide.slide_id << " has no " << magnification << "x level";
  throw DataError(msg.str());
}

void check_coord(const SlideRaster& slide, const PatchCoord& c) {
  if (c.level < 0 || c.level >= static_cast<int>(slide.levels.size())) {
    throw std::out_of_range("patch level index out of range");
  }
  const auto& lv = slide.levels[c.level];
  if (c.size < 1 || c.x < 0 || c.y < 0 || c.x + c.size > lv.width ||
      c.y + c.size > lv.height) {
    throw std::out_of_range("patch (" + std::to_string(c.x) + "," +
                            std::to_string(c.y) + ",size=" +
                            std::to_string(c.size) + ") out of bounds");
  }
}

std::vector<PatchCoord> tile_slide(const SlideRaster& slide, int level_index,
                                   int patch_size) {
  if (level_index < 0 || level_index >= static_cast<int>(slide.levels.size())) {
    throw std::out_of_range("level index out of range");
  }
  const auto& lv = slide.levels[level_index];
  if (patch_size < 1 || patch_size > lv.width || patch_size > lv.height) {
    throw std::invalid_argument("patch size " + std::to_string(patch_size) +
                                " larger than level " +
                                std::to_string(lv.width) + "x" +
                                std::to_string(lv.height));
  }
  std::vector<PatchCoord> coords;
  for (int y = 0; y + patch_size <= lv.height; y += patch_size) {
    for (int x = 0; x + patch_size <= lv.width; x += patch_size) {
      coords.push_back({level_index, x, y, patch_size});
    }
  }
  return coords;
}

double pixel_saturation(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int mx = std::max({r, g, b});
  if (mx == 0) return 0.0;
  const int mn = std::min({r, g, b});
  return 255.0 * (mx - mn) / mx;
}

double saturation(const PatchPixels& patch) {
  const std::size_t n = patch.pixels.size() / 3;
  if (n == 0) throw std::invalid_argument("saturation of an empty patch");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += pixel_saturation(patch.pixels[3 * i], patch.pixels[3 * i + 1],
                            patch.pixels[3 * i + 2]);
  }
  return sum / static_cast<double>(n);
}

double region_saturation(const SlideRaster& slide, const PatchCoord& c) {
  check_coord(slide, c);
  const auto& lv = slide.levels[c.level];
  double sum = 0.0;
  for (int y = c.y; y < c.y + c.size; ++y) {
    const std::uint8_t* row = lv.pixels.data() + lv.offset(c.x, y);
    for (int x = 0; x < c.size; ++x) {
      sum += pixel_saturation(row[3 * x], row[3 * x + 1], row[3 * x + 2]);
    }
  }
  return sum / (static_cast<double>(c.size) * c.size);
}

std::vector<PatchCoord> filter_background(const SlideRaster& slide,
                                          const std::vector<PatchCoord>& coords,
                                          double threshold) {
  std::vector<PatchCoord> kept;
  for (const auto& c : coords) {
    if (threshold <= 0.0) {
      check_coord(slide, c);
      kept.push_back(c);
    } else if (region_saturation(slide, c) >= threshold) {
      kept.push_back(c);
    }
  }
  return kept;
}

std::vector<PatchCoord> ensure_min_patches(const SlideRaster& slide,
                                           std::vector<PatchCoord> kept,
                                           const MinPatchOptions& opt,
                                           Rng& rng) {
  if (static_cast<int>(kept.size()) >= opt.minimum) return kept;
  if (opt.level_index < 0 ||
      opt.level_index >= static_cast<int>(slide.levels.size())) {
    throw std::out_of_range("level index out of range");
  }
  const auto& lv = slide.levels[opt.level_index];
  if (opt.patch_size < 1 || opt.patch_size > lv.width ||
      opt.patch_size > lv.height) {
    throw std::invalid_argument("patch size larger than level");
  }
  const auto span_x = static_cast<std::uint64_t>(lv.width - opt.patch_size) + 1;
  const auto span_y = static_cast<std::uint64_t>(lv.height - opt.patch_size) + 1;
  for (int draw = 0; draw < opt.retry_budget; ++draw) {
    const PatchCoord c{opt.level_index, static_cast<int>(rng.below(span_x)),
                       static_cast<int>(rng.below(span_y)), opt.patch_size};
    if (region_saturation(slide, c) >= opt.threshold) {
      kept.push_back(c);
      if (static_cast<int>(kept.size()) >= opt.minimum) return kept;
    }
  }
  throw DataError("insufficient foreground: " + std::to_string(kept.size()) +
                  " of " + std::to_string(opt.minimum) + " patches after " +
                  std::to_string(opt.retry_budget) + " draws on slide " +
                  slide.slide_id);
}

std::vector<PatchCoord> sort_spatial(std::vector<PatchCoord> coords) {
  std::stable_sort(coords.begin(), coords.end(),
                   [](const PatchCoord& a, const PatchCoord& b) {
                     return std::tie(a.y, a.x) < std::tie(b.y, b.x);
                   });
  return coords;
}

PatchPixels extract_patch(const SlideRaster& slide, const PatchCoord& c) {
  check_coord(slide, c);
  const auto& lv = slide.levels[c.level];
  PatchPixels patch{c, {}};
  patch.pixels.resize(static_cast<std::size_t>(c.size) * c.size * 3);
  const std::size_t row_bytes = static_cast<std::size_t>(c.size) * 3;
  for (int y = 0; y < c.size; ++y) {
    std::copy_n(lv.pixels.begin() +
                    static_cast<std::ptrdiff_t>(lv.offset(c.x, c.y + y)),
                row_bytes, patch.pixels.begin() + y * row_bytes);
  }
  return patch;
}

}  // namespace pathfinder
