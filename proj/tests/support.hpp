#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/backends.hpp"
#include "pathfinder/mock_backends.hpp"
#include "pathfinder/slide_io.hpp"

namespace testing {

using namespace pathfinder;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pf") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline RgbImage flat_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

/// One 10x level of a single colour plus a matching 512x512 thumbnail.
inline SlideRaster flat_slide(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b,
                              std::string id = "flat") {
  SlideRaster s;
  s.slide_id = std::move(id);
  s.levels.push_back(flat_image(w, h, r, g, b));
  s.magnification.push_back(kWorkingMagnification);
  s.thumbnail = flat_image(kThumbnailSide, kThumbnailSide, r, g, b);
  return s;
}

inline Backends mock_backends(int dim = kDefaultEmbeddingDim) {
  return make_backends(BackendConfig::all_mock(dim));
}

struct NavigatorCall {
  CellMask mask;
  std::optional<Embedding> embedding;
  RgbImage thumbnail;
};

/// Forwards to another navigator and logs every request.
class RecordingNavigator final : public NavigatorBackend {
 public:
  explicit RecordingNavigator(std::shared_ptr<const NavigatorBackend> inner,
                              bool keep_thumbnails = false)
      : inner_(std::move(inner)), keep_thumbnails_(keep_thumbnails) {}

  Heatmap navigate(const RgbImage& thumbnail, const CellMask& mask,
                   const std::optional<Embedding>& embedding) const override {
    {
      std::lock_guard lock(mu_);
      calls_.push_back({mask, embedding, keep_thumbnails_ ? thumbnail : RgbImage{}});
    }
    return inner_->navigate(thumbnail, mask, embedding);
  }
  std::vector<NavigatorCall> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
  }

 private:
  std::shared_ptr<const NavigatorBackend> inner_;
  bool keep_thumbnails_;
  mutable std::mutex mu_;
  mutable std::vector<NavigatorCall> calls_;
};

class CountingDescriber final : public DescriberBackend {
 public:
  explicit CountingDescriber(std::shared_ptr<const DescriberBackend> inner)
      : inner_(std::move(inner)) {}
  std::string describe(const PatchPixels& p) const override {
    ++calls;
    return inner_->describe(p);
  }
  mutable std::atomic<int> calls{0};

 private:
  std::shared_ptr<const DescriberBackend> inner_;
};

class CountingDiagnoser final : public DiagnoserBackend {
 public:
  explicit CountingDiagnoser(std::shared_ptr<const DiagnoserBackend> inner)
      : inner_(std::move(inner)) {}
  std::string diagnose(const std::string& prompt) const override {
    ++calls;
    return inner_->diagnose(prompt);
  }
  mutable std::atomic<int> calls{0};

 private:
  std::shared_ptr<const DiagnoserBackend> inner_;
};

/// Heat 1 inside the listed thumbnail cells, 0 elsewhere.
class CellHotNavigator final : public NavigatorBackend {
 public:
  CellHotNavigator(std::vector<Cell> hot, int grid_side) : hot_(std::move(hot)), g_(grid_side) {}
  Heatmap navigate(const RgbImage& t, const CellMask&,
                   const std::optional<Embedding>&) const override {
    Heatmap h{t.width, t.height, std::vector<float>(static_cast<std::size_t>(t.width) * t.height, 0.f)};
    for (const Cell& c : hot_) {
      const Span ys = grid_span(c.row, t.height, g_);
      const Span xs = grid_span(c.col, t.width, g_);
      for (int y = ys.begin; y < ys.end; ++y) {
        for (int x = xs.begin; x < xs.end; ++x) h.values[static_cast<std::size_t>(y) * t.width + x] = 1.f;
      }
    }
    return h;
  }

 private:
  std::vector<Cell> hot_;
  int g_;
};

}  // namespace testing
