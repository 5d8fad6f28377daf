#pragma once

#include <cstdint>
#include <string>

#include "pathfinder/backends.hpp"

// In-process mock agents. Each is a pure function of its input and its
// construction parameters, so repeated calls agree byte for byte. They are
// "signal-aware": they read the stain hue and saturation that synth_slide
// plants, which lets end-to-end runs recover the planted diagnosis.
namespace pathfinder::mock {

/// Saturation in [0, 1] at or above which a pixel counts as stained.
inline constexpr double kStainedPixelSaturation = 40.0 / 255.0;
/// Saturation in [0, 1] at or above which a pixel counts as strongly stained;
/// the synthetic nevus (class I) stays below it.
inline constexpr double kStrongStainSaturation = 0.45;

/// Colour summary shared by the describer and the image embedder.
struct PatchStats {
  double mean_r = 0, mean_g = 0, mean_b = 0;  // all pixels, 0..1
  double stained_fraction = 0;                // sat >= kStainedPixelSaturation
  double strong_fraction = 0;                 // sat >= kStrongStainSaturation
  double stained_saturation = 0;              // mean sat of stained pixels, 0..1
  double stained_hue = -1;                    // hue of mean stained colour, deg
};
PatchStats patch_stats(const PatchPixels& patch);

/// Heat = (pixel saturation / 255)^p with p = 2 unconditioned and p = 4 once
/// description context exists. Masked cells arrive blacked out and so score 0.
class StainDensityNavigator final : public NavigatorBackend {
 public:
  Heatmap navigate(const RgbImage& thumbnail, const CellMask& mask,
                   const std::optional<Embedding>& embedding) const override;
};

/// Constant heat: uniform random cell selection.
class UniformNavigator final : public NavigatorBackend {
 public:
  Heatmap navigate(const RgbImage& thumbnail, const CellMask& mask,
                   const std::optional<Embedding>& embedding) const override;
};

/// Template text keyed on stain coverage, intensity and hue band.
class TemplateDescriber final : public DescriberBackend {
 public:
  std::string describe(const PatchPixels& patch) const override;
};

/// Text: normalised sum of seeded pseudo-random vectors, one per unigram and
/// bigram. Patches: four colour statistics (mean R, G, B and strong-stain
/// fraction) followed by a hashed projection of a 64-bin colour histogram.
class HashEmbedder final : public EmbedderBackend {
 public:
  explicit HashEmbedder(int dim = kDefaultEmbeddingDim, std::uint64_t seed = 0);
  int dim() const override { return dim_; }
  Embedding embed_text(const std::string& text) const override;
  Embedding embed_patch(const PatchPixels& patch) const override;

  /// Feature index carrying the strong-stain fraction in patch embeddings.
  static constexpr int kStainFeature = 3;

 private:
  void add_feature(Embedding& v, std::string_view key, double weight) const;

  int dim_;
  std::uint64_t seed_;
};

/// score = logistic(gain * (mean stain feature over grid rows - threshold)).
class SaturationTriage final : public TriageBackend {
 public:
  explicit SaturationTriage(double threshold = 0.005, double gain = 400.0);
  double score(const PaddedGrid& grid) const override;

 private:
  double threshold_;
  double gain_;
};

/// Keyword priority over the description section of the prompt:
/// "advanced" -> IV, "invasive" -> III, "in situ"/"severe" -> II, else II.
class KeywordDiagnoser final : public DiagnoserBackend {
 public:
  std::string diagnose(const std::string& prompt) const override;
};

/// Always answers with the option text of one class.
class ConstantDiagnoser final : public DiagnoserBackend {
 public:
  explicit ConstantDiagnoser(std::string option_text);
  std::string diagnose(const std::string& prompt) const override;

 private:
  std::string answer_;
};

/// Fixed score, for gate tests.
class ConstantTriage final : public TriageBackend {
 public:
  explicit ConstantTriage(double score) : score_(score) {}
  double score(const PaddedGrid&) const override { return score_; }

 private:
  double score_;
};

/// Phrase-table substitution.
class SynonymRephraser final : public RephraserBackend {
 public:
  std::string rephrase(const std::string& text) const override;
};

}  // namespace pathfinder::mock
