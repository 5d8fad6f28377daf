#include "pathfinder/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>
#include <vector>

#include "pathfinder/diagnosis_class.hpp"

namespace pathfinder::mock {

PatchStats patch_stats(const PatchPixels& patch) {
  PatchStats s;
  const std::size_t n = patch.pixels.size() / 3;
  if (n == 0) throw std::invalid_argument("empty patch");
  double sr = 0, sg = 0, sb = 0;
  double st_r = 0, st_g = 0, st_b = 0, st_sat = 0;
  std::size_t stained = 0, strong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = patch.pixels[3 * i];
    const auto g = patch.pixels[3 * i + 1];
    const auto b = patch.pixels[3 * i + 2];
    sr += r;
    sg += g;
    sb += b;
    const double sat = pixel_saturation(r, g, b) / 255.0;
    if (sat >= kStrongStainSaturation) ++strong;
    if (sat >= kStainedPixelSaturation) {
      ++stained;
      st_r += r;
      st_g += g;
      st_b += b;
      st_sat += sat;
    }
  }
  const double dn = static_cast<double>(n);
  s.mean_r = sr / dn / 255.0;
  s.mean_g = sg / dn / 255.0;
  s.mean_b = sb / dn / 255.0;
  s.stained_fraction = static_cast<double>(stained) / dn;
  s.strong_fraction = static_cast<double>(strong) / dn;
  if (stained > 0) {
    const double k = static_cast<double>(stained);
    s.stained_saturation = st_sat / k;
    const double r = st_r / k, g = st_g / k, b = st_b / k;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    if (mx > mn) {
      double h;
      if (mx == r) {
        h = 60.0 * std::fmod((g - b) / (mx - mn), 6.0);
      } else if (mx == g) {
        h = 60.0 * ((b - r) / (mx - mn) + 2.0);
      } else {
        h = 60.0 * ((r - g) / (mx - mn) + 4.0);
      }
      s.stained_hue = h < 0 ? h + 360.0 : h;
    }
  }
  return s;
}

namespace {

// (max, min) channel pair -> saturation^power, for the two powers in use.
using PowerTable = std::vector<float>;

PowerTable make_power_table(int power) {
  PowerTable t(256 * 256, 0.0f);
  for (int mx = 1; mx < 256; ++mx) {
    for (int mn = 0; mn <= mx; ++mn) {
      const double s = static_cast<double>(mx - mn) / mx;
      t[mx * 256 + mn] = static_cast<float>(std::pow(s, power));
    }
  }
  return t;
}

Heatmap saturation_power(const RgbImage& img, int power) {
  static const PowerTable squared = make_power_table(2);
  static const PowerTable fourth = make_power_table(4);
  const PowerTable& table = power == 4 ? fourth : squared;
  Heatmap h{img.width, img.height, {}};
  h.values.resize(static_cast<std::size_t>(img.width) * img.height);
  const std::uint8_t* px = img.pixels.data();
  for (std::size_t i = 0; i < h.values.size(); ++i, px += 3) {
    const int mx = std::max({px[0], px[1], px[2]});
    const int mn = std::min({px[0], px[1], px[2]});
    h.values[i] = table[mx * 256 + mn];
  }
  return h;
}

}  // namespace

Heatmap StainDensityNavigator::navigate(
    const RgbImage& thumbnail, const CellMask& /*mask*/,
    const std::optional<Embedding>& embedding) const {
  return saturation_power(thumbnail, embedding ? 4 : 2);
}

Heatmap UniformNavigator::navigate(const RgbImage& thumbnail,
                                   const CellMask& /*mask*/,
                                   const std::optional<Embedding>&) const {
  Heatmap h{thumbnail.width, thumbnail.height, {}};
  h.values.assign(static_cast<std::size_t>(h.width) * h.height, 1.0f);
  return h;
}

std::string TemplateDescriber::describe(const PatchPixels& patch) const {
  const PatchStats s = patch_stats(patch);
  if (s.stained_fraction < 0.05 || s.stained_hue < 0) {
    return "unremarkable epidermis with pale dermal stroma";
  }
  const char* coverage = s.stained_fraction < 0.3   ? "focal"
                         : s.stained_fraction < 0.7 ? "patchy"
                                                    : "diffuse";
  const char* intensity = s.stained_saturation < 0.35  ? "faint"
                          : s.stained_saturation < 0.6 ? "moderate"
                                                       : "dense";
  const double h = s.stained_hue;
  std::string text = coverage;
  if (h < 60.0 || h >= 350.0) {
    text += " junctional nevus with mild cytologic atypia and ";
    text += intensity;
    text += " pigmentation";
  } else if (h >= 300.0) {
    text += " atypical junctional melanocytes in a melanoma in situ pattern with ";
    text += intensity;
    text += " staining";
  } else if (h >= 255.0) {
    text += " invasive melanocytic nests in the papillary dermis with ";
    text += intensity;
    text += " staining";
  } else if (h >= 195.0) {
    text += " advanced invasive melanoma with deep dermal nests and ";
    text += intensity;
    text += " staining";
  } else {
    text += " nonspecific dermal inflammation with ";
    text += intensity;
    text += " staining";
  }
  return text;
}

HashEmbedder::HashEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void normalize_range(Embedding& v, std::size_t begin) {
  double norm = 0;
  for (std::size_t i = begin; i < v.size(); ++i) norm += v[i] * v[i];
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (std::size_t i = begin; i < v.size(); ++i) v[i] /= norm;
  }
}

// Dense pseudo-random direction for `key`, accumulated into v[begin..).
void accumulate(Embedding& v, std::size_t begin, std::uint64_t seed,
                std::string_view key, double weight) {
  std::uint64_t state = splitmix64(seed ^ fnv1a(key));
  for (std::size_t i = begin; i < v.size(); ++i) {
    state = splitmix64(state);
    v[i] += weight * (static_cast<double>(state >> 11) * 0x1.0p-52 - 1.0);
  }
}

}  // namespace

void HashEmbedder::add_feature(Embedding& v, std::string_view key,
                               double weight) const {
  accumulate(v, 0, seed_, key, weight);
}

Embedding HashEmbedder::embed_text(const std::string& text) const {
  Embedding v(static_cast<std::size_t>(dim_), 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    add_feature(v, "raw:" + text, 1.0);
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(v, "u:" + tokens[i], 1.0);
    if (i + 1 < tokens.size()) {
      add_feature(v, "b:" + tokens[i] + " " + tokens[i + 1], 0.5);
    }
  }
  normalize_range(v, 0);
  return v;
}

Embedding HashEmbedder::embed_patch(const PatchPixels& patch) const {
  const PatchStats s = patch_stats(patch);
  Embedding v(static_cast<std::size_t>(dim_), 0.0);
  const std::array<double, 4> head{s.mean_r, s.mean_g, s.mean_b, s.strong_fraction};
  const std::size_t nhead = std::min<std::size_t>(head.size(), v.size());
  std::copy_n(head.begin(), nhead, v.begin());
  if (v.size() <= head.size()) return v;

  std::array<std::uint32_t, 64> hist{};
  const std::size_t n = patch.pixels.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    const int bin = (patch.pixels[3 * i] >> 6) * 16 +
                    (patch.pixels[3 * i + 1] >> 6) * 4 +
                    (patch.pixels[3 * i + 2] >> 6);
    ++hist[bin];
  }
  for (int b = 0; b < 64; ++b) {
    if (hist[b] == 0) continue;
    accumulate(v, head.size(), seed_, "hist:" + std::to_string(b),
               static_cast<double>(hist[b]) / static_cast<double>(n));
  }
  normalize_range(v, head.size());
  return v;
}

SaturationTriage::SaturationTriage(double threshold, double gain)
    : threshold_(threshold), gain_(gain) {}

double SaturationTriage::score(const PaddedGrid& grid) const {
  if (grid.dim <= HashEmbedder::kStainFeature) {
    throw std::invalid_argument("saturation triage needs feature dim >= 4");
  }
  double sum = 0;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    sum += grid.row(r)[HashEmbedder::kStainFeature];
  }
  const double mean = sum / static_cast<double>(grid.rows());
  return 1.0 / (1.0 + std::exp(-gain_ * (mean - threshold_)));
}

std::string KeywordDiagnoser::diagnose(const std::string& prompt) const {
  // Only the bulleted descriptions count; the option lines themselves
  // mention every keyword.
  const auto options_at = prompt.find("The options are:");
  const std::string head = prompt.substr(0, options_at);
  std::string descriptions;
  std::size_t pos = 0;
  while (pos < head.size()) {
    auto eol = head.find('\n', pos);
    if (eol == std::string::npos) eol = head.size();
    if (head.compare(pos, 2, "- ") == 0) {
      descriptions.append(head, pos + 2, eol - pos - 2);
      descriptions.push_back('\n');
    }
    pos = eol + 1;
  }
  std::transform(descriptions.begin(), descriptions.end(), descriptions.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  auto has = [&](const char* kw) { return descriptions.find(kw) != std::string::npos; };
  if (has("advanced")) return option_text(DiagnosisClass::IV);
  if (has("invasive")) return option_text(DiagnosisClass::III);
  return option_text(DiagnosisClass::II);
}

ConstantDiagnoser::ConstantDiagnoser(std::string option_text)
    : answer_(std::move(option_text)) {}

std::string ConstantDiagnoser::diagnose(const std::string&) const { return answer_; }

std::string SynonymRephraser::rephrase(const std::string& text) const {
  static const std::array<std::pair<std::string_view, std::string_view>, 9> kTable{{
      {"unremarkable epidermis", "epidermis without notable change"},
      {"junctional nevus", "nevus at the dermoepidermal junction"},
      {"mild cytologic atypia", "slight cytologic atypia"},
      {"papillary dermis", "superficial dermis"},
      {"deep dermal nests", "nests deep in the dermis"},
      {"focal", "localized"},
      {"diffuse", "widespread"},
      {"patchy", "scattered"},
      {"staining", "stain uptake"},
  }};
  std::string out = text;
  for (const auto& [from, to] : kTable) {
    std::size_t at = 0;
    while ((at = out.find(from, at)) != std::string::npos) {
      out.replace(at, from.size(), to);
      at += to.size();
    }
  }
  return out;
}

}  // namespace pathfinder::mock
