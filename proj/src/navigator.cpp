#include "pathfinder/navigator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace pathfinder {

using json = nlohmann::json;

ImportanceMap ImportanceMap::zeros(int side) {
  ImportanceMap m;
  m.side = side;
  m.mask = CellMask(side);
  m.scores.assign(static_cast<std::size_t>(side) * side, 0.0);
  return m;
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::text_conditioned: return "text_conditioned";
    case SamplerKind::vision_only: return "vision_only";
    case SamplerKind::imitated: return "imitated";
    case SamplerKind::exhaustive: return "exhaustive";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  for (auto k : {SamplerKind::text_conditioned, SamplerKind::vision_only,
                 SamplerKind::imitated, SamplerKind::exhaustive}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

std::vector<ViewportRecord> read_viewport_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open viewport log " + path.string());
  std::vector<ViewportRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ViewportRecord r;
      r.case_id = j.at("case_id").get<std::string>();
      r.x = j.at("x").get<int>();
      r.y = j.at("y").get<int>();
      r.width = j.at("width").get<int>();
      r.height = j.at("height").get<int>();
      r.zoom = j.value("zoom", 1.0);
      r.t_start = j.at("t_start").get<double>();
      r.t_end = j.at("t_end").get<double>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_viewport_log(const std::filesystem::path& path,
                        const std::vector<ViewportRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    out << json{{"case_id", r.case_id}, {"x", r.x}, {"y", r.y},
                {"width", r.width},     {"height", r.height}, {"zoom", r.zoom},
                {"t_start", r.t_start}, {"t_end", r.t_end}}
               .dump()
        << '\n';
  }
}

ProbabilityGrid normalize_map(const ImportanceMap& map) {
  const std::size_t n = static_cast<std::size_t>(map.side) * map.side;
  if (map.side < 1 || map.scores.size() != n || map.mask.side() != map.side) {
    throw std::invalid_argument("importance map shape mismatch");
  }
  const auto& masked = map.mask.flags();
  double sum = 0.0;
  std::size_t open = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = map.scores[i];
    if (!std::isfinite(s) || s < 0.0) {
      throw std::invalid_argument("importance scores must be finite and >= 0");
    }
    if (!masked[i]) {
      sum += s;
      ++open;
    }
  }
  if (open == 0) throw std::invalid_argument("all cells masked");

  ProbabilityGrid p{map.side, std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (masked[i]) continue;
    p.probs[i] = sum > 0.0 ? map.scores[i] / sum : 1.0 / static_cast<double>(open);
  }
  return p;
}

Cell sample_cell(const ProbabilityGrid& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = probs.probs.size();
  for (std::size_t i = 0; i < probs.probs.size(); ++i) {
    const double p = probs.probs[i];
    if (p <= 0.0) continue;
    last_positive = i;
    cum += p;
    if (u < cum) {
      return {static_cast<int>(i / probs.side), static_cast<int>(i % probs.side)};
    }
  }
  // Rounding can leave the cumulative sum a hair below 1.
  if (last_positive == probs.probs.size()) {
    throw std::invalid_argument("probability grid has no support");
  }
  return {static_cast<int>(last_positive / probs.side),
          static_cast<int>(last_positive % probs.side)};
}

ImportanceMap mask_cell(ImportanceMap map, Cell cell) {
  map.mask.set(cell);
  return map;
}

EmbeddingState init_embedding(int dim) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  return {std::vector<double>(static_cast<std::size_t>(dim), 0.0), 0};
}

EmbeddingState update_embedding(EmbeddingState state, const std::vector<double>& v) {
  if (v.size() != state.mean.size()) {
    throw std::invalid_argument("embedding dimension mismatch: state " +
                                std::to_string(state.mean.size()) + ", vector " +
                                std::to_string(v.size()));
  }
  const double n = static_cast<double>(state.count);
  for (std::size_t i = 0; i < v.size(); ++i) {
    state.mean[i] = (state.mean[i] * n + v[i]) / (n + 1.0);
  }
  ++state.count;
  return state;
}

ImportanceMap scores_from_heatmap(const Heatmap& h, int g) {
  if (g < 1 || h.width % g != 0 || h.height % g != 0) {
    throw std::invalid_argument("heatmap " + std::to_string(h.width) + "x" +
                                std::to_string(h.height) +
                                " not divisible into a " + std::to_string(g) +
                                "x" + std::to_string(g) + " grid");
  }
  if (h.values.size() != static_cast<std::size_t>(h.width) * h.height) {
    throw std::invalid_argument("heatmap buffer size mismatch");
  }
  ImportanceMap m = ImportanceMap::zeros(g);
  const int bw = h.width / g;
  const int bh = h.height / g;
  for (int y = 0; y < h.height; ++y) {
    const float* row = h.values.data() + static_cast<std::size_t>(y) * h.width;
    double* dst = m.scores.data() + static_cast<std::size_t>(y / bh) * g;
    for (int j = 0; j < g; ++j) {
      double acc = 0.0;
      for (int x = j * bw; x < (j + 1) * bw; ++x) acc += row[x];
      dst[j] += acc;
    }
  }
  const double area = static_cast<double>(bw) * bh;
  for (auto& s : m.scores) s /= area;
  return m;
}

ImportanceMap imitated_weights(const std::vector<ViewportRecord>& records,
                               const SlideRaster& slide, int g) {
  if (records.empty()) throw std::invalid_argument("empty viewport record list");
  if (slide.levels.empty()) throw std::invalid_argument("slide has no levels");
  const int W = slide.levels[0].width;
  const int H = slide.levels[0].height;
  ImportanceMap m = ImportanceMap::zeros(g);
  int used = 0;
  for (const auto& r : records) {
    if (r.case_id != slide.slide_id) continue;
    if (r.t_end < r.t_start) throw std::invalid_argument("viewport t_end < t_start");
    const int x0 = std::clamp(r.x, 0, W), x1 = std::clamp(r.x + r.width, 0, W);
    const int y0 = std::clamp(r.y, 0, H), y1 = std::clamp(r.y + r.height, 0, H);
    if (x1 <= x0 || y1 <= y0) continue;
    ++used;
    const double dwell = r.t_end - r.t_start;
    const double area = static_cast<double>(x1 - x0) * (y1 - y0);
    for (int i = 0; i < g; ++i) {
      const Span ys = grid_span(i, H, g);
      const int oy = std::min(y1, ys.end) - std::max(y0, ys.begin);
      if (oy <= 0) continue;
      for (int j = 0; j < g; ++j) {
        const Span xs = grid_span(j, W, g);
        const int ox = std::min(x1, xs.end) - std::max(x0, xs.begin);
        if (ox <= 0) continue;
        m.score({i, j}) += dwell * (static_cast<double>(ox) * oy) / area;
      }
    }
  }
  if (used == 0) {
    throw std::invalid_argument("no viewport records overlap slide " + slide.slide_id);
  }
  return m;
}

PatchCoord cell_to_patch(Cell cell, const SlideRaster& slide, int g) {
  const int level = find_level(slide, kWorkingMagnification);
  if (cell.row < 0 || cell.col < 0 || cell.row >= g || cell.col >= g) {
    throw std::out_of_range("cell outside grid");
  }
  const int W = slide.levels[level].width;
  const int H = slide.levels[level].height;
  const int size = std::min(W, H) / g;
  if (size < 1) throw DataError("10x level too small for a " + std::to_string(g) + " grid");
  const int x = static_cast<int>(std::lround(static_cast<double>(cell.col) * W / g));
  const int y = static_cast<int>(std::lround(static_cast<double>(cell.row) * H / g));
  return {level, std::clamp(x, 0, W - size), std::clamp(y, 0, H - size), size};
}

RgbImage mask_thumbnail(const RgbImage& thumbnail, const CellMask& mask) {
  RgbImage out = thumbnail;
  const int g = mask.side();
  for (const Cell c : mask.cells()) {
    const Span ys = grid_span(c.row, out.height, g);
    const Span xs = grid_span(c.col, out.width, g);
    for (int y = ys.begin; y < ys.end; ++y) {
      std::fill_n(out.pixels.begin() + static_cast<std::ptrdiff_t>(out.offset(xs.begin, y)),
                  static_cast<std::size_t>(xs.end - xs.begin) * 3, std::uint8_t{0});
    }
  }
  return out;
}

Sampler::Sampler(SamplerKind kind, const SlideRaster& slide, const Backends& backends,
                 SamplerOptions options)
    : kind_(kind),
      slide_(slide),
      backends_(backends),
      options_(std::move(options)),
      mask_(options_.grid_side) {
  const int g = options_.grid_side;
  switch (kind_) {
    case SamplerKind::text_conditioned:
    case SamplerKind::vision_only:
      if (!backends_.navigator) throw std::invalid_argument("navigator backend required");
      break;
    case SamplerKind::imitated:
      fixed_ = imitated_weights(options_.viewports, slide_, g);
      break;
    case SamplerKind::exhaustive:
      for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
          const PatchCoord pc = cell_to_patch({i, j}, slide_, g);
          if (region_saturation(slide_, pc) >= options_.saturation_threshold) {
            foreground_.push_back({i, j});
          }
        }
      }
      break;
  }
}

int Sampler::remaining() const {
  if (kind_ == SamplerKind::exhaustive) {
    return static_cast<int>(foreground_.size() - cursor_);
  }
  return mask_.side() * mask_.side() - mask_.count();
}

Cell Sampler::next(const EmbeddingState& state, Rng& rng) {
  if (remaining() <= 0) {
    throw std::invalid_argument("sampler exhausted: no selectable cells remain");
  }
  if (kind_ == SamplerKind::exhaustive) {
    const Cell c = foreground_[cursor_++];
    mask_.set(c);
    return c;
  }

  ImportanceMap map;
  if (kind_ == SamplerKind::text_conditioned ||
      (kind_ == SamplerKind::vision_only && !fixed_)) {
    std::optional<Embedding> cond;
    if (kind_ == SamplerKind::text_conditioned && state.conditioned()) {
      cond = state.mean;
    }
    const Heatmap heat =
        navigator_call(*backends_.navigator, mask_thumbnail(slide_.thumbnail, mask_),
                       mask_, cond, state.dim());
    map = scores_from_heatmap(heat, options_.grid_side);
    if (kind_ == SamplerKind::vision_only) fixed_ = map;
  } else {
    map = *fixed_;
  }
  map.mask = mask_;
  const Cell c = sample_cell(normalize_map(map), rng);
  mask_.set(c);
  return c;
}

std::vector<Cell> run_sampler(SamplerKind kind, const SlideRaster& slide,
                              EmbeddingState& state, const Backends& backends,
                              int k, Rng& rng, const SamplerOptions& options) {
  Sampler sampler(kind, slide, backends, options);
  if (kind == SamplerKind::exhaustive) k = sampler.remaining();
  if (k < 0 || k > sampler.remaining()) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(sampler.remaining()) +
                                " available cells");
  }
  std::vector<Cell> cells;
  for (int t = 0; t < k; ++t) {
    const Cell c = sampler.next(state, rng);
    cells.push_back(c);
    if (kind == SamplerKind::text_conditioned) {
      const PatchPixels patch =
          extract_patch(slide, cell_to_patch(c, slide, options.grid_side));
      const std::string text = describer_call(*backends.describer, patch);
      state = update_embedding(std::move(state), embedder_call(*backends.embedder, text));
    }
  }
  return cells;
}

}  // namespace pathfinder
