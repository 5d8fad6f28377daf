#include "pathfinder/backends.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pathfinder/diagnosis_class.hpp"
#include "pathfinder/mock_backends.hpp"
#include "pathfinder/remote.hpp"

namespace pathfinder {

using json = nlohmann::json;

namespace {

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

void check_vector(const Embedding& v, int expected_dim, const char* what) {
  if (static_cast<int>(v.size()) != expected_dim) {
    throw MalformedResponse(std::string(what) + ": expected dimension " +
                            std::to_string(expected_dim) + ", got " +
                            std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw MalformedResponse(std::string(what) + ": non-finite component");
    }
  }
}

}  // namespace

Heatmap navigator_call(const NavigatorBackend& nav, const RgbImage& thumbnail,
                       const CellMask& mask,
                       const std::optional<Embedding>& embedding,
                       int expected_dim) {
  if (embedding && static_cast<int>(embedding->size()) != expected_dim) {
    throw std::invalid_argument("conditioning vector has wrong dimension");
  }
  Heatmap h = nav.navigate(thumbnail, mask, embedding);
  if (h.width != thumbnail.width || h.height != thumbnail.height ||
      h.values.size() != static_cast<std::size_t>(h.width) * h.height) {
    throw MalformedResponse("navigator: heatmap shape " +
                            std::to_string(h.width) + "x" +
                            std::to_string(h.height) +
                            " does not match thumbnail");
  }
  for (float v : h.values) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw MalformedResponse("navigator: heatmap has negative or NaN values");
    }
  }
  return h;
}

std::string describer_call(const DescriberBackend& desc,
                           const PatchPixels& patch) {
  if (patch.pixels.empty()) throw std::invalid_argument("empty patch");
  std::string text = desc.describe(patch);
  if (blank(text)) throw MalformedResponse("describer: empty response");
  return text;
}

Embedding embedder_call(const EmbedderBackend& emb, const std::string& text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  Embedding v = emb.embed_text(text);
  check_vector(v, emb.dim(), "embedder");
  return v;
}

Embedding embedder_call(const EmbedderBackend& emb, const PatchPixels& patch) {
  if (patch.pixels.empty()) throw std::invalid_argument("cannot embed empty patch");
  Embedding v = emb.embed_patch(patch);
  check_vector(v, emb.dim(), "embedder");
  return v;
}

double triage_call(const TriageBackend& triage, const PaddedGrid& grid) {
  if (grid.rows() == 0 || grid.values.size() != grid.rows() * grid.dim) {
    throw std::invalid_argument("invalid padded grid");
  }
  const double s = triage.score(grid);
  if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
    throw MalformedResponse("triage: score outside [0, 1]");
  }
  return s;
}

std::string diagnoser_call(const DiagnoserBackend& diag,
                           const std::string& prompt) {
  return diag.diagnose(prompt);
}

std::string rephraser_call(const RephraserBackend& reph,
                           const std::string& text) {
  if (blank(text)) throw std::invalid_argument("cannot rephrase empty text");
  std::string out = reph.rephrase(text);
  if (blank(out)) throw MalformedResponse("rephraser: empty response");
  return out;
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::navigator: return "navigator";
    case BackendKind::describer: return "describer";
    case BackendKind::embedder: return "embedder";
    case BackendKind::triage: return "triage";
    case BackendKind::diagnoser: return "diagnoser";
    case BackendKind::rephraser: return "rephraser";
  }
  return "?";
}

BackendKind backend_kind_from_string(const std::string& s) {
  for (auto k : kAllBackendKinds) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown backend kind '" + s + "'");
}

std::string route_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::navigator: return "navigate";
    case BackendKind::describer: return "describe";
    case BackendKind::embedder: return "embed";
    case BackendKind::triage: return "triage";
    case BackendKind::diagnoser: return "diagnose";
    case BackendKind::rephraser: return "rephrase";
  }
  return "?";
}

BackendConfig BackendConfig::all_mock(int embedding_dim) {
  BackendConfig cfg;
  cfg.embedding_dim = embedding_dim;
  for (auto k : kAllBackendKinds) cfg.endpoints[k] = BackendEndpoint{};
  cfg.endpoints[BackendKind::rephraser].mode = BackendEndpoint::Mode::disabled;
  return cfg;
}

const BackendEndpoint& BackendConfig::endpoint(BackendKind kind) const {
  auto it = endpoints.find(kind);
  if (it == endpoints.end()) {
    throw std::invalid_argument("no endpoint configured for " + to_string(kind));
  }
  return it->second;
}

void BackendConfig::validate() const {
  if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
  for (const auto& [kind, ep] : endpoints) {
    if (ep.mode == BackendEndpoint::Mode::remote && ep.url.empty()) {
      throw std::invalid_argument(to_string(kind) + ": remote mode requires url");
    }
    if (ep.mode != BackendEndpoint::Mode::remote && !ep.url.empty()) {
      throw std::invalid_argument(to_string(kind) + ": url given but mode is not remote");
    }
    if (!(ep.timeout_s > 0.0)) {
      throw std::invalid_argument(to_string(kind) + ": timeout must be positive");
    }
    if (ep.retries < 0) {
      throw std::invalid_argument(to_string(kind) + ": retries must be >= 0");
    }
    if (ep.mode == BackendEndpoint::Mode::disabled &&
        kind != BackendKind::rephraser) {
      throw std::invalid_argument(to_string(kind) + " cannot be disabled");
    }
  }
}

BackendConfig parse_backend_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("backend config: ") + e.what());
  }
  BackendConfig cfg = BackendConfig::all_mock();
  try {
    cfg.embedding_dim = j.value("embedding_dim", kDefaultEmbeddingDim);
    cfg.mock_seed = j.value("mock_seed", std::uint64_t{0});
    for (auto k : kAllBackendKinds) {
      if (!j.contains(to_string(k))) continue;
      const json& e = j.at(to_string(k));
      BackendEndpoint ep;
      const std::string mode = e.value("mode", "mock");
      if (mode == "mock") {
        ep.mode = BackendEndpoint::Mode::mock;
      } else if (mode == "remote") {
        ep.mode = BackendEndpoint::Mode::remote;
      } else if (mode == "disabled") {
        ep.mode = BackendEndpoint::Mode::disabled;
      } else {
        throw std::invalid_argument(to_string(k) + ": unknown mode '" + mode + "'");
      }
      ep.url = e.value("url", "");
      ep.timeout_s = e.value("timeout_s", 30.0);
      ep.retries = e.value("retries", 2);
      ep.variant = e.value("variant", "");
      if (e.contains("params")) {
        for (const auto& [key, val] : e.at("params").items()) {
          ep.params[key] = val.is_string() ? val.get<std::string>() : val.dump();
        }
      }
      cfg.endpoints[k] = ep;
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("backend config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read backend config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_backend_config(ss.str());
}

std::string backend_config_to_json(const BackendConfig& cfg) {
  json j;
  j["embedding_dim"] = cfg.embedding_dim;
  j["mock_seed"] = cfg.mock_seed;
  for (const auto& [kind, ep] : cfg.endpoints) {
    json e;
    switch (ep.mode) {
      case BackendEndpoint::Mode::mock: e["mode"] = "mock"; break;
      case BackendEndpoint::Mode::remote: e["mode"] = "remote"; break;
      case BackendEndpoint::Mode::disabled: e["mode"] = "disabled"; break;
    }
    if (!ep.url.empty()) e["url"] = ep.url;
    e["timeout_s"] = ep.timeout_s;
    e["retries"] = ep.retries;
    if (!ep.variant.empty()) e["variant"] = ep.variant;
    if (!ep.params.empty()) e["params"] = ep.params;
    j[to_string(kind)] = e;
  }
  return j.dump();
}

namespace {

std::string param(const BackendEndpoint& ep, const std::string& key,
                  const std::string& fallback) {
  auto it = ep.params.find(key);
  return it == ep.params.end() ? fallback : it->second;
}

[[noreturn]] void unknown_variant(BackendKind kind, const std::string& v) {
  throw std::invalid_argument(to_string(kind) + ": unknown mock variant '" + v + "'");
}

}  // namespace

Backends make_backends(const BackendConfig& cfg) {
  cfg.validate();
  Backends b;
  for (auto kind : kAllBackendKinds) {
    const BackendEndpoint& ep = cfg.endpoint(kind);
    if (ep.mode == BackendEndpoint::Mode::disabled) continue;
    if (ep.mode == BackendEndpoint::Mode::remote) {
      HttpTransport t(ep.url, ep.timeout_s, ep.retries);
      switch (kind) {
        case BackendKind::navigator: b.navigator = std::make_shared<RemoteNavigator>(t); break;
        case BackendKind::describer: b.describer = std::make_shared<RemoteDescriber>(t); break;
        case BackendKind::embedder:
          b.embedder = std::make_shared<RemoteEmbedder>(t, cfg.embedding_dim);
          break;
        case BackendKind::triage: b.triage = std::make_shared<RemoteTriage>(t); break;
        case BackendKind::diagnoser: b.diagnoser = std::make_shared<RemoteDiagnoser>(t); break;
        case BackendKind::rephraser: b.rephraser = std::make_shared<RemoteRephraser>(t); break;
      }
      continue;
    }
    const std::string& v = ep.variant;
    switch (kind) {
      case BackendKind::navigator:
        if (v.empty() || v == "stain-density") {
          b.navigator = std::make_shared<mock::StainDensityNavigator>();
        } else if (v == "uniform") {
          b.navigator = std::make_shared<mock::UniformNavigator>();
        } else {
          unknown_variant(kind, v);
        }
        break;
      case BackendKind::describer:
        if (!v.empty() && v != "template") unknown_variant(kind, v);
        b.describer = std::make_shared<mock::TemplateDescriber>();
        break;
      case BackendKind::embedder:
        if (!v.empty() && v != "hash") unknown_variant(kind, v);
        b.embedder = std::make_shared<mock::HashEmbedder>(cfg.embedding_dim, cfg.mock_seed);
        break;
      case BackendKind::triage:
        if (v.empty() || v == "saturation") {
          b.triage = std::make_shared<mock::SaturationTriage>(
              std::stod(param(ep, "threshold", "0.005")),
              std::stod(param(ep, "gain", "400")));
        } else if (v == "constant") {
          b.triage = std::make_shared<mock::ConstantTriage>(
              std::stod(param(ep, "score", "1")));
        } else {
          unknown_variant(kind, v);
        }
        break;
      case BackendKind::diagnoser:
        if (v.empty() || v == "keyword") {
          b.diagnoser = std::make_shared<mock::KeywordDiagnoser>();
        } else if (v == "constant") {
          const auto label = class_from_roman(param(ep, "label", "II"));
          if (!label) throw std::invalid_argument("diagnoser: bad constant label");
          b.diagnoser = std::make_shared<mock::ConstantDiagnoser>(option_text(*label));
        } else {
          unknown_variant(kind, v);
        }
        break;
      case BackendKind::rephraser:
        if (!v.empty() && v != "synonym") unknown_variant(kind, v);
        b.rephraser = std::make_shared<mock::SynonymRephraser>();
        break;
    }
  }
  return b;
}

}  // namespace pathfinder
