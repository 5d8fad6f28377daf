#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pathfinder/common.hpp"
#include "pathfinder/features.hpp"
#include "pathfinder/slide_io.hpp"

namespace pathfinder {

/// Row-major scalar field returned by the navigator. Stored as 32-bit floats
/// because that is what crosses the wire; in-process and remote results are
/// then bit-identical.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

using Embedding = std::vector<double>;

// Backend contracts. Implementations must be safe for concurrent calls from
// several trajectory workers.

class NavigatorBackend {
 public:
  virtual ~NavigatorBackend() = default;
  /// `embedding` is absent on the first iteration of a trajectory.
  virtual Heatmap navigate(const RgbImage& thumbnail, const CellMask& mask,
                           const std::optional<Embedding>& embedding) const = 0;
};

class DescriberBackend {
 public:
  virtual ~DescriberBackend() = default;
  virtual std::string describe(const PatchPixels& patch) const = 0;
};

class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;
  virtual int dim() const = 0;
  virtual Embedding embed_text(const std::string& text) const = 0;
  virtual Embedding embed_patch(const PatchPixels& patch) const = 0;
};

class TriageBackend {
 public:
  virtual ~TriageBackend() = default;
  virtual double score(const PaddedGrid& grid) const = 0;
};

class DiagnoserBackend {
 public:
  virtual ~DiagnoserBackend() = default;
  virtual std::string diagnose(const std::string& prompt) const = 0;
};

class RephraserBackend {
 public:
  virtual ~RephraserBackend() = default;
  virtual std::string rephrase(const std::string& text) const = 0;
};

/// One implementation per agent. `rephraser` may be null.
struct Backends {
  std::shared_ptr<const NavigatorBackend> navigator;
  std::shared_ptr<const DescriberBackend> describer;
  std::shared_ptr<const EmbedderBackend> embedder;
  std::shared_ptr<const TriageBackend> triage;
  std::shared_ptr<const DiagnoserBackend> diagnoser;
  std::shared_ptr<const RephraserBackend> rephraser;
};

// Validating call wrappers. The engine only talks to backends through these,
// so a misbehaving implementation (mock or remote) is caught in one place.

Heatmap navigator_call(const NavigatorBackend& nav, const RgbImage& thumbnail,
                       const CellMask& mask,
                       const std::optional<Embedding>& embedding,
                       int expected_dim);
std::string describer_call(const DescriberBackend& desc,
                           const PatchPixels& patch);
Embedding embedder_call(const EmbedderBackend& emb, const std::string& text);
Embedding embedder_call(const EmbedderBackend& emb, const PatchPixels& patch);
double triage_call(const TriageBackend& triage, const PaddedGrid& grid);
std::string diagnoser_call(const DiagnoserBackend& diag,
                           const std::string& prompt);
std::string rephraser_call(const RephraserBackend& reph,
                           const std::string& text);

// Configuration.

enum class BackendKind { navigator, describer, embedder, triage, diagnoser, rephraser };

inline constexpr BackendKind kAllBackendKinds[] = {
    BackendKind::navigator, BackendKind::describer, BackendKind::embedder,
    BackendKind::triage,    BackendKind::diagnoser, BackendKind::rephraser};

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);
/// Route segment used by the wire protocol, e.g. "navigate".
std::string route_name(BackendKind kind);

struct BackendEndpoint {
  enum class Mode { mock, remote, disabled };
  Mode mode = Mode::mock;
  std::string url;        // required iff mode == remote
  double timeout_s = 30.0;
  int retries = 2;
  std::string variant;    // mock flavour; empty selects the default
  std::map<std::string, std::string> params;
};

struct BackendConfig {
  std::map<BackendKind, BackendEndpoint> endpoints;
  int embedding_dim = kDefaultEmbeddingDim;
  std::uint64_t mock_seed = 0;

  /// All six kinds as in-process mocks; the rephraser disabled.
  static BackendConfig all_mock(int embedding_dim = kDefaultEmbeddingDim);
  const BackendEndpoint& endpoint(BackendKind kind) const;
  void validate() const;
};

BackendConfig parse_backend_config(const std::string& json_text);
BackendConfig load_backend_config(const std::filesystem::path& path);
std::string backend_config_to_json(const BackendConfig& config);

/// Instantiates mocks and remote clients per the config.
Backends make_backends(const BackendConfig& config);

}  // namespace pathfinder
