#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>

#include "pathfinder/backends.hpp"

namespace pathfinder {

// Wire protocol: HTTP POST /v1/<route> with a JSON body. Responses use the
// envelope {"ok": bool, "result": ..., "error": string|null}.
//
//   navigate  {thumbnail: image, mask: {side, cells: [0|1...]},
//              embedding?: [number...]}            -> heatmap
//   describe  {patch: image}                       -> {text}
//   embed     {text} | {patch: image}              -> {vector: [number...]}
//   triage    {grid: {side, pad_count, dim, data}} -> {score}
//   diagnose  {prompt}                             -> {text}
//   rephrase  {text}                               -> {text}
//
// image   = {width, height, channels: 3, data: base64(raw RGB, row-major)}
// heatmap = {width, height, data: base64(float32 little-endian, row-major)}
// grid.data = base64(float64 little-endian, row-major)
namespace wire {

using json = nlohmann::json;

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(std::string_view text);

json encode_image(int width, int height, const std::vector<std::uint8_t>& rgb);
RgbImage decode_image(const json& j);
json encode_patch(const PatchPixels& patch);
PatchPixels decode_patch(const json& j);
json encode_heatmap(const Heatmap& h);
Heatmap decode_heatmap(const json& j);
json encode_mask(const CellMask& mask);
CellMask decode_mask(const json& j);
json encode_grid(const PaddedGrid& grid);
PaddedGrid decode_grid(const json& j);

json ok_envelope(json result);
json error_envelope(const std::string& message);

}  // namespace wire

/// POSTs JSON with per-attempt timeout and a bounded number of retries.
/// Transport failures (connect, timeout, HTTP 5xx) are retried; an envelope
/// with ok=false is reported as MalformedResponse without retrying.
class HttpTransport {
 public:
  HttpTransport(std::string base_url, double timeout_s, int retries);
  nlohmann::json post(const std::string& route, const nlohmann::json& body) const;
  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  double timeout_s_;
  int retries_;
};

class RemoteNavigator final : public NavigatorBackend {
 public:
  explicit RemoteNavigator(HttpTransport transport) : t_(std::move(transport)) {}
  Heatmap navigate(const RgbImage& thumbnail, const CellMask& mask,
                   const std::optional<Embedding>& embedding) const override;

 private:
  HttpTransport t_;
};

class RemoteDescriber final : public DescriberBackend {
 public:
  explicit RemoteDescriber(HttpTransport transport) : t_(std::move(transport)) {}
  std::string describe(const PatchPixels& patch) const override;

 private:
  HttpTransport t_;
};

class RemoteEmbedder final : public EmbedderBackend {
 public:
  RemoteEmbedder(HttpTransport transport, int dim)
      : t_(std::move(transport)), dim_(dim) {}
  int dim() const override { return dim_; }
  Embedding embed_text(const std::string& text) const override;
  Embedding embed_patch(const PatchPixels& patch) const override;

 private:
  HttpTransport t_;
  int dim_;
};

class RemoteTriage final : public TriageBackend {
 public:
  explicit RemoteTriage(HttpTransport transport) : t_(std::move(transport)) {}
  double score(const PaddedGrid& grid) const override;

 private:
  HttpTransport t_;
};

class RemoteDiagnoser final : public DiagnoserBackend {
 public:
  explicit RemoteDiagnoser(HttpTransport transport) : t_(std::move(transport)) {}
  std::string diagnose(const std::string& prompt) const override;

 private:
  HttpTransport t_;
};

class RemoteRephraser final : public RephraserBackend {
 public:
  explicit RemoteRephraser(HttpTransport transport) : t_(std::move(transport)) {}
  std::string rephrase(const std::string& text) const override;

 private:
  HttpTransport t_;
};

/// Serves a Backends bundle over the wire protocol. Used by
/// `pathfinder serve-mock` and by the client tests.
class StubServer {
 public:
  explicit StubServer(Backends backends);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen_blocking(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::string url() const;

  /// Sleeps before answering every request; for timeout tests.
  void set_delay(std::chrono::milliseconds delay) { delay_ms_ = delay.count(); }
  std::uint64_t request_count() const { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  std::atomic<long long> delay_ms_{0};
  std::atomic<std::uint64_t> requests_{0};
};

/// Answers one decoded request with the given backends; shared by the
/// stub server and the protocol tests.
nlohmann::json serve_request(const Backends& backends, BackendKind kind,
                             const nlohmann::json& body);

}  // namespace pathfinder
