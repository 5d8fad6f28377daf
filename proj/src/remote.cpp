#include "pathfinder/remote.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <httplib.h>

namespace pathfinder {

namespace wire {

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
    if (i + 1 < size) v |= static_cast<std::uint32_t>(data[i + 1]) << 8;
    if (i + 2 < size) v |= data[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < size ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < size ? kAlphabet[v & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw MalformedResponse("base64: bad length");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int d;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        d = 0;
      } else {
        d = decode_char(c);
        if (d < 0 || pad > 0) throw MalformedResponse("base64: invalid character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

namespace {

int dimension(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw MalformedResponse(std::string("wire: missing integer field '") + key + "'");
  }
  const int v = j.at(key).get<int>();
  if (v < 1) throw MalformedResponse(std::string("wire: non-positive ") + key);
  return v;
}

std::string data_field(const json& j) {
  if (!j.contains("data") || !j.at("data").is_string()) {
    throw MalformedResponse("wire: missing data field");
  }
  return j.at("data").get<std::string>();
}

}  // namespace

json encode_image(int width, int height, const std::vector<std::uint8_t>& rgb) {
  return {{"width", width},
          {"height", height},
          {"channels", 3},
          {"data", base64_encode(rgb.data(), rgb.size())}};
}

RgbImage decode_image(const json& j) {
  const int w = dimension(j, "width");
  const int h = dimension(j, "height");
  if (j.value("channels", 3) != 3) throw MalformedResponse("wire: image must be RGB");
  RgbImage img(w, h);
  auto bytes = base64_decode(data_field(j));
  if (bytes.size() != img.pixels.size()) {
    throw MalformedResponse("wire: image payload size mismatch");
  }
  img.pixels = std::move(bytes);
  return img;
}

json encode_patch(const PatchPixels& patch) {
  json j = encode_image(patch.coord.size, patch.coord.size, patch.pixels);
  j["coord"] = {{"level", patch.coord.level},
                {"x", patch.coord.x},
                {"y", patch.coord.y},
                {"size", patch.coord.size}};
  return j;
}

PatchPixels decode_patch(const json& j) {
  RgbImage img = decode_image(j);
  if (img.width != img.height) throw MalformedResponse("wire: patch must be square");
  PatchPixels p;
  p.coord.size = img.width;
  if (j.contains("coord")) {
    const json& c = j.at("coord");
    p.coord.level = c.value("level", 0);
    p.coord.x = c.value("x", 0);
    p.coord.y = c.value("y", 0);
  }
  p.pixels = std::move(img.pixels);
  return p;
}

json encode_heatmap(const Heatmap& h) {
  std::vector<std::uint8_t> bytes(h.values.size() * 4);
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(h.values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return {{"width", h.width},
          {"height", h.height},
          {"data", base64_encode(bytes.data(), bytes.size())}};
}

Heatmap decode_heatmap(const json& j) {
  Heatmap h;
  h.width = dimension(j, "width");
  h.height = dimension(j, "height");
  const auto bytes = base64_decode(data_field(j));
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() != n * 4) throw MalformedResponse("wire: heatmap shape mismatch");
  h.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    h.values[i] = std::bit_cast<float>(bits);
  }
  return h;
}

json encode_mask(const CellMask& mask) {
  json cells = json::array();
  for (auto f : mask.flags()) cells.push_back(f ? 1 : 0);
  return {{"side", mask.side()}, {"cells", cells}};
}

CellMask decode_mask(const json& j) {
  const int side = dimension(j, "side");
  if (!j.contains("cells") || !j.at("cells").is_array()) {
    throw MalformedResponse("wire: mask cells missing");
  }
  std::vector<std::uint8_t> flags;
  for (const auto& v : j.at("cells")) flags.push_back(v.get<int>() ? 1 : 0);
  if (flags.size() != static_cast<std::size_t>(side) * side) {
    throw MalformedResponse("wire: mask size mismatch");
  }
  return CellMask::from_flags(side, std::move(flags));
}

json encode_grid(const PaddedGrid& g) {
  std::vector<std::uint8_t> bytes(g.values.size() * 8);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(g.values[i]);
    for (int b = 0; b < 8; ++b) bytes[8 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return {{"side", g.side},
          {"pad_count", g.pad_count},
          {"dim", g.dim},
          {"data", base64_encode(bytes.data(), bytes.size())}};
}

PaddedGrid decode_grid(const json& j) {
  PaddedGrid g;
  g.side = dimension(j, "side");
  g.dim = dimension(j, "dim");
  g.pad_count = j.value("pad_count", 0);
  const auto bytes = base64_decode(data_field(j));
  const std::size_t n = g.rows() * g.dim;
  if (bytes.size() != n * 8) throw MalformedResponse("wire: grid size mismatch");
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
    g.values[i] = std::bit_cast<double>(bits);
  }
  return g;
}

json ok_envelope(json result) {
  return {{"ok", true}, {"result", std::move(result)}, {"error", nullptr}};
}

json error_envelope(const std::string& message) {
  return {{"ok", false}, {"result", nullptr}, {"error", message}};
}

}  // namespace wire

using json = nlohmann::json;

HttpTransport::HttpTransport(std::string base_url, double timeout_s, int retries)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s), retries_(retries) {
  if (!(timeout_s_ > 0)) throw std::invalid_argument("timeout must be positive");
  if (retries_ < 0) throw std::invalid_argument("retries must be >= 0");
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

json HttpTransport::post(const std::string& route, const json& body) const {
  const std::string path = "/v1/" + route;
  const std::string payload = body.dump();
  const auto timeout = std::chrono::microseconds(
      static_cast<long long>(timeout_s_ * 1e6));
  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    httplib::Client cli(base_url_);
    if (!cli.is_valid()) {
      throw TransportError("invalid backend url '" + base_url_ + "'");
    }
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json envelope;
    try {
      envelope = json::parse(res->body);
    } catch (const json::exception&) {
      throw MalformedResponse(route + ": response is not JSON (HTTP " +
                              std::to_string(res->status) + ")");
    }
    if (!envelope.is_object() || !envelope.value("ok", false)) {
      std::string msg = "HTTP " + std::to_string(res->status);
      if (envelope.is_object() && envelope.contains("error") &&
          envelope.at("error").is_string()) {
        msg = envelope.at("error").get<std::string>();
      }
      throw MalformedResponse(route + ": backend reported error: " + msg);
    }
    if (!envelope.contains("result")) {
      throw MalformedResponse(route + ": envelope without result");
    }
    return envelope.at("result");
  }
  throw TransportError(route + " at " + base_url_ + " failed after " +
                       std::to_string(retries_ + 1) + " attempts: " + last_error);
}

namespace {

std::string text_field(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
    throw MalformedResponse(std::string(what) + ": result lacks text");
  }
  return j.at("text").get<std::string>();
}

Embedding vector_field(const json& j) {
  if (!j.is_object() || !j.contains("vector") || !j.at("vector").is_array()) {
    throw MalformedResponse("embed: result lacks vector");
  }
  Embedding v;
  for (const auto& x : j.at("vector")) {
    if (!x.is_number()) throw MalformedResponse("embed: non-numeric component");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

Heatmap RemoteNavigator::navigate(const RgbImage& thumbnail, const CellMask& mask,
                                  const std::optional<Embedding>& embedding) const {
  json body = {{"thumbnail", wire::encode_image(thumbnail.width, thumbnail.height,
                                                thumbnail.pixels)},
               {"mask", wire::encode_mask(mask)}};
  if (embedding) body["embedding"] = *embedding;
  return wire::decode_heatmap(t_.post("navigate", body));
}

std::string RemoteDescriber::describe(const PatchPixels& patch) const {
  return text_field(t_.post("describe", {{"patch", wire::encode_patch(patch)}}),
                    "describe");
}

Embedding RemoteEmbedder::embed_text(const std::string& text) const {
  return vector_field(t_.post("embed", {{"text", text}}));
}

Embedding RemoteEmbedder::embed_patch(const PatchPixels& patch) const {
  return vector_field(t_.post("embed", {{"patch", wire::encode_patch(patch)}}));
}

double RemoteTriage::score(const PaddedGrid& grid) const {
  const json r = t_.post("triage", {{"grid", wire::encode_grid(grid)}});
  if (!r.is_object() || !r.contains("score") || !r.at("score").is_number()) {
    throw MalformedResponse("triage: result lacks score");
  }
  return r.at("score").get<double>();
}

std::string RemoteDiagnoser::diagnose(const std::string& prompt) const {
  return text_field(t_.post("diagnose", {{"prompt", prompt}}), "diagnose");
}

std::string RemoteRephraser::rephrase(const std::string& text) const {
  return text_field(t_.post("rephrase", {{"text", text}}), "rephrase");
}

json serve_request(const Backends& b, BackendKind kind, const json& body) {
  auto missing = [&]() {
    return std::runtime_error(to_string(kind) + " backend not configured");
  };
  switch (kind) {
    case BackendKind::navigator: {
      if (!b.navigator) throw missing();
      const RgbImage thumb = wire::decode_image(body.at("thumbnail"));
      const CellMask mask = wire::decode_mask(body.at("mask"));
      std::optional<Embedding> emb;
      if (body.contains("embedding") && !body.at("embedding").is_null()) {
        emb = body.at("embedding").get<Embedding>();
      }
      return wire::encode_heatmap(b.navigator->navigate(thumb, mask, emb));
    }
    case BackendKind::describer:
      if (!b.describer) throw missing();
      return {{"text", b.describer->describe(wire::decode_patch(body.at("patch")))}};
    case BackendKind::embedder: {
      if (!b.embedder) throw missing();
      Embedding v = body.contains("text")
                        ? b.embedder->embed_text(body.at("text").get<std::string>())
                        : b.embedder->embed_patch(wire::decode_patch(body.at("patch")));
      return {{"vector", v}};
    }
    case BackendKind::triage:
      if (!b.triage) throw missing();
      return {{"score", b.triage->score(wire::decode_grid(body.at("grid")))}};
    case BackendKind::diagnoser:
      if (!b.diagnoser) throw missing();
      return {{"text", b.diagnoser->diagnose(body.at("prompt").get<std::string>())}};
    case BackendKind::rephraser:
      if (!b.rephraser) throw missing();
      return {{"text", b.rephraser->rephrase(body.at("text").get<std::string>())}};
  }
  throw missing();
}

struct StubServer::Impl {
  Backends backends;
  httplib::Server server;
};

StubServer::StubServer(Backends backends) : impl_(std::make_unique<Impl>()) {
  impl_->backends = std::move(backends);
  for (auto kind : kAllBackendKinds) {
    impl_->server.Post("/v1/" + route_name(kind),
                       [this, kind](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (const auto d = delay_ms_.load(); d > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(d));
      }
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        res.status = 400;
        res.set_content(wire::error_envelope(std::string("bad JSON: ") + e.what()).dump(),
                        "application/json");
        return;
      }
      json reply;
      try {
        reply = wire::ok_envelope(serve_request(impl_->backends, kind, body));
      } catch (const std::exception& e) {
        reply = wire::error_envelope(e.what());
      }
      res.set_content(reply.dump(), "application/json");
    });
  }
}

StubServer::~StubServer() { stop(); }

int StubServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void StubServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StubServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace pathfinder
