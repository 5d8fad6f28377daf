#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "pathfinder/diagnosis.hpp"
#include "pathfinder/remote.hpp"
#include "pathfinder/synthetic.hpp"
#include "support.hpp"

using namespace pathfinder;
using namespace std::chrono_literals;

namespace {

BackendConfig mock_config(int dim) {
  BackendConfig cfg = BackendConfig::all_mock(dim);
  cfg.endpoints[BackendKind::rephraser].mode = BackendEndpoint::Mode::mock;
  return cfg;
}

BackendConfig remote_config(const std::string& url, int dim, double timeout_s = 10.0, int retries = 0) {
  BackendConfig cfg = BackendConfig::all_mock(dim);
  for (auto k : kAllBackendKinds) {
    auto& ep = cfg.endpoints[k];
    ep.mode = BackendEndpoint::Mode::remote;
    ep.url = url;
    ep.timeout_s = timeout_s;
    ep.retries = retries;
  }
  return cfg;
}

struct FixtureNavigator final : NavigatorBackend {
  Heatmap h;
  Heatmap navigate(const RgbImage&, const CellMask&, const std::optional<Embedding>&) const override {
    return h;
  }
};

struct Throwing final : DiagnoserBackend {
  std::string diagnose(const std::string&) const override { throw std::runtime_error("model crashed"); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_SUITE("remote") {

TEST_CASE("base64") {
  auto enc = [](std::string s) {
    return wire::base64_encode(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foobar") == "Zm9vYmFy");
  CHECK(wire::base64_decode("Zm9vYg==") == std::vector<std::uint8_t>{'f', 'o', 'o', 'b'});

  Rng rng(1);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    CHECK(wire::base64_decode(wire::base64_encode(bytes.data(), bytes.size())) == bytes);
  }
  CHECK_THROWS_AS(wire::base64_decode("Zm9"), MalformedResponse);
  CHECK_THROWS_AS(wire::base64_decode("Zm9v!A=="), MalformedResponse);
}

TEST_CASE("payload encodings round-trip") {
  Rng rng(2);
  RgbImage img(7, 5);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  CHECK(wire::decode_image(wire::encode_image(img.width, img.height, img.pixels)) == img);

  PatchPixels patch{{1, 30, 40, 4}, std::vector<std::uint8_t>(48)};
  for (auto& p : patch.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const PatchPixels pb = wire::decode_patch(wire::encode_patch(patch));
  CHECK(pb.coord == patch.coord);
  CHECK(pb.pixels == patch.pixels);

  Heatmap h{3, 2, {0.0f, 1.5f, std::numeric_limits<float>::denorm_min(), 1e30f, 0.1f, -0.0f}};
  const Heatmap hb = wire::decode_heatmap(wire::encode_heatmap(h));
  CHECK(hb.width == 3);
  for (std::size_t i = 0; i < h.values.size(); ++i)
    CHECK(std::bit_cast<std::uint32_t>(hb.values[i]) == std::bit_cast<std::uint32_t>(h.values[i]));

  CellMask m(4);
  m.set({1, 2});
  m.set({3, 3});
  CHECK(wire::decode_mask(wire::encode_mask(m)) == m);

  PaddedGrid g;
  g.side = 2;
  g.dim = 2;
  g.pad_count = 1;
  g.values = {0.1, -2.5, 1e-300, 3.0, 0.1, -2.5, 7.0, 0.3};
  CHECK(wire::decode_grid(wire::encode_grid(g)) == g);

  auto bad = wire::encode_image(2, 2, std::vector<std::uint8_t>(12));
  bad["width"] = 3;
  CHECK_THROWS_AS(wire::decode_image(bad), MalformedResponse);
}

TEST_CASE("stub server and remote clients agree with in-process mocks") {
  const int dim = 32;
  const Backends local = make_backends(mock_config(dim));
  StubServer server(local);
  server.start();
  const Backends remote = make_backends(remote_config(server.url(), dim));

  const SyntheticCase c = make_synthetic_case(DiagnosisClass::III, 5);
  const SlideRaster& s = c.slide;

  CellMask mask(16);
  mask.set({3, 4});
  const RgbImage thumb = mask_thumbnail(s.thumbnail, mask);
  const Embedding e = local.embedder->embed_text("focal invasive nests");
  CHECK(remote.navigator->navigate(thumb, mask, std::nullopt) ==
        local.navigator->navigate(thumb, mask, std::nullopt));
  CHECK(remote.navigator->navigate(thumb, mask, e) == local.navigator->navigate(thumb, mask, e));

  const PatchPixels p = extract_patch(s, cell_to_patch({8, 8}, s, 16));
  CHECK(remote.describer->describe(p) == local.describer->describe(p));
  CHECK(remote.embedder->embed_patch(p) == local.embedder->embed_patch(p));
  CHECK(remote.embedder->embed_text("focal invasive nests") == e);
  CHECK(remote.rephraser->rephrase("focal junctional nevus") ==
        local.rephraser->rephrase("focal junctional nevus"));
  const std::string prompt = assemble_prompt({"advanced invasive melanoma"});
  CHECK(remote.diagnoser->diagnose(prompt) == local.diagnoser->diagnose(prompt));

  Rng rng(3);
  TriageInputOptions topt;
  topt.patch_size = 128;
  const PaddedGrid g = prepare_triage_input(s, *local.embedder, rng, topt);
  CHECK(remote.triage->score(g) == local.triage->score(g));

  // Whole pipelines match end to end.
  PipelineConfig cfg;
  cfg.n = 3;
  cfg.trajectory.length = 4;
  cfg.trajectory.rephrase = true;
  cfg.triage = topt;
  const PipelineResult a = run_pipeline(s, local, cfg);
  const PipelineResult b = run_pipeline(s, remote, cfg);
  CHECK(a.label == b.label);
  CHECK(a.verdict.score == b.verdict.score);
  CHECK(*a.trajectories == *b.trajectories);
  CHECK(server.request_count() > 0);
  server.stop();
}

TEST_CASE("fixtures survive the wire unchanged") {
  auto fixture = std::make_shared<FixtureNavigator>();
  fixture->h = {512, 512, std::vector<float>(512 * 512)};
  Rng rng(9);
  for (auto& v : fixture->h.values) v = static_cast<float>(rng.uniform() * 3.7);
  Backends served = testing::mock_backends(16);
  served.navigator = fixture;
  served.triage = std::make_shared<mock::ConstantTriage>(0.73);
  served.diagnoser = std::make_shared<mock::ConstantDiagnoser>(option_text(DiagnosisClass::III));
  StubServer server(served);
  server.start();
  const Backends remote = make_backends(remote_config(server.url(), 16));

  const RgbImage thumb = testing::flat_image(512, 512, 200, 200, 200);
  CHECK(remote.navigator->navigate(thumb, CellMask(16), std::nullopt) == fixture->h);
  CHECK(remote.triage->score(pad_features(FeatureMatrix{16, std::vector<double>(16, 0.0), {}})) == 0.73);
  Trajectory t{"s", 0, {{1, {0, 0}, {}, "anything", std::nullopt}}};
  CHECK(diagnose_trajectory(t, *remote.diagnoser).label == DiagnosisClass::III);
}

TEST_CASE("backend-reported errors are malformed responses, not retried") {
  Backends served = testing::mock_backends(16);
  served.diagnoser = std::make_shared<Throwing>();
  StubServer server(served);
  server.start();
  const Backends remote = make_backends(remote_config(server.url(), 16, 5.0, 3));
  const auto before = server.request_count();
  CHECK_THROWS_WITH_AS(remote.diagnoser->diagnose("x"), doctest::Contains("model crashed"),
                       MalformedResponse);
  CHECK(server.request_count() - before == 1);
  // The rephraser is not served at all.
  CHECK_THROWS_AS(remote.rephraser->rephrase("x"), MalformedResponse);
}

TEST_CASE("timeouts exhaust retries and surface a transport error in bounded time") {
  StubServer server(testing::mock_backends(16));
  server.set_delay(1500ms);
  server.start();
  const double timeout = 0.2;
  const int retries = 2;
  const Backends remote = make_backends(remote_config(server.url(), 16, timeout, retries));
  const auto t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(remote.diagnoser->diagnose("x"), TransportError);
  const double elapsed = seconds_since(t0);
  CHECK(elapsed < timeout * (retries + 1) + 1.0);
  CHECK(elapsed >= timeout * (retries + 1) * 0.9);
  server.stop();
}

TEST_CASE("unreachable backend is a transport error") {
  int port = 0;
  {
    StubServer probe(testing::mock_backends(16));
    port = probe.start();
    probe.stop();
  }
  HttpTransport t("http://127.0.0.1:" + std::to_string(port), 0.5, 1);
  CHECK_THROWS_AS(t.post("triage", {}), TransportError);
  CHECK_THROWS_AS(HttpTransport("http://x", 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(HttpTransport("http://x", 1.0, -1), std::invalid_argument);
}

}  // TEST_SUITE
