#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "pathfinder/backends.hpp"
#include "pathfinder/diagnosis_class.hpp"
#include "pathfinder/mock_backends.hpp"
#include "support.hpp"

using namespace pathfinder;

namespace {

PatchPixels flat_patch(int size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  PatchPixels p{{0, 0, 0, size}, {}};
  for (int i = 0; i < size * size; ++i) p.pixels.insert(p.pixels.end(), {r, g, b});
  return p;
}

// Textbook HSV to RGB, h in degrees.
PatchPixels hsv_patch(int size, double h, double s, double v) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  auto q = [&](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255)); };
  return flat_patch(size, q(r), q(g), q(b));
}

struct BadNavigator final : NavigatorBackend {
  Heatmap h;
  Heatmap navigate(const RgbImage&, const CellMask&, const std::optional<Embedding>&) const override {
    return h;
  }
};

struct FixedText final : DescriberBackend, RephraserBackend, DiagnoserBackend {
  std::string text;
  std::string describe(const PatchPixels&) const override { return text; }
  std::string rephrase(const std::string&) const override { return text; }
  std::string diagnose(const std::string&) const override { return text; }
};

struct FixedVector final : EmbedderBackend {
  Embedding v;
  int d = 3;
  int dim() const override { return d; }
  Embedding embed_text(const std::string&) const override { return v; }
  Embedding embed_patch(const PatchPixels&) const override { return v; }
};

}  // namespace

TEST_SUITE("backends") {

TEST_CASE("stain-density navigator") {
  const mock::StainDensityNavigator nav;
  const RgbImage white = testing::flat_image(32, 32, 255, 255, 255);
  const Heatmap h = nav.navigate(white, CellMask(16), std::nullopt);
  CHECK(h.width == 32);
  CHECK(h.height == 32);
  for (float v : h.values) CHECK(v == 0.0f);

  // Saturation (max-min)/max = 0.5 for (200, 100, 100).
  const RgbImage pink = testing::flat_image(4, 4, 200, 100, 100);
  CHECK(nav.navigate(pink, CellMask(16), std::nullopt).values[0] == doctest::Approx(0.25));
  CHECK(nav.navigate(pink, CellMask(16), Embedding(8, 0.0)).values[0] == doctest::Approx(0.0625));
  CHECK(nav.navigate(testing::flat_image(2, 2, 0, 0, 0), CellMask(16), std::nullopt).values[0] == 0.0f);

  const Heatmap u = mock::UniformNavigator{}.navigate(pink, CellMask(16), std::nullopt);
  for (float v : u.values) CHECK(v == 1.0f);
}

TEST_CASE("template describer") {
  const mock::TemplateDescriber d;
  CHECK(d.describe(flat_patch(16, 128, 128, 128)) == "unremarkable epidermis with pale dermal stroma");
  CHECK(d.describe(flat_patch(16, 255, 255, 255)) == "unremarkable epidermis with pale dermal stroma");
  const std::string invasive = d.describe(hsv_patch(16, 282, 0.66, 0.78));
  CHECK(invasive.find("invasive") != std::string::npos);
  CHECK(invasive.find("advanced") == std::string::npos);
  CHECK(d.describe(hsv_patch(16, 232, 0.76, 0.70)).find("advanced invasive") != std::string::npos);
  CHECK(d.describe(hsv_patch(16, 330, 0.55, 0.86)).find("in situ") != std::string::npos);
  CHECK(d.describe(hsv_patch(16, 30, 0.28, 0.80)).find("junctional nevus") != std::string::npos);
  CHECK(d.describe(hsv_patch(16, 282, 0.66, 0.78)) == invasive);
}

TEST_CASE("hash embedder") {
  const mock::HashEmbedder e(8);
  CHECK(e.dim() == 8);
  const Embedding t = e.embed_text("focal invasive nests");
  CHECK(t.size() == 8);
  double norm = 0;
  for (double x : t) norm += x * x;
  CHECK(norm == doctest::Approx(1.0));
  CHECK(e.embed_text("focal invasive nests") == t);
  CHECK(mock::HashEmbedder(8, 1).embed_text("focal invasive nests") != t);

  const Embedding p = e.embed_patch(flat_patch(8, 255, 0, 0));
  CHECK(p.size() == 8);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == 0.0);
  CHECK(p[mock::HashEmbedder::kStainFeature] == 1.0);
  CHECK(e.embed_patch(flat_patch(8, 128, 128, 128))[mock::HashEmbedder::kStainFeature] == 0.0);
  CHECK_THROWS_AS(mock::HashEmbedder(0), std::invalid_argument);
}

TEST_CASE("hash embedder: 1000 distinct texts, no collisions") {
  const mock::HashEmbedder e(kDefaultEmbeddingDim);
  std::set<Embedding> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(e.embed_text("description number " + std::to_string(i)));
  CHECK(seen.size() == 1000);
}

TEST_CASE("saturation triage") {
  PaddedGrid g;
  g.side = 1;
  g.dim = 4;
  g.values = {0, 0, 0, 0.005};
  CHECK(mock::SaturationTriage{}.score(g) == doctest::Approx(0.5));
  g.values[3] = 0.0;
  CHECK(mock::SaturationTriage{}.score(g) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))));
  g.values[3] = 0.2;
  CHECK(mock::SaturationTriage{}.score(g) > 0.999);
  g.dim = 3;
  g.values = {0, 0, 0};
  CHECK_THROWS_AS(mock::SaturationTriage{}.score(g), std::invalid_argument);
}

TEST_CASE("keyword diagnoser reads only the descriptions") {
  const mock::KeywordDiagnoser d;
  auto prompt = [](std::string bullet) {
    return "Question\n- " + bullet + "\nThe options are:\n\"invasive advanced\"\n";
  };
  CHECK(d.diagnose(prompt("plain stroma")) == option_text(DiagnosisClass::II));
  CHECK(d.diagnose(prompt("Invasive nests")) == option_text(DiagnosisClass::III));
  CHECK(d.diagnose(prompt("advanced invasive melanoma")) == option_text(DiagnosisClass::IV));
}

TEST_CASE("synonym rephraser") {
  const mock::SynonymRephraser r;
  CHECK(r.rephrase("unremarkable epidermis with pale dermal stroma") ==
        "epidermis without notable change with pale dermal stroma");
  CHECK(r.rephrase("focal invasive melanocytic nests in the papillary dermis with dense staining") ==
        "localized invasive melanocytic nests in the superficial dermis with dense stain uptake");
  CHECK(r.rephrase("no table entry") == "no table entry");
}

TEST_CASE("validating wrappers") {
  const RgbImage thumb = testing::flat_image(8, 8, 10, 10, 10);
  BadNavigator nav;
  nav.h = {8, 8, std::vector<float>(64, 0.5f)};
  CHECK(navigator_call(nav, thumb, CellMask(4), std::nullopt, 3).values.size() == 64);
  CHECK_THROWS_AS(navigator_call(nav, thumb, CellMask(4), Embedding(2), 3), std::invalid_argument);
  nav.h = {8, 7, std::vector<float>(56, 0.5f)};
  CHECK_THROWS_AS(navigator_call(nav, thumb, CellMask(4), std::nullopt, 3), MalformedResponse);
  nav.h = {8, 8, std::vector<float>(64, 0.5f)};
  nav.h.values[5] = -1.0f;
  CHECK_THROWS_AS(navigator_call(nav, thumb, CellMask(4), std::nullopt, 3), MalformedResponse);
  nav.h.values[5] = std::nanf("");
  CHECK_THROWS_AS(navigator_call(nav, thumb, CellMask(4), std::nullopt, 3), MalformedResponse);

  FixedText text;
  text.text = " \n";
  CHECK_THROWS_AS(describer_call(text, flat_patch(2, 1, 2, 3)), MalformedResponse);
  CHECK_THROWS_AS(describer_call(text, PatchPixels{}), std::invalid_argument);
  CHECK_THROWS_AS(rephraser_call(text, "x"), MalformedResponse);
  CHECK_THROWS_AS(rephraser_call(text, ""), std::invalid_argument);
  text.text = "ok";
  CHECK(describer_call(text, flat_patch(2, 1, 2, 3)) == "ok");

  FixedVector vec;
  vec.v = {1, 2, 3};
  CHECK(embedder_call(vec, "a") == vec.v);
  CHECK_THROWS_AS(embedder_call(vec, ""), std::invalid_argument);
  vec.v = {1, 2};
  CHECK_THROWS_AS(embedder_call(vec, "a"), MalformedResponse);
  vec.v = {1, 2, INFINITY};
  CHECK_THROWS_AS(embedder_call(vec, flat_patch(2, 0, 0, 0)), MalformedResponse);

  const mock::HashEmbedder real(8);
  CHECK_THROWS_AS(embedder_call(real, std::string()), std::invalid_argument);
}

TEST_CASE("backend config parsing") {
  const BackendConfig cfg = parse_backend_config(R"({
    "embedding_dim": 16,
    "navigator": {"mode": "mock", "variant": "uniform"},
    "diagnoser": {"mode": "remote", "url": "http://127.0.0.1:1", "timeout_s": 0.5, "retries": 0},
    "triage": {"variant": "saturation", "params": {"threshold": 0.2, "gain": "10"}},
    "rephraser": {"mode": "mock"}
  })");
  CHECK(cfg.embedding_dim == 16);
  CHECK(cfg.endpoint(BackendKind::navigator).variant == "uniform");
  CHECK(cfg.endpoint(BackendKind::diagnoser).mode == BackendEndpoint::Mode::remote);
  CHECK(cfg.endpoint(BackendKind::diagnoser).timeout_s == 0.5);
  CHECK(cfg.endpoint(BackendKind::triage).params.at("threshold") == "0.2");
  CHECK(cfg.endpoint(BackendKind::describer).mode == BackendEndpoint::Mode::mock);
  CHECK(cfg.endpoint(BackendKind::rephraser).mode == BackendEndpoint::Mode::mock);

  const BackendConfig back = parse_backend_config(backend_config_to_json(cfg));
  CHECK(backend_config_to_json(back) == backend_config_to_json(cfg));

  const Backends b = make_backends(cfg);
  CHECK(b.rephraser != nullptr);
  CHECK(b.embedder->dim() == 16);
  CHECK(dynamic_cast<const mock::UniformNavigator*>(b.navigator.get()) != nullptr);

  CHECK(make_backends(BackendConfig::all_mock()).rephraser == nullptr);
}

TEST_CASE("backend config errors") {
  CHECK_THROWS_AS(parse_backend_config("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"navigator": {"mode": "remote"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"navigator": {"mode": "mock", "url": "http://x"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"navigator": {"mode": "disabled"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"triage": {"mode": "sometimes"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"triage": {"timeout_s": 0}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_backend_config(R"({"embedding_dim": 0})"), std::invalid_argument);
  CHECK_THROWS_AS(make_backends(parse_backend_config(R"({"navigator": {"variant": "psychic"}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_backend_config("/nonexistent/backends.json"), std::invalid_argument);
  CHECK(backend_kind_from_string("triage") == BackendKind::triage);
  CHECK_THROWS_AS(backend_kind_from_string("oracle"), std::invalid_argument);
}

}  // TEST_SUITE
