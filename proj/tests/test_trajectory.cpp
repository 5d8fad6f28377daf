#include <doctest.h>

#include <fstream>
#include <set>

#include "pathfinder/trajectory.hpp"
#include "support.hpp"

using namespace pathfinder;
using testing::RecordingNavigator;

namespace {

class CountingEmbedder final : public EmbedderBackend {
 public:
  explicit CountingEmbedder(std::shared_ptr<const EmbedderBackend> inner) : inner_(std::move(inner)) {}
  int dim() const override { return inner_->dim(); }
  Embedding embed_text(const std::string& t) const override {
    ++text_calls;
    std::lock_guard lock(mu_);
    texts.push_back(t);
    return inner_->embed_text(t);
  }
  Embedding embed_patch(const PatchPixels& p) const override { return inner_->embed_patch(p); }
  mutable std::atomic<int> text_calls{0};
  mutable std::vector<std::string> texts;

 private:
  std::shared_ptr<const EmbedderBackend> inner_;
  mutable std::mutex mu_;
};

// Fails on the n-th call (1-based).
class FailingDescriber final : public DescriberBackend {
 public:
  FailingDescriber(std::shared_ptr<const DescriberBackend> inner, int fail_at)
      : inner_(std::move(inner)), fail_at_(fail_at) {}
  std::string describe(const PatchPixels& p) const override {
    if (++calls_ == fail_at_) throw TransportError("describer unreachable");
    return inner_->describe(p);
  }

 private:
  std::shared_ptr<const DescriberBackend> inner_;
  int fail_at_;
  mutable std::atomic<int> calls_{0};
};

SlideRaster lesion_slide() {
  return synth_slide(1024, 1024, {{96, 96, 832, 832, 0}, {320, 384, 256, 192, 3}}, 12, "lesion");
}

}  // namespace

TEST_SUITE("trajectory") {

TEST_CASE("length 1: one navigator call, one description, one embedding") {
  const SlideRaster s = lesion_slide();
  Backends b = testing::mock_backends(16);
  auto nav = std::make_shared<RecordingNavigator>(b.navigator);
  auto desc = std::make_shared<testing::CountingDescriber>(b.describer);
  auto emb = std::make_shared<CountingEmbedder>(b.embedder);
  b.navigator = nav;
  b.describer = desc;
  b.embedder = emb;
  TrajectoryOptions opt;
  opt.length = 1;
  const Trajectory t = generate_trajectory(s, b, opt, 5);
  CHECK(t.steps.size() == 1);
  CHECK(nav->count() == 1);
  CHECK(desc->calls == 1);
  CHECK(emb->text_calls == 1);
  CHECK(t.steps[0].iteration == 1);
}

TEST_CASE("length 10 is deterministic per seed") {
  const SlideRaster s = lesion_slide();
  const Backends b = testing::mock_backends();
  TrajectoryOptions opt;
  const Trajectory a = generate_trajectory(s, b, opt, 7);
  const Trajectory c = generate_trajectory(s, b, opt, 7);
  CHECK(a == c);
  CHECK(a.steps.size() == 10);
  CHECK(trajectories_to_jsonl({"lesion", {a}}) == trajectories_to_jsonl({"lesion", {c}}));
}

TEST_CASE("single-hot navigator keeps every pick inside the lesion") {
  const SlideRaster s = lesion_slide();
  // Lesion spans x 320..576, y 384..576 of 1024: thumbnail cells rows 6..8, cols 5..8.
  std::vector<Cell> hot;
  for (int i = 6; i < 9; ++i)
    for (int j = 5; j < 9; ++j) hot.push_back({i, j});
  REQUIRE(hot.size() >= 10);
  Backends b = testing::mock_backends(16);
  b.navigator = std::make_shared<testing::CellHotNavigator>(hot, 16);
  const Trajectory t = generate_trajectory(s, b, {}, 3);
  REQUIRE(t.steps.size() == 10);
  const LesionRect r{320, 384, 256, 192, 3};
  for (const auto& step : t.steps) {
    const PatchCoord& c = step.patch;
    const bool inside = c.x >= r.x && c.y >= r.y && c.x + c.size <= r.x + r.width &&
                        c.y + c.size <= r.y + r.height;
    CHECK_MESSAGE(inside, "cell ", step.cell.row, ",", step.cell.col);
    CHECK(step.description.find("invasive") != std::string::npos);
  }
}

TEST_CASE("navigator requests carry prior picks and condition after step 1") {
  const SlideRaster s = lesion_slide();
  Backends b = testing::mock_backends(16);
  auto nav = std::make_shared<RecordingNavigator>(b.navigator, true);
  b.navigator = nav;
  const Trajectory t = generate_trajectory(s, b, {}, 11);
  const auto calls = nav->calls();
  REQUIRE(calls.size() == t.steps.size());
  CellMask prior(16);
  for (std::size_t k = 0; k < calls.size(); ++k) {
    CHECK(calls[k].embedding.has_value() == (k > 0));
    CHECK(calls[k].mask == prior);
    CHECK(calls[k].thumbnail == mask_thumbnail(s.thumbnail, prior));
    prior.set(t.steps[k].cell);
  }
}

TEST_CASE("cells are distinct within a trajectory for many seeds") {
  const SlideRaster s = lesion_slide();
  const Backends b = testing::mock_backends(16);
  TrajectoryOptions opt;
  opt.length = 40;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trajectory t = generate_trajectory(s, b, opt, seed);
    std::set<Cell> cells;
    for (const auto& step : t.steps) CHECK(cells.insert(step.cell).second);
  }
}

TEST_CASE("rephrasing is stored beside the original; the original is embedded") {
  const SlideRaster s = synth_slide(1024, 1024, {}, 1, "blank");
  auto cfg = BackendConfig::all_mock(16);
  cfg.endpoints[BackendKind::rephraser].mode = BackendEndpoint::Mode::mock;
  Backends b = make_backends(cfg);
  auto emb = std::make_shared<CountingEmbedder>(b.embedder);
  b.embedder = emb;
  TrajectoryOptions opt;
  opt.length = 3;
  const Trajectory t = generate_trajectory(s, b, opt, 1);
  for (const auto& step : t.steps) {
    CHECK(step.description == "unremarkable epidermis with pale dermal stroma");
    REQUIRE(step.rephrased.has_value());
    CHECK(*step.rephrased == "epidermis without notable change with pale dermal stroma");
  }
  CHECK(emb->texts == t.descriptions());

  opt.rephrase = false;
  CHECK_FALSE(generate_trajectory(s, b, opt, 1).steps[0].rephrased.has_value());
}

TEST_CASE("backend failure surfaces the completed steps") {
  const SlideRaster s = lesion_slide();
  Backends b = testing::mock_backends(16);
  b.describer = std::make_shared<FailingDescriber>(b.describer, 4);
  try {
    generate_trajectory(s, b, {}, 2);
    FAIL("expected TrajectoryAborted");
  } catch (const TrajectoryAborted& e) {
    CHECK(e.partial().steps.size() == 3);
    CHECK(e.partial().seed == 2);
    CHECK(std::string(e.what()).find("step 4") != std::string::npos);
  }
}

TEST_CASE("length bounds") {
  const SlideRaster s = lesion_slide();
  const Backends b = testing::mock_backends(16);
  TrajectoryOptions opt;
  opt.length = 0;
  CHECK_THROWS_AS(generate_trajectory(s, b, opt, 1), std::invalid_argument);
  opt.length = 257;
  CHECK_THROWS_AS(generate_trajectory(s, b, opt, 1), std::invalid_argument);
  opt.length = 256;
  CHECK(generate_trajectory(s, b, opt, 1).steps.size() == 256);
}

TEST_CASE("exhaustive sampler visits every foreground cell") {
  const SlideRaster s = lesion_slide();
  const Backends b = testing::mock_backends(16);
  TrajectoryOptions opt;
  opt.sampler = SamplerKind::exhaustive;
  const Trajectory t = generate_trajectory(s, b, opt, 1);
  int expected = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      if (region_saturation(s, cell_to_patch({i, j}, s, 16)) >= kBackgroundSaturation) ++expected;
  CHECK(static_cast<int>(t.steps.size()) == expected);
  for (std::size_t k = 1; k < t.steps.size(); ++k) CHECK(t.steps[k - 1].cell < t.steps[k].cell);
}

TEST_CASE("generate_set") {
  const SlideRaster s = lesion_slide();
  const Backends b = testing::mock_backends(16);
  const TrajectorySet five = generate_set(s, 5, b, {}, 100);
  REQUIRE(five.trajectories.size() == 5);
  std::set<std::uint64_t> seeds;
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(five.trajectories[k].steps.size() == 10);
    CHECK(five.trajectories[k].seed == (100 ^ k));
    seeds.insert(five.trajectories[k].seed);
  }
  CHECK(seeds.size() == 5);
  CHECK(generate_set(s, 20, b, {}, 100).trajectories.size() == 20);
  CHECK(generate_set(s, 5, b, {}, 100) == five);
  CHECK(generate_set(s, 5, b, {}, 100, 4) == five);
  CHECK_FALSE(generate_set(s, 5, b, {}, 101) == five);
  CHECK_THROWS_AS(generate_set(s, 0, b, {}, 1), std::invalid_argument);
}

TEST_CASE("JSONL round trip") {
  testing::TempDir dir;
  const SlideRaster s = lesion_slide();
  auto cfg = BackendConfig::all_mock(16);
  cfg.endpoints[BackendKind::rephraser].mode = BackendEndpoint::Mode::mock;
  TrajectoryOptions opt;
  opt.length = 4;
  const TrajectorySet set = generate_set(s, 3, make_backends(cfg), opt, 9);
  write_trajectories(set, dir / "t.jsonl");
  CHECK(read_trajectories(dir / "t.jsonl") == set);

  write_trajectories({"empty", {}}, dir / "e.jsonl");
  CHECK(std::filesystem::file_size(dir / "e.jsonl") == 0);
  CHECK(read_trajectories(dir / "e.jsonl").trajectories.empty());

  std::string text = trajectories_to_jsonl(set);
  const auto second_nl = text.find('\n', text.find('\n') + 1);
  text = text.substr(0, second_nl + 20);  // cut line 3 short
  CHECK_THROWS_WITH_AS(trajectories_from_jsonl(text), doctest::Contains("line 3"), DataError);
}

}  // TEST_SUITE
