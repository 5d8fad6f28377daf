#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "pathfinder/diagnosis.hpp"
#include "pathfinder/synthetic.hpp"

namespace py = pybind11;
using namespace pathfinder;

namespace {

// Results cross the boundary as JSON text; the Python package decodes them.

Backends backends_from(const std::string& config_path) {
  return make_backends(config_path.empty() ? BackendConfig::all_mock()
                                           : load_backend_config(config_path));
}

std::string synth(const std::string& out_dir, int count, std::array<int, 4> mix,
                  std::uint64_t seed, int size) {
  const auto entries = synthesize_dataset(count, mix, seed, out_dir, size);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries) j.push_back({{"slide_dir", e.slide_dir}, {"label", roman(e.label)}});
  return j.dump();
}

std::string triage(const std::string& slide_dir, std::uint64_t seed, double threshold,
                   const std::string& backends) {
  const Backends b = backends_from(backends);
  const SlideRaster slide = load_slide(slide_dir);
  Rng rng(triage_stream_seed(seed));
  const TriageVerdict v =
      run_triage(prepare_triage_input(slide, *b.embedder, rng), *b.triage, threshold);
  return nlohmann::json{{"risky", v.risky}, {"score", v.score}}.dump();
}

std::string trajectories(const std::string& slide_dir, int n, int length, std::uint64_t seed,
                         const std::string& sampler, int workers, const std::string& backends) {
  TrajectoryOptions opt;
  opt.length = length;
  opt.sampler = sampler_kind_from_string(sampler);
  if (opt.sampler == SamplerKind::imitated) {
    throw std::invalid_argument("the imitated sampler needs a viewport log; use the CLI");
  }
  const SlideRaster slide = load_slide(slide_dir);
  return trajectories_to_jsonl(generate_set(slide, n, backends_from(backends), opt, seed, workers));
}

std::string diagnose(const std::string& slide_dir, int n, int length, std::uint64_t seed,
                     double threshold, int workers, const std::string& backends) {
  PipelineConfig pc;
  pc.n = n;
  pc.trajectory.length = length;
  pc.triage_threshold = threshold;
  pc.seed = seed;
  pc.workers = workers;
  return pipeline_result_to_json(run_pipeline(load_slide(slide_dir), backends_from(backends), pc))
      .dump();
}

std::string evaluate_manifest(const std::string& manifest, int runs, int subset, int pool,
                              int length, std::uint64_t seed, const std::string& sampler,
                              double threshold, int workers, const std::string& backends) {
  EvalConfig ec;
  ec.runs = runs;
  ec.subset = subset;
  ec.pool = pool;
  ec.seed = seed;
  ec.workers = workers;
  ec.trajectory.length = length;
  ec.trajectory.sampler = sampler_kind_from_string(sampler);
  ec.triage_threshold = threshold;
  return report_to_json(evaluate(read_manifest(manifest), backends_from(backends), ec)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "pathfinder engine bindings";

  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  auto backend_error = py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  (void)data_error;
  (void)backend_error;

  m.def("grid_dims", [](long long n) {
    const GridDims d = grid_dims(n);
    return py::make_tuple(d.side, d.pad_count);
  }, py::arg("n"));

  m.def("majority_vote", [](const std::vector<std::string>& labels) {
    std::vector<DiagnosisClass> cls;
    for (const auto& l : labels) {
      const auto c = class_from_roman(l);
      if (!c) throw std::invalid_argument("unknown class '" + l + "'");
      cls.push_back(*c);
    }
    return vote_to_json(majority_vote(cls)).dump();
  }, py::arg("labels"));

  m.def("assemble_prompt", &assemble_prompt, py::arg("descriptions"));

  const py::call_guard<py::gil_scoped_release> nogil;
  m.def("synth", &synth, nogil, py::arg("out_dir"), py::arg("count"), py::arg("mix"),
        py::arg("seed"), py::arg("size"));
  m.def("triage", &triage, nogil, py::arg("slide_dir"), py::arg("seed"), py::arg("threshold"),
        py::arg("backends"));
  m.def("trajectories", &trajectories, nogil, py::arg("slide_dir"), py::arg("n"),
        py::arg("length"), py::arg("seed"), py::arg("sampler"), py::arg("workers"),
        py::arg("backends"));
  m.def("diagnose", &diagnose, nogil, py::arg("slide_dir"), py::arg("n"), py::arg("length"),
        py::arg("seed"), py::arg("threshold"), py::arg("workers"), py::arg("backends"));
  m.def("evaluate", &evaluate_manifest, nogil, py::arg("manifest"), py::arg("runs"),
        py::arg("subset"), py::arg("pool"), py::arg("length"), py::arg("seed"),
        py::arg("sampler"), py::arg("threshold"), py::arg("workers"), py::arg("backends"));
}
