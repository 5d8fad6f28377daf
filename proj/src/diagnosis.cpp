#include "pathfinder/diagnosis.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "pathfinder/parallel.hpp"

namespace pathfinder {

using json = nlohmann::json;

std::string assemble_prompt(const std::vector<std::string>& descriptions) {
  if (descriptions.empty()) throw std::invalid_argument("no descriptions to diagnose");
  std::string p =
      "Answer the following question related to skin cancer. Only use one of the "
      "four options given at the end.\n"
      "The image descriptions below are extracted from different patches from the "
      "same whole slide image (WSI), please tell me which class the image belongs "
      "to:\n";
  for (const auto& d : descriptions) {
    p += "- ";
    for (char c : d) p.push_back(c == '\n' || c == '\r' ? ' ' : c);
    p += '\n';
  }
  p += "The options are:\n";
  for (auto c : kAllClasses) {
    p += '"';
    p += option_text(c);
    p += "\"\n";
  }
  p += "Only output the complete text of the option you choose. Don't add any more words.";
  return p;
}

Prediction diagnose_trajectory(const Trajectory& traj, const DiagnoserBackend& backend) {
  const std::string answer = diagnoser_call(backend, assemble_prompt(traj.descriptions()));
  const auto label = class_from_option_text(answer);
  if (!label || *label == DiagnosisClass::I) {
    throw UnmappableResponse("diagnoser answer is not a post-triage option: '" +
                             answer.substr(0, 120) + "'");
  }
  return {traj.seed, *label};
}

VoteResult majority_vote(const std::vector<DiagnosisClass>& labels) {
  if (labels.empty()) throw std::invalid_argument("majority vote over no predictions");
  VoteResult v;
  for (auto c : labels) ++v.tally[index_of(c)];
  const int best = *std::max_element(v.tally.begin(), v.tally.end());
  int tied = 0;
  for (auto c : kAllClasses) {
    if (v.tally[index_of(c)] == best) {
      ++tied;
      v.label = c;  // ascending severity: the last hit is the most severe
    }
  }
  v.tie_broken = tied > 1;
  return v;
}

VoteResult majority_vote(const std::vector<Prediction>& preds) {
  std::vector<DiagnosisClass> labels;
  labels.reserve(preds.size());
  for (const auto& p : preds) labels.push_back(p.label);
  return majority_vote(labels);
}

std::uint64_t triage_stream_seed(std::uint64_t seed) {
  return derive_seed(seed, 0x7452494147450000ULL);  // "TRIAGE"
}

PipelineResult run_pipeline(const SlideRaster& slide, const Backends& b,
                            const PipelineConfig& cfg) {
  if (!b.embedder || !b.triage) throw std::invalid_argument("triage backends required");
  PipelineResult result;
  Rng triage_rng(triage_stream_seed(cfg.seed));
  const PaddedGrid grid = prepare_triage_input(slide, *b.embedder, triage_rng, cfg.triage);
  result.verdict = run_triage(grid, *b.triage, cfg.triage_threshold);
  if (!result.verdict.risky) {
    result.label = DiagnosisClass::I;
    return result;
  }
  if (!b.diagnoser) throw std::invalid_argument("diagnoser backend required");
  try {
    result.trajectories = generate_set(slide, cfg.n, b, cfg.trajectory, cfg.seed, cfg.workers);
    for (const auto& t : result.trajectories->trajectories) {
      result.predictions.push_back(diagnose_trajectory(t, *b.diagnoser));
    }
  } catch (const TrajectoryAborted& e) {
    throw PipelineAborted(e.what(), result);
  } catch (const BackendError& e) {
    throw PipelineAborted(e.what(), result);
  }
  result.vote = majority_vote(result.predictions);
  result.label = result.vote->label;
  return result;
}

json vote_to_json(const VoteResult& v) {
  json tally = json::object();
  for (auto c : kAllClasses) {
    if (v.tally[index_of(c)] > 0) tally[std::string(roman(c))] = v.tally[index_of(c)];
  }
  return {{"label", roman(v.label)}, {"tally", tally}, {"tie_broken", v.tie_broken}};
}

json pipeline_result_to_json(const PipelineResult& r) {
  json j = {{"label", roman(r.label)},
            {"triage", {{"risky", r.verdict.risky}, {"score", r.verdict.score}}}};
  if (r.vote) {
    const json v = vote_to_json(*r.vote);
    j["tally"] = v["tally"];
    j["tie_broken"] = v["tie_broken"];
  } else {
    j["tally"] = json::object();
    j["tie_broken"] = false;
  }
  json preds = json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"trajectory_seed", p.trajectory_seed}, {"label", roman(p.label)}});
  }
  j["predictions"] = preds;
  return j;
}

namespace {

DiagnosisClass parse_label(const json& v) {
  if (v.is_number_integer()) {
    const int k = v.get<int>();
    if (k >= 1 && k <= 4) return static_cast<DiagnosisClass>(k);
  } else if (v.is_string()) {
    if (auto c = class_from_roman(v.get<std::string>())) return *c;
  }
  throw DataError("invalid label " + v.dump());
}

}  // namespace

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw DataError("manifest must be a JSON list");
  std::vector<DatasetEntry> out;
  const auto base = path.parent_path();
  for (const auto& e : j) {
    try {
      std::filesystem::path dir = e.at("slide_dir").get<std::string>();
      if (dir.is_relative()) dir = base / dir;
      out.push_back({dir.string(), parse_label(e.at("label")), nullptr});
    } catch (const json::exception& ex) {
      throw DataError("manifest entry " + e.dump() + ": " + ex.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<DatasetEntry>& entries) {
  json j = json::array();
  for (const auto& e : entries) {
    j.push_back({{"slide_dir", e.slide_dir}, {"label", roman(e.label)}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

EvalReport evaluate(const std::vector<DatasetEntry>& dataset, const Backends& b,
                    const EvalConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (cfg.subset < 1) throw std::invalid_argument("subset must be >= 1");
  if (cfg.pool < cfg.subset) {
    throw std::invalid_argument("pool (" + std::to_string(cfg.pool) +
                                ") smaller than subset (" + std::to_string(cfg.subset) + ")");
  }
  EvalReport rep;
  rep.config = cfg;
  rep.slides.resize(dataset.size());

  parallel_for(dataset.size(), cfg.workers, [&](std::size_t s) {
    const DatasetEntry& entry = dataset[s];
    std::shared_ptr<const SlideRaster> slide = entry.slide;
    if (!slide) slide = std::make_shared<const SlideRaster>(load_slide(entry.slide_dir));

    PipelineConfig pc;
    pc.n = cfg.pool;
    pc.trajectory = cfg.trajectory;
    pc.triage = cfg.triage;
    pc.triage_threshold = cfg.triage_threshold;
    pc.seed = derive_seed(cfg.seed, s);
    const PipelineResult r = run_pipeline(*slide, b, pc);

    SlideOutcome& out = rep.slides[s];
    out.slide_id = slide->slide_id;
    out.slide_dir = entry.slide_dir;
    out.truth = entry.label;
    out.verdict = r.verdict;
    for (const auto& p : r.predictions) out.pool.push_back(p.label);

    for (int run = 0; run < cfg.runs; ++run) {
      if (!r.verdict.risky) {
        out.run_labels.push_back(DiagnosisClass::I);
        out.run_tie_broken.push_back(false);
        continue;
      }
      // Partial Fisher-Yates: the first `subset` slots are the draw.
      Rng rng(derive_seed(derive_seed(cfg.seed ^ 0x52554E53ULL, static_cast<std::uint64_t>(run)), s));
      std::vector<std::size_t> idx(out.pool.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::vector<DiagnosisClass> chosen;
      for (int k = 0; k < cfg.subset; ++k) {
        const auto pick = k + rng.below(idx.size() - k);
        std::swap(idx[k], idx[pick]);
        chosen.push_back(out.pool[idx[k]]);
      }
      const VoteResult v = majority_vote(chosen);
      out.run_labels.push_back(v.label);
      out.run_tie_broken.push_back(v.tie_broken);
    }
  });

  long long correct_total = 0, decisions = 0;
  for (int run = 0; run < cfg.runs; ++run) {
    long long correct = 0;
    for (const auto& o : rep.slides) {
      const auto pred = o.run_labels[run];
      ++rep.confusion[index_of(o.truth)][index_of(pred)];
      if (pred == o.truth) ++correct;
    }
    correct_total += correct;
    decisions += static_cast<long long>(rep.slides.size());
    rep.run_accuracy.push_back(
        rep.slides.empty() ? 0.0
                           : static_cast<double>(correct) / static_cast<double>(rep.slides.size()));
  }
  double sum = 0;
  for (double a : rep.run_accuracy) sum += a;
  rep.mean_accuracy = sum / cfg.runs;
  double ss = 0;
  for (double a : rep.run_accuracy) ss += (a - rep.mean_accuracy) * (a - rep.mean_accuracy);
  rep.std_accuracy = std::sqrt(ss / cfg.runs);

  // Micro averages from the pooled confusion matrix. TP is the trace; every
  // off-diagonal count is one FP (for its predicted class) and one FN (for
  // its true class).
  long long tp = 0, fp = 0, fn = 0;
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      const auto n = rep.confusion[t][p];
      if (t == p) {
        tp += n;
      } else {
        fp += n;
        fn += n;
      }
    }
  }
  if (decisions > 0) {
    rep.accuracy = static_cast<double>(correct_total) / static_cast<double>(decisions);
    rep.micro_precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    rep.micro_recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    rep.micro_f1 = static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return rep;
}

json report_to_json(const EvalReport& r) {
  json slides = json::array();
  for (const auto& o : r.slides) {
    json pool = json::array(), runs = json::array();
    for (auto c : o.pool) pool.push_back(roman(c));
    for (auto c : o.run_labels) runs.push_back(roman(c));
    slides.push_back({{"slide_id", o.slide_id},
                      {"slide_dir", o.slide_dir},
                      {"label", roman(o.truth)},
                      {"triage_score", o.verdict.score},
                      {"risky", o.verdict.risky},
                      {"pool_predictions", pool},
                      {"run_predictions", runs},
                      {"run_tie_broken", o.run_tie_broken}});
  }
  json confusion = json::array();
  for (const auto& row : r.confusion) confusion.push_back(row);
  return {{"config",
           {{"runs", r.config.runs},
            {"subset", r.config.subset},
            {"pool", r.config.pool},
            {"seed", r.config.seed},
            {"length", r.config.trajectory.length},
            {"sampler", to_string(r.config.trajectory.sampler)},
            {"grid_side", r.config.trajectory.sampler_options.grid_side},
            {"triage_threshold", r.config.triage_threshold}}},
          {"run_accuracy", r.run_accuracy},
          {"mean_accuracy", r.mean_accuracy},
          {"std_accuracy", r.std_accuracy},
          {"accuracy", r.accuracy},
          {"micro_precision", r.micro_precision},
          {"micro_recall", r.micro_recall},
          {"micro_f1", r.micro_f1},
          {"confusion", confusion},
          {"confusion_axes", "rows = truth I..IV, columns = predicted I..IV"},
          {"note", "triage-negative slides are counted as class I predictions"},
          {"slides", slides}};
}

}  // namespace pathfinder
