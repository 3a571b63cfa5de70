// Acceptance suite: one PASS/FAIL line per criterion.
//
//   seqformer_acceptance [--report FILE] [--only NAME]...
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace seqformer;
namespace sft = seqformer::test;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void require_ok(const CliResult& r, const std::string& what) {
  if (r.code != 0) throw std::runtime_error(what + " failed: " + r.err);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("seqformer_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::map<EventClass, std::size_t> class_counts(std::span<const GlucoseWindow> ws) {
  std::map<EventClass, std::size_t> c{{EventClass::Hypo, 0}, {EventClass::Normal, 0}, {EventClass::Hyper, 0}};
  for (const auto& w : ws) ++c[w.event_label];
  return c;
}

// --- instant structural checks ---------------------------------------------------------

Outcome param_budget() {
  const std::size_t n = SeqFormer(ModelConfig{}).parameter_count();
  return {n >= 105000 && n <= 140000, fmt("params %zu, want [105000, 140000]", n)};
}

nlohmann::json default_footprint_via_cli() {
  const fs::path dir = scratch_dir("footprint");
  save_weights(dir / "default.sqt", SeqFormer::initialized(ModelConfig{}, 1));
  const CliResult r = invoke({"footprint", "--model", (dir / "default.sqt").string()});
  require_ok(r, "footprint");
  fs::remove_all(dir);
  return nlohmann::json::parse(r.out);
}

Outcome flash_footprint() {
  const nlohmann::json j = default_footprint_via_cli();
  const double mib = j.at("flash_mib").get<double>();
  return {mib >= 0.44 && mib <= 0.56,
          fmt("flash %.4f MiB (%llu bytes), want [0.44, 0.56]", mib,
              static_cast<unsigned long long>(j.at("flash_bytes").get<std::uint64_t>()))};
}

Outcome ram_ratio() {
  const nlohmann::json j = default_footprint_via_cli();
  const auto& ram = j.at("ram");
  const double full30 = ram.at(0).at("ram_full_window_bytes").get<double>();
  const double full60 = ram.at(1).at("ram_full_window_bytes").get<double>();
  const double ratio = full60 / full30;
  bool streaming_below = true;
  for (const auto& e : ram)
    streaming_below &= e.at("ram_streaming_bytes").get<double>() < e.at("ram_full_window_bytes").get<double>();

  bool independent = true;
  for (int forecast_len : {6, 12}) {
    ModelConfig base;
    const std::uint64_t ref = ram_streaming_bytes(base, forecast_len);
    for (int t : {1, 24, 48, 288}) {
      ModelConfig c;
      c.observed_len = t;
      independent &= ram_streaming_bytes(c, forecast_len) == ref;
    }
  }
  return {ratio >= 1.7 && ratio <= 2.3 && streaming_below && independent,
          fmt("full PH60/PH30 %.3f (%.0f / %.0f bytes), streaming < full %s, streaming independent of T %s",
              ratio, full60, full30, streaming_below ? "yes" : "no", independent ? "yes" : "no")};
}

Outcome gradient_check() {
  const EventWeights weights{2.85, 0.25, 1.60};
  double worst = 0.0;
  std::string worst_where;
  std::size_t floored = 0, checked = 0;
  for (int features : {1, 3}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ModelConfig c;
      c.embed_dim = 8;
      c.num_heads = 2;
      c.observed_len = 4;
      c.forecast_len = 2;
      c.feature_count = features;
      c.mlp_hidden = 8;
      c.regression_hidden = 4;
      SeqFormer m(c);
      auto w = sft::random_windows(3, 4, 2, features, 100 + seed);
      sft::condition_for_gradcheck(m, w, 0.5, seed % 2 == 0 ? 70.0 : 180.0, 3.0, 200 + seed);
      for (Mode mode : {Mode::Eval, Mode::Train}) {
        const auto r = sft::check_model_gradients(m, w, weights, mode);
        checked += r.checked;
        floored += r.below_floor;
        if (r.checked != m.parameter_count()) return {false, "not every parameter was checked"};
        if (r.max_rel_error > worst) {
          worst = r.max_rel_error;
          worst_where = fmt("F=%d seed %llu %s %s", features, static_cast<unsigned long long>(seed),
                            mode == Mode::Eval ? "eval" : "train", r.worst_tensor.c_str());
        }
      }
    }
  }
  return {worst < 1e-4, fmt("max rel error %.2e at %s, %zu entries checked (%zu at the floor), want < 1e-4",
                            worst, worst_where.c_str(), checked, floored)};
}

Outcome overfit() {
  const auto subjects = synth_generate({1, 3, 7});
  const PreparedData data = prepare_dataset(subjects, {24, 6, 1});
  if (data.parts.train.size() < 32 * 5) return {false, "not enough synthetic windows"};
  std::vector<GlucoseWindow> w;
  for (std::size_t i = 0; i < 32; ++i) w.push_back(data.parts.train[i * 5]);

  const EventWeights unit = EventWeights::unit();
  const SeqFormer init = SeqFormer::initialized(ModelConfig{}, 1);
  const double before = evaluate_loss(init, w, unit);
  TrainOptions opts;  // Adam 1e-4, plateau scheduler, early stop, up to 2000 epochs
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train_loop(init, w, w, unit, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double after = evaluate_loss(r.model, w, unit);
  const double ratio = before / after;
  return {ratio >= 100.0, fmt("loss %.1f -> %.2f (%.0fx) in %zu epochs, %.0f s, want >= 100x", before, after,
                              ratio, r.history.size(), secs)};
}

// --- synthetic training runs shared by the skill and balanced-loss criteria ------------

constexpr int kSkillSubjects = 4;
constexpr int kSkillDays = 8;  // 32 subject-days, of which 64% (about 20) land in train
constexpr int kSkillEpochs = 40;
constexpr double kSkillLearningRate = 1e-3;

struct SkillRun {
  double model_rmse = 0.0;
  double persistence_rmse = 0.0;
  std::optional<double> hypo_sen;
};

struct SeedRuns {
  SkillRun unbalanced;
  SkillRun balanced;
};

SkillRun train_and_score(const PreparedData& data, const EventWeights& weights, std::uint64_t seed) {
  TrainOptions opts;
  opts.max_epochs = kSkillEpochs;
  opts.learning_rate = kSkillLearningRate;
  opts.seed = seed;
  const TrainResult r = train_loop(ModelConfig{}, data.parts.train, data.parts.val, weights, opts);
  const auto& test = data.parts.test;
  const Matrix pred = r.model.predict_mgdl(test);
  Matrix last(pred.rows(), pred.cols());
  const Index t_last = test.front().observed_features.rows() - 1;
  for (Index i = 0; i < pred.rows(); ++i)
    last.row(i).setConstant(denormalize_glucose(test[static_cast<std::size_t>(i)].observed_features(t_last, 0)));
  const MetricsReport m = evaluate_forecasts(test, pred, r.model.parameter_count());
  const MetricsReport p = evaluate_forecasts(test, last, 0);
  return {m.rmse_mgdl, p.rmse_mgdl, m.hypo_sen_pct};
}

const std::vector<SeedRuns>& seed_runs() {
  static const std::vector<SeedRuns> runs = [] {
    std::vector<SeedRuns> out;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto subjects = synth_generate({kSkillSubjects, kSkillDays, seed});
      const PreparedData data = prepare_dataset(subjects, {24, 6, 1});
      SeedRuns s;
      s.unbalanced = train_and_score(data, EventWeights::unit(), seed);
      s.balanced = train_and_score(data, training_event_weights(data.parts.train, data.real_train_count), seed);
      std::fprintf(stderr, "  seed %llu: unbalanced rmse %.2f hypo %.1f | balanced rmse %.2f hypo %.1f | last value %.2f\n",
                   static_cast<unsigned long long>(seed), s.unbalanced.model_rmse,
                   s.unbalanced.hypo_sen.value_or(-1), s.balanced.model_rmse, s.balanced.hypo_sen.value_or(-1),
                   s.unbalanced.persistence_rmse);
      out.push_back(s);
    }
    return out;
  }();
  return runs;
}

Outcome forecast_skill() {
  bool all = true;
  std::string detail;
  for (std::size_t i = 0; i < seed_runs().size(); ++i) {
    const SkillRun& r = seed_runs()[i].unbalanced;
    all &= r.model_rmse < r.persistence_rmse;
    detail += fmt("%sseed %zu %.2f vs %.2f", i ? ", " : "", i, r.model_rmse, r.persistence_rmse);
  }
  return {all, "PH30 RMSE model vs last value: " + detail};
}

Outcome balanced_effect() {
  int wins = 0;
  std::string detail;
  for (std::size_t i = 0; i < seed_runs().size(); ++i) {
    const SeedRuns& s = seed_runs()[i];
    const double bal = s.balanced.hypo_sen.value_or(0.0);
    const double unbal = s.unbalanced.hypo_sen.value_or(0.0);
    wins += bal > unbal ? 1 : 0;
    detail += fmt("%sseed %zu %.1f vs %.1f", i ? ", " : "", i, bal, unbal);
  }
  return {wins >= 2, fmt("Hypo Sen balanced vs unbalanced: %s; balanced higher in %d of 3", detail.c_str(), wins)};
}

// --- metrics ---------------------------------------------------------------------------

Outcome clarke_oracle() {
  std::size_t pairs = 0, mismatches = 0;
  std::vector<double> refs;
  for (int r = 40; r <= 400; r += 5) {
    refs.push_back(r);
    for (int p = 40; p <= 400; p += 5) {
      ++pairs;
      if (to_char(clarke_zone(r, p)) != sft::clarke_reference(r, p)) ++mismatches;
    }
  }
  const auto ega = ega_percentages(refs, refs);
  const bool perfect = ega[0] == 100.0 && ega[1] == 0.0 && ega[2] == 0.0 && ega[3] == 0.0 && ega[4] == 0.0;
  return {mismatches == 0 && perfect,
          fmt("%zu grid pairs, %zu disagreements; perfect EGA %.0f/%.0f/%.0f/%.0f/%.0f", pairs, mismatches, ega[0],
              ega[1], ega[2], ega[3], ega[4])};
}

Outcome event_weights() {
  std::vector<double> targets;
  targets.insert(targets.end(), 50, 60.0);
  targets.insert(targets.end(), 750, 120.0);
  targets.insert(targets.end(), 200, 250.0);
  const EventWeights w = compute_event_weights(targets);
  const double err = std::max({std::abs(w.hypo - 2.85), std::abs(w.normal - 0.25), std::abs(w.hyper - 1.60)});
  return {err <= 1e-12, fmt("(%.15g, %.15g, %.15g), max error %.1e", w.hypo, w.normal, w.hyper, err)};
}

Outcome ranking() {
  const auto published = sft::ohio_table_rows();
  std::vector<RankingRow> rows;
  for (const auto& p : published) rows.push_back(p.row);
  const auto ranked = rank_models(rows);
  std::string detail;
  bool first = false;
  for (const RankedModel& m : ranked) {
    int pub = 0;
    for (const auto& p : published)
      if (p.row.name == m.name) pub = p.published_rank;
    if (m.name == "Sequential-T (single)") first = m.rank == 1;
    detail += fmt("%s%s %d (published %d)", detail.empty() ? "" : ", ", m.name.c_str(), m.rank, pub);
  }
  return {first, detail};
}

// --- end to end ------------------------------------------------------------------------

std::map<std::string, Bytes> end_to_end(const fs::path& dir) {
  const std::string d = dir.string();
  require_ok(invoke({"synth", "--out", d + "/data", "--subjects", "2", "--days", "2", "--seed", "11"}), "synth");
  require_ok(invoke({"prepare", "--data", d + "/data", "--ph", "30", "--modality", "single", "--augment", "--out",
                     d + "/ph30", "--seed", "11"}),
             "prepare");
  nlohmann::json config = nlohmann::json::parse(read_text_file(d + "/ph30.config.json"));
  config["train"]["max_epochs"] = 3;
  write_text_file(d + "/ph30.config.json", config.dump(2));
  require_ok(invoke({"train", "--config", d + "/ph30.config.json", "--train", d + "/ph30.train.sqw", "--val",
                     d + "/ph30.val.sqw", "--out", d + "/model.sqt", "--seed", "11"}),
             "train");
  require_ok(invoke({"evaluate", "--model", d + "/model.sqt", "--test", d + "/ph30.test.sqw", "--report",
                     d + "/report.json"}),
             "evaluate");
  std::map<std::string, Bytes> files;
  for (const char* f : {"model.sqt", "model.sqt.state.json", "model.sqt.history.csv", "report.json"})
    files[f] = read_file(dir / f);
  return files;
}

Outcome determinism() {
  const fs::path a = scratch_dir("run_a"), b = scratch_dir("run_b");
  const auto fa = end_to_end(a);
  const auto fb = end_to_end(b);
  std::string differing;
  for (const auto& [name, bytes] : fa)
    if (fb.at(name) != bytes) differing += " " + name;
  fs::remove_all(a);
  fs::remove_all(b);
  return {differing.empty(), differing.empty() ? fmt("weights (%zu bytes), state, history and report identical",
                                                     fa.at("model.sqt").size())
                                               : "differs:" + differing};
}

Outcome smote_geometry() {
  const auto subjects = synth_generate({5, 4, 3});
  const PreparedData data = prepare_dataset(subjects, {24, 6, 1});
  const auto& train = data.parts.train;
  const SmoteResult r = smote_augment(train, SmoteOptions{5, 3, 0.01});
  double worst_dev = 0.0, worst_t = 0.0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < r.origins.size(); ++i) {
    const SyntheticOrigin& o = r.origins[i];
    const GlucoseWindow& s = r.windows[train.size() + i];
    if (o.jittered || train[o.base].event_label != s.event_label || train[o.neighbor].event_label != s.event_label) {
      ++violations;
      continue;
    }
    const auto fit = sft::fit_to_segment(smote_flatten(train[o.base]), smote_flatten(train[o.neighbor]),
                                         smote_flatten(s));
    worst_dev = std::max(worst_dev, fit.deviation);
    worst_t = std::max(worst_t, std::abs(fit.t - o.lambda));
    if (fit.deviation > 1e-9 || std::abs(fit.t - o.lambda) > 1e-9) ++violations;
  }
  const auto counts = class_counts(r.windows);
  const bool equal = counts.at(EventClass::Hypo) == counts.at(EventClass::Normal) &&
                     counts.at(EventClass::Normal) == counts.at(EventClass::Hyper);

  // Through the CLI: val/test caches must not change when training data is augmented.
  const fs::path dir = scratch_dir("smote");
  const std::string d = dir.string();
  require_ok(invoke({"synth", "--out", d + "/data", "--subjects", "3", "--days", "3", "--seed", "5"}), "synth");
  for (const std::string& prefix : {"plain", "aug"}) {
    std::vector<std::string> args{"prepare", "--data", d + "/data", "--ph", "30", "--out", d + "/" + prefix,
                                  "--seed", "5"};
    if (prefix == "aug") args.push_back("--augment");
    require_ok(invoke(args), "prepare");
  }
  const bool untouched = read_file(dir / "plain.val.sqw") == read_file(dir / "aug.val.sqw") &&
                         read_file(dir / "plain.test.sqw") == read_file(dir / "aug.test.sqw");
  const auto cli_counts = class_counts(load_windows(dir / "aug.train.sqw").windows);
  const bool cli_equal = cli_counts.at(EventClass::Hypo) == cli_counts.at(EventClass::Normal) &&
                         cli_counts.at(EventClass::Normal) == cli_counts.at(EventClass::Hyper);
  fs::remove_all(dir);

  return {violations == 0 && equal && untouched && cli_equal,
          fmt("%zu synthetic windows, %zu violations, max deviation %.1e, max |t - lambda| %.1e; "
              "counts %zu/%zu/%zu; CLI counts equal %s; val/test unchanged %s",
              r.origins.size(), violations, worst_dev, worst_t, counts.at(EventClass::Hypo),
              counts.at(EventClass::Normal), counts.at(EventClass::Hyper), cli_equal ? "yes" : "no",
              untouched ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqformer acceptance suite"};
  std::string report_path;
  std::vector<std::string> only;
  app.add_option("--report", report_path, "Also write the PASS/FAIL lines to this file");
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"param_budget", param_budget},
      {"flash_footprint", flash_footprint},
      {"ram_ratio", ram_ratio},
      {"event_weights", event_weights},
      {"clarke_oracle", clarke_oracle},
      {"ranking_soft", ranking},
      {"smote_geometry", smote_geometry},
      {"gradient_check", gradient_check},
      {"determinism", determinism},
      {"overfit", overfit},
      {"forecast_skill", forecast_skill},
      {"balanced_effect", balanced_effect},
  };

  std::ofstream report;
  if (!report_path.empty()) report.open(report_path);
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    const std::string line = (o.pass ? "PASS  " : "FAIL  ") + c.name + "  " + o.detail;
    std::cout << line << std::endl;
    if (report) report << line << "\n";
  }
  return failed == 0 ? 0 : 1;
}
