#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <seqformer/seqformer.hpp>

#include "run_config.hpp"

namespace fs = std::filesystem;

namespace seqformer::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string shape_string(int T, int L, int F) {
  return "T=" + std::to_string(T) + ", L=" + std::to_string(L) + ", F=" + std::to_string(F);
}

void require_shape(const ModelConfig& m, const WindowCache& c, const std::string& what) {
  if (m.observed_len != c.observed_len || m.forecast_len != c.forecast_len ||
      m.feature_count != c.feature_count) {
    throw UsageError("shape mismatch: model (" +
                     shape_string(m.observed_len, m.forecast_len, m.feature_count) + ") vs " + what +
                     " (" + shape_string(c.observed_len, c.forecast_len, c.feature_count) + ")");
  }
}

std::array<std::size_t, 3> class_counts(std::span<const GlucoseWindow> ws) {
  std::array<std::size_t, 3> n{};
  for (const auto& w : ws) ++n[static_cast<std::size_t>(w.event_label)];
  return n;
}

std::string describe(const char* name, std::span<const GlucoseWindow> ws) {
  const auto n = class_counts(ws);
  std::ostringstream s;
  s << name << ": " << ws.size() << " windows (hypo " << n[0] << ", normal " << n[1] << ", hyper "
    << n[2] << ")";
  return s.str();
}

fs::path with_suffix(const std::string& prefix, const char* suffix) { return fs::path(prefix + suffix); }

// --- synth -------------------------------------------------------------------------

int cmd_synth(const std::string& dir, int subjects, int days, std::uint64_t seed, std::ostream& out) {
  if (subjects < 1 || days < 1) throw UsageError("--subjects and --days must be positive");
  fs::create_directories(dir);
  const auto corpus = synth_generate({subjects, days, seed});
  for (const SubjectRecords& s : corpus) {
    write_text_file(fs::path(dir) / (s.id + ".csv"), write_records_csv(s.records));
  }
  out << "wrote " << corpus.size() << " subjects x " << days << " days to " << dir << "\n";
  return 0;
}

// --- prepare -----------------------------------------------------------------------

std::vector<SubjectRecords> read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("--data: not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("--data: no .csv files in " + dir.string());
  std::vector<SubjectRecords> subjects;
  for (const fs::path& f : files) {
    try {
      subjects.push_back({f.stem().string(), parse_records(read_text_file(f))});
    } catch (const ParseError& e) {
      throw DataError(f.string() + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(f.string() + ": " + e.what());
    }
  }
  return subjects;
}

int cmd_prepare(const std::string& data, int ph, const std::string& modality, bool augment,
                const std::string& out_prefix, std::uint64_t seed, std::ostream& out,
                std::ostream& err) {
  RunConfig config = RunConfig::defaults(ph, parse_modality(modality));
  config.augment = augment;
  config.seed = seed;
  const WindowSpec spec = config.window_spec();

  const auto subjects = read_corpus(data);
  PreparedData prepared = prepare_dataset(subjects, spec);
  if (prepared.parts.val.empty() || prepared.parts.test.empty()) {
    throw DataError("too little data for a validation and test partition");
  }

  std::vector<GlucoseWindow> train = std::move(prepared.parts.train);
  if (augment) {
    SmoteResult smote = smote_augment(train, SmoteOptions{5, seed, 0.01});
    for (const auto& w : smote.warnings) err << "warning: " << w << "\n";
    train = std::move(smote.windows);
  }

  const auto cache = [&](std::vector<GlucoseWindow> ws, std::size_t real) {
    WindowCache c;
    c.observed_len = spec.observed_len;
    c.forecast_len = spec.forecast_len;
    c.feature_count = spec.feature_count;
    c.real_count = real;
    c.scaler = prepared.scaler;
    c.windows = std::move(ws);
    return c;
  };
  const std::size_t real = prepared.real_train_count;
  const std::size_t val_n = prepared.parts.val.size();
  const std::size_t test_n = prepared.parts.test.size();

  out << describe("train", train);
  if (train.size() > real) out << " including " << train.size() - real << " synthetic";
  out << "\n"
      << describe("val", prepared.parts.val) << "\n"
      << describe("test", prepared.parts.test) << "\n";

  save_windows(with_suffix(out_prefix, ".train.sqw"), cache(std::move(train), real));
  save_windows(with_suffix(out_prefix, ".val.sqw"), cache(std::move(prepared.parts.val), val_n));
  save_windows(with_suffix(out_prefix, ".test.sqw"), cache(std::move(prepared.parts.test), test_n));
  write_text_file(with_suffix(out_prefix, ".config.json"), canonical_json(config.to_json()) + "\n");
  out << "wrote " << out_prefix << ".{train,val,test}.sqw and " << out_prefix << ".config.json\n";
  return 0;
}

// --- train -------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& val_path, const std::string& model_path, bool unbalanced,
              bool seed_given, std::uint64_t seed, bool verbose, std::ostream& out,
              std::ostream& err) {
  RunConfig config = RunConfig::from_json(nlohmann::json::parse(read_text_file(config_path)));
  if (seed_given) config.seed = seed;
  if (unbalanced) config.balanced = false;

  const WindowCache train = load_windows(train_path);
  const WindowCache val = load_windows(val_path);
  require_shape(config.model, train, "train cache");
  require_shape(config.model, val, "validation cache");
  if (!(train.scaler == val.scaler)) {
    throw UsageError("train and validation caches were normalized with different scalers");
  }

  const EventWeights weights = config.balanced
                                   ? training_event_weights(train.windows, train.real_count)
                                   : EventWeights::unit();
  TrainOptions options = config.train_options();
  if (verbose) {
    options.on_epoch = [&err](const EpochRecord& r) {
      err << "epoch " << r.epoch << " train " << fixed(r.train_loss, 3) << " val "
          << fixed(r.val_loss, 3) << " lr " << r.lr << "\n";
    };
  }
  const TrainResult result = train_loop(config.model, train.windows, val.windows, weights, options);

  save_weights(model_path, result.model, &train.scaler);
  nlohmann::json state = result.state.to_json();
  state["event_weights"] = {{"hypo", weights.hypo}, {"normal", weights.normal}, {"hyper", weights.hyper}};
  state["stopped_early"] = result.stopped_early;
  state["config"] = config.to_json();
  write_text_file(model_path + ".state.json", canonical_json(state) + "\n");
  write_text_file(model_path + ".history.csv", history_csv(result.history));

  out << "trained " << result.history.size() << " epochs"
      << (result.stopped_early ? " (early stop)" : "") << "; best val loss "
      << fixed(result.state.best_val_loss, 3) << " at epoch " << result.state.best_epoch << "\n"
      << "weights hypo " << fixed(weights.hypo, 4) << " normal " << fixed(weights.normal, 4)
      << " hyper " << fixed(weights.hyper, 4) << "\n"
      << "wrote " << model_path << " (+ .state.json, .history.csv)\n";
  return 0;
}

// --- evaluate ----------------------------------------------------------------------

Matrix predict_all(const SeqFormer& model, std::span<const GlucoseWindow> windows) {
  constexpr std::size_t kChunk = 512;
  Matrix preds(static_cast<Index>(windows.size()), model.config().forecast_len);
  for (std::size_t b = 0; b < windows.size(); b += kChunk) {
    const std::size_t n = std::min(kChunk, windows.size() - b);
    preds.middleRows(static_cast<Index>(b), static_cast<Index>(n)) =
        model.predict_mgdl(windows.subspan(b, n));
  }
  return preds;
}

std::string optional_pct(const std::optional<double>& v) { return v ? fixed(*v) : "-"; }

int cmd_evaluate(const std::string& model_path, const std::string& test_path,
                 const std::string& report_path, std::ostream& out) {
  const ModelFile file = load_weights(model_path);
  const WindowCache test = load_windows(test_path);
  require_shape(file.model.config(), test, "test cache");
  if (file.scaler && !(*file.scaler == test.scaler)) {
    throw UsageError("test cache was normalized with a different scaler than the model's");
  }
  if (test.windows.empty()) throw DataError("test cache holds no windows");

  const Matrix preds = predict_all(file.model, test.windows);
  const MetricsReport r = evaluate_forecasts(test.windows, preds, file.model.parameter_count());
  write_text_file(report_path, canonical_json(r.to_json()) + "\n");
  out << "PH" << r.ph_min << "  RMSE " << fixed(r.rmse_mgdl) << "  TG " << r.tg_min
      << "  HyperSen " << optional_pct(r.hyper_sen_pct) << "  HypoSen "
      << optional_pct(r.hypo_sen_pct) << "  EGA " << fixed(r.ega_pct[0]) << "/"
      << fixed(r.ega_pct[1]) << "/" << fixed(r.ega_pct[2]) << "/" << fixed(r.ega_pct[3]) << "/"
      << fixed(r.ega_pct[4]) << "  params " << r.params << "\n";
  return 0;
}

// --- predict -----------------------------------------------------------------------

int cmd_predict(const std::string& model_path, const std::string& window_path, std::ostream& out) {
  const ModelFile file = load_weights(model_path);
  const ModelConfig& cfg = file.model.config();
  const auto records = parse_records(read_text_file(window_path));
  if (static_cast<int>(records.size()) != cfg.observed_len) {
    throw UsageError("window has " + std::to_string(records.size()) + " rows; the model expects T=" +
                     std::to_string(cfg.observed_len));
  }
  if (!file.scaler && cfg.feature_count > 1) {
    throw FormatError("model file carries no feature scaling; cannot normalize a raw window");
  }

  GlucoseWindow w;
  w.observed_features = Matrix(cfg.observed_len, cfg.feature_count);
  for (int t = 0; t < cfg.observed_len; ++t) {
    const GlucoseRecord& r = records[static_cast<std::size_t>(t)];
    if (!r.glucose) throw UsageError("window row " + std::to_string(t + 1) + " has no glucose value");
    const double raw[] = {*r.glucose, r.carbs, r.bolus, r.basal, r.extra};
    for (int f = 0; f < cfg.feature_count; ++f) w.observed_features(t, f) = raw[f];
    w.observed_daytimes.push_back(static_cast<double>(r.minute % 1440));
  }
  const std::int64_t last = records.back().minute;
  for (int l = 1; l <= cfg.forecast_len; ++l) {
    w.target_daytimes.push_back(static_cast<double>((last + kGridMinutes * l) % 1440));
  }
  w.targets.assign(static_cast<std::size_t>(cfg.forecast_len), 0.0);
  if (file.scaler) {
    file.scaler->apply(w);
  } else {
    for (int t = 0; t < cfg.observed_len; ++t) w.observed_features(t, 0) = normalize_glucose(w.observed_features(t, 0));
  }

  const std::vector<double> p = file.model.predict_mgdl(w);
  for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : "") << fixed(p[i]);
  out << "\n";
  return 0;
}

// --- rank --------------------------------------------------------------------------

std::string model_name(const fs::path& report) {
  static const std::regex suffix(R"(^(.*?)[._-]?ph(30|60)$)", std::regex::icase);
  const std::string stem = report.stem().string();
  std::smatch m;
  std::string name = std::regex_match(stem, m, suffix) ? m[1].str() : stem;
  if (name.empty()) name = report.parent_path().filename().string();
  return name.empty() ? stem : name;
}

int cmd_rank(const std::vector<std::string>& paths, std::ostream& out, std::ostream& err) {
  std::map<std::string, std::map<int, MetricsReport>> by_model;
  std::vector<std::string> order;
  for (const std::string& p : paths) {
    MetricsReport r;
    try {
      r = MetricsReport::from_json(nlohmann::json::parse(read_text_file(p)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(p + ": not a metrics report: " + e.what());
    }
    const std::string name = model_name(p);
    if (!by_model.count(name)) order.push_back(name);
    if (!by_model[name].emplace(r.ph_min, r).second) {
      throw UsageError("model '" + name + "' has two PH " + std::to_string(r.ph_min) + " reports");
    }
  }
  if (by_model.size() < 2) throw UsageError("rank needs reports for at least two models");

  std::vector<RankingRow> rows;
  for (const std::string& name : order) {
    const auto& reports = by_model.at(name);
    for (int ph : {30, 60}) {
      if (!reports.count(ph)) {
        throw UsageError("model '" + name + "' has no PH " + std::to_string(ph) + " report");
      }
    }
    RankingRow row;
    row.name = name;
    for (const auto& [ph, r] : reports) {
      if (!r.hyper_sen_pct || !r.hypo_sen_pct) {
        err << "warning: model '" << name << "' PH " << ph
            << " has an undefined sensitivity; scored as 0\n";
      }
      row.horizons[ph] = {r.rmse_mgdl, static_cast<double>(r.tg_min), r.hyper_sen_pct.value_or(0.0),
                          r.hypo_sen_pct.value_or(0.0)};
    }
    row.params = static_cast<double>(reports.at(30).params);
    rows.push_back(std::move(row));
  }

  out << "rank  score   model\n";
  for (const RankedModel& m : rank_models(rows)) {
    out << std::left << std::setw(6) << m.rank << std::setw(8) << fixed(m.score, 4) << m.name << "\n";
  }
  return 0;
}

// --- footprint ---------------------------------------------------------------------

int cmd_footprint(const std::string& model_path, std::ostream& out) {
  const Bytes bytes = read_file(model_path);
  const ModelFile file = decode_weights(bytes);
  out << footprint(file.model.config(), bytes.size()).to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightweight sequential transformer for glucose forecasting"};
  app.name("seqformer");
  app.require_subcommand(1);

  std::string data, out_path, config_path, train_path, val_path, model_path, test_path, report_path,
      window_path, modality = "single";
  int ph = 30, subjects = 5, days = 8;
  bool augment = false, unbalanced = false, verbose = false;
  std::uint64_t seed = 0;
  std::vector<std::string> reports;

  auto* synth = app.add_subcommand("synth", "Write a synthetic CGM corpus (one CSV per subject)");
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--subjects", subjects, "Number of subjects");
  synth->add_option("--days", days, "Days per subject");
  synth->add_option("--seed", seed, "Random seed");

  auto* prepare = app.add_subcommand("prepare", "Window, split, normalize and cache a CSV corpus");
  prepare->add_option("--data", data, "Directory of per-subject CSV files")->required();
  prepare->add_option("--ph", ph, "Prediction horizon in minutes")->check(CLI::IsMember(std::vector<int>{30, 60}));
  prepare->add_option("--modality", modality, "single or multi")->check(CLI::IsMember(std::vector<std::string>{"single", "multi"}));
  prepare->add_flag("--augment", augment, "SMOTE-balance the training windows");
  prepare->add_option("--out", out_path, "Output prefix")->required();
  prepare->add_option("--seed", seed, "Random seed");

  auto* train = app.add_subcommand("train", "Train a model on cached windows");
  auto* seed_opt = train->add_option("--seed", seed, "Random seed (overrides the config)");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--train", train_path, "Training window cache")->required();
  train->add_option("--val", val_path, "Validation window cache")->required();
  train->add_option("--out", model_path, "Output weight file")->required();
  train->add_flag("--unbalanced", unbalanced, "Unit loss weights for every class");
  train->add_flag("--verbose", verbose, "Per-epoch progress on stderr");

  auto* evaluate = app.add_subcommand("evaluate", "Metric report for a model on a test cache");
  evaluate->add_option("--model", model_path, "Weight file")->required();
  evaluate->add_option("--test", test_path, "Test window cache")->required();
  evaluate->add_option("--report", report_path, "Output report JSON")->required();

  auto* predict = app.add_subcommand("predict", "Forecast from one raw CSV window");
  predict->add_option("--model", model_path, "Weight file")->required();
  predict->add_option("--window", window_path, "CSV with exactly T rows")->required();

  auto* rank = app.add_subcommand("rank", "Rank models from their PH 30 and PH 60 reports");
  rank->add_option("--reports", reports, "Report files named <model>_ph30.json / <model>_ph60.json")
      ->required();

  auto* foot = app.add_subcommand("footprint", "Flash and RAM estimate for a weight file");
  foot->add_option("--model", model_path, "Weight file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(out_path, subjects, days, seed, out);
    if (prepare->parsed()) return cmd_prepare(data, ph, modality, augment, out_path, seed, out, err);
    if (train->parsed()) {
      return cmd_train(config_path, train_path, val_path, model_path, unbalanced,
                       seed_opt->count() > 0, seed, verbose, out, err);
    }
    if (evaluate->parsed()) return cmd_evaluate(model_path, test_path, report_path, out);
    if (predict->parsed()) return cmd_predict(model_path, window_path, out);
    if (rank->parsed()) return cmd_rank(reports, out, err);
    if (foot->parsed()) return cmd_footprint(model_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: json: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace seqformer::cli
