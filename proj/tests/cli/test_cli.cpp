#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <seqformer/seqformer.hpp>

#include "commands.hpp"

using namespace seqformer;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = seqformer::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("seqformer_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Two subjects x two days, prepared at PH 30.
  void prepare_corpus(const std::string& prefix, const std::vector<std::string>& extra = {}) {
    ASSERT_EQ(invoke({"synth", "--out", path("data"), "--subjects", "2", "--days", "2", "--seed", "3"}).code, 0);
    std::vector<std::string> args{"prepare", "--data", path("data"), "--ph", "30", "--modality",
                                  "single", "--out", path(prefix), "--seed", "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    const Result r = invoke(args);
    ASSERT_EQ(r.code, 0) << r.err;
  }

  // A small model so training takes a fraction of a second.
  std::string tiny_config(int ph = 30) {
    const std::string p = path("tiny" + std::to_string(ph) + ".json");
    const nlohmann::json j = {
        {"ph_min", ph},
        {"modality", "single"},
        {"model", {{"embed_dim", 8}, {"num_heads", 2}, {"mlp_hidden", 8}, {"regression_hidden", 4}}},
        {"train", {{"max_epochs", 2}, {"batch_size", 32}, {"learning_rate", 1e-3}}}};
    write_text_file(p, j.dump());
    return p;
  }

  Result train(const std::string& model, const std::vector<std::string>& extra = {}) {
    std::vector<std::string> args{"train", "--config", tiny_config(), "--train", path("c.train.sqw"),
                                  "--val", path("c.val.sqw"), "--out", path(model), "--seed", "4"};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoArgumentsIsUsageError) {
  const Result r = invoke({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
}

TEST_F(Cli, UnknownOptionIsUsageError) {
  const Result r = invoke({"prepare", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
}

TEST_F(Cli, BadHorizonRejected) {
  const Result r = invoke({"prepare", "--data", path("x"), "--ph", "45", "--out", path("c")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, HelpExitsZero) {
  const Result r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("prepare"), std::string::npos);
}

TEST_F(Cli, PrepareWritesCachesAndIsDeterministic) {
  prepare_corpus("c");
  for (const char* part : {"train", "val", "test"}) {
    EXPECT_TRUE(fs::exists(path(std::string("c.") + part + ".sqw"))) << part;
  }
  const WindowCache train = load_windows(path("c.train.sqw"));
  EXPECT_EQ(train.observed_len, 24);
  EXPECT_EQ(train.forecast_len, 6);
  EXPECT_EQ(train.feature_count, 1);
  EXPECT_EQ(train.real_count, train.windows.size());

  const Result again = invoke({"prepare", "--data", path("data"), "--ph", "30", "--modality", "single",
                            "--out", path("d"), "--seed", "3"});
  ASSERT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("train:"), std::string::npos);
  for (const char* part : {".train.sqw", ".val.sqw", ".test.sqw", ".config.json"}) {
    EXPECT_EQ(read_file(path(std::string("c") + part)), read_file(path(std::string("d") + part))) << part;
  }
}

TEST_F(Cli, AugmentEqualizesClasses) {
  prepare_corpus("c", {"--augment"});
  const WindowCache train = load_windows(path("c.train.sqw"));
  const WindowCache val = load_windows(path("c.val.sqw"));
  EXPECT_LT(train.real_count, train.windows.size());
  std::array<std::size_t, 3> n{};
  for (const auto& w : train.windows) ++n[static_cast<std::size_t>(w.event_label)];
  for (std::size_t c = 0; c < 3; ++c) {
    if (n[c] > 0) EXPECT_EQ(n[c], train.windows.size() / 3) << c;
  }
  EXPECT_EQ(val.real_count, val.windows.size());
}

TEST_F(Cli, MultiModalityHasFiveFeatures) {
  ASSERT_EQ(invoke({"synth", "--out", path("data"), "--subjects", "2", "--days", "2"}).code, 0);
  ASSERT_EQ(invoke({"prepare", "--data", path("data"), "--ph", "60", "--modality", "multi", "--out",
                 path("m")}).code,
            0);
  const WindowCache c = load_windows(path("m.train.sqw"));
  EXPECT_EQ(c.feature_count, 5);
  EXPECT_EQ(c.observed_len, 48);
  EXPECT_EQ(c.forecast_len, 12);
}

TEST_F(Cli, MalformedCsvNamesFileAndLine) {
  fs::create_directories(path("bad"));
  write_text_file(path("bad/s1.csv"),
                  "timestamp,glucose,carbs,bolus,basal,extra\n"
                  "2024-01-01T00:00,120,0,0,0,0\n"
                  "not-a-time,121,0,0,0,0\n");
  const Result r = invoke({"prepare", "--data", path("bad"), "--out", path("c")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error:", 0), 0u);
  EXPECT_NE(r.err.find("s1.csv"), std::string::npos);
  EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST_F(Cli, TrainWritesArtifactsDeterministically) {
  prepare_corpus("c");
  const Result a = train("a.sqt");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(train("b.sqt").code, 0);
  EXPECT_EQ(read_file(path("a.sqt")), read_file(path("b.sqt")));
  EXPECT_EQ(read_text_file(path("a.sqt.history.csv")), read_text_file(path("b.sqt.history.csv")));
  const std::string history = read_text_file(path("a.sqt.history.csv"));
  EXPECT_EQ(history.rfind("epoch,train_loss,val_loss,lr\n", 0), 0u);
  const auto state = nlohmann::json::parse(read_text_file(path("a.sqt.state.json")));
  EXPECT_EQ(state["epoch"], 2);
  EXPECT_TRUE(state.contains("rng_state"));
  EXPECT_GT(state["event_weights"]["hypo"].get<double>(), 1.0);
  // The weight file carries the training scaler.
  EXPECT_TRUE(load_weights(path("a.sqt")).scaler.has_value());
}

TEST_F(Cli, UnbalancedEqualsUnitWeightTraining) {
  prepare_corpus("c");
  ASSERT_EQ(train("u.sqt", {"--unbalanced"}).code, 0);
  const auto state = nlohmann::json::parse(read_text_file(path("u.sqt.state.json")));
  EXPECT_EQ(state["event_weights"]["hypo"], 1.0);
  EXPECT_EQ(state["event_weights"]["normal"], 1.0);

  // Same run through the library with unit weights: identical loss trace.
  const WindowCache tr = load_windows(path("c.train.sqw"));
  const WindowCache va = load_windows(path("c.val.sqw"));
  ModelConfig m;
  m.embed_dim = 8;
  m.num_heads = 2;
  m.mlp_hidden = 8;
  m.regression_hidden = 4;
  TrainOptions o;
  o.max_epochs = 2;
  o.batch_size = 32;
  o.learning_rate = 1e-3;
  o.seed = 4;
  const TrainResult lib = train_loop(m, tr.windows, va.windows, EventWeights::unit(), o);
  EXPECT_EQ(read_text_file(path("u.sqt.history.csv")), history_csv(lib.history));
}

TEST_F(Cli, ConfigCacheMismatchRefused) {
  prepare_corpus("c");
  const Result r = invoke({"train", "--config", tiny_config(60), "--train", path("c.train.sqw"), "--val",
                        path("c.val.sqw"), "--out", path("m.sqt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("T=48, L=12, F=1"), std::string::npos);
  EXPECT_NE(r.err.find("T=24, L=6, F=1"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("m.sqt")));
}

TEST_F(Cli, NonFiniteTrainingAborts) {
  prepare_corpus("c");
  WindowCache tr = load_windows(path("c.train.sqw"));
  tr.windows[0].observed_features(3, 0) = std::numeric_limits<double>::quiet_NaN();
  save_windows(path("c.train.sqw"), tr);
  const Result r = train("n.sqt");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("non-finite"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("n.sqt")));
}

TEST_F(Cli, EvaluateIsRepeatableWithExactKeys) {
  prepare_corpus("c");
  ASSERT_EQ(train("m.sqt").code, 0);
  const Result e1 = invoke({"evaluate", "--model", path("m.sqt"), "--test", path("c.test.sqw"), "--report", path("r1.json")});
  ASSERT_EQ(e1.code, 0) << e1.err;
  ASSERT_EQ(invoke({"evaluate", "--model", path("m.sqt"), "--test", path("c.test.sqw"), "--report", path("r2.json")}).code, 0);
  EXPECT_EQ(read_file(path("r1.json")), read_file(path("r2.json")));
  EXPECT_EQ(e1.out.rfind("PH30  RMSE ", 0), 0u);

  const auto j = nlohmann::json::parse(read_text_file(path("r1.json")));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"ega_pct", "hyper_sen_pct", "hypo_sen_pct", "params", "ph_min",
                                            "rmse_mgdl", "tg_min"}));
  std::vector<std::string> zones;
  for (const auto& [k, v] : j["ega_pct"].items()) zones.push_back(k);
  EXPECT_EQ(zones, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
}

TEST_F(Cli, EvaluateRefusesWrongShape) {
  prepare_corpus("c");
  ModelConfig c60;
  c60.observed_len = 48;
  c60.forecast_len = 12;
  save_weights(path("m60.sqt"), SeqFormer::initialized(c60, 1));
  const Result r = invoke({"evaluate", "--model", path("m60.sqt"), "--test", path("c.test.sqw"), "--report", path("r.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("shape mismatch"), std::string::npos);
}

TEST_F(Cli, PredictEmitsOneValuePerHorizonStep) {
  for (int ph : {30, 60}) {
    ModelConfig c;
    c.observed_len = ph == 30 ? 24 : 48;
    c.forecast_len = ph == 30 ? 6 : 12;
    const std::string model = path("p" + std::to_string(ph) + ".sqt");
    save_weights(model, SeqFormer::initialized(c, 2));
    std::vector<GlucoseRecord> rows;
    for (int t = 0; t < c.observed_len; ++t) rows.push_back({28400000 + 5 * t, 120.0 + t, 0, 0, 0, 0});
    write_text_file(path("w.csv"), write_records_csv(rows));
    const Result a = invoke({"predict", "--model", model, "--window", path("w.csv")});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(std::count(a.out.begin(), a.out.end(), ','), c.forecast_len - 1);
    EXPECT_EQ(invoke({"predict", "--model", model, "--window", path("w.csv")}).out, a.out);
  }
}

TEST_F(Cli, PredictWrongRowCountNamesT) {
  save_weights(path("p.sqt"), SeqFormer::initialized(ModelConfig{}, 2));
  std::vector<GlucoseRecord> rows;
  for (int t = 0; t < 10; ++t) rows.push_back({28400000 + 5 * t, 120.0, 0, 0, 0, 0});
  write_text_file(path("w.csv"), write_records_csv(rows));
  const Result r = invoke({"predict", "--model", path("p.sqt"), "--window", path("w.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("T=24"), std::string::npos);
}

namespace {

void write_report(const std::string& p, int ph, double rmse, double sen, std::uint64_t params) {
  MetricsReport r;
  r.ph_min = ph;
  r.rmse_mgdl = rmse;
  r.tg_min = ph / 2;
  r.hyper_sen_pct = sen;
  r.hypo_sen_pct = sen;
  r.ega_pct = {90, 10, 0, 0, 0};
  r.params = params;
  write_text_file(p, r.to_json().dump());
}

}  // namespace

TEST_F(Cli, RankOrdersModels) {
  write_report(path("good_ph30.json"), 30, 14, 90, 1000);
  write_report(path("good_ph60.json"), 60, 24, 80, 1000);
  write_report(path("poor_ph30.json"), 30, 18, 60, 5000);
  write_report(path("poor_ph60.json"), 60, 30, 40, 5000);
  const Result r = invoke({"rank", "--reports", path("poor_ph30.json"), path("good_ph30.json"),
                        path("poor_ph60.json"), path("good_ph60.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  // Equal TG columns score 0.5 for both: (0.875 + 1) / 2 for the dominator.
  EXPECT_NE(r.out.find("1     0.9375  good"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("2     0.0625  poor"), std::string::npos) << r.out;
}

TEST_F(Cli, RankMissingHorizonNamesModel) {
  write_report(path("alpha_ph30.json"), 30, 14, 90, 1000);
  write_report(path("alpha_ph60.json"), 60, 24, 80, 1000);
  write_report(path("beta_ph30.json"), 30, 18, 60, 5000);
  const Result r = invoke({"rank", "--reports", path("alpha_ph30.json"), path("alpha_ph60.json"),
                        path("beta_ph30.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'beta'"), std::string::npos);
  EXPECT_NE(r.err.find("PH 60"), std::string::npos);
}

TEST_F(Cli, FootprintOfDefaultModel) {
  save_weights(path("d.sqt"), SeqFormer::initialized(ModelConfig{}, 1));
  const Result r = invoke({"footprint", "--model", path("d.sqt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const double mib = j["flash_mib"].get<double>();
  EXPECT_GE(mib, 0.44);
  EXPECT_LE(mib, 0.56);
  const double ratio = j["ram"][1]["ram_full_window_bytes"].get<double>() /
                       j["ram"][0]["ram_full_window_bytes"].get<double>();
  EXPECT_GE(ratio, 1.7);
  EXPECT_LE(ratio, 2.3);
}

TEST_F(Cli, FootprintRejectsCorruptFile) {
  write_text_file(path("x.sqt"), "JUNKJUNKJUNK");
  const Result r = invoke({"footprint", "--model", path("x.sqt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad magic"), std::string::npos);
}
