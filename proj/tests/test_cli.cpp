#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "gaitgate/model_io.hpp"

namespace gaitgate {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run gg(std::vector<std::string> args) {
  args.insert(args.begin(), "gaitgate");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small corpus and a 2-epoch model shared by the tests below.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "gaitgate_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(gg({"synth", "--users", "6", "--duration", "150", "--out", p("data")}).code, 0);
    const auto r = gg({"train", "--data", p("data"), "--out", p("model"), "--window-sec", "3",
                       "--epochs", "2", "--batches", "2", "--val-users", "2", "--test-users", "2",
                       "--threads", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static std::string p(const std::string& rel) { return (root_ / rel).string(); }
  static std::vector<std::string> model_args() {
    return {"--model", p("model/model.gait"), "--window-sec", "3"};
  }
  static std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  }
  static inline fs::path root_;
};

TEST_F(CliTest, SynthWritesManifestAndSessions) {
  const auto m = nlohmann::json::parse(slurp(root_ / "data" / "manifest.json"));
  EXPECT_EQ(m.size(), 6u);
  EXPECT_TRUE(fs::exists(root_ / "data" / "sessions" / "user000_c0s0.csv"));
}

TEST_F(CliTest, SynthRejectsZeroUsers) {
  const auto r = gg({"synth", "--users", "0", "--out", p("x")});
  EXPECT_EQ(r.code, cli::kBadArgs);
  EXPECT_NE(r.err.find("--users"), std::string::npos);
}

TEST_F(CliTest, TrainOutputs) {
  std::ifstream log(root_ / "model" / "train_log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("val_f1"));
    ++lines;
  }
  EXPECT_EQ(lines, 2u);  // epochs x folds
  EXPECT_NO_THROW(load_params(root_ / "model" / "model.gait"));
  const auto splits = nlohmann::json::parse(slurp(root_ / "model" / "splits.json"));
  EXPECT_EQ(splits["splits"][0]["test"].size(), 2u);
}

TEST_F(CliTest, TrainWindowPreconditions) {
  auto r = gg({"train", "--data", p("data"), "--out", p("m1"), "--window-sec", "1"});
  EXPECT_EQ(r.code, cli::kBadArgs);
  EXPECT_NE(r.err.find("shorter than one STFT frame"), std::string::npos);
}

TEST_F(CliTest, MissingDataIsIoError) {
  const auto r = gg({"train", "--data", p("nope"), "--out", p("m2")});
  EXPECT_EQ(r.code, cli::kIoError) << r.err;
}

TEST_F(CliTest, EnrollVerifyRoundTrip) {
  const std::string session = p("data/sessions/user001_c0s0.csv");
  auto r = gg(with({"enroll", "--session", session, "--user", "user001", "--store", p("store.json"),
                    "--created-at", "2026-01-01T00:00:00Z"},
                   model_args()));
  ASSERT_EQ(r.code, 0) << r.err;
  r = gg(with({"verify", "--session", session, "--user", "user001", "--store", p("store.json")},
              model_args()));
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["accept"].get<bool>());
  EXPECT_EQ(j["matched_appearance"], "default");

  r = gg(with({"verify", "--session", session, "--user", "user001", "--store", p("store.json"),
               "--threshold", "0"},
              model_args()));
  EXPECT_EQ(r.code, cli::kReject);

  r = gg(with({"verify", "--session", session, "--user", "ghost", "--store", p("store.json")},
              model_args()));
  EXPECT_EQ(r.code, cli::kUnknownUser);
}

TEST_F(CliTest, EnrollNeedsTenSeconds) {
  {
    std::ifstream in(root_ / "data" / "sessions" / "user002_c0s0.csv");
    std::ofstream out(root_ / "short.csv");
    std::string line;
    for (int i = 0; i < 501 && std::getline(in, line); ++i) out << line << "\n";
  }
  const auto r = gg(with({"enroll", "--session", p("short.csv"), "--user", "u", "--store", p("s2.json")},
                         model_args()));
  EXPECT_EQ(r.code, cli::kBadArgs);
  EXPECT_NE(r.err.find("10 s"), std::string::npos) << r.err;
}

TEST_F(CliTest, WrongWindowForModel) {
  const auto r = gg({"enroll", "--model", p("model/model.gait"), "--window-sec", "10", "--session",
                     p("data/sessions/user001_c0s0.csv"), "--user", "u", "--store", p("s3.json")});
  EXPECT_EQ(r.code, cli::kBadArgs);
}

TEST_F(CliTest, EvaluateCountsAndDeterminism) {
  const auto base = with({"evaluate", "--data", p("data"), "--split", p("model/splits.json")}, model_args());
  ASSERT_EQ(gg(with(base, {"--report", p("r1.json")})).code, 0);
  ASSERT_EQ(gg(with(base, {"--report", p("r2.json"), "--threads", "2"})).code, 0);
  EXPECT_EQ(slurp(root_ / "r1.json"), slurp(root_ / "r2.json"));
  const auto j = nlohmann::json::parse(slurp(root_ / "r1.json"));
  ASSERT_EQ(j["per_user"].size(), 2u);
  for (const auto& u : j["per_user"]) {
    EXPECT_EQ(u["genuine_trials"], 40);
    EXPECT_EQ(u["impostor_trials"], 15);
    EXPECT_EQ(u["enrollment_windows"], 10);
  }
}

TEST_F(CliTest, AdaptiveRejectsVerifyAboveTrigger) {
  const auto r = gg(with({"adaptive", "--journey", p("j.csv"), "--store", p("store.json"), "--user",
                          "user001", "--verify", "0.5", "--trigger", "0.3"},
                         model_args()));
  EXPECT_EQ(r.code, cli::kBadArgs);
  EXPECT_NE(r.err.find("verify <= trigger"), std::string::npos);
}

TEST_F(CliTest, AdaptiveBaselineJourneyAddsNothing) {
  ASSERT_EQ(gg({"journey", "--user", "3", "--preset", "baseline", "--segment-sec", "60", "--noise-seed",
                "5", "--out", p("base.csv")})
                .code,
            0);
  ASSERT_EQ(gg(with({"enroll", "--session", p("data/sessions/user003_c0s0.csv"), "--user", "user003",
                     "--store", p("astore.json"), "--created-at", "x"},
                    model_args()))
                .code,
            0);
  const auto r = gg(with({"adaptive", "--journey", p("base.csv"), "--store", p("astore.json"), "--user",
                          "user003", "--events", p("events.jsonl"), "--probe", p("base.csv")},
                         model_args()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["adaptive_templates"], 0);
  EXPECT_EQ(j["windows"], 39);  // (60 - 3) / 1.5 + 1
  EXPECT_TRUE(j.contains("recall"));
}

TEST_F(CliTest, HelpListsDefaults) {
  const auto r = gg({"adaptive", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("[0.3]"), std::string::npos);
  EXPECT_NE(r.out.find("[0.24]"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  {
    std::ofstream cfg(root_ / "cfg.toml");
    cfg << "[synth]\nusers = 2\nduration = 20\n";
  }
  auto r = gg({"--config", p("cfg.toml"), "synth", "--out", p("cfgdata")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(root_ / "cfgdata" / "manifest.json")).size(), 2u);
  r = gg({"--config", p("cfg.toml"), "synth", "--users", "3", "--out", p("cfgdata2")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(root_ / "cfgdata2" / "manifest.json")).size(), 3u);
}

}  // namespace
}  // namespace gaitgate
