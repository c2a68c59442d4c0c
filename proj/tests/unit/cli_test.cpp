#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "jpt/util/binary_io.hpp"

namespace jpt {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; stdout is captured.
Outcome run(const std::string& args) {
  const std::string cmd = std::string(JPT_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return o;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) o.out.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string fixture(const std::string& rel) { return std::string(JPT_FIXTURES_DIR) + "/" + rel; }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("jpt_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    model_ = (dir_ / "model").string();
    train_code_ = run("train --config " + fixture("configs/tiny.toml") + " --out " + model_ + " --quiet").code;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static inline fs::path dir_;
  static inline std::string model_;
  static inline int train_code_ = -1;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("prompt --schema " + fixture("schemas/three_types.json") + " --text x --bogus").code, 1);
  EXPECT_EQ(run("prompt --schema " + fixture("schemas/three_types.json")).code, 1);
  EXPECT_EQ(run("prompt --schema " + fixture("schemas/three_types.json") + " --text x --template fancy").code, 1);
}

TEST_F(CliTest, PromptMatchesGolden) {
  Outcome o = run("prompt --schema " + fixture("schemas/three_types.json") + " --text x");
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out, binio::read_file(fixture("prompts/three_types.txt")));
}

TEST_F(CliTest, TrainWritesACheckpoint) {
  ASSERT_EQ(train_code_, 0);
  for (const char* f : {"weights.jptw", "vocab.txt", "config.json", "metrics.jsonl", "run.json", "eval.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(model_) / f)) << f;
  }
}

TEST_F(CliTest, PredictAndEval) {
  ASSERT_EQ(train_code_, 0);
  Outcome p = run("predict --model " + model_ + " --schema " + fixture("schemas/person_location.json") +
                  " --text 'Jordan released a new album' --probs");
  ASSERT_EQ(p.code, 0);
  nlohmann::json j = nlohmann::json::parse(p.out);
  EXPECT_EQ(j.at("tokens").size(), 5u);
  EXPECT_EQ(j.at("probs").size(), 5u);

  const std::string errors = (dir_ / "errors.jsonl").string();
  Outcome e = run("eval --model " + model_ + " --data " + fixture("datasets/sample.conll") + " --errors " + errors);
  ASSERT_EQ(e.code, 0);
  EXPECT_EQ(nlohmann::json::parse(e.out).at("records"), 6);
  EXPECT_TRUE(fs::exists(errors));

  Outcome a = run("attention --model " + model_ + " --schema " + fixture("schemas/person_location.json") +
                  " --text 'Jordan spoke'");
  EXPECT_EQ(a.code, 0);
  ASSERT_FALSE(a.out.empty());
  EXPECT_EQ(a.out[0], ',');
  EXPECT_GE(std::count(a.out.begin(), a.out.end(), '\n'), 3);
}

TEST_F(CliTest, DataAndModelErrorCodes) {
  ASSERT_EQ(train_code_, 0);
  const std::string empty = (dir_ / "empty.jsonl").string();
  binio::write_file(empty, "");
  EXPECT_EQ(run("eval --model " + model_ + " --data " + empty).code, 2);
  const std::string broken = (dir_ / "broken.conll").string();
  binio::write_file(broken, "a X-PER\n");
  EXPECT_EQ(run("eval --model " + model_ + " --data " + broken).code, 2);
  EXPECT_EQ(run("predict --model " + model_ + " --schema " + fixture("schemas/person_location.json") + " --text ' '").code,
            2);
  EXPECT_EQ(run("predict --model " + (dir_ / "none").string() + " --schema " +
                fixture("schemas/person_location.json") + " --text hi")
                .code,
            3);
}

TEST_F(CliTest, CacheWarmAndVerify) {
  ASSERT_EQ(train_code_, 0);
  const std::string cache = (dir_ / "cache.jptc").string();
  EXPECT_EQ(run("cache warm --model " + model_ + " --cache " + cache + " --schema " +
                fixture("schemas/person_location.json"))
                .code,
            0);
  EXPECT_EQ(run("cache verify --cache " + cache).code, 0);
  std::string bytes = binio::read_file(cache);
  bytes[bytes.size() - 3] ^= 0x7f;
  binio::write_file(cache, bytes);
  EXPECT_EQ(run("cache verify --cache " + cache).code, 3);
}

TEST_F(CliTest, ProfileAndGradcheck) {
  Outcome p = run("profile --stats " + fixture("workloads/crossner_politics_like.json") + " --c-out 4 --json");
  ASSERT_EQ(p.code, 0);
  nlohmann::json j = nlohmann::json::parse(p.out);
  EXPECT_EQ(j.at("rows").at(0).at("method"), "jpt");
  EXPECT_EQ(run("profile --stats " + fixture("workloads/crossner_politics_like.json") + " --c-in 2 --c-out 1").code, 1);
  Outcome g = run("gradcheck --target bilinear --target focal");
  EXPECT_EQ(g.code, 0);
  EXPECT_NE(g.out.find("focal"), std::string::npos);
}

}  // namespace
}  // namespace jpt
