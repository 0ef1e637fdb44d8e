#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gqcnn/kv_config.hpp"
#include "gqcnn/model.hpp"
#include "gqcnn/report.hpp"

using namespace gqcnn;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(GQCNN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig small_config() {
  ModelConfig c;
  c.image_tower = {LayerSpec::conv(4, 3), LayerSpec::maxpool(2, 2)};
  c.merge_channels = 2;
  c.merge = LayerSpec::conv(4, 3);
  c.post_merge = {LayerSpec::conv(4, 3), LayerSpec::conv(4, 3)};
  c.head = {8, 2};
  return c;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "gqcnn_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    KeyValueConfig kv;
    write_config(kv, small_config());
    // Leave model.init_seed unset so that it follows --seed.
    std::istringstream text(kv.to_string());
    std::ofstream out(root_ / "run.ini");
    for (std::string line; std::getline(text, line);)
      if (line.rfind("init_seed", 0) != 0) out << line << '\n';
    ASSERT_EQ(run("generate-data --n 60 --seed 3 --out " + (root_ / "data").string()), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string data() { return (root_ / "data" / "dataset.gfd").string(); }
  static std::string config() { return (root_ / "run.ini").string(); }
  static std::string dir(const std::string& name) { return (root_ / name).string(); }

  static fs::path root_;
};

fs::path Cli::root_;

}  // namespace

TEST_F(Cli, GenerateWritesDatasetAndManifest) {
  EXPECT_TRUE(fs::exists(root_ / "data" / "dataset.gfd"));
  const std::string manifest = slurp(root_ / "data" / "manifest.txt");
  EXPECT_NE(manifest.find("dataset.gfd"), std::string::npos);
}

TEST_F(Cli, SplitIsReproducible) {
  const std::string args = "split --data " + data() + " --kind object --fraction 0.8 --seed 4 --out ";
  ASSERT_EQ(run(args + dir("split_a")), 0);
  ASSERT_EQ(run(args + dir("split_b")), 0);
  EXPECT_EQ(slurp(root_ / "split_a" / "split.csv"), slurp(root_ / "split_b" / "split.csv"));
  EXPECT_FALSE(slurp(root_ / "split_a" / "split.csv").empty());
}

TEST_F(Cli, ZeroEpochTrainingWritesFreshModel) {
  ASSERT_EQ(run("train --config " + config() + " --data " + data() + " --epochs 0 --seed 9 --out " + dir("t0")), 0);
  auto saved = load_model<float>(dir("t0") + "/model.gfm");
  ModelConfig c = small_config();
  c.init_seed = 9;
  auto fresh = Model<float>::build(c);
  ASSERT_EQ(saved.parameters().size(), fresh.parameters().size());
  for (std::size_t i = 0; i < fresh.parameters().size(); ++i)
    EXPECT_EQ(saved.parameters()[i].second.values().matrix(), fresh.parameters()[i].second.values().matrix());
  EXPECT_EQ(slurp(root_ / "t0" / "history.csv"), "epoch,step,lr,train_loss,train_acc,val_acc\n");
  for (const char* f : {"history.svg", "split.csv", "run.ini", "manifest.txt"}) EXPECT_TRUE(fs::exists(root_ / "t0" / f)) << f;
}

TEST_F(Cli, TrainingIsBitReproducible) {
  const std::string args =
      "train --config " + config() + " --data " + data() + " --epochs 1 --batch-size 16 --lr 0.001 --seed 2 --out ";
  ASSERT_EQ(run(args + dir("r1")), 0);
  ASSERT_EQ(run(args + dir("r2")), 0);
  EXPECT_EQ(slurp(root_ / "r1" / "manifest.txt"), slurp(root_ / "r2" / "manifest.txt"));
  EXPECT_EQ(read_history_csv(dir("r1") + "/history.csv").size(), 1u);
}

TEST_F(Cli, EvaluateAndCalibrate) {
  ASSERT_EQ(run("train --config " + config() + " --data " + data() + " --epochs 1 --batch-size 16 --seed 2 --out " +
                dir("ev")),
            0);
  const std::string model = dir("ev") + "/model.gfm";
  const std::string split = dir("ev") + "/split.csv";
  EXPECT_EQ(run("evaluate --model " + model + " --data " + data() + " --split " + split +
                " --set val --out " + dir("ev_out")),
            0);
  EXPECT_TRUE(KeyValueConfig::load(dir("ev_out") + "/metrics.ini").get_real("eval.accuracy").has_value());
  EXPECT_EQ(run("calibrate --model " + model + " --data " + data() + " --split " + split +
                " --set all --buckets 5 --out " + dir("cal")),
            0);
  EXPECT_EQ(read_calibration_csv(dir("cal") + "/calibration.csv").buckets.size(), 5u);
  EXPECT_TRUE(fs::exists(root_ / "cal" / "calibration.svg"));
  EXPECT_EQ(run("evaluate --model " + model + " --data " + data() + " --split " + split + " --set nope"), 1);
}

TEST_F(Cli, AugmentPreviewWritesImages) {
  ASSERT_EQ(run("augment-preview --data " + data() + " --count 2 --seed 1 --out " + dir("prv")), 0);
  for (const char* f : {"example_0_raw.pgm", "example_0_augmented.pgm", "example_1_raw.pgm", "draws.csv"})
    EXPECT_TRUE(fs::exists(root_ / "prv" / f)) << f;
  EXPECT_EQ(slurp(root_ / "prv" / "example_0_raw.pgm").substr(0, 2), "P5");
}

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("train --bogus-flag"), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("generate-data --n 10 --out " + dir("noseed")), 1);
  EXPECT_FALSE(fs::exists(root_ / "noseed" / "dataset.gfd"));
  EXPECT_EQ(run("split --data " + data() + " --kind galaxy --seed 1 --out " + dir("badkind")), 1);
}

TEST_F(Cli, MissingOrCorruptInput) {
  EXPECT_EQ(run("evaluate --model " + dir("absent.gfm") + " --data " + data() + " --set all"), 1);
  std::ofstream(root_ / "garbage.gfm") << "not a checkpoint";
  EXPECT_EQ(run("evaluate --model " + dir("garbage.gfm") + " --data " + data() + " --set all"), 2);
}

TEST_F(Cli, GradcheckPasses) { EXPECT_EQ(run("gradcheck --seed 1 --trials 2"), 0); }
