#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "gqcnn/eval.hpp"
#include "gqcnn/optim.hpp"
#include "gqcnn/report.hpp"

using namespace gqcnn;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("gqcnn_eval_" + name)).string();
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg, const std::string& id) {
  std::smatch m;
  const std::regex re("<polyline id=\"" + id + "\"[^>]*points=\"([^\"]*)\"");
  std::vector<std::pair<double, double>> points;
  if (!std::regex_search(svg, m, re)) return points;
  std::istringstream in(m[1].str());
  std::string pair;
  while (in >> pair) {
    const auto comma = pair.find(',');
    points.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
  }
  return points;
}

std::vector<long> bar_counts(const std::string& svg) {
  std::vector<long> counts;
  const std::regex re("data-count=\"([0-9]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    counts.push_back(std::stol((*it)[1].str()));
  return counts;
}

ModelConfig small_config() {
  ModelConfig c;
  c.image_tower = {LayerSpec::conv(4, 3), LayerSpec::maxpool(2, 2)};
  c.merge_channels = 2;
  c.merge = LayerSpec::conv(4, 3);
  c.post_merge = {LayerSpec::conv(4, 3), LayerSpec::conv(4, 3)};
  c.head = {8, 2};
  c.init_seed = 6;
  return c;
}

}  // namespace

TEST(Accuracy, Examples) {
  const std::vector<double> p{0.9, 0.2, 0.7, 0.4};
  const std::vector<std::uint8_t> y{1, 0, 0, 1};
  EXPECT_DOUBLE_EQ(accuracy(p, y), 50.0);
  const std::vector<std::uint8_t> all{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(accuracy(p, all), 100.0);
}

TEST(Accuracy, HalfCountsAsPositive) {
  const std::vector<double> p{0.5};
  EXPECT_DOUBLE_EQ(accuracy(p, std::vector<std::uint8_t>{1}), 100.0);
  EXPECT_DOUBLE_EQ(accuracy(p, std::vector<std::uint8_t>{0}), 0.0);
}

TEST(Accuracy, ContractViolations) {
  EXPECT_THROW(accuracy({}, {}), ContractError);
  const std::vector<double> p{0.1, 0.2};
  EXPECT_THROW(accuracy(p, std::vector<std::uint8_t>{1}), ContractError);
}

TEST(Calibration, SingleBucketExample) {
  const std::vector<double> p(10, 0.65);
  const std::vector<std::uint8_t> y{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const CalibrationReport r = calibration(p, y, 10);
  ASSERT_EQ(r.buckets.size(), 10u);
  const auto& b = r.buckets[6];
  EXPECT_EQ(b.count, 10u);
  EXPECT_DOUBLE_EQ(b.mean_pred, 0.65);
  EXPECT_DOUBLE_EQ(b.freq, 0.6);
  EXPECT_NEAR(r.ece, 0.05, 1e-15);
}

TEST(Calibration, BucketEdges) {
  const std::vector<double> p{0.0, 0.1, 0.3, 0.7, 0.9999, 1.0};
  const std::vector<std::uint8_t> y(6, 1);
  const CalibrationReport r = calibration(p, y, 10);
  EXPECT_EQ(r.buckets[0].count, 1u);
  EXPECT_EQ(r.buckets[1].count, 1u);
  EXPECT_EQ(r.buckets[3].count, 1u);
  EXPECT_EQ(r.buckets[7].count, 1u);
  EXPECT_EQ(r.buckets[9].count, 2u);
  EXPECT_EQ(r.total(), 6u);
  EXPECT_THROW(calibration(std::vector<double>{1.5}, std::vector<std::uint8_t>{1}), ContractError);
  EXPECT_THROW(calibration({}, {}), ContractError);
}

TEST(Calibration, CalibratedPredictorHasSmallError) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> p(100000);
  std::vector<std::uint8_t> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng);
    y[i] = u(rng) < p[i] ? 1 : 0;
  }
  const CalibrationReport r = calibration(p, y);
  EXPECT_LT(r.ece, 0.02);
  EXPECT_EQ(r.total(), p.size());
}

TEST(Calibration, CountsAddUnderConcatenation) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> a(300), b(500);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng) * u(rng);
  std::vector<std::uint8_t> ya(a.size(), 1), yb(b.size(), 0);
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  std::vector<std::uint8_t> yab = ya;
  yab.insert(yab.end(), yb.begin(), yb.end());
  const auto ra = calibration(a, ya), rb = calibration(b, yb), rab = calibration(ab, yab);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(rab.buckets[k].count, ra.buckets[k].count + rb.buckets[k].count);
    if (rab.buckets[k].count) {
      const double freq = double(ra.buckets[k].count) / double(rab.buckets[k].count);
      EXPECT_NEAR(rab.buckets[k].freq, freq, 1e-15);
    }
  }
}

TEST(Report, CalibrationCsvRoundTrip) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> p(1000);
  std::vector<std::uint8_t> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(rng) * 0.6;
    y[i] = u(rng) < 0.3;
  }
  const CalibrationReport r = calibration(p, y);
  const auto path = temp_path("calibration.csv");
  write_calibration_csv(r, path);
  EXPECT_EQ(read_calibration_csv(path), r);
  std::ofstream(path) << "lower,upper\n0,1\n";
  EXPECT_THROW(read_calibration_csv(path), FormatError);
  fs::remove(path);
}

TEST(Report, HistoryCsvRoundTrip) {
  History h{{1, 100, 1e-4, 0.6931, 51.25, 50.5}, {2, 200, 9.5e-5, 0.4123456789012345, 80.125, 78.0}};
  const auto path = temp_path("history.csv");
  write_history_csv(h, path);
  EXPECT_EQ(read_history_csv(path), h);
  write_history_csv({}, path);
  EXPECT_TRUE(read_history_csv(path).empty());
  fs::remove(path);
}

TEST(Report, AblationCsvHasOneRowPerConfig) {
  std::vector<AblationRow> rows(3);
  rows[1].flags = AugmentConfig::all();
  rows[2].val_acc = 91.5;
  const auto path = temp_path("ablation.csv");
  write_ablation_csv(rows, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "normalize,symmetrize,mult_pixels,mult_adjust_z,gp_noise,val_acc,train_acc,seed");
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 3);
  fs::remove(path);
}

TEST(Report, CalibratedCurveFollowsDiagonal) {
  CalibrationReport r;
  r.n_buckets = 10;
  for (int b = 0; b < 10; ++b) {
    const double mid = (b + 0.5) / 10;
    r.buckets.push_back({b / 10.0, (b + 1) / 10.0, mid, mid, std::size_t(100 + b)});
  }
  const CalibrationPlotFrame f;
  const std::string svg = calibration_svg(r, f);
  const auto points = polyline_points(svg, "calibration");
  ASSERT_EQ(points.size(), 10u);
  for (const auto& [x, y] : points) {
    const double p = (x - f.left) / f.width;
    EXPECT_NEAR(y, f.y(p), 1.0);
  }
  const auto counts = bar_counts(svg);
  ASSERT_EQ(counts.size(), 10u);
  for (int b = 0; b < 10; ++b) EXPECT_EQ(counts[b], 100 + b);
}

TEST(Report, EmptyBucketsOmittedFromCurveButKeepBars) {
  const std::vector<double> p{0.05, 0.15, 0.95};
  const std::vector<std::uint8_t> y{0, 0, 1};
  const std::string svg = calibration_svg(calibration(p, y));
  EXPECT_EQ(polyline_points(svg, "calibration").size(), 3u);
  const auto counts = bar_counts(svg);
  ASSERT_EQ(counts.size(), 10u);
  EXPECT_EQ(counts[0], 1);
  EXPECT_EQ(counts[5], 0);
  EXPECT_EQ(counts[9], 1);
}

TEST(Report, HistoryPlotHasBothCurves) {
  History h{{1, 10, 1e-4, 0.7, 55, 52}, {2, 20, 1e-4, 0.5, 70, 68}, {3, 30, 1e-4, 0.4, 80, 77}};
  const std::string svg = history_svg(h);
  EXPECT_EQ(polyline_points(svg, "train_acc").size(), 3u);
  EXPECT_EQ(polyline_points(svg, "val_acc").size(), 3u);
}

TEST(Report, UnwritablePathIsIoError) {
  const std::string path = "/nonexistent-dir/sub/plot.svg";
  EXPECT_THROW(write_text_file(path, "x"), IoError);
  EXPECT_THROW(write_calibration_csv(CalibrationReport{}, path), IoError);
}

TEST(Ablation, ZeroEpochsGivesUntrainedAccuracy) {
  SceneParams sp;
  sp.seed = 4;
  const Dataset d = generate_synthetic(sp, 80);
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 3;
  const std::vector<AugmentConfig> rows{AugmentConfig::normalize_only()};
  const auto result = ablation_grid(d, rows, tc, small_config(), 0.75);
  ASSERT_EQ(result.size(), 1u);
  const Split s = split(d, {SplitKind::image, 0.75, 3});
  auto fresh = Model<float>::build(small_config());
  EXPECT_EQ(result[0].val_acc, accuracy(predict(fresh, d, s.val), labels_at(d, s.val)));
  EXPECT_EQ(result[0].seed, 3u);
}

TEST(Ablation, DuplicateRowsAgree) {
  SceneParams sp;
  sp.seed = 4;
  const Dataset d = generate_synthetic(sp, 80);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.base_lr = 1e-3;
  tc.seed = 5;
  const std::vector<AugmentConfig> rows{AugmentConfig::all(), AugmentConfig::all()};
  const auto result = ablation_grid(d, rows, tc, small_config(), 0.75);
  ASSERT_EQ(result.size(), 2u);
  EXPECT_EQ(result[0].val_acc, result[1].val_acc);
  EXPECT_EQ(result[0].train_acc, result[1].train_acc);
}

TEST(Predict, BatchSizeDoesNotChangeProbabilities) {
  SceneParams sp;
  sp.seed = 8;
  const Dataset d = generate_synthetic(sp, 30);
  auto m = Model<float>::build(small_config());
  m.input_stats = NormStats{0.02, 0.02};
  std::vector<std::size_t> pos(d.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  const auto a = predict(m, d, pos, 7);
  const auto b = predict(m, d, pos, 256);
  ASSERT_EQ(a.size(), d.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}
