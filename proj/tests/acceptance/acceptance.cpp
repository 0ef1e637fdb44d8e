// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>

#include "gqcnn/augment.hpp"
#include "gqcnn/bicubic.hpp"
#include "gqcnn/data.hpp"
#include "gqcnn/eval.hpp"
#include "gqcnn/ops.hpp"
#include "gqcnn/optim.hpp"
#include "gqcnn/report.hpp"
#include "gqcnn/self_check.hpp"
#include "support/oracles.hpp"

using namespace gqcnn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Validation accuracy of the reference run (default architecture, 20k
// examples, image split, 2 epochs) minus one point.
constexpr double kToyAccuracyFloor = 91.2;
constexpr int kToyEpochs = 2;
constexpr std::size_t kToyExamples = 20000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SceneParams toy_scene() {
  SceneParams p;
  p.seed = 1;
  return p;
}

const Dataset& toy_dataset() {
  static const Dataset d = generate_synthetic(toy_scene(), kToyExamples);
  return d;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = Clock::now();
  double worst = 0;
  std::string worst_name;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const auto& list : {check_primitives(seed), check_model(seed)}) {
      for (const auto& r : list) {
        if (!(r.max_error <= worst)) {
          worst = r.max_error;
          worst_name = r.name;
        }
      }
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-4 && t < 120,
          "100 seeds, max relative error " + fmt("%.3g", worst) + " (" + worst_name + "), " + fmt("%.1f s", t)};
}

oracle::Array4 random_array(int n, int c, int h, int w, Rng& rng) {
  std::normal_distribution<double> normal;
  oracle::Array4 a(n, c, h, w);
  for (auto& v : a.v) v = normal(rng);
  return a;
}

Tensor<double> to_tensor(const oracle::Array4& a) {
  Storage<double> s(static_cast<Index>(a.v.size()));
  for (std::size_t i = 0; i < a.v.size(); ++i) s[static_cast<Index>(i)] = a.v[i];
  return Tensor<double>({a.n, a.c, a.h, a.w}, s);
}

bool same_bits(const Tensor<double>& t, const std::vector<double>& v) {
  if (static_cast<std::size_t>(t.size()) != v.size()) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (t[static_cast<Index>(i)] != v[i]) return false;
  }
  return true;
}

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  Rng rng(2024);
  std::size_t cases = 0, mismatches = 0;
  std::string first_bad;
  auto note = [&](bool ok, const std::string& what) {
    ++cases;
    if (!ok && mismatches++ == 0) first_bad = what;
  };

  for (int n = 1; n <= 2; ++n)
    for (int c = 1; c <= 3; ++c)
      for (int f = 1; f <= 2; ++f)
        for (int h = 1; h <= 8; ++h)
          for (int w = 1; w <= 8; ++w)
            for (int pad = 0; pad <= 2; ++pad)
              for (int kh = 1; kh <= std::min(8, h + 2 * pad); ++kh)
                for (int kw = 1; kw <= std::min(8, w + 2 * pad); ++kw)
                  for (int stride = 1; stride <= 3; ++stride) {
                    const auto x = random_array(n, c, h, w, rng);
                    const auto k = random_array(f, c, kh, kw, rng);
                    const auto y = conv2d(to_tensor(x), to_tensor(k), stride, pad);
                    note(same_bits(y, oracle::conv2d(x, k, stride, pad).v),
                         "conv2d " + std::to_string(h) + "x" + std::to_string(w) + " k" + std::to_string(kh) + "x" +
                             std::to_string(kw));
                  }
  const std::size_t conv_cases = cases;

  for (int n = 1; n <= 2; ++n)
    for (int c = 1; c <= 3; ++c)
      for (int h = 1; h <= 8; ++h)
        for (int w = 1; w <= 8; ++w)
          for (int window = 1; window <= std::min(h, w); ++window)
            for (int stride = 1; stride <= 3; ++stride) {
              const auto x = random_array(n, c, h, w, rng);
              note(same_bits(maxpool2d(to_tensor(x), window, stride), oracle::maxpool2d(x, window, stride).v),
                   "maxpool2d " + std::to_string(h) + "x" + std::to_string(w));
            }
  const std::size_t pool_cases = cases - conv_cases;

  std::normal_distribution<double> normal;
  for (int n = 1; n <= 8; ++n)
    for (int d = 1; d <= 8; ++d)
      for (int k = 1; k <= 8; ++k) {
        std::vector<double> x(std::size_t(n) * d), w(std::size_t(d) * k), b(static_cast<std::size_t>(k));
        for (std::vector<double>* v : {&x, &w, &b})
          for (auto& e : *v) e = normal(rng);
        auto tensor = [](const std::vector<double>& v, Shape s) {
          return Tensor<double>(std::move(s), Eigen::Map<const Storage<double>>(v.data(), Index(v.size())));
        };
        const auto y = dense(tensor(x, {n, d}), tensor(w, {d, k}), tensor(b, {k}));
        note(same_bits(y, oracle::dense(x, w, b, n, d, k)), "dense " + std::to_string(n) + "x" + std::to_string(d));
      }
  const std::size_t dense_cases = cases - conv_cases - pool_cases;

  const double t = seconds_since(start);
  std::string detail = std::to_string(conv_cases) + " conv2d, " + std::to_string(pool_cases) + " maxpool2d, " +
                       std::to_string(dense_cases) + " dense shapes, " + std::to_string(mismatches) +
                       " mismatches, " + fmt("%.1f s", t);
  if (mismatches) detail += "; first: " + first_bad;
  return {mismatches == 0 && t < 60, detail};
}

Outcome augmentation_statistics() {
  const AugmentConfig config = AugmentConfig::all();
  Rng rng(derive_seed({3, 0x61756720}));
  const int draws = 1000000;
  double sum = 0, sum_sq = 0;
  std::vector<double> gains(draws);
  std::size_t vertical = 0, horizontal = 0, gp = 0;
  for (int i = 0; i < draws; ++i) {
    const AugmentDraws d = draw_augmentations(rng, config);
    gains[std::size_t(i)] = d.gain;
    sum += d.gain;
    vertical += d.flips.vertical;
    horizontal += d.flips.horizontal;
    gp += d.gp.applied;
  }
  const double mean = sum / draws;
  for (double g : gains) sum_sq += (g - mean) * (g - mean);
  const double sd = std::sqrt(sum_sq / draws);
  const double rv = double(vertical) / draws, rh = double(horizontal) / draws, rg = double(gp) / draws;

  // Bicubic: constants reproduced, and the operator is linear.
  double const_err = 0, lin_err = 0;
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    const double level = normal(rng);
    const Eigen::MatrixXd flat = bicubic_upsample(Eigen::MatrixXd::Constant(8, 8, level), 32, 32);
    const_err = std::max(const_err, (flat.array() - level).abs().maxCoeff());
    Eigen::MatrixXd a(8, 8), b(8, 8);
    for (Eigen::Index i = 0; i < 64; ++i) {
      a.data()[i] = normal(rng);
      b.data()[i] = normal(rng);
    }
    const double alpha = normal(rng), beta = normal(rng);
    const Eigen::MatrixXd lhs = bicubic_upsample(Eigen::MatrixXd(alpha * a + beta * b), 32, 32);
    const Eigen::MatrixXd rhs = alpha * bicubic_upsample(a, 32, 32) + beta * bicubic_upsample(b, 32, 32);
    lin_err = std::max(lin_err, (lhs - rhs).cwiseAbs().maxCoeff());
  }

  const bool pass = std::abs(mean - 1) <= 1e-4 && std::abs(sd - 0.0316) <= 0.05 * 0.0316 &&
                    std::abs(rv - 0.5) <= 0.005 && std::abs(rh - 0.5) <= 0.005 && std::abs(rg - 0.5) <= 0.005 &&
                    const_err <= 1e-6 && lin_err <= 1e-6;
  return {pass, "gamma mean " + fmt("%.6f", mean) + " std " + fmt("%.5f", sd) + ", flip rates " + fmt("%.4f", rv) +
                    "/" + fmt("%.4f", rh) + ", GP rate " + fmt("%.4f", rg) + ", bicubic constant error " +
                    fmt("%.2g", const_err) + " linearity error " + fmt("%.2g", lin_err)};
}

Outcome label_consistency() {
  SceneParams params;
  params.seed = 4;
  const Dataset d = generate_synthetic(params, 10000);
  Rng rng(derive_seed({4, 0x7a}));
  std::size_t agree = 0, positives = 0;
  for (const auto& e : d) {
    const double g = sample_gamma_factor(rng, 1000, 0.001);
    const Heightmap scaled = (e.image.cast<double>() * g).cast<float>();
    const auto original = label_oracle(e.image, e.z, params);
    agree += label_oracle(scaled, g * double(e.z), params.scaled(g)) == original ? 1 : 0;
    positives += original;
  }
  return {agree == d.size(), std::to_string(agree) + "/" + std::to_string(d.size()) + " labels unchanged (" +
                                 std::to_string(positives) + " positive)"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome split_protocol() {
  const Dataset& d = toy_dataset();
  const fs::path dir = fs::temp_directory_path() / "gqcnn_acceptance_split";
  fs::create_directories(dir);
  bool ok = true;
  std::string detail;
  for (SplitKind kind : {SplitKind::image, SplitKind::pose, SplitKind::object}) {
    auto key = [&](const GraspExample& e) {
      switch (kind) {
        case SplitKind::image:
          return std::make_pair(e.image_id, std::uint64_t(0));
        case SplitKind::pose:
          return std::make_pair(e.object_id, e.pose_id);
        default:
          return std::make_pair(e.object_id, std::uint64_t(0));
      }
    };
    const SplitSpec spec{kind, 0.8, 7};
    const Split s = split(d, spec);
    std::set<std::pair<std::uint64_t, std::uint64_t>> train_keys;
    for (auto i : s.train) train_keys.insert(key(d[i]));
    std::size_t leaks = 0;
    for (auto i : s.val) leaks += train_keys.count(key(d[i]));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    std::sort(all.begin(), all.end());
    bool exhaustive = all.size() == d.size();
    for (std::size_t i = 0; exhaustive && i < all.size(); ++i) exhaustive = all[i] == i;

    const auto a = dir / (to_string(kind) + "_a.csv"), b = dir / (to_string(kind) + "_b.csv");
    write_split(d, s, a.string());
    write_split(d, split(d, spec), b.string());
    const bool identical = slurp(a) == slurp(b);

    ok = ok && leaks == 0 && exhaustive && identical;
    detail += (detail.empty() ? "" : "; ") + to_string(kind) + ": " + std::to_string(s.train.size()) + "/" +
              std::to_string(s.val.size()) + ", " + std::to_string(leaks) + " leaked, " +
              (exhaustive ? "exhaustive" : "NOT exhaustive") + ", " + (identical ? "identical" : "DIFFERENT");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

Outcome calibration_correctness() {
  Rng rng(derive_seed({6, 0x63616c}));
  const std::vector<double> levels{0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
  std::uniform_int_distribution<std::size_t> pick(0, levels.size() - 1);
  std::uniform_real_distribution<double> unit(0, 1);
  std::vector<double> p(100000);
  std::vector<std::uint8_t> y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = levels[pick(rng)];
    y[i] = unit(rng) < p[i] ? 1 : 0;
  }
  const double ece = calibration(p, y, 10).ece;

  const std::vector<double> example(10, 0.65);
  const std::vector<std::uint8_t> labels{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const auto report = calibration(example, labels, 10);
  const auto& bucket = report.buckets[6];
  // Ten additions of 0.65 round, so compare to within a few ulps.
  const bool worked = bucket.count == 10 && std::abs(bucket.freq - 0.6) < 1e-12 &&
                      std::abs(bucket.mean_pred - 0.65) < 1e-12 && std::abs(report.ece - 0.05) < 1e-12;
  return {ece < 0.02 && worked, "Monte-Carlo ECE " + fmt("%.5f", ece) + "; worked example freq " +
                                    fmt("%.6f", bucket.freq) + " at mean_pred " + fmt("%.6f", bucket.mean_pred) +
                                    ", ECE " + fmt("%.6f", report.ece)};
}

ModelConfig ablation_model() {
  ModelConfig c;
  c.image_tower = {LayerSpec::conv(16, 5), LayerSpec::conv(16, 5), LayerSpec::maxpool(2, 2)};
  c.merge_channels = 4;
  c.merge = LayerSpec::conv(16, 3);
  c.post_merge = {LayerSpec::conv(16, 3), LayerSpec::conv(16, 3)};
  c.head = {64, 2};
  return c;
}

Outcome toy_training() {
  const auto start = Clock::now();
  const Dataset& d = toy_dataset();
  const Split s = split(d, {SplitKind::image, 0.8, 1});
  auto model = Model<float>::build(ModelConfig::defaults());
  TrainConfig config;
  config.epochs = kToyEpochs;
  config.batch_size = 128;
  config.seed = 1;
  std::string epochs;
  const History h = train(model, d, s, AugmentConfig::normalize_only(), config, [&](const EpochRecord& r) {
    std::printf("    epoch %d: loss %.4f, train %.2f%%, val %.2f%%, %.0f s\n", r.epoch, r.train_loss, r.train_acc,
                r.val_acc, seconds_since(start));
    std::fflush(stdout);
  });
  const double t = seconds_since(start);
  const double val = h.back().val_acc;

  // Companion ablation on a smaller network and subset: reported only.
  const auto ablation_start = Clock::now();
  const Dataset subset(d.begin(), d.begin() + 4000);
  TrainConfig ablation_config;
  ablation_config.epochs = 3;
  ablation_config.batch_size = 64;
  ablation_config.base_lr = 1e-3;
  ablation_config.seed = 1;
  std::vector<AugmentConfig> rows(6);
  rows[1].symmetrize = true;
  rows[2].mult_pixels = true;
  rows[3].mult_pixels = rows[3].mult_adjust_z = true;
  rows[4].gp_noise = true;
  rows[5] = AugmentConfig::all();
  const auto results = ablation_grid(subset, rows, ablation_config, ablation_model());
  write_ablation_csv(results, "acceptance_ablation.csv");
  std::printf("    ablation (%.0f s, written to acceptance_ablation.csv):\n", seconds_since(ablation_start));
  for (const auto& r : results) {
    std::printf("      sym=%d mult=%d adjust_z=%d gp=%d  val %.2f%%  train %.2f%%\n", r.flags.symmetrize,
                r.flags.mult_pixels, r.flags.mult_adjust_z, r.flags.gp_noise, r.val_acc, r.train_acc);
  }

  return {val >= kToyAccuracyFloor && t < 1200,
          std::to_string(kToyEpochs) + " epochs, validation accuracy " + fmt("%.2f%%", val) + " (floor " +
              fmt("%.2f%%", kToyAccuracyFloor) + "), " + fmt("%.0f s", t)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GQCNN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string manifest_line(const fs::path& manifest, const std::string& file) {
  std::istringstream in(slurp(manifest));
  for (std::string line; std::getline(in, line);) {
    if (line.size() > file.size() && line.compare(line.size() - file.size(), file.size(), file) == 0) return line;
  }
  return {};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "gqcnn_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  KeyValueConfig kv;
  write_config(kv, ablation_model());
  kv.set_int("data.n", 1000);
  kv.set_uint("data.seed", 8);
  kv.set("split.kind", "pose");
  kv.set_real("split.fraction", 0.8);
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 32;
  t.base_lr = 1e-3;
  t.seed = 5;
  write_config(kv, t);
  write_config(kv, AugmentConfig::all());
  std::ofstream((dir / "run.ini").string()) << kv.to_string();
  const std::string config = (dir / "run.ini").string();

  if (run_cli("generate-data --config " + config + " --out " + (dir / "data").string()) != 0) {
    return {false, "generate-data failed"};
  }
  const std::string train = "train --config " + config + " --data " + (dir / "data" / "dataset.gfd").string();
  if (run_cli(train + " --out " + (dir / "a").string()) != 0 || run_cli(train + " --out " + (dir / "b").string()) != 0) {
    return {false, "train failed"};
  }
  bool ok = true;
  std::string detail;
  for (const std::string file : {"history.csv", "model.gfm"}) {
    const auto a = manifest_line(dir / "a" / "manifest.txt", file);
    const auto b = manifest_line(dir / "b" / "manifest.txt", file);
    const bool same = !a.empty() && a == b && slurp(dir / "a" / file) == slurp(dir / "b" / file);
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + file + " " + (same ? a.substr(0, 16) + " on both runs" : "DIFFERS");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"augmentation statistics", augmentation_statistics},
      {"z-adjustment label consistency", label_consistency},
      {"split protocol", split_protocol},
      {"calibration correctness", calibration_correctness},
      {"end-to-end toy training", toy_training},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::printf("criterion %d %s: %s - %s [%.1f s]\n", number, outcome.pass ? "PASS" : "FAIL",
                criteria[i].first.c_str(), outcome.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
