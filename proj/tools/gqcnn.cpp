// gqcnn: data generation, splitting, training, evaluation, calibration,
// augmentation ablation, augmentation preview and gradient self-check.
//
// Exit status: 0 success, 1 invalid invocation or configuration, 2 failure
// while running.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "gqcnn/augment.hpp"
#include "gqcnn/data.hpp"
#include "gqcnn/eval.hpp"
#include "gqcnn/optim.hpp"
#include "gqcnn/report.hpp"
#include "gqcnn/self_check.hpp"

namespace fs = std::filesystem;
using namespace gqcnn;

namespace {

// Bad input detected before any output is written.
struct UsageError : Error {
  using Error::Error;
};

std::uint64_t fnv1a64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// manifest.txt: "<fnv1a-64 hex>  <file>" for every listed output, sorted.
void write_manifest(const fs::path& dir, std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  std::ostringstream out;
  for (const auto& f : files) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64((dir / f).string())));
    out << hex << "  " << f << '\n';
  }
  write_text_file((dir / "manifest.txt").string(), out.str());
}

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file: " + path);
}

fs::path prepare_out(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out is required");
  fs::create_directories(dir);
  return dir;
}

// Settings come from --config first; any flag given on the command line
// overrides the corresponding key.
struct Settings {
  std::string config_path;
  KeyValueConfig kv;

  void load() {
    if (!config_path.empty()) {
      require_file(config_path, "--config");
      kv = KeyValueConfig::load(config_path);
    }
  }
};

template <typename T>
void override_key(KeyValueConfig& kv, const CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() == 0) return;
  if constexpr (std::is_same_v<T, double>) {
    kv.set_real(key, value);
  } else if constexpr (std::is_same_v<T, std::string>) {
    kv.set(key, value);
  } else if constexpr (std::is_unsigned_v<T>) {
    kv.set_uint(key, value);
  } else {
    kv.set_int(key, value);
  }
}

std::uint64_t require_seed(const KeyValueConfig& kv, const std::string& key) {
  auto seed = kv.get_uint(key);
  if (!seed) throw UsageError("a seed is required (--seed or " + key + " in the config file)");
  return *seed;
}

Split split_from(const Dataset& data, const KeyValueConfig& kv, const std::string& split_path,
                 std::uint64_t seed) {
  if (!split_path.empty()) return read_split(data, split_path);
  SplitSpec spec;
  spec.kind = parse_split_kind(kv.get("split.kind").value_or("image"));
  spec.train_fraction = kv.get_real("split.fraction").value_or(0.8);
  spec.seed = kv.get_uint("split.seed").value_or(seed);
  return split(data, spec);
}

std::vector<std::size_t> positions_for(const std::string& set, const Split& s, std::size_t n) {
  if (set == "val") return s.val;
  if (set == "train") return s.train;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return all;
}

void write_pgm16(const Heightmap& image, double lo, double hi, const std::string& path) {
  std::ostringstream out;
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      const double t = std::clamp((image(r, c) - lo) / span, 0.0, 1.0);
      const auto v = static_cast<std::uint16_t>(std::lround(t * 65535));
      out.put(static_cast<char>(v >> 8)).put(static_cast<char>(v & 0xff));
    }
  }
  write_text_file(path, out.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasp-quality CNN toolkit"};
  app.require_subcommand(1);

  Settings settings;
  std::string data_path, split_path, model_path, out_dir, set = "val", grid_path;
  std::uint64_t seed = 0;
  std::string kind = "image";
  double fraction = 0.8, lr = 0;
  long long n = 0;
  int epochs = 0, batch_size = 0, buckets = 10, count = 8, trials = 1;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", settings.config_path, "Key-value config file ([section] key=value)");
  };

  auto* gen = app.add_subcommand("generate-data", "Render a synthetic grasp dataset");
  add_config(gen);
  auto* gen_n = gen->add_option("--n", n, "Number of examples");
  auto* gen_seed = gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* spl = app.add_subcommand("split", "Partition a dataset into train and validation sets");
  add_config(spl);
  spl->add_option("--data", data_path, "Dataset file")->required();
  auto* spl_kind = spl->add_option("--kind", kind, "image, pose or object");
  auto* spl_frac = spl->add_option("--fraction", fraction, "Training fraction of the keys");
  auto* spl_seed = spl->add_option("--seed", seed, "Random seed");
  spl->add_option("--out", out_dir, "Output directory")->required();

  auto* trn = app.add_subcommand("train", "Train a model");
  add_config(trn);
  trn->add_option("--data", data_path, "Dataset file")->required();
  trn->add_option("--split", split_path, "Split file (otherwise split by --kind)");
  auto* trn_kind = trn->add_option("--kind", kind, "image, pose or object");
  auto* trn_frac = trn->add_option("--fraction", fraction, "Training fraction of the keys");
  auto* trn_epochs = trn->add_option("--epochs", epochs, "Epochs");
  auto* trn_batch = trn->add_option("--batch-size", batch_size, "Mini-batch size");
  auto* trn_lr = trn->add_option("--lr", lr, "Base learning rate");
  auto* trn_seed = trn->add_option("--seed", seed, "Random seed");
  trn->add_option("--out", out_dir, "Output directory")->required();

  auto* evl = app.add_subcommand("evaluate", "Accuracy of a trained model");
  evl->add_option("--model", model_path, "Checkpoint")->required();
  evl->add_option("--data", data_path, "Dataset file")->required();
  evl->add_option("--split", split_path, "Split file");
  evl->add_option("--set", set, "val, train or all")->check(CLI::IsMember({"val", "train", "all"}));
  evl->add_option("--out", out_dir, "Output directory");

  auto* cal = app.add_subcommand("calibrate", "Reliability diagram and expected calibration error");
  cal->add_option("--model", model_path, "Checkpoint")->required();
  cal->add_option("--data", data_path, "Dataset file")->required();
  cal->add_option("--split", split_path, "Split file");
  cal->add_option("--set", set, "val, train or all")->check(CLI::IsMember({"val", "train", "all"}));
  cal->add_option("--buckets", buckets, "Number of equal-width buckets");
  cal->add_option("--out", out_dir, "Output directory")->required();

  auto* abl = app.add_subcommand("ablate", "Train one model per augmentation setting");
  add_config(abl);
  abl->add_option("--data", data_path, "Dataset file")->required();
  abl->add_option("--grid,--grid-file", grid_path, "Grid file: one [section] of augment keys per row");
  auto* abl_epochs = abl->add_option("--epochs", epochs, "Epochs per row");
  auto* abl_seed = abl->add_option("--seed", seed, "Random seed");
  abl->add_option("--out", out_dir, "Output directory")->required();

  auto* prv = app.add_subcommand("augment-preview", "Write raw and augmented crops as 16-bit PGM");
  add_config(prv);
  prv->add_option("--data", data_path, "Dataset file")->required();
  prv->add_option("--count", count, "Number of examples");
  auto* prv_seed = prv->add_option("--seed", seed, "Random seed");
  prv->add_option("--out", out_dir, "Output directory")->required();

  auto* grd = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  grd->add_option("--seed", seed, "Random seed");
  grd->add_option("--trials", trials, "Number of seeded trials")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    auto& kv = settings.kv;

    if (*gen) {
      settings.load();
      override_key(kv, gen_n, "data.n", static_cast<std::int64_t>(n));
      override_key(kv, gen_seed, "data.seed", seed);
      const auto examples = kv.get_int("data.n");
      if (!examples || *examples <= 0) throw UsageError("--n must be a positive example count");
      SceneParams params;
      params.seed = require_seed(kv, "data.seed");
      validate(params);
      const Dataset data = generate_synthetic(params, static_cast<std::size_t>(*examples));
      const auto dir = prepare_out(out_dir);
      save_dataset(data, (dir / "dataset.gfd").string());
      write_manifest(dir, {"dataset.gfd"});
      std::cout << data.size() << " examples\n";
      return 0;
    }

    if (*spl) {
      settings.load();
      override_key(kv, spl_kind, "split.kind", kind);
      override_key(kv, spl_frac, "split.fraction", fraction);
      override_key(kv, spl_seed, "split.seed", seed);
      require_file(data_path, "--data");
      require_seed(kv, "split.seed");
      const Dataset data = load_dataset(data_path);
      const Split s = split_from(data, kv, "", 0);
      const auto dir = prepare_out(out_dir);
      write_split(data, s, (dir / "split.csv").string());
      write_manifest(dir, {"split.csv"});
      std::cout << s.train.size() << " train, " << s.val.size() << " val\n";
      return 0;
    }

    if (*trn) {
      settings.load();
      override_key(kv, trn_kind, "split.kind", kind);
      override_key(kv, trn_frac, "split.fraction", fraction);
      override_key(kv, trn_epochs, "train.epochs", epochs);
      override_key(kv, trn_batch, "train.batch_size", batch_size);
      override_key(kv, trn_lr, "train.base_lr", lr);
      override_key(kv, trn_seed, "train.seed", seed);
      require_file(data_path, "--data");
      if (!split_path.empty()) require_file(split_path, "--split");
      const auto train_seed = require_seed(kv, "train.seed");
      const TrainConfig train_config = read_train_config(kv);
      validate(train_config);
      const AugmentConfig augment = read_augment_config(kv);
      validate(augment);
      ModelConfig model_config = read_model_config(kv);
      if (!kv.has("model.init_seed")) model_config.init_seed = train_seed;
      validate(model_config);
      const Dataset data = load_dataset(data_path);
      const Split s = split_from(data, kv, split_path, train_seed);

      auto model = Model<float>::build(model_config);
      const History history = train(model, data, s, augment, train_config, [](const EpochRecord& r) {
        std::cout << "epoch " << r.epoch << "  step " << r.step << "  loss " << r.train_loss << "  train "
                  << r.train_acc << "%  val " << r.val_acc << "%\n"
                  << std::flush;
      });

      const auto dir = prepare_out(out_dir);
      KeyValueConfig effective;
      write_config(effective, train_config);
      write_config(effective, augment);
      write_config(effective, model_config);
      save_model(model, (dir / "model.gfm").string());
      write_history_csv(history, (dir / "history.csv").string());
      write_history_svg(history, (dir / "history.svg").string());
      write_split(data, s, (dir / "split.csv").string());
      write_text_file((dir / "run.ini").string(), effective.to_string());
      write_manifest(dir, {"model.gfm", "history.csv", "history.svg", "split.csv", "run.ini"});
      return 0;
    }

    if (*evl || *cal) {
      require_file(model_path, "--model");
      require_file(data_path, "--data");
      if (!split_path.empty()) require_file(split_path, "--split");
      if (set != "all" && split_path.empty()) throw UsageError("--split is required unless --set all");
      if (*cal && buckets < 2) throw UsageError("--buckets must be at least 2");
      auto model = load_model<float>(model_path);
      const Dataset data = load_dataset(data_path);
      const Split s = split_path.empty() ? Split{} : read_split(data, split_path);
      const auto positions = positions_for(set, s, data.size());
      const auto probs = predict(model, data, positions);
      const auto labels = labels_at(data, positions);

      if (*evl) {
        const double acc = accuracy(probs, labels);
        std::cout << "accuracy " << format_real(acc) << "% over " << positions.size() << " examples\n";
        if (!out_dir.empty()) {
          const auto dir = prepare_out(out_dir);
          KeyValueConfig metrics;
          metrics.set_real("eval.accuracy", acc);
          metrics.set_uint("eval.count", positions.size());
          metrics.set("eval.set", set);
          write_text_file((dir / "metrics.ini").string(), metrics.to_string());
          write_manifest(dir, {"metrics.ini"});
        }
        return 0;
      }
      const auto report = calibration(probs, labels, buckets);
      const auto dir = prepare_out(out_dir);
      write_calibration_csv(report, (dir / "calibration.csv").string());
      write_calibration_svg(report, (dir / "calibration.svg").string());
      write_manifest(dir, {"calibration.csv", "calibration.svg"});
      std::cout << "ECE " << format_real(report.ece) << " over " << report.total() << " examples\n";
      return 0;
    }

    if (*abl) {
      settings.load();
      override_key(kv, abl_epochs, "train.epochs", epochs);
      override_key(kv, abl_seed, "train.seed", seed);
      require_file(data_path, "--data");
      const auto train_seed = require_seed(kv, "train.seed");
      const TrainConfig train_config = read_train_config(kv);
      validate(train_config);
      ModelConfig model_config = read_model_config(kv);
      if (!kv.has("model.init_seed")) model_config.init_seed = train_seed;
      validate(model_config);

      std::vector<AugmentConfig> rows;
      if (grid_path.empty()) {
        AugmentConfig base;
        rows.push_back(base);
        auto with = [&](auto set_flag) {
          AugmentConfig c = base;
          set_flag(c);
          rows.push_back(c);
        };
        with([](AugmentConfig& c) { c.symmetrize = true; });
        with([](AugmentConfig& c) { c.mult_pixels = true; });
        with([](AugmentConfig& c) { c.mult_pixels = c.mult_adjust_z = true; });
        with([](AugmentConfig& c) { c.gp_noise = true; });
        rows.push_back(AugmentConfig::all());
      } else {
        require_file(grid_path, "--grid");
        const auto grid = KeyValueConfig::load(grid_path);
        for (const auto& section : grid.sections()) rows.push_back(read_augment_config(grid, section));
        if (rows.empty()) throw UsageError("grid file has no rows: " + grid_path);
      }
      for (const auto& r : rows) validate(r);
      const Dataset data = load_dataset(data_path);
      const auto fraction_key = kv.get_real("split.fraction").value_or(0.8);
      const auto results = ablation_grid(data, rows, train_config, model_config, fraction_key);
      const auto dir = prepare_out(out_dir);
      write_ablation_csv(results, (dir / "ablation.csv").string());
      write_manifest(dir, {"ablation.csv"});
      return 0;
    }

    if (*prv) {
      settings.load();
      override_key(kv, prv_seed, "augment.seed", seed);
      require_file(data_path, "--data");
      const auto preview_seed = require_seed(kv, "augment.seed");
      const auto sections = kv.sections();
      const bool configured = std::find(sections.begin(), sections.end(), "augment") != sections.end();
      const AugmentConfig augment = configured ? read_augment_config(kv) : AugmentConfig::all();
      validate(augment);
      if (count <= 0) throw UsageError("--count must be positive");
      const Dataset data = load_dataset(data_path);
      const auto shown = std::min<std::size_t>(static_cast<std::size_t>(count), data.size());
      std::optional<NormStats> stats;
      if (augment.normalize) {
        std::vector<Heightmap> images;
        for (const auto& e : data) images.push_back(e.image);
        stats = compute_norm_stats(images);
      }

      const auto dir = prepare_out(out_dir);
      std::vector<std::string> files{"draws.csv"};
      std::ostringstream csv;
      csv << "image_id,flip_vertical,flip_horizontal,gain,gp_applied,z,z_augmented,label,raw_min,raw_max,"
             "augmented_min,augmented_max\n";
      for (std::size_t i = 0; i < shown; ++i) {
        const auto& e = data[i];
        Rng rng = example_stream(preview_seed, e.image_id, 1);
        const AugmentDraws draws = draw_augmentations(rng, augment);
        const ModelInput in = apply_pipeline(e, augment, stats, draws);
        const std::string stem = "example_" + std::to_string(i);
        const double raw_lo = e.image.minCoeff(), raw_hi = e.image.maxCoeff();
        const double aug_lo = in.image.minCoeff(), aug_hi = in.image.maxCoeff();
        write_pgm16(e.image, raw_lo, raw_hi, (dir / (stem + "_raw.pgm")).string());
        write_pgm16(in.image, aug_lo, aug_hi, (dir / (stem + "_augmented.pgm")).string());
        files.push_back(stem + "_raw.pgm");
        files.push_back(stem + "_augmented.pgm");
        csv << e.image_id << ',' << draws.flips.vertical << ',' << draws.flips.horizontal << ','
            << format_real(draws.gain) << ',' << draws.gp.applied << ',' << format_real(e.z) << ','
            << format_real(in.z) << ',' << int(e.label) << ',' << format_real(raw_lo) << ','
            << format_real(raw_hi) << ',' << format_real(aug_lo) << ',' << format_real(aug_hi) << '\n';
      }
      write_text_file((dir / "draws.csv").string(), csv.str());
      write_manifest(dir, files);
      return 0;
    }

    if (*grd) {
      std::map<std::string, double> worst;
      std::vector<std::string> order;
      for (int t = 0; t < trials; ++t) {
        const auto trial_seed = seed + static_cast<std::uint64_t>(t);
        auto results = check_primitives(trial_seed);
        const auto model_results = check_model(trial_seed);
        results.insert(results.end(), model_results.begin(), model_results.end());
        for (const auto& r : results) {
          if (!worst.count(r.name)) order.push_back(r.name);
          worst[r.name] = std::max(worst[r.name], r.max_error);
        }
      }
      bool ok = true;
      for (const auto& name : order) {
        const bool pass = worst[name] < 1e-4;
        ok = ok && pass;
        std::printf("%-40s %.3e %s\n", name.c_str(), worst[name], pass ? "ok" : "FAIL");
      }
      return ok ? 0 : 2;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const SplitError& e) {
    std::cerr << "split error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
