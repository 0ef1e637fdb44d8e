#include "gqcnn/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gqcnn/kv_config.hpp"

namespace gqcnn {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw FormatError(path + ": expected header \"" + header + "\"");
  }
  const auto columns = split_fields(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != columns) {
      throw FormatError(path + ": row " + std::to_string(rows.size() + 2) + " has " +
                        std::to_string(fields.size()) + " fields, expected " + std::to_string(columns));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << contents;
  if (!out) throw IoError("write failed: " + path);
}

void write_calibration_csv(const CalibrationReport& report, const std::string& path) {
  std::ostringstream out;
  out << "lower,upper,mean_pred,freq,count\n";
  for (const auto& b : report.buckets) {
    out << format_real(b.lower) << ',' << format_real(b.upper) << ',' << format_real(b.mean_pred) << ','
        << format_real(b.freq) << ',' << b.count << '\n';
  }
  write_text_file(path, out.str());
}

CalibrationReport read_calibration_csv(const std::string& path) {
  CalibrationReport report;
  try {
    for (const auto& row : read_csv(path, "lower,upper,mean_pred,freq,count")) {
      CalibrationBucket b;
      b.lower = parse_real(row[0], "lower");
      b.upper = parse_real(row[1], "upper");
      b.mean_pred = parse_real(row[2], "mean_pred");
      b.freq = parse_real(row[3], "freq");
      const auto count = parse_int(row[4], "count");
      if (count < 0) throw FormatError(path + ": negative bucket count");
      b.count = static_cast<std::size_t>(count);
      report.buckets.push_back(b);
    }
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  report.n_buckets = static_cast<int>(report.buckets.size());
  report.ece = expected_calibration_error(report.buckets);
  return report;
}

void write_history_csv(const History& history, const std::string& path) {
  std::ostringstream out;
  out << "epoch,step,lr,train_loss,train_acc,val_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.step << ',' << format_real(r.lr) << ',' << format_real(r.train_loss) << ','
        << format_real(r.train_acc) << ',' << format_real(r.val_acc) << '\n';
  }
  write_text_file(path, out.str());
}

History read_history_csv(const std::string& path) {
  History history;
  try {
    for (const auto& row : read_csv(path, "epoch,step,lr,train_loss,train_acc,val_acc")) {
      EpochRecord r;
      r.epoch = static_cast<int>(parse_int(row[0], "epoch"));
      r.step = parse_int(row[1], "step");
      r.lr = parse_real(row[2], "lr");
      r.train_loss = parse_real(row[3], "train_loss");
      r.train_acc = parse_real(row[4], "train_acc");
      r.val_acc = parse_real(row[5], "val_acc");
      history.push_back(r);
    }
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  return history;
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path) {
  std::ostringstream out;
  out << "normalize,symmetrize,mult_pixels,mult_adjust_z,gp_noise,val_acc,train_acc,seed\n";
  for (const auto& r : rows) {
    const auto& f = r.flags;
    out << f.normalize << ',' << f.symmetrize << ',' << f.mult_pixels << ',' << f.mult_adjust_z << ','
        << f.gp_noise << ',' << format_real(r.val_acc) << ',' << format_real(r.train_acc) << ',' << r.seed
        << '\n';
  }
  write_text_file(path, out.str());
}

std::string calibration_svg(const CalibrationReport& report, const CalibrationPlotFrame& f) {
  const double total_height = f.hist_top + f.hist_height + 40;
  const double total_width = f.left + f.width + 20;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(total_width) << "\" height=\""
      << px(total_height) << "\" viewBox=\"0 0 " << px(total_width) << ' ' << px(total_height) << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << px(total_width) << "\" height=\"" << px(total_height)
      << "\" fill=\"white\"/>\n";

  // Upper panel: axes, perfect-calibration diagonal, reliability curve.
  svg << "<rect x=\"" << px(f.left) << "\" y=\"" << px(f.top) << "\" width=\"" << px(f.width)
      << "\" height=\"" << px(f.height) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<line id=\"diagonal\" x1=\"" << px(f.x(0)) << "\" y1=\"" << px(f.y(0)) << "\" x2=\"" << px(f.x(1))
      << "\" y2=\"" << px(f.y(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  svg << "<polyline id=\"calibration\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  bool first = true;
  for (const auto& b : report.buckets) {
    if (b.count == 0) continue;
    svg << (first ? "" : " ") << px(f.x(b.mean_pred)) << ',' << px(f.y(b.freq));
    first = false;
  }
  svg << "\"/>\n";
  for (const auto& b : report.buckets) {
    if (b.count == 0) continue;
    svg << "<circle cx=\"" << px(f.x(b.mean_pred)) << "\" cy=\"" << px(f.y(b.freq))
        << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  svg << "<text x=\"" << px(f.left + f.width / 2) << "\" y=\"" << px(f.top - 5)
      << "\" text-anchor=\"middle\" font-size=\"12\">mean predicted probability vs. success frequency (ECE "
      << px(report.ece) << ")</text>\n";

  // Lower panel: count histogram, one bar per bucket.
  std::size_t max_count = 1;
  for (const auto& b : report.buckets) max_count = std::max(max_count, b.count);
  svg << "<g id=\"counts\">\n";
  for (const auto& b : report.buckets) {
    const double h = f.hist_height * static_cast<double>(b.count) / static_cast<double>(max_count);
    svg << "<rect x=\"" << px(f.x(b.lower)) << "\" y=\"" << px(f.hist_top + f.hist_height - h)
        << "\" width=\"" << px(f.x(b.upper) - f.x(b.lower)) << "\" height=\"" << px(h)
        << "\" fill=\"lightsteelblue\" stroke=\"black\" data-count=\"" << b.count << "\"/>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << px(f.left + f.width / 2) << "\" y=\"" << px(f.hist_top + f.hist_height + 25)
      << "\" text-anchor=\"middle\" font-size=\"12\">predicted probability (counts per bucket)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_calibration_svg(const CalibrationReport& report, const std::string& path) {
  write_text_file(path, calibration_svg(report));
}

std::string history_svg(const History& history) {
  const double left = 60, top = 20, width = 400, height = 300;
  const double epochs = history.empty() ? 1.0 : static_cast<double>(std::max(1, history.back().epoch));
  auto x = [&](double e) { return left + (history.size() <= 1 ? 0.5 : (e - 1) / std::max(1.0, epochs - 1)) * width; };
  auto y = [&](double acc) { return top + (1 - acc / 100.0) * height; };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" viewBox=\"0 0 480 360\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"480\" height=\"360\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(width) << "\" height=\""
      << px(height) << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto curve = [&](const char* id, const char* colour, auto field) {
    svg << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < history.size(); ++i) {
      svg << (i ? " " : "") << px(x(history[i].epoch)) << ',' << px(y(field(history[i])));
    }
    svg << "\"/>\n";
  };
  curve("train_acc", "darkorange", [](const EpochRecord& r) { return r.train_acc; });
  curve("val_acc", "steelblue", [](const EpochRecord& r) { return r.val_acc; });
  svg << "<text x=\"260\" y=\"350\" text-anchor=\"middle\" font-size=\"12\">epoch (orange: train, blue: "
         "validation accuracy %)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_history_svg(const History& history, const std::string& path) {
  write_text_file(path, history_svg(history));
}

}  // namespace gqcnn
