#pragma once

#include <span>
#include <string>

#include "gqcnn/eval.hpp"
#include "gqcnn/optim.hpp"

namespace gqcnn {

// CSV schemas (header row first, reals with 17 significant digits):
//   calibration: lower,upper,mean_pred,freq,count        one row per bucket
//   history:     epoch,step,lr,train_loss,train_acc,val_acc   one row per epoch
//   ablation:    normalize,symmetrize,mult_pixels,mult_adjust_z,gp_noise,val_acc,train_acc,seed

void write_calibration_csv(const CalibrationReport& report, const std::string& path);
/// ECE is recomputed from the buckets.
CalibrationReport read_calibration_csv(const std::string& path);

void write_history_csv(const History& history, const std::string& path);
History read_history_csv(const std::string& path);

void write_ablation_csv(std::span<const AblationRow> rows, const std::string& path);

/// Pixel frame of the calibration plot: probability (x, y) in [0,1]^2 maps
/// into the upper panel; counts go in a histogram panel underneath.
struct CalibrationPlotFrame {
  double left = 60, top = 20, width = 400, height = 300;
  double hist_top = 350, hist_height = 120;

  double x(double p) const { return left + p * width; }
  double y(double p) const { return top + (1 - p) * height; }
};

/// Reliability curve (mean prediction vs. empirical frequency of non-empty
/// buckets) over the diagonal, with a count histogram below. Empty buckets are
/// left out of the curve but keep a zero-height bar.
std::string calibration_svg(const CalibrationReport& report, const CalibrationPlotFrame& frame = {});
void write_calibration_svg(const CalibrationReport& report, const std::string& path);

/// Train and validation accuracy against epoch.
std::string history_svg(const History& history);
void write_history_svg(const History& history, const std::string& path);

/// Writes `contents` to `path`, raising IoError if the file cannot be written.
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace gqcnn
