#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roadblocks/context.hpp"
#include "roadblocks/features.hpp"
#include "roadblocks/model.hpp"
#include "roadblocks/types.hpp"

namespace roadblocks {

/// Pixel counts with road as the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Counts over rows >= ignore_rows. Masks must be 0/255 and equally sized.
ConfusionCounts confusion(const Mask& pred, const Mask& gt, int ignore_rows);

struct Metrics {
  double f_measure = 0, accuracy = 0, precision = 0, recall = 0, fpr = 0, fnr = 0;
};

/// Ratios with a zero denominator are 0. Throws on an empty confusion.
Metrics metrics(const ConfusionCounts& c);

struct MaxFResult {
  double max_f = 0;
  double threshold = 0;             // lowest threshold attaining max_f
  std::vector<double> thresholds;   // i / steps, i = 0..steps
  std::vector<double> curve;        // F at each threshold
};

/// Confusion at every threshold i/steps, pixel positive iff prob >= threshold.
std::vector<ConfusionCounts> sweep_counts(const RealPlane& prob, const Mask& gt, int ignore_rows, int steps = 100);

/// Reduces per-threshold counts (possibly summed over images) to MaxF.
MaxFResult max_f_from_counts(const std::vector<ConfusionCounts>& counts);

MaxFResult max_f_sweep(const RealPlane& prob, const Mask& gt, int ignore_rows, double step = 0.01);

/// 255 where prob >= threshold.
Mask threshold_mask(const RealPlane& prob, double threshold);

/// 50% blend of green (TP), red (FN) and blue (FP) over `rgb`.
RgbImage render_overlay(const RgbImage& rgb, const Mask& pred, const Mask& gt);

/// Nearest-neighbour warp: output pixel (x, y) samples the source at
/// H^-1 (x + 0.5, y + 0.5, 1); `h` maps source to destination coordinates.
/// Samples outside the source are zero (non-road).
template <typename Scalar>
ImagePlane<Scalar> warp_nearest(const ImagePlane<Scalar>& src, const Eigen::Matrix3d& h, int out_width,
                                int out_height) {
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(h);
  if (!lu.isInvertible()) throw std::invalid_argument("warp: homography is singular");
  const Eigen::Matrix3d inv = lu.inverse();
  ImagePlane<Scalar> out(out_width, out_height, src.channels());
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Eigen::Vector3d s = inv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
      if (std::abs(s.z()) < 1e-12) continue;
      const double sx = std::floor(s.x() / s.z()), sy = std::floor(s.y() / s.z());
      if (!(sx >= 0 && sy >= 0 && sx < src.width() && sy < src.height())) continue;
      for (int c = 0; c < src.channels(); ++c) out(x, y, c) = src(static_cast<int>(sx), static_cast<int>(sy), c);
    }
  }
  return out;
}

inline Mask warp_mask(const Mask& mask, const Eigen::Matrix3d& h, int out_width, int out_height) {
  return warp_nearest(mask, h, out_width, out_height);
}

/// Seconds per stage of one image.
struct TimingReport {
  double feature_extraction = 0;    // padding, gray, entropy, LBP, filter responses
  double preprocessing_concat = 0;  // integrals, block features, concatenation, standardization
  double model_prediction = 0;      // forward pass
  double total = 0;
  int radius = 0;
};

struct Prediction {
  Mask mask;       // unpadded, 0/255
  RealPlane prob;  // unpadded, road probability per pixel
};

/// Gives every pixel of each block (unpadded, cropped) the block's
/// probability and thresholded label.
Prediction paint_blocks(const Eigen::VectorXd& probs, std::span<const BlockRect> blocks, const PaddedFrame& frame);

/// Classifies every block and paints its label and probability onto all of
/// its pixels, then crops the padding. Uses the model's block config and
/// feature layout.
Prediction predict(const RgbImage& rgb, const MlpModel& model, const LmFilterBank& bank);
Prediction timed_predict(const RgbImage& rgb, const MlpModel& model, const LmFilterBank& bank, TimingReport& timing);

struct ImageMetrics {
  std::string id;
  ConfusionCounts counts;
  std::vector<ConfusionCounts> sweep;  // empty when no probability map is available
};

/// One row per image plus an `aggregate` row computed on summed counts.
/// Columns: id,MaxF,F,Acc,Pre,Rec,FPR,FNR,tp,fp,tn,fn. MaxF is empty
/// without sweeps.
void write_metrics_csv(const std::vector<ImageMetrics>& rows, const std::string& path);

/// Aggregate over summed counts.
Metrics aggregate_metrics(const std::vector<ImageMetrics>& rows);
/// Aggregate MaxF over summed sweep counts; NaN when any row lacks a sweep.
double aggregate_max_f(const std::vector<ImageMetrics>& rows);

/// Columns: id,radius,feature_extraction,preprocessing_concat,model_prediction,total,
/// followed by a `mean` row.
void write_timing_csv(const std::vector<std::pair<std::string, TimingReport>>& rows, const std::string& path);

}  // namespace roadblocks
