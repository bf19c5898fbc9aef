#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roadblocks/types.hpp"

namespace roadblocks {

// ---------------------------------------------------------------------------
// Per-pixel channels

/// Luma with weights 0.299 / 0.587 / 0.114; output in [0, 255].
RealPlane to_grayscale(const RgbImage& rgb);

/// Shannon entropy (bits) of the 256-bin intensity histogram over a disk of
/// the given radius. The disk is clipped at the image border. Intensities are
/// rounded to the nearest integer level before binning.
RealPlane local_entropy(const RealPlane& gray, int radius = 5);

/// 4-neighbour LBP. Bit k is set iff neighbour k >= center, with neighbours
/// ordered right, top, left, bottom. Borders replicate the edge pixel.
CodePlane lbp4_codes(const RealPlane& gray);

// ---------------------------------------------------------------------------
// Leung-Malik subset: 6 edge, 6 bar, 1 Gaussian, 2 LoG on a 19x19 support.

enum class LmKind { Edge, Bar, Gaussian, LoG };

struct LmKernel {
  LmKind kind;
  double theta = 0.0;  // radians, edge/bar only
  double sigma = 0.0;
  Eigen::MatrixXd weights;  // rows = y, cols = x, centered
  std::string label() const;
};

struct LmFilterBank {
  std::vector<LmKernel> kernels;
  int support = 19;

  int size() const { return static_cast<int>(kernels.size()); }
  int index_of(LmKind kind, int nth = 0) const;
};

inline constexpr int kLmSupport = 19;
inline constexpr int kLmOrientations = 6;
inline constexpr double kLmSigma = 1.4142135623730951;
inline constexpr double kLmElongation = 3.0;

/// Oriented Gaussian derivative (order 1 = edge, 2 = bar): derivative across
/// the direction `theta`, Gaussian with `elongation * sigma` along it. Mean
/// removed and L1-normalized.
Eigen::MatrixXd oriented_kernel(int order, double theta, double sigma, double elongation, int support);

LmFilterBank build_lm_bank();

struct BankResponses {
  std::vector<RealPlane> responses;  // one per kernel, same size as input
  CodePlane argmax;                  // argmax_k |response_k|, lowest k on ties
};

/// Same-size correlation of `gray` with every kernel, borders replicated.
BankResponses convolve_bank(const RealPlane& gray, const LmFilterBank& bank);

// ---------------------------------------------------------------------------
// Integral structures

/// Summed-area table with `depth` values per entry. Entry (x, y) holds the
/// sum over all pixels u < x, v < y, so it is (w + 1) x (h + 1).
template <typename Scalar>
class IntegralStack {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ConstEntry = Eigen::Map<const Vector>;

  IntegralStack() = default;
  IntegralStack(int width, int height, int depth)
      : width_(width), height_(height), depth_(depth),
        data_(static_cast<std::size_t>(width + 1) * (height + 1) * depth, Scalar{0}) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int depth() const { return depth_; }
  bool empty() const { return depth_ == 0; }

  Scalar* entry(int x, int y) { return data_.data() + offset(x, y); }
  ConstEntry entry(int x, int y) const { return ConstEntry(data_.data() + offset(x, y), depth_); }

  /// Turns per-pixel values (written into entry(x + 1, y + 1)) into running sums.
  void accumulate();

  /// Sum over the rectangle for every layer.
  Vector box_sum(const BlockRect& r) const {
    return entry(r.x1(), r.y1()) - entry(r.x0, r.y1()) - entry(r.x1(), r.y0) + entry(r.x0, r.y0);
  }

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * (width_ + 1) + x) * depth_;
  }

  int width_ = 0;
  int height_ = 0;
  int depth_ = 0;
  std::vector<Scalar> data_;
};

/// Unevaluated sum hi + lo, about 106 significant bits.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  double value() const { return hi + lo; }
};

DoubleDouble dd_add(DoubleDouble a, DoubleDouble b);
DoubleDouble dd_sub(DoubleDouble a, DoubleDouble b);
DoubleDouble dd_mul(DoubleDouble a, DoubleDouble b);
/// Exact product of two doubles.
DoubleDouble dd_product(double a, double b);

/// Summed-area table kept in double-double arithmetic. Sums of squares over
/// a small box stay accurate even where the running totals are huge, so a
/// variance taken as n*S2 - S1^2 does not cancel away.
class CompensatedIntegral {
 public:
  CompensatedIntegral() = default;
  CompensatedIntegral(int width, int height, int depth)
      : width_(width), height_(height), depth_(depth),
        data_(static_cast<std::size_t>(width + 1) * (height + 1) * depth) {}

  int depth() const { return depth_; }

  /// Per-pixel input of pixel (x, y), before accumulate().
  DoubleDouble* pixel(int x, int y) { return data_.data() + offset(x + 1, y + 1); }
  void accumulate();
  DoubleDouble box_sum(const BlockRect& r, int layer) const;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * (width_ + 1) + x) * depth_;
  }

  int width_ = 0;
  int height_ = 0;
  int depth_ = 0;
  std::vector<DoubleDouble> data_;
};

// Real-valued channel identifiers used by the moment integrals.
enum RealChannel : int {
  kChanR = 0,
  kChanG = 1,
  kChanB = 2,
  kChanGray = 3,
  kChanEntropy = 4,
  kChanLm0 = 5,  // kChanLm0 + k for filter k
  kRealChannelCount = kChanLm0 + kLmFilters,
};

struct FeatureMapOptions {
  int entropy_radius = 5;
};

/// Everything computed once per (padded) image.
struct FeatureMaps {
  RgbImage rgb;
  RealPlane gray;
  RealPlane entropy;                     // empty unless entropy is needed
  CodePlane lbp;                         // empty unless lbp is needed
  std::vector<RealPlane> lm_responses;   // empty unless lm1/lm2 is needed
  CodePlane lm_argmax;

  FeatureSubsets planes_for;     // subsets whose planes were computed
  FeatureSubsets integrals_for;  // subsets whose integrals were built

  // Moment integrals of real channels: layers [sum_0..sum_{n-1}, sq_0..sq_{n-1}]
  // over values shifted by `moment_offset` (the channel's global mean).
  CompensatedIntegral moments;
  std::array<int, kRealChannelCount> moment_slot{};  // -1 when absent
  std::vector<double> moment_offset;
  // Integral histograms: LBP bins first (if present) then LM-argmax bins.
  IntegralStack<std::int32_t> histograms;
  int lbp_slot = -1;
  int argmax_slot = -1;

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
};

/// Per-pixel planes (gray, entropy, LBP, filter responses); the "feature
/// extraction" stage.
FeatureMaps compute_feature_planes(const RgbImage& rgb, const LmFilterBank& bank,
                                   const FeatureSubsets& subsets, const FeatureMapOptions& opts = {});

/// Moment integrals and integral histograms for the given subsets.
void build_integrals(FeatureMaps& maps, const FeatureSubsets& subsets);

FeatureMaps compute_feature_maps(const RgbImage& rgb, const LmFilterBank& bank,
                                 const FeatureSubsets& subsets, const FeatureMapOptions& opts = {});

/// Per-block feature vector in subset order: RGB means then stds (6), gray
/// mean/std (2), entropy mean/std (2), LBP histogram (16), 15 LM means then
/// 15 LM stds (30), LM-argmax histogram (15). Population std.
FeatureVector block_features(const BlockRect& rect, const FeatureMaps& maps, const FeatureSubsets& subsets);

/// Writes block_features into `out` (length subsets.block_dim()).
void block_features_into(const BlockRect& rect, const FeatureMaps& maps, const FeatureSubsets& subsets,
                         Eigen::Ref<Eigen::VectorXd> out);

/// Writes every computed channel as a min-max normalized 8-bit PNG named
/// `<image_id>.<channel>.png` under `dir`.
void dump_feature_maps(const FeatureMaps& maps, const std::string& dir, const std::string& image_id);

}  // namespace roadblocks
