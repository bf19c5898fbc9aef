#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace roadblocks {

/// Interleaved row-major image storage, one scalar per sample.
///
/// RGB inputs and masks use `std::uint8_t`; everything computed from them
/// (gray, entropy, filter responses) is held as `double`. Code maps (LBP,
/// filter argmax) are small integers stored as `std::uint8_t`.
template <typename Scalar>
class ImagePlane {
 public:
  using scalar_type = Scalar;
  using ChannelArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ChannelMap = Eigen::Map<ChannelArray, 0, Eigen::InnerStride<>>;
  using ConstChannelMap = Eigen::Map<const ChannelArray, 0, Eigen::InnerStride<>>;

  ImagePlane() = default;

  ImagePlane(int width, int height, int channels = 1, Scalar fill = Scalar{})
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw std::invalid_argument("ImagePlane: dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  ImagePlane(int width, int height, int channels, std::vector<Scalar> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw std::invalid_argument("ImagePlane: dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw std::invalid_argument("ImagePlane: data length != width * height * channels");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  Scalar& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const Scalar& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  std::span<Scalar> row(int y) {
    return std::span<Scalar>(data_).subspan(static_cast<std::size_t>(y) * width_ * channels_,
                                            static_cast<std::size_t>(width_) * channels_);
  }
  std::span<const Scalar> row(int y) const {
    return std::span<const Scalar>(data_).subspan(
        static_cast<std::size_t>(y) * width_ * channels_, static_cast<std::size_t>(width_) * channels_);
  }

  /// Strided Eigen view of one channel, shaped height x width.
  ChannelMap channel(int c = 0) {
    return ChannelMap(data_.data() + c, height_, width_, Eigen::InnerStride<>(channels_));
  }
  ConstChannelMap channel(int c = 0) const {
    return ConstChannelMap(data_.data() + c, height_, width_, Eigen::InnerStride<>(channels_));
  }

  bool operator==(const ImagePlane& other) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<Scalar> data_;
};

using RgbImage = ImagePlane<std::uint8_t>;
using Mask = ImagePlane<std::uint8_t>;
using RealPlane = ImagePlane<double>;
using CodePlane = ImagePlane<std::uint8_t>;

inline constexpr std::uint8_t kRoadValue = 255;
inline constexpr std::uint8_t kNonRoadValue = 0;

/// Replicates border samples outward. `left`/`top` etc. are pixel counts.
template <typename Scalar>
ImagePlane<Scalar> pad_replicate(const ImagePlane<Scalar>& src, int left, int top, int right, int bottom) {
  if (left < 0 || top < 0 || right < 0 || bottom < 0) {
    throw std::invalid_argument("pad_replicate: negative padding");
  }
  const int w = src.width() + left + right;
  const int h = src.height() + top + bottom;
  const int c = src.channels();
  ImagePlane<Scalar> out(w, h, c);
  for (int y = 0; y < h; ++y) {
    const int sy = std::clamp(y - top, 0, src.height() - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x - left, 0, src.width() - 1);
      for (int k = 0; k < c; ++k) out(x, y, k) = src(sx, sy, k);
    }
  }
  return out;
}

/// Copies the `w` x `h` window starting at (x0, y0).
template <typename Scalar>
ImagePlane<Scalar> crop(const ImagePlane<Scalar>& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > src.width() || y0 + h > src.height()) {
    throw std::out_of_range("crop: window outside image");
  }
  ImagePlane<Scalar> out(w, h, src.channels());
  const std::size_t row_len = static_cast<std::size_t>(w) * src.channels();
  for (int y = 0; y < h; ++y) {
    auto s = src.row(y0 + y).subspan(static_cast<std::size_t>(x0) * src.channels(), row_len);
    std::copy(s.begin(), s.end(), out.row(y).begin());
  }
  return out;
}

/// Axis-aligned pixel rectangle; [x0, x0 + w) x [y0, y0 + h).
struct BlockRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  int x1() const { return x0 + w; }
  int y1() const { return y0 + h; }
  int area() const { return w * h; }
  /// Twice the center coordinate, exact for odd sizes.
  int center_x2() const { return 2 * x0 + w; }
  int center_y2() const { return 2 * y0 + h; }
  bool inside(int image_w, int image_h) const {
    return w > 0 && h > 0 && x0 >= 0 && y0 >= 0 && x1() <= image_w && y1() <= image_h;
  }
  bool operator==(const BlockRect&) const = default;
};

struct BlockConfig {
  int class_size = 10;
  int context_size = 20;
  int radius = 3;
  /// Rows skipped at the top of a 375-row image; scaled for other heights.
  int ignore_top = 150;

  bool uses_support() const { return class_size != context_size; }
  void validate() const;
  /// `ignore_top` rescaled to an image of the given height.
  int ignore_rows(int image_height) const;
  bool operator==(const BlockConfig&) const = default;
};

inline constexpr int kReferenceHeight = 375;

/// Row-major tiling of a w x h image by class_size squares, grown to the next
/// multiple of class_size on the right/bottom. Rects are shifted by `origin`
/// in both axes (the padding offset of the frame they live in).
std::vector<BlockRect> grid_blocks(int image_w, int image_h, const BlockConfig& cfg, int origin = 0);

/// Per-block feature subsets, in feature-vector order.
struct FeatureSubsets {
  bool rgb = true;
  bool gray = true;
  bool entropy = true;
  bool lbp = true;
  bool lm1 = true;
  bool lm2 = true;

  int block_dim() const;
  bool any() const { return rgb || gray || entropy || lbp || lm1 || lm2; }
  bool operator==(const FeatureSubsets&) const = default;
};

inline constexpr int kRgbDim = 6;
inline constexpr int kGrayDim = 2;
inline constexpr int kEntropyDim = 2;
inline constexpr int kLbpBins = 16;
inline constexpr int kLmFilters = 15;
inline constexpr int kLm1Dim = 2 * kLmFilters;
inline constexpr int kLm2Dim = kLmFilters;
inline constexpr int kSpatialBins = 11;
inline constexpr int kSpatialDim = 2 * kSpatialBins;

/// What goes into the final vector: block subsets plus the two
/// vector-level switches.
struct FeatureLayout {
  FeatureSubsets subsets;
  bool road_blocks = true;
  bool spatial = true;

  /// Comma-separated list of enabled parts, e.g. "rgb,gray,lbp,road,spatial".
  std::string tag() const;
  static FeatureLayout from_tag(const std::string& tag);
  bool operator==(const FeatureLayout&) const = default;
};

struct FeatureVector {
  Eigen::VectorXd values;
  std::string layout_tag;

  Eigen::Index size() const { return values.size(); }
};

enum class Label : std::uint8_t { NonRoad = 0, Road = 1 };

struct SampleSource {
  std::string image_id;
  int block_index = 0;
  bool operator==(const SampleSource&) const = default;
};

struct LabeledSample {
  FeatureVector features;
  Label label = Label::NonRoad;
  SampleSource source;
};

/// Dense batch of labeled samples, one row per sample.
struct SampleSet {
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Matrix features;
  Eigen::VectorXd labels;  // 0 or 1
  std::vector<SampleSource> sources;
  std::string layout_tag;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool empty() const { return features.rows() == 0; }
  LabeledSample sample(Eigen::Index i) const;

  /// Rows selected by `indices`, in that order.
  SampleSet take(std::span<const std::size_t> indices) const;
  /// Stacks sets of equal dimension; inputs are released as they are copied.
  static SampleSet concatenate(std::vector<SampleSet>&& parts);
};

}  // namespace roadblocks
