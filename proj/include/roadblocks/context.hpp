#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "roadblocks/features.hpp"
#include "roadblocks/types.hpp"

namespace roadblocks {

/// Extent of any auxiliary block beyond a border classification block:
/// (context - class) / 2 + radius * context.
int padding_amount(const BlockConfig& cfg);

/// Geometry of an image after padding. The original image sits at
/// (pad, pad); right and bottom also grow to the next class_size multiple.
struct PaddedFrame {
  int pad = 0;
  int width = 0;   // unpadded
  int height = 0;  // unpadded
  int padded_width = 0;
  int padded_height = 0;
};

PaddedFrame make_frame(int width, int height, const BlockConfig& cfg);

/// Pads an image (or mask) into the frame by edge replication.
template <typename Scalar>
ImagePlane<Scalar> pad_to_frame(const ImagePlane<Scalar>& image, const PaddedFrame& frame) {
  if (image.width() != frame.width || image.height() != frame.height) {
    throw std::invalid_argument("pad_to_frame: image does not match frame");
  }
  return pad_replicate(image, frame.pad, frame.pad, frame.padded_width - frame.width - frame.pad,
                       frame.padded_height - frame.height - frame.pad);
}

/// Classification blocks of the frame, in padded coordinates, row-major.
std::vector<BlockRect> frame_blocks(const PaddedFrame& frame, const BlockConfig& cfg);

/// Compass directions of a ring, clockwise from north.
inline constexpr std::array<std::array<int, 2>, 8> kCompass = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

struct BlockLayout {
  BlockRect class_rect;
  std::optional<BlockRect> support_rect;
  std::vector<BlockRect> context_rects;  // ring 1..radius, N..NW within a ring
  std::array<BlockRect, 2> road_rects;
};

/// Road blocks: context-sized, bottom edge on the last unpadded row,
/// centered at 3/8 and 5/8 of the unpadded width.
std::array<BlockRect, 2> road_block_rects(const BlockConfig& cfg, const PaddedFrame& frame);

BlockLayout make_layout(const BlockRect& class_rect, const BlockConfig& cfg, const PaddedFrame& frame);

struct SpatialPrior {
  std::array<std::uint8_t, kSpatialDim> bits{};
  int x_bin() const;
  int y_bin() const;
};

/// One-hot 11-bin encoding of the class-block center, normalized by the
/// unpadded size. `class_rect` is in padded coordinates.
SpatialPrior spatial_prior(const BlockRect& class_rect, const PaddedFrame& frame);

/// Closed-form length of the final vector.
int expected_dim(const BlockConfig& cfg, const FeatureLayout& layout);

/// v_class, context blocks ring by ring, the support block when sizes
/// differ, (road_i - v_class) for both road blocks, then the spatial prior.
FeatureVector assemble_final_vector(const BlockLayout& layout, const FeatureMaps& maps, const FeatureLayout& flags,
                                    const PaddedFrame& frame);

/// Final vectors for every rect in `blocks`, one row each. Block features
/// are computed once per distinct rect and reused across rows.
Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> assemble_block_matrix(
    std::span<const BlockRect> blocks, const FeatureMaps& maps, const BlockConfig& cfg, const FeatureLayout& flags,
    const PaddedFrame& frame);

}  // namespace roadblocks
