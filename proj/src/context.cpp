#include "roadblocks/context.hpp"

#include <cmath>
#include <unordered_map>

namespace roadblocks {

int padding_amount(const BlockConfig& cfg) {
  cfg.validate();
  return (cfg.context_size - cfg.class_size) / 2 + cfg.radius * cfg.context_size;
}

PaddedFrame make_frame(int width, int height, const BlockConfig& cfg) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("make_frame: empty image");
  PaddedFrame f;
  f.pad = padding_amount(cfg);
  f.width = width;
  f.height = height;
  const int s = cfg.class_size;
  f.padded_width = 2 * f.pad + (width + s - 1) / s * s;
  f.padded_height = 2 * f.pad + (height + s - 1) / s * s;
  return f;
}

std::vector<BlockRect> frame_blocks(const PaddedFrame& frame, const BlockConfig& cfg) {
  return grid_blocks(frame.width, frame.height, cfg, frame.pad);
}

std::array<BlockRect, 2> road_block_rects(const BlockConfig& cfg, const PaddedFrame& frame) {
  const int c = cfg.context_size;
  const int y0 = frame.pad + frame.height - c;
  std::array<BlockRect, 2> rects;
  const std::array<int, 2> eighths = {3, 5};
  for (std::size_t i = 0; i < 2; ++i) {
    const int cx = frame.pad + static_cast<int>(std::lround(frame.width * eighths[i] / 8.0));
    rects[i] = {cx - c / 2, y0, c, c};
  }
  return rects;
}

BlockLayout make_layout(const BlockRect& class_rect, const BlockConfig& cfg, const PaddedFrame& frame) {
  const int c = cfg.context_size;
  const int overhang = (c - cfg.class_size) / 2;
  BlockLayout layout;
  layout.class_rect = class_rect;
  // Reference block: the support block, or the class block when sizes match.
  const BlockRect reference{class_rect.x0 - overhang, class_rect.y0 - overhang, c, c};
  if (cfg.uses_support()) layout.support_rect = reference;
  layout.context_rects.reserve(static_cast<std::size_t>(8 * cfg.radius));
  for (int k = 1; k <= cfg.radius; ++k) {
    for (const auto& [dx, dy] : kCompass) {
      layout.context_rects.push_back({reference.x0 + k * c * dx, reference.y0 + k * c * dy, c, c});
    }
  }
  layout.road_rects = road_block_rects(cfg, frame);

  auto check = [&](const BlockRect& r) {
    if (!r.inside(frame.padded_width, frame.padded_height)) {
      throw std::logic_error("make_layout: block outside padded image (insufficient padding)");
    }
  };
  check(class_rect);
  if (layout.support_rect) check(*layout.support_rect);
  for (const auto& r : layout.context_rects) check(r);
  for (const auto& r : layout.road_rects) check(r);
  return layout;
}

int SpatialPrior::x_bin() const {
  for (int i = 0; i < kSpatialBins; ++i) {
    if (bits[static_cast<std::size_t>(i)]) return i;
  }
  return -1;
}

int SpatialPrior::y_bin() const {
  for (int i = 0; i < kSpatialBins; ++i) {
    if (bits[static_cast<std::size_t>(kSpatialBins + i)]) return i;
  }
  return -1;
}

SpatialPrior spatial_prior(const BlockRect& class_rect, const PaddedFrame& frame) {
  auto bin = [](double twice_center, int extent) {
    const double v = std::clamp(twice_center / (2.0 * extent), 0.0, 1.0);
    return std::min(static_cast<int>(std::floor(v * kSpatialBins)), kSpatialBins - 1);
  };
  SpatialPrior prior;
  const int bx = bin(class_rect.center_x2() - 2 * frame.pad, frame.width);
  const int by = bin(class_rect.center_y2() - 2 * frame.pad, frame.height);
  prior.bits[static_cast<std::size_t>(bx)] = 1;
  prior.bits[static_cast<std::size_t>(kSpatialBins + by)] = 1;
  return prior;
}

int expected_dim(const BlockConfig& cfg, const FeatureLayout& layout) {
  const int block = layout.subsets.block_dim();
  const int support = cfg.uses_support() ? block : 0;
  const int context = cfg.radius * 8 * block;
  const int road = layout.road_blocks ? 2 * block : 0;
  const int spatial = layout.spatial ? kSpatialDim : 0;
  return block + support + context + road + spatial;
}

namespace {

// Writes one final vector given a lookup for block feature vectors.
template <typename Lookup>
void write_final(const BlockLayout& layout, const FeatureLayout& flags, const PaddedFrame& frame, int block_dim,
                 Lookup&& lookup, Eigen::Ref<Eigen::VectorXd> out) {
  Eigen::Index at = 0;
  auto put = [&](const auto& v) {
    if (v.size() != block_dim) throw std::invalid_argument("assemble_final_vector: block vector size mismatch");
    out.segment(at, block_dim) = v;
    at += block_dim;
  };
  const Eigen::VectorXd v_class = lookup(layout.class_rect);
  put(v_class);
  for (const auto& r : layout.context_rects) put(lookup(r));
  if (layout.support_rect) put(lookup(*layout.support_rect));
  if (flags.road_blocks) {
    for (const auto& r : layout.road_rects) put((lookup(r) - v_class).eval());
  }
  if (flags.spatial) {
    const SpatialPrior prior = spatial_prior(layout.class_rect, frame);
    for (int i = 0; i < kSpatialDim; ++i) out[at++] = prior.bits[static_cast<std::size_t>(i)];
  }
  if (at != out.size()) throw std::invalid_argument("assemble_final_vector: final length mismatch");
}

}  // namespace

FeatureVector assemble_final_vector(const BlockLayout& layout, const FeatureMaps& maps, const FeatureLayout& flags,
                                    const PaddedFrame& frame) {
  const int block_dim = flags.subsets.block_dim();
  const int radius = static_cast<int>(layout.context_rects.size()) / 8;
  int dim = block_dim * (1 + 8 * radius + (layout.support_rect ? 1 : 0) + (flags.road_blocks ? 2 : 0));
  if (flags.spatial) dim += kSpatialDim;
  FeatureVector v;
  v.values.resize(dim);
  v.layout_tag = flags.tag();
  auto lookup = [&](const BlockRect& r) -> Eigen::VectorXd { return block_features(r, maps, flags.subsets).values; };
  write_final(layout, flags, frame, block_dim, lookup, v.values);
  return v;
}

Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> assemble_block_matrix(
    std::span<const BlockRect> blocks, const FeatureMaps& maps, const BlockConfig& cfg, const FeatureLayout& flags,
    const PaddedFrame& frame) {
  const int block_dim = flags.subsets.block_dim();
  const int dim = expected_dim(cfg, flags);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
      static_cast<Eigen::Index>(blocks.size()), dim);

  // Block vectors keyed by (x0, y0, size); all rects here are square.
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<double> store;
  auto key = [](const BlockRect& r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.x0)) << 40) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.y0)) << 16) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(r.w));
  };
  auto lookup = [&](const BlockRect& r) -> Eigen::Map<const Eigen::VectorXd> {
    auto [it, inserted] = index.try_emplace(key(r), store.size() / static_cast<std::size_t>(block_dim));
    if (inserted) {
      store.resize(store.size() + static_cast<std::size_t>(block_dim));
      Eigen::Map<Eigen::VectorXd> dst(store.data() + it->second * block_dim, block_dim);
      block_features_into(r, maps, flags.subsets, dst);
    }
    return Eigen::Map<const Eigen::VectorXd>(store.data() + it->second * block_dim, block_dim);
  };

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockLayout layout = make_layout(blocks[i], cfg, frame);
    Eigen::VectorXd row(dim);
    write_final(layout, flags, frame, block_dim, lookup, row);
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

}  // namespace roadblocks
