#include "roadblocks/types.hpp"

#include <cmath>
#include <sstream>

namespace roadblocks {

void BlockConfig::validate() const {
  if (class_size <= 0 || context_size <= 0) {
    throw std::invalid_argument("BlockConfig: block sizes must be positive");
  }
  if (class_size > context_size) {
    throw std::invalid_argument("BlockConfig: class_size must not exceed context_size");
  }
  // The support block is centered on the classification block.
  if ((context_size - class_size) % 2 != 0) {
    throw std::invalid_argument("BlockConfig: context_size - class_size must be even");
  }
  if (radius < 0) throw std::invalid_argument("BlockConfig: radius must be >= 0");
  if (ignore_top < 0) throw std::invalid_argument("BlockConfig: ignore_top must be >= 0");
}

int BlockConfig::ignore_rows(int image_height) const {
  return static_cast<int>(std::lround(static_cast<double>(ignore_top) * image_height / kReferenceHeight));
}

std::vector<BlockRect> grid_blocks(int image_w, int image_h, const BlockConfig& cfg, int origin) {
  if (image_w <= 0 || image_h <= 0) throw std::invalid_argument("grid_blocks: empty image");
  if (cfg.class_size <= 0) throw std::invalid_argument("grid_blocks: class_size must be positive");
  const int s = cfg.class_size;
  const int nx = (image_w + s - 1) / s;
  const int ny = (image_h + s - 1) / s;
  std::vector<BlockRect> blocks;
  blocks.reserve(static_cast<std::size_t>(nx) * ny);
  for (int by = 0; by < ny; ++by) {
    for (int bx = 0; bx < nx; ++bx) blocks.push_back({origin + bx * s, origin + by * s, s, s});
  }
  return blocks;
}

int FeatureSubsets::block_dim() const {
  return (rgb ? kRgbDim : 0) + (gray ? kGrayDim : 0) + (entropy ? kEntropyDim : 0) +
         (lbp ? kLbpBins : 0) + (lm1 ? kLm1Dim : 0) + (lm2 ? kLm2Dim : 0);
}

std::string FeatureLayout::tag() const {
  std::vector<std::string> parts;
  if (subsets.rgb) parts.emplace_back("rgb");
  if (subsets.gray) parts.emplace_back("gray");
  if (subsets.entropy) parts.emplace_back("entropy");
  if (subsets.lbp) parts.emplace_back("lbp");
  if (subsets.lm1) parts.emplace_back("lm1");
  if (subsets.lm2) parts.emplace_back("lm2");
  if (road_blocks) parts.emplace_back("road");
  if (spatial) parts.emplace_back("spatial");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

FeatureLayout FeatureLayout::from_tag(const std::string& tag) {
  FeatureLayout layout;
  layout.subsets = {false, false, false, false, false, false};
  layout.road_blocks = false;
  layout.spatial = false;
  std::stringstream ss(tag);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part == "rgb") layout.subsets.rgb = true;
    else if (part == "gray") layout.subsets.gray = true;
    else if (part == "entropy") layout.subsets.entropy = true;
    else if (part == "lbp") layout.subsets.lbp = true;
    else if (part == "lm1") layout.subsets.lm1 = true;
    else if (part == "lm2") layout.subsets.lm2 = true;
    else if (part == "road") layout.road_blocks = true;
    else if (part == "spatial") layout.spatial = true;
    else if (!part.empty()) throw std::invalid_argument("FeatureLayout: unknown tag part '" + part + "'");
  }
  return layout;
}

LabeledSample SampleSet::sample(Eigen::Index i) const {
  LabeledSample s;
  s.features.values = features.row(i).transpose();
  s.features.layout_tag = layout_tag;
  s.label = labels(i) > 0.5 ? Label::Road : Label::NonRoad;
  s.source = sources.at(static_cast<std::size_t>(i));
  return s;
}

SampleSet SampleSet::take(std::span<const std::size_t> indices) const {
  SampleSet out;
  out.layout_tag = layout_tag;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), dim());
  out.labels.resize(static_cast<Eigen::Index>(indices.size()));
  out.sources.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(indices[k]);
    if (i >= size()) throw std::out_of_range("SampleSet::take: index out of range");
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(i);
    out.labels(static_cast<Eigen::Index>(k)) = labels(i);
    out.sources.push_back(sources[indices[k]]);
  }
  return out;
}

SampleSet SampleSet::concatenate(std::vector<SampleSet>&& parts) {
  SampleSet out;
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (cols >= 0 && p.dim() != cols) {
      throw std::invalid_argument("SampleSet::concatenate: dimension mismatch");
    }
    cols = p.dim();
    rows += p.size();
    if (out.layout_tag.empty()) out.layout_tag = p.layout_tag;
  }
  out.features.resize(rows, std::max<Eigen::Index>(cols, 0));
  out.labels.resize(rows);
  out.sources.reserve(static_cast<std::size_t>(rows));
  Eigen::Index at = 0;
  for (auto& p : parts) {
    if (p.empty()) continue;
    out.features.middleRows(at, p.size()) = p.features;
    out.labels.segment(at, p.size()) = p.labels;
    out.sources.insert(out.sources.end(), p.sources.begin(), p.sources.end());
    at += p.size();
    p = SampleSet{};
  }
  parts.clear();
  return out;
}

}  // namespace roadblocks
