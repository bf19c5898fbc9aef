#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "roadblocks/context.hpp"
#include "roadblocks/features.hpp"
#include "roadblocks/types.hpp"

namespace roadblocks {

struct DatasetEntry {
  std::string image_path;
  std::string mask_path;
  std::string id;
};

enum class DatasetRole { TrainVal, Test };

/// Images and masks under `<root>/images/<id>.png` and `<root>/masks/<id>.png`.
struct DatasetIndex {
  std::vector<DatasetEntry> entries;
  DatasetRole role = DatasetRole::TrainVal;
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ids come from `ids_file` when given, else `<root>/index.txt` when present,
/// else every `images/*.png` in name order. Missing masks and duplicate ids
/// are reported together in one DatasetError.
DatasetIndex load_dataset(const std::string& root, DatasetRole role = DatasetRole::TrainVal,
                          const std::string& ids_file = "");

/// Throws DatasetError unless every value is 0 or 255.
void validate_mask(const Mask& mask);

/// Indices (into frame_blocks) of blocks whose padded mask pixels are all one
/// class and that lie fully below the ignored top rows.
std::vector<std::size_t> pure_block_indices(const Mask& padded_mask, const PaddedFrame& frame,
                                            const BlockConfig& cfg);

/// One sample per pure classification block below the ignored rows; label 1
/// iff every mask pixel is road. `mask` is unpadded; `maps` belong to the
/// padded image of the same frame.
SampleSet generate_samples(const Mask& mask, const PaddedFrame& frame, const BlockConfig& cfg,
                           const FeatureMaps& maps, const FeatureLayout& layout, const std::string& image_id);

/// Loads, pads and featurizes every image of the dataset, then stacks the
/// samples in dataset order. Images are processed on `threads` workers.
SampleSet build_samples(const DatasetIndex& dataset, const BlockConfig& cfg, const FeatureLayout& layout,
                        const LmFilterBank& bank, int threads = 1);

/// Seeded shuffle of 0..n-1 cut at floor(ratio * n).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                            std::uint64_t seed);

std::pair<SampleSet, SampleSet> split_train_val(const SampleSet& samples, double ratio, std::uint64_t seed);

/// floor(fraction * n) indices drawn without replacement.
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

SampleSet subsample(const SampleSet& samples, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthScene {
  RgbImage image;
  Mask mask;
  /// Background regions painted with the road texture.
  std::vector<BlockRect> decoys;
  int horizon = 0;
};

inline constexpr int kSynthWidth = 620;
inline constexpr int kSynthHeight = 188;

/// Perspective road trapezoid over textured background with decoy patches,
/// shadows and an optional lane marking. Deterministic in `seed`.
SynthScene synth_scene(std::uint64_t seed, int width = kSynthWidth, int height = kSynthHeight);

/// Writes `count` scenes as `images/`, `masks/` and `index.txt` under `root`.
/// Scene i uses seed `seed + i`.
DatasetIndex write_synth_dataset(const std::string& root, int count, std::uint64_t seed,
                                 int width = kSynthWidth, int height = kSynthHeight);

/// Converts a KITTI road directory (`image_2/`, `gt_image_2/`, optionally
/// under `training/`) into the images/masks layout. Road = pure magenta.
DatasetIndex import_kitti(const std::string& kitti_dir, const std::string& out_root);

}  // namespace roadblocks
