#include "roadblocks/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "roadblocks/image_io.hpp"
#include "roadblocks/parallel.hpp"

namespace fs = std::filesystem;

namespace roadblocks {

namespace {

std::vector<std::string> read_ids(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read id list '" + path.string() + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    ids.push_back(line.substr(b, e - b + 1));
  }
  return ids;
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace

DatasetIndex load_dataset(const std::string& root, DatasetRole role, const std::string& ids_file) {
  const fs::path base(root);
  if (!fs::is_directory(base / "images")) throw DatasetError("'" + root + "' has no images/ directory");
  std::vector<std::string> ids;
  if (!ids_file.empty()) {
    ids = read_ids(ids_file);
  } else if (fs::exists(base / "index.txt")) {
    ids = read_ids(base / "index.txt");
  } else {
    for (const auto& e : fs::directory_iterator(base / "images")) {
      if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
  }

  DatasetIndex index;
  index.role = role;
  std::set<std::string> seen;
  std::vector<std::string> problems;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) {
      problems.push_back("duplicate id '" + id + "'");
      continue;
    }
    DatasetEntry e{(base / "images" / (id + ".png")).string(), (base / "masks" / (id + ".png")).string(), id};
    if (!fs::exists(e.image_path)) problems.push_back("missing image " + e.image_path);
    if (!fs::exists(e.mask_path)) problems.push_back("missing mask " + e.mask_path);
    index.entries.push_back(std::move(e));
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "dataset '" << root << "' has " << problems.size() << " problem(s):";
    for (const auto& p : problems) msg << "\n  " << p;
    throw DatasetError(msg.str());
  }
  if (index.entries.empty()) throw DatasetError("dataset '" + root + "' is empty");
  return index;
}

void validate_mask(const Mask& mask) {
  if (mask.channels() != 1) throw DatasetError("mask must have one channel");
  for (std::uint8_t v : mask.data()) {
    if (v != kRoadValue && v != kNonRoadValue) {
      throw DatasetError("mask values must be 0 or 255, found " + std::to_string(v));
    }
  }
}

std::vector<std::size_t> pure_block_indices(const Mask& padded_mask, const PaddedFrame& frame,
                                            const BlockConfig& cfg) {
  if (padded_mask.width() != frame.padded_width || padded_mask.height() != frame.padded_height) {
    throw std::invalid_argument("pure_block_indices: mask does not match frame");
  }
  const int first_row = frame.pad + cfg.ignore_rows(frame.height);
  const auto blocks = frame_blocks(frame, cfg);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockRect& r = blocks[i];
    if (r.y0 < first_row) continue;
    const std::uint8_t first = padded_mask(r.x0, r.y0);
    bool pure = true;
    for (int y = r.y0; y < r.y1() && pure; ++y) {
      for (int x = r.x0; x < r.x1(); ++x) {
        if (padded_mask(x, y) != first) {
          pure = false;
          break;
        }
      }
    }
    if (pure) out.push_back(i);
  }
  return out;
}

SampleSet generate_samples(const Mask& mask, const PaddedFrame& frame, const BlockConfig& cfg,
                           const FeatureMaps& maps, const FeatureLayout& layout, const std::string& image_id) {
  if (mask.width() != frame.width || mask.height() != frame.height) {
    throw std::invalid_argument("generate_samples: image/mask size mismatch");
  }
  if (maps.width() != frame.padded_width || maps.height() != frame.padded_height) {
    throw std::invalid_argument("generate_samples: feature maps do not match frame");
  }
  validate_mask(mask);
  const Mask padded = pad_to_frame(mask, frame);
  const auto keep = pure_block_indices(padded, frame, cfg);
  const auto all_blocks = frame_blocks(frame, cfg);

  std::vector<BlockRect> blocks;
  blocks.reserve(keep.size());
  SampleSet set;
  set.layout_tag = layout.tag();
  set.labels.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const BlockRect& r = all_blocks[keep[k]];
    blocks.push_back(r);
    set.labels[static_cast<Eigen::Index>(k)] = padded(r.x0, r.y0) == kRoadValue ? 1.0 : 0.0;
    set.sources.push_back({image_id, static_cast<int>(keep[k])});
  }
  set.features = assemble_block_matrix(blocks, maps, cfg, layout, frame);
  return set;
}

SampleSet build_samples(const DatasetIndex& dataset, const BlockConfig& cfg, const FeatureLayout& layout,
                        const LmFilterBank& bank, int threads) {
  cfg.validate();
  std::vector<SampleSet> parts(dataset.entries.size());
  parallel_for(dataset.entries.size(), threads, [&](std::size_t i) {
    const DatasetEntry& e = dataset.entries[i];
    const RgbImage rgb = read_rgb_png(e.image_path);
    const Mask mask = read_mask_png(e.mask_path);
    if (rgb.width() != mask.width() || rgb.height() != mask.height()) {
      throw DatasetError("image/mask size mismatch for '" + e.id + "'");
    }
    const PaddedFrame frame = make_frame(rgb.width(), rgb.height(), cfg);
    const FeatureMaps maps = compute_feature_maps(pad_to_frame(rgb, frame), bank, layout.subsets);
    parts[i] = generate_samples(mask, frame, cfg, maps, layout, e.id);
  });
  SampleSet all = SampleSet::concatenate(std::move(parts));
  all.layout_tag = layout.tag();
  return all;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                            std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split_train_val: empty input");
  if (!(ratio >= 0 && ratio <= 1)) throw std::invalid_argument("split_train_val: ratio must be in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = seeded(seed, 0x511u);
  std::shuffle(order.begin(), order.end(), rng);
  const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end())};
}

std::pair<SampleSet, SampleSet> split_train_val(const SampleSet& samples, double ratio, std::uint64_t seed) {
  const auto [a, b] = split_indices(static_cast<std::size_t>(samples.size()), ratio, seed);
  return {samples.take(a), samples.take(b)};
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("subsample: empty input");
  if (!(fraction >= 0 && fraction <= 1)) throw std::invalid_argument("subsample: fraction must be in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = seeded(seed, 0x5abu);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
  return order;
}

SampleSet subsample(const SampleSet& samples, double fraction, std::uint64_t seed) {
  return samples.take(subsample_indices(static_cast<std::size_t>(samples.size()), fraction, seed));
}

DatasetIndex write_synth_dataset(const std::string& root, int count, std::uint64_t seed, int width, int height) {
  if (count < 1) throw std::invalid_argument("write_synth_dataset: count must be >= 1");
  const fs::path base(root);
  fs::create_directories(base / "images");
  fs::create_directories(base / "masks");
  DatasetIndex index;
  std::ofstream ids(base / "index.txt");
  if (!ids) throw DatasetError("cannot write '" + (base / "index.txt").string() + "'");
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%06d", i);
    const SynthScene scene = synth_scene(seed + static_cast<std::uint64_t>(i), width, height);
    DatasetEntry e{(base / "images" / (std::string(name) + ".png")).string(),
                   (base / "masks" / (std::string(name) + ".png")).string(), name};
    write_png(scene.image, e.image_path);
    write_png(scene.mask, e.mask_path);
    ids << name << '\n';
    index.entries.push_back(std::move(e));
  }
  if (!ids) throw DatasetError("failed writing index.txt");
  return index;
}

DatasetIndex import_kitti(const std::string& kitti_dir, const std::string& out_root) {
  fs::path base(kitti_dir);
  if (!fs::is_directory(base / "gt_image_2") && fs::is_directory(base / "training" / "gt_image_2")) {
    base /= "training";
  }
  const fs::path gt_dir = base / "gt_image_2";
  const fs::path img_dir = base / "image_2";
  if (!fs::is_directory(gt_dir) || !fs::is_directory(img_dir)) {
    throw DatasetError("'" + kitti_dir + "' has no image_2/ and gt_image_2/ directories");
  }
  std::vector<fs::path> gts;
  for (const auto& e : fs::directory_iterator(gt_dir)) {
    // um_road_000000.png -> um_000000
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".png" && name.find("_road_") != std::string::npos) gts.push_back(e.path());
  }
  std::sort(gts.begin(), gts.end());

  const fs::path out(out_root);
  fs::create_directories(out / "images");
  fs::create_directories(out / "masks");
  DatasetIndex index;
  std::ofstream ids(out / "index.txt");
  for (const auto& gt_path : gts) {
    std::string stem = gt_path.stem().string();
    const std::string id = stem.replace(stem.find("_road_"), 6, "_");
    const fs::path image_path = img_dir / (id + ".png");
    if (!fs::exists(image_path)) throw DatasetError("KITTI ground truth without image: " + image_path.string());
    const ImagePlane<std::uint8_t> gt = read_png(gt_path.string());
    Mask mask(gt.width(), gt.height());
    for (int y = 0; y < gt.height(); ++y) {
      for (int x = 0; x < gt.width(); ++x) {
        const bool road = gt.channels() >= 3 && gt(x, y, 0) == 255 && gt(x, y, 1) == 0 && gt(x, y, 2) == 255;
        mask(x, y) = road ? kRoadValue : kNonRoadValue;
      }
    }
    DatasetEntry e{(out / "images" / (id + ".png")).string(), (out / "masks" / (id + ".png")).string(), id};
    fs::copy_file(image_path, e.image_path, fs::copy_options::overwrite_existing);
    write_png(mask, e.mask_path);
    ids << id << '\n';
    index.entries.push_back(std::move(e));
  }
  if (index.entries.empty()) throw DatasetError("no *_road_*.png ground truth found in " + gt_dir.string());
  return index;
}

}  // namespace roadblocks
