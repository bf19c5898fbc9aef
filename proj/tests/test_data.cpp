#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "roadblocks/context.hpp"
#include "roadblocks/data.hpp"
#include "roadblocks/image_io.hpp"

using namespace roadblocks;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "roadblocks_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double road_fraction(const Mask& m) {
  return static_cast<double>(std::count(m.data().begin(), m.data().end(), 255)) / static_cast<double>(m.data().size());
}

const LmFilterBank& bank() {
  static const LmFilterBank b = build_lm_bank();
  return b;
}

SampleSet samples_for(const RgbImage& img, const Mask& mask, const BlockConfig& cfg, const FeatureLayout& layout) {
  const PaddedFrame frame = make_frame(img.width(), img.height(), cfg);
  const FeatureMaps maps = compute_feature_maps(pad_to_frame(img, frame), bank(), layout.subsets);
  return generate_samples(mask, frame, cfg, maps, layout, "img");
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("split of ten items is seven and three, disjoint and deterministic") {
    const auto [a, b] = split_indices(10, 0.7, 5);
    CHECK(a.size() == 7);
    CHECK(b.size() == 3);
    std::set<std::size_t> all(a.begin(), a.end());
    all.insert(b.begin(), b.end());
    CHECK(all.size() == 10);
    CHECK(split_indices(10, 0.7, 5) == std::make_pair(a, b));
    CHECK(split_indices(10, 0.7, 6) != std::make_pair(a, b));
    CHECK_THROWS(split_indices(0, 0.7, 1));
  }

  TEST_CASE("split keeps every row exactly once") {
    SampleSet s;
    s.features.resize(50, 1);
    s.labels.resize(50);
    for (int i = 0; i < 50; ++i) {
      s.features(i, 0) = i;
      s.labels[i] = i % 2;
      s.sources.push_back({"x", i});
    }
    const auto [tr, va] = split_train_val(s, 0.7, 3);
    CHECK(tr.size() == 35);
    CHECK(va.size() == 15);
    std::set<int> seen;
    for (int i = 0; i < tr.size(); ++i) seen.insert(static_cast<int>(tr.features(i, 0)));
    for (int i = 0; i < va.size(); ++i) seen.insert(static_cast<int>(va.features(i, 0)));
    CHECK(seen.size() == 50);
    for (int i = 0; i < tr.size(); ++i) CHECK(tr.sources[i].block_index == static_cast<int>(tr.features(i, 0)));
  }

  TEST_CASE("subsampling sizes and permutation") {
    CHECK(subsample_indices(100, 0.2, 1).size() == 20);
    CHECK(subsample_indices(7, 0.5, 1).size() == 3);
    auto all = subsample_indices(30, 1.0, 2);
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    CHECK(subsample_indices(100, 0.2, 1) == subsample_indices(100, 0.2, 1));
  }

  TEST_CASE("subsampling roughly preserves class balance") {
    SampleSet s;
    const int n = 5000;
    s.features = SampleSet::Matrix::Zero(n, 1);
    s.labels.resize(n);
    for (int i = 0; i < n; ++i) {
      s.labels[i] = i % 10 < 3;  // 30 % road
      s.sources.push_back({"x", i});
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const SampleSet sub = subsample(s, 0.2, seed);
      CHECK(sub.size() == 1000);
      CHECK(std::abs(sub.labels.mean() - 0.3) <= 0.1);
    }
  }

  TEST_CASE("all-road mask yields only road samples below the ignored rows") {
    const BlockConfig cfg{10, 20, 1, 0};
    const RgbImage img = oracle::textured_rgb(60, 40, 1);
    Mask mask(60, 40);
    std::fill(mask.data().begin(), mask.data().end(), 255);
    FeatureLayout layout;
    const SampleSet s = samples_for(img, mask, cfg, layout);
    CHECK(s.size() == 6 * 4);
    CHECK(s.labels.minCoeff() == 1.0);
    CHECK(s.dim() == expected_dim(cfg, layout));
  }

  TEST_CASE("a checkerboard of 5 px squares has no pure 10 px blocks") {
    const BlockConfig cfg{10, 20, 1, 0};
    Mask mask(60, 40);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 60; ++x) mask(x, y) = ((x / 5 + y / 5) % 2) ? 255 : 0;
    const SampleSet s = samples_for(oracle::textured_rgb(60, 40, 2), mask, cfg, FeatureLayout{});
    CHECK(s.size() == 0);
  }

  TEST_CASE("mixed blocks are dropped and labels follow the mask") {
    const BlockConfig cfg{10, 20, 1, 0};
    Mask mask(60, 40);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 60; ++x) mask(x, y) = x < 25 ? 255 : 0;
    const SampleSet s = samples_for(oracle::textured_rgb(60, 40, 3), mask, cfg, FeatureLayout{});
    // Columns 0-1 road, column 2 mixed, columns 3-5 background.
    CHECK(s.size() == 5 * 4);
    CHECK(s.labels.sum() == 8);
    for (int i = 0; i < s.size(); ++i) {
      const int col = s.sources[i].block_index % 6;
      CHECK(col != 2);
      CHECK(s.labels[i] == (col < 2 ? 1.0 : 0.0));
    }
  }

  TEST_CASE("blocks in the ignored top rows produce no samples") {
    BlockConfig cfg{10, 20, 1, 0};
    cfg.ignore_top = 150;  // 375 rows reference: 40 rows -> 16 ignored
    Mask mask(60, 40);
    std::fill(mask.data().begin(), mask.data().end(), 0);
    const SampleSet s = samples_for(oracle::textured_rgb(60, 40, 4), mask, cfg, FeatureLayout{});
    CHECK(cfg.ignore_rows(40) == 16);
    CHECK(s.size() == 6 * 2);  // block rows starting at 20 and 30
  }

  TEST_CASE("sample count does not depend on feature flags") {
    const SynthScene scene = synth_scene(17, 200, 80);
    const BlockConfig cfg{10, 20, 1, 0};
    FeatureLayout full, lean;
    lean.subsets = {true, false, false, false, false, false};
    lean.road_blocks = false;
    lean.spatial = false;
    const SampleSet a = samples_for(scene.image, scene.mask, cfg, full);
    const SampleSet b = samples_for(scene.image, scene.mask, cfg, lean);
    CHECK(a.size() == b.size());
    CHECK(a.labels == b.labels);
    CHECK(a.sources == b.sources);
    CHECK(b.dim() == expected_dim(cfg, lean));
  }

  TEST_CASE("non-binary masks are rejected") {
    Mask m(3, 3);
    std::fill(m.data().begin(), m.data().end(), 255);
    CHECK_NOTHROW(validate_mask(m));
    m(1, 1) = 128;
    CHECK_THROWS_AS(validate_mask(m), DatasetError);
  }

  TEST_CASE("synthetic scenes are deterministic") {
    const SynthScene a = synth_scene(99), b = synth_scene(99), c = synth_scene(100);
    CHECK(a.image == b.image);
    CHECK(a.mask == b.mask);
    CHECK(a.image != c.image);
    CHECK(a.image.width() == kSynthWidth);
    CHECK(a.image.height() == kSynthHeight);
  }

  TEST_CASE("synthetic road fraction stays in range over 100 seeds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SynthScene s = synth_scene(seed, 160, 64);
      const double f = road_fraction(s.mask);
      CAPTURE(seed);
      CHECK(f >= 0.15);
      CHECK(f <= 0.5);
      CHECK_NOTHROW(validate_mask(s.mask));
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(synth_scene(seed).decoys.size() >= 3);
  }

  TEST_CASE("decoys are background that looks like road locally") {
    // Per scene: mean standardized local features of road, decoy and the
    // remaining background blocks. Decoys must sit closer to road than the
    // background does, yet carry the non-road label.
    const BlockConfig cfg{10, 10, 0, 0};
    const FeatureSubsets subsets;
    int holds = 0;
    const int scenes = 10;
    for (std::uint64_t seed = 1; seed <= scenes; ++seed) {
      const SynthScene s = synth_scene(seed);
      const FeatureMaps maps = compute_feature_maps(s.image, bank(), subsets);
      std::vector<Eigen::VectorXd> road, decoy, other;
      for (const BlockRect& r : grid_blocks(s.image.width(), s.image.height(), cfg)) {
        if (r.x1() > s.image.width() || r.y1() > s.image.height() || r.y0 < s.horizon) continue;
        int on = 0;
        for (int y = r.y0; y < r.y1(); ++y)
          for (int x = r.x0; x < r.x1(); ++x) on += s.mask(x, y) == 255;
        const bool in_decoy = std::any_of(s.decoys.begin(), s.decoys.end(), [&](const BlockRect& d) {
          return r.x0 >= d.x0 && r.y0 >= d.y0 && r.x1() <= d.x1() && r.y1() <= d.y1();
        });
        const Eigen::VectorXd f = block_features(r, maps, subsets).values;
        if (on == r.area()) road.push_back(f);
        else if (on == 0 && in_decoy) decoy.push_back(f);
        else if (on == 0) other.push_back(f);
      }
      REQUIRE(!road.empty());
      REQUIRE(!decoy.empty());
      REQUIRE(!other.empty());
      RowMatrix all(static_cast<Eigen::Index>(road.size() + decoy.size() + other.size()), road[0].size());
      Eigen::Index k = 0;
      for (const auto* group : {&road, &decoy, &other})
        for (const auto& v : *group) all.row(k++) = v.transpose();
      const Standardization st = standardize_fit(all);
      auto mean_of = [&](const std::vector<Eigen::VectorXd>& g) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(all.cols());
        for (const auto& v : g) m += st.apply(v);
        return Eigen::VectorXd(m / static_cast<double>(g.size()));
      };
      const Eigen::VectorXd mr = mean_of(road), md = mean_of(decoy), mo = mean_of(other);
      holds += (md - mr).norm() < (mo - mr).norm();
    }
    CHECK(holds == scenes);
  }

  TEST_CASE("synthetic dataset on disk round trips through load_dataset") {
    const fs::path dir = fresh_dir("synth");
    const DatasetIndex written = write_synth_dataset(dir.string(), 3, 40, 120, 48);
    const DatasetIndex read = load_dataset(dir.string());
    REQUIRE(read.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(read.entries[i].id == written.entries[i].id);
      CHECK(read_mask_png(read.entries[i].mask_path) == synth_scene(40 + i, 120, 48).mask);
    }
    const SampleSet s = build_samples(read, BlockConfig{10, 20, 1, 0}, FeatureLayout{}, bank(), 2);
    CHECK(s.size() > 0);
    CHECK(s.sources.front().image_id == read.entries[0].id);
  }

  TEST_CASE("dataset problems are reported together") {
    const fs::path dir = fresh_dir("broken");
    write_synth_dataset(dir.string(), 3, 1, 80, 40);
    fs::remove(dir / "masks" / "synth_000000.png");
    fs::remove(dir / "masks" / "synth_000002.png");
    try {
      load_dataset(dir.string());
      FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("synth_000000") != std::string::npos);
      CHECK(msg.find("synth_000002") != std::string::npos);
    }
    std::ofstream(dir / "ids.txt") << "# subset\nsynth_000001\n\nsynth_000001\n";
    CHECK_THROWS_AS(load_dataset(dir.string(), DatasetRole::TrainVal, (dir / "ids.txt").string()), DatasetError);
    std::ofstream(dir / "one.txt") << "synth_000001\n";
    CHECK(load_dataset(dir.string(), DatasetRole::Test, (dir / "one.txt").string()).entries.size() == 1);
    CHECK_THROWS_AS(load_dataset(fresh_dir("empty").string()), DatasetError);
  }

  TEST_CASE("KITTI ground truth import maps magenta to road") {
    const fs::path kitti = fresh_dir("kitti_src");
    fs::create_directories(kitti / "training" / "image_2");
    fs::create_directories(kitti / "training" / "gt_image_2");
    RgbImage img = oracle::random_rgb(8, 4, 1);
    write_png(img, (kitti / "training" / "image_2" / "um_000000.png").string());
    RgbImage gt(8, 4, 3);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 8; ++x) {
        const bool road = x >= 4;
        gt(x, y, 0) = 255;
        gt(x, y, 1) = 0;
        gt(x, y, 2) = road ? 255 : 0;
      }
    }
    write_png(gt, (kitti / "training" / "gt_image_2" / "um_road_000000.png").string());
    const fs::path out = fresh_dir("kitti_out");
    const DatasetIndex idx = import_kitti(kitti.string(), out.string());
    REQUIRE(idx.entries.size() == 1);
    CHECK(idx.entries[0].id == "um_000000");
    const Mask m = read_mask_png(idx.entries[0].mask_path);
    for (int x = 0; x < 8; ++x) CHECK(m(x, 2) == (x >= 4 ? 255 : 0));
    CHECK(read_rgb_png(idx.entries[0].image_path) == img);
    CHECK(load_dataset(out.string()).entries.size() == 1);
  }
}
