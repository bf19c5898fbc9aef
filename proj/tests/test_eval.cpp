#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "roadblocks/context.hpp"
#include "roadblocks/eval.hpp"

using namespace roadblocks;

namespace {

Mask mask_from(int w, int h, const std::function<bool(int, int)>& road) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = road(x, y) ? 255 : 0;
  return m;
}

RealPlane random_prob(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  RealPlane p(w, h);
  // Mix continuous values with exact grid points to hit threshold boundaries.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p(x, y) = (rng() % 3 == 0) ? static_cast<double>(rng() % 101) / 100 : u(rng);
  return p;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("confusion counts on a half-overlapping pair") {
    // 10 x 20 image, prediction covers rows 0-9, ground truth rows 5-14.
    const Mask pred = mask_from(10, 20, [](int, int y) { return y < 10; });
    const Mask gt = mask_from(10, 20, [](int, int y) { return y >= 5 && y < 15; });
    const ConfusionCounts c = confusion(pred, gt, 0);
    CHECK(c == ConfusionCounts{50, 50, 50, 50});
    const Metrics m = metrics(c);
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.f_measure == doctest::Approx(0.5));
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.fpr == doctest::Approx(0.5));
    CHECK(m.fnr == doctest::Approx(0.5));
    CHECK(confusion(pred, gt, 10) == ConfusionCounts{0, 0, 50, 50});
  }

  TEST_CASE("metric examples") {
    const Metrics m = metrics({2, 1, 6, 1});
    CHECK(m.precision == doctest::Approx(2.0 / 3));
    CHECK(m.recall == doctest::Approx(2.0 / 3));
    CHECK(m.f_measure == doctest::Approx(2.0 / 3));
    CHECK(m.accuracy == doctest::Approx(0.8));
    CHECK(m.fpr == doctest::Approx(1.0 / 7));
  }

  TEST_CASE("zero denominators give zero and empty confusion throws") {
    const Metrics none = metrics({0, 0, 10, 0});
    CHECK(none.precision == 0);
    CHECK(none.recall == 0);
    CHECK(none.f_measure == 0);
    CHECK(none.accuracy == 1);
    CHECK_THROWS(metrics({}));
  }

  TEST_CASE("mismatched sizes throw") {
    CHECK_THROWS(confusion(Mask(3, 3), Mask(3, 4), 0));
    CHECK_THROWS(max_f_sweep(RealPlane(3, 3), Mask(4, 3), 0));
  }

  TEST_CASE("binary probability maps give MaxF equal to F") {
    const Mask gt = mask_from(30, 20, [](int x, int y) { return x + y < 25; });
    const Mask pred = mask_from(30, 20, [](int x, int y) { return x + y < 22; });
    RealPlane prob(30, 20);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 30; ++x) prob(x, y) = pred(x, y) == 255 ? 1.0 : 0.0;
    const MaxFResult r = max_f_sweep(prob, gt, 3);
    CHECK(r.max_f == doctest::Approx(metrics(confusion(pred, gt, 3)).f_measure));
    CHECK(r.thresholds.size() == 101);
    CHECK(r.threshold == doctest::Approx(0.01));
  }

  TEST_CASE("perfectly separated map peaks just above the low value") {
    const Mask gt = mask_from(20, 10, [](int x, int) { return x < 8; });
    RealPlane prob(20, 10);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 20; ++x) prob(x, y) = x < 8 ? 0.9 : 0.1;
    const MaxFResult r = max_f_sweep(prob, gt, 0);
    CHECK(r.max_f == 1.0);
    CHECK(r.threshold == doctest::Approx(0.11));
    CHECK(r.curve[91] < 1.0);
  }

  TEST_CASE("sweep matches the naive recomputation exactly on random maps") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const RealPlane prob = random_prob(37, 23, seed);
      std::mt19937_64 rng(seed * 31);
      const Mask gt = mask_from(37, 23, [&](int, int) { return rng() % 2 == 0; });
      const MaxFResult r = max_f_sweep(prob, gt, 4);
      const auto naive = oracle::max_f_curve(prob, gt, 4, 100);
      CAPTURE(seed);
      REQUIRE(r.curve.size() == naive.size());
      for (std::size_t i = 0; i < naive.size(); ++i) CHECK(r.curve[i] == naive[i]);
    }
  }

  TEST_CASE("sweep counts sum across images") {
    const RealPlane p1 = random_prob(10, 10, 1), p2 = random_prob(10, 10, 2);
    const Mask g = mask_from(10, 10, [](int x, int) { return x < 5; });
    auto a = sweep_counts(p1, g, 0), b = sweep_counts(p2, g, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].total() == 100);
      a[i] += b[i];
    }
    CHECK(max_f_from_counts(a).max_f <= 1.0);
    CHECK(a[0].tp + a[0].fn == 100);
  }

  TEST_CASE("threshold mask is inclusive") {
    RealPlane p(3, 1);
    p(0, 0) = 0.49;
    p(1, 0) = 0.5;
    p(2, 0) = 0.51;
    const Mask m = threshold_mask(p, 0.5);
    CHECK(m(0, 0) == 0);
    CHECK(m(1, 0) == 255);
    CHECK(m(2, 0) == 255);
  }

  TEST_CASE("overlay tints each outcome and leaves true negatives untouched") {
    RgbImage rgb(4, 1, 3);
    std::fill(rgb.data().begin(), rgb.data().end(), 100);
    Mask pred(4, 1), gt(4, 1);
    // TN, TP, FN, FP
    pred(1, 0) = pred(3, 0) = 255;
    gt(1, 0) = gt(2, 0) = 255;
    const RgbImage o = render_overlay(rgb, pred, gt);
    auto px = [&](int x) { return std::array<int, 3>{o(x, 0, 0), o(x, 0, 1), o(x, 0, 2)}; };
    CHECK(px(0) == std::array<int, 3>{100, 100, 100});
    CHECK(px(1) == std::array<int, 3>{50, 178, 50});
    CHECK(px(2) == std::array<int, 3>{178, 50, 50});
    CHECK(px(3) == std::array<int, 3>{50, 50, 178});
  }

  TEST_CASE("identity and shift warps") {
    const Mask m = mask_from(8, 6, [](int x, int y) { return (x * 3 + y) % 4 == 0; });
    CHECK(warp_mask(m, Eigen::Matrix3d::Identity(), 8, 6) == m);
    Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
    shift(0, 2) = 2;
    const Mask s = warp_mask(m, shift, 8, 6);
    CHECK(s(0, 0) == 0);
    CHECK(s(1, 3) == 0);
    for (int y = 0; y < 6; ++y)
      for (int x = 2; x < 8; ++x) CHECK(s(x, y) == m(x - 2, y));
    CHECK_THROWS(warp_mask(m, Eigen::Matrix3d::Zero(), 8, 6));
  }

  TEST_CASE("painting blocks crops padding and thresholds strictly") {
    const BlockConfig cfg{10, 20, 1, 0};
    const PaddedFrame frame = make_frame(25, 15, cfg);
    const auto blocks = frame_blocks(frame, cfg);
    REQUIRE(blocks.size() == 6);
    Eigen::VectorXd probs(6);
    probs << 0.2, 0.5, 0.8, 0.51, 0.0, 1.0;
    const Prediction p = paint_blocks(probs, blocks, frame);
    CHECK(p.mask.width() == 25);
    CHECK(p.mask.height() == 15);
    CHECK(p.prob(0, 0) == 0.2);
    CHECK(p.mask(15, 5) == 0);  // 0.5 is not road
    CHECK(p.mask(24, 9) == 255);
    CHECK(p.prob(24, 14) == 1.0);
    CHECK(p.mask(5, 14) == 255);
  }

  TEST_CASE("timed prediction matches plain prediction") {
    const LmFilterBank bank = build_lm_bank();
    MlpModel model;
    model.block_config = BlockConfig{10, 20, 1, 0};
    model.layout.subsets.lm1 = false;
    const int d = expected_dim(model.block_config, model.layout);
    model = [&] {
      MlpModel m = MlpModel::initialized(d, 6, 3);
      m.block_config = model.block_config;
      m.layout = model.layout;
      m.standardization = Standardization::identity(d);
      m.standardization.scale.setConstant(50.0);
      return m;
    }();
    const RgbImage img = oracle::textured_rgb(64, 40, 5);
    TimingReport t;
    const Prediction a = timed_predict(img, model, bank, t);
    const Prediction b = predict(img, model, bank);
    CHECK(a.mask == b.mask);
    CHECK(a.prob == b.prob);
    CHECK(t.radius == 1);
    CHECK(t.feature_extraction >= 0);
    CHECK(t.preprocessing_concat >= 0);
    CHECK(t.model_prediction >= 0);
    CHECK(t.total >= t.feature_extraction + t.preprocessing_concat + t.model_prediction);
    MlpModel wrong = MlpModel::initialized(d + 1, 2, 1);
    wrong.block_config = model.block_config;
    wrong.layout = model.layout;
    CHECK_THROWS(predict(img, wrong, bank));
  }

  TEST_CASE("metrics csv has one row per image plus the aggregate") {
    std::vector<ImageMetrics> rows = {{"a", {10, 0, 10, 0}, {}}, {"b", {0, 10, 10, 0}, {}}};
    const auto path = std::filesystem::temp_directory_path() / "roadblocks_metrics_test.csv";
    write_metrics_csv(rows, path.string());
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "id,MaxF,F,Acc,Pre,Rec,FPR,FNR,tp,fp,tn,fn");
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[2].rfind("aggregate,", 0) == 0);
    const Metrics agg = aggregate_metrics(rows);
    CHECK(agg.precision == doctest::Approx(0.5));
    CHECK(agg.recall == 1.0);
    CHECK(std::isnan(aggregate_max_f(rows)));
  }
}
