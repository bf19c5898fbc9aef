#include <doctest.h>

#include <set>

#include "roadblocks/types.hpp"

using namespace roadblocks;

TEST_SUITE("core-types") {
  TEST_CASE("grid_blocks tiles with ceil arithmetic") {
    BlockConfig cfg;
    CHECK(grid_blocks(1242, 375, cfg).size() == 125u * 38u);

    const auto one = grid_blocks(10, 10, cfg);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == BlockRect{0, 0, 10, 10});

    const auto two = grid_blocks(15, 10, cfg);
    REQUIRE(two.size() == 2);
    CHECK(two[1] == BlockRect{10, 0, 10, 10});
  }

  TEST_CASE("grid_blocks is row-major and covers every pixel exactly once") {
    BlockConfig cfg;
    cfg.class_size = 7;
    const int w = 30, h = 22;
    const auto blocks = grid_blocks(w, h, cfg, 3);
    const int pw = 3 + 35, ph = 3 + 28;
    std::vector<int> hits(static_cast<std::size_t>(pw * ph), 0);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      if (i > 0) {
        const auto& p = blocks[i - 1];
        CHECK((b.y0 > p.y0 || (b.y0 == p.y0 && b.x0 > p.x0)));
      }
      for (int y = b.y0; y < b.y1(); ++y)
        for (int x = b.x0; x < b.x1(); ++x) ++hits[static_cast<std::size_t>(y * pw + x)];
    }
    for (int y = 3; y < ph; ++y)
      for (int x = 3; x < pw; ++x) CHECK(hits[static_cast<std::size_t>(y * pw + x)] == 1);
  }

  TEST_CASE("grid_blocks rejects empty images") {
    CHECK_THROWS_AS(grid_blocks(0, 10, BlockConfig{}), std::invalid_argument);
  }

  TEST_CASE("BlockConfig validation") {
    BlockConfig ok;
    CHECK_NOTHROW(ok.validate());
    BlockConfig bigger = ok;
    bigger.class_size = 30;
    CHECK_THROWS(bigger.validate());
    BlockConfig negative = ok;
    negative.radius = -1;
    CHECK_THROWS(negative.validate());
    BlockConfig odd = ok;
    odd.context_size = 21;
    CHECK_THROWS(odd.validate());
    CHECK(ok.uses_support());
    BlockConfig same = ok;
    same.context_size = 10;
    CHECK_FALSE(same.uses_support());
  }

  TEST_CASE("ignore_top scales with image height") {
    BlockConfig cfg;
    CHECK(cfg.ignore_rows(375) == 150);
    CHECK(cfg.ignore_rows(188) == 75);
    CHECK(cfg.ignore_rows(750) == 300);
  }

  TEST_CASE("per-subset dimensions") {
    CHECK(kRgbDim == 6);
    CHECK(kGrayDim == 2);
    CHECK(kEntropyDim == 2);
    CHECK(kLbpBins == 16);
    CHECK(kLm1Dim == 30);
    CHECK(kLm2Dim == 15);
    CHECK(FeatureSubsets{}.block_dim() == 71);
    FeatureSubsets no_lm1;
    no_lm1.lm1 = false;
    CHECK(no_lm1.block_dim() == 41);
  }

  TEST_CASE("layout tag round trip") {
    FeatureLayout l;
    CHECK(l.tag() == "rgb,gray,entropy,lbp,lm1,lm2,road,spatial");
    l.subsets.gray = false;
    l.road_blocks = false;
    CHECK(FeatureLayout::from_tag(l.tag()) == l);
    CHECK_THROWS(FeatureLayout::from_tag("rgb,bogus"));
  }

  TEST_CASE("pad_replicate and crop") {
    ImagePlane<int> img(2, 2, 1);
    img(0, 0) = 1;
    img(1, 0) = 2;
    img(0, 1) = 3;
    img(1, 1) = 4;
    const auto p = pad_replicate(img, 1, 2, 3, 0);
    CHECK(p.width() == 6);
    CHECK(p.height() == 4);
    CHECK(p(0, 0) == 1);
    CHECK(p(5, 0) == 2);
    CHECK(p(0, 3) == 3);
    CHECK(p(5, 3) == 4);
    CHECK(crop(p, 1, 2, 2, 2) == img);
    CHECK_THROWS(crop(p, 5, 0, 2, 2));
  }

  TEST_CASE("ImagePlane enforces its data length") {
    CHECK_THROWS(ImagePlane<int>(2, 2, 1, std::vector<int>(3)));
    CHECK_THROWS(ImagePlane<int>(0, 2, 1));
    ImagePlane<double> rgb(4, 3, 3);
    CHECK(rgb.data().size() == 36);
    rgb(2, 1, 1) = 5;
    CHECK(rgb.channel(1)(1, 2) == 5);
  }

  TEST_CASE("SampleSet take and concatenate") {
    SampleSet a;
    a.features = SampleSet::Matrix::Identity(3, 2);
    a.labels = Eigen::Vector3d(0, 1, 0);
    a.sources = {{"a", 0}, {"a", 1}, {"a", 2}};
    a.layout_tag = "t";
    const std::vector<std::size_t> idx = {2, 0};
    const SampleSet t = a.take(idx);
    CHECK(t.size() == 2);
    CHECK(t.sources[0] == SampleSource{"a", 2});
    CHECK(t.features(1, 0) == 1.0);

    SampleSet b = a;
    const SampleSet all = SampleSet::concatenate({std::move(a), std::move(b)});
    CHECK(all.size() == 6);
    CHECK(all.labels[4] == 1.0);
    CHECK(all.sample(4).label == Label::Road);
    CHECK(all.sample(4).features.size() == 2);

    SampleSet wrong;
    wrong.features = SampleSet::Matrix::Zero(1, 3);
    wrong.labels = Eigen::VectorXd::Zero(1);
    wrong.sources = {{"w", 0}};
    std::vector<SampleSet> parts;
    parts.push_back(all);
    parts.push_back(wrong);
    CHECK_THROWS(SampleSet::concatenate(std::move(parts)));
  }
}
