#include "roadblocks/features.hpp"

#include <cmath>
#include <filesystem>

#include "roadblocks/image_io.hpp"

namespace roadblocks {

RealPlane to_grayscale(const RgbImage& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("to_grayscale: expected 3-channel input");
  RealPlane gray(rgb.width(), rgb.height());
  const auto src = rgb.data();
  auto dst = gray.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    dst[p] = 0.299 * src[3 * p] + 0.587 * src[3 * p + 1] + 0.114 * src[3 * p + 2];
  }
  return gray;
}

RealPlane local_entropy(const RealPlane& gray, int radius) {
  if (gray.channels() != 1) throw std::invalid_argument("local_entropy: expected 1-channel input");
  if (radius < 1) throw std::invalid_argument("local_entropy: radius must be >= 1");
  const int w = gray.width();
  const int h = gray.height();

  std::vector<std::uint8_t> level(gray.pixel_count());
  for (std::size_t p = 0; p < level.size(); ++p) {
    level[p] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(gray.data()[p]), 0, 255));
  }

  std::vector<int> half_width(2 * radius + 1);
  for (int dy = -radius; dy <= radius; ++dy) {
    half_width[dy + radius] = static_cast<int>(std::floor(std::sqrt(double(radius * radius - dy * dy))));
  }

  // n*log2(n) for every count a disk can hold.
  const int max_count = (2 * radius + 1) * (2 * radius + 1);
  std::vector<double> nlogn(max_count + 1, 0.0);
  for (int n = 1; n <= max_count; ++n) nlogn[n] = n * std::log2(double(n));

  RealPlane out(w, h);
  std::array<int, 256> counts{};
  for (int y = 0; y < h; ++y) {
    counts.fill(0);
    int total = 0;
    int occupied = 0;
    double sum_nlogn = 0.0;
    auto add = [&](int x, int yy, int delta) {
      if (x < 0 || x >= w) return;
      const int b = level[static_cast<std::size_t>(yy) * w + x];
      sum_nlogn -= nlogn[counts[b]];
      occupied -= counts[b] > 0;
      counts[b] += delta;
      occupied += counts[b] > 0;
      sum_nlogn += nlogn[counts[b]];
      total += delta;
    };
    // Disk at x = -1, then slide right.
    for (int dy = -radius; dy <= radius; ++dy) {
      const int yy = y + dy;
      if (yy < 0 || yy >= h) continue;
      const int hw = half_width[dy + radius];
      for (int x = -1 - hw; x <= -1 + hw; ++x) add(x, yy, +1);
    }
    for (int x = 0; x < w; ++x) {
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int hw = half_width[dy + radius];
        add(x - 1 - hw, yy, -1);
        add(x + hw, yy, +1);
      }
      // A single level is exactly zero; the running sum may have drifted.
      const double n = total;
      const double e = occupied == 1 ? 0.0 : std::log2(n) - sum_nlogn / n;
      out(x, y) = e < 0 ? 0.0 : e;
    }
  }
  return out;
}

CodePlane lbp4_codes(const RealPlane& gray) {
  if (gray.channels() != 1) throw std::invalid_argument("lbp4_codes: expected 1-channel input");
  const int w = gray.width();
  const int h = gray.height();
  CodePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    const int up = std::max(y - 1, 0);
    const int down = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const double c = gray(x, y);
      const int left = std::max(x - 1, 0);
      const int right = std::min(x + 1, w - 1);
      std::uint8_t code = 0;
      if (gray(right, y) >= c) code |= 1;
      if (gray(x, up) >= c) code |= 2;
      if (gray(left, y) >= c) code |= 4;
      if (gray(x, down) >= c) code |= 8;
      out(x, y) = code;
    }
  }
  return out;
}

template <typename Scalar>
void IntegralStack<Scalar>::accumulate() {
  const std::size_t d = static_cast<std::size_t>(depth_);
  std::vector<Scalar> row_sum(d);
  for (int y = 1; y <= height_; ++y) {
    std::fill(row_sum.begin(), row_sum.end(), Scalar{0});
    Scalar* above = data_.data() + offset(1, y - 1);
    Scalar* cur = data_.data() + offset(1, y);
    for (int x = 1; x <= width_; ++x) {
      for (std::size_t k = 0; k < d; ++k) {
        row_sum[k] += cur[k];
        cur[k] = above[k] + row_sum[k];
      }
      above += d;
      cur += d;
    }
  }
}

template class IntegralStack<double>;

namespace {

DoubleDouble two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

DoubleDouble quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

}  // namespace

DoubleDouble dd_add(DoubleDouble a, DoubleDouble b) {
  DoubleDouble s = two_sum(a.hi, b.hi);
  const DoubleDouble t = two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return quick_two_sum(s.hi, s.lo);
}

DoubleDouble dd_sub(DoubleDouble a, DoubleDouble b) { return dd_add(a, {-b.hi, -b.lo}); }

DoubleDouble dd_product(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

DoubleDouble dd_mul(DoubleDouble a, DoubleDouble b) {
  DoubleDouble p = dd_product(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return quick_two_sum(p.hi, p.lo);
}

void CompensatedIntegral::accumulate() {
  const std::size_t d = static_cast<std::size_t>(depth_);
  std::vector<DoubleDouble> row_sum(d);
  for (int y = 1; y <= height_; ++y) {
    std::fill(row_sum.begin(), row_sum.end(), DoubleDouble{});
    const DoubleDouble* above = data_.data() + offset(1, y - 1);
    DoubleDouble* cur = data_.data() + offset(1, y);
    for (int x = 1; x <= width_; ++x) {
      for (std::size_t k = 0; k < d; ++k) {
        row_sum[k] = dd_add(row_sum[k], cur[k]);
        cur[k] = dd_add(above[k], row_sum[k]);
      }
      above += d;
      cur += d;
    }
  }
}

DoubleDouble CompensatedIntegral::box_sum(const BlockRect& r, int layer) const {
  const auto at = [&](int x, int y) { return data_[offset(x, y) + static_cast<std::size_t>(layer)]; };
  return dd_add(dd_sub(at(r.x1(), r.y1()), at(r.x0, r.y1())), dd_sub(at(r.x0, r.y0), at(r.x1(), r.y0)));
}
template class IntegralStack<std::int32_t>;

FeatureMaps compute_feature_planes(const RgbImage& rgb, const LmFilterBank& bank, const FeatureSubsets& subsets,
                                   const FeatureMapOptions& opts) {
  if (rgb.channels() != 3) throw std::invalid_argument("compute_feature_planes: expected RGB input");
  FeatureMaps maps;
  maps.rgb = rgb;
  maps.gray = to_grayscale(rgb);
  maps.planes_for = FeatureSubsets{subsets.rgb, subsets.gray, false, false, false, false};
  if (subsets.entropy) {
    maps.entropy = local_entropy(maps.gray, opts.entropy_radius);
    maps.planes_for.entropy = true;
  }
  if (subsets.lbp) {
    maps.lbp = lbp4_codes(maps.gray);
    maps.planes_for.lbp = true;
  }
  if (subsets.lm1 || subsets.lm2) {
    if (bank.size() != kLmFilters) throw std::invalid_argument("compute_feature_planes: bank must hold 15 kernels");
    BankResponses r = convolve_bank(maps.gray, bank);
    maps.lm_responses = std::move(r.responses);
    maps.lm_argmax = std::move(r.argmax);
    maps.planes_for.lm1 = subsets.lm1;
    maps.planes_for.lm2 = subsets.lm2;
  }
  return maps;
}

void build_integrals(FeatureMaps& maps, const FeatureSubsets& subsets) {
  const FeatureSubsets& have = maps.planes_for;
  if ((subsets.entropy && !have.entropy) || (subsets.lbp && !have.lbp) || (subsets.lm1 && !have.lm1) ||
      (subsets.lm2 && !have.lm2)) {
    throw std::invalid_argument("build_integrals: requested subset has no computed plane");
  }
  const int w = maps.width();
  const int h = maps.height();
  const std::size_t n = maps.rgb.pixel_count();

  // Real channels in fixed order; only the ones the subsets read.
  std::vector<int> channels;
  if (subsets.rgb) channels.insert(channels.end(), {kChanR, kChanG, kChanB});
  if (subsets.gray) channels.push_back(kChanGray);
  if (subsets.entropy) channels.push_back(kChanEntropy);
  if (subsets.lm1) {
    for (int k = 0; k < kLmFilters; ++k) channels.push_back(kChanLm0 + k);
  }
  auto sample = [&](int chan, std::size_t p) -> double {
    switch (chan) {
      case kChanR: return maps.rgb.data()[3 * p];
      case kChanG: return maps.rgb.data()[3 * p + 1];
      case kChanB: return maps.rgb.data()[3 * p + 2];
      case kChanGray: return maps.gray.data()[p];
      case kChanEntropy: return maps.entropy.data()[p];
      default: return maps.lm_responses[static_cast<std::size_t>(chan - kChanLm0)].data()[p];
    }
  };

  const int nc = static_cast<int>(channels.size());
  maps.moment_slot.fill(-1);
  maps.moment_offset.assign(static_cast<std::size_t>(nc), 0.0);
  for (int s = 0; s < nc; ++s) {
    maps.moment_slot[static_cast<std::size_t>(channels[s])] = s;
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) sum += sample(channels[s], p);
    maps.moment_offset[s] = sum / static_cast<double>(n);
  }
  maps.moments = CompensatedIntegral(w, h, 2 * nc);
  if (nc > 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        DoubleDouble* e = maps.moments.pixel(x, y);
        for (int s = 0; s < nc; ++s) {
          const double v = sample(channels[s], p) - maps.moment_offset[s];
          e[s] = {v, 0.0};
          e[nc + s] = dd_product(v, v);
        }
      }
    }
    maps.moments.accumulate();
  }

  int depth = 0;
  maps.lbp_slot = -1;
  maps.argmax_slot = -1;
  if (subsets.lbp) {
    maps.lbp_slot = depth;
    depth += kLbpBins;
  }
  if (subsets.lm2) {
    maps.argmax_slot = depth;
    depth += kLmFilters;
  }
  maps.histograms = IntegralStack<std::int32_t>(w, h, depth);
  if (depth > 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::int32_t* e = maps.histograms.entry(x + 1, y + 1);
        if (maps.lbp_slot >= 0) e[maps.lbp_slot + maps.lbp(x, y)] = 1;
        if (maps.argmax_slot >= 0) e[maps.argmax_slot + maps.lm_argmax(x, y)] = 1;
      }
    }
    maps.histograms.accumulate();
  }
  maps.integrals_for = subsets;
}

FeatureMaps compute_feature_maps(const RgbImage& rgb, const LmFilterBank& bank, const FeatureSubsets& subsets,
                                 const FeatureMapOptions& opts) {
  FeatureMaps maps = compute_feature_planes(rgb, bank, subsets, opts);
  build_integrals(maps, subsets);
  return maps;
}

void block_features_into(const BlockRect& rect, const FeatureMaps& maps, const FeatureSubsets& subsets,
                         Eigen::Ref<Eigen::VectorXd> out) {
  if (!rect.inside(maps.width(), maps.height())) throw std::out_of_range("block_features: rect out of bounds");
  if (out.size() != subsets.block_dim()) throw std::invalid_argument("block_features: output size mismatch");
  const FeatureSubsets& have = maps.integrals_for;
  if ((subsets.rgb && !have.rgb) || (subsets.gray && !have.gray) || (subsets.entropy && !have.entropy) ||
      (subsets.lbp && !have.lbp) || (subsets.lm1 && !have.lm1) || (subsets.lm2 && !have.lm2)) {
    throw std::invalid_argument("block_features: integrals not built for requested subsets");
  }

  const double n = rect.area();
  const int nc = maps.moments.depth() / 2;

  // Population variance as (n * S2 - S1^2) / n^2, all in double-double.
  auto mean_std = [&](int chan) -> std::pair<double, double> {
    const int s = maps.moment_slot[static_cast<std::size_t>(chan)];
    const DoubleDouble s1 = maps.moments.box_sum(rect, s);
    const DoubleDouble s2 = maps.moments.box_sum(rect, nc + s);
    const DoubleDouble spread = dd_sub(dd_mul(s2, {n, 0.0}), dd_mul(s1, s1));
    const double var = spread.value() / (n * n);
    return {maps.moment_offset[static_cast<std::size_t>(s)] + s1.value() / n, std::sqrt(std::max(var, 0.0))};
  };

  Eigen::Index at = 0;
  if (subsets.rgb) {
    for (int c = 0; c < 3; ++c) {
      const auto [m, sd] = mean_std(kChanR + c);
      out[at + c] = m;
      out[at + 3 + c] = sd;
    }
    at += kRgbDim;
  }
  if (subsets.gray) {
    const auto [m, sd] = mean_std(kChanGray);
    out[at++] = m;
    out[at++] = sd;
  }
  if (subsets.entropy) {
    const auto [m, sd] = mean_std(kChanEntropy);
    out[at++] = m;
    out[at++] = sd;
  }
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> counts;
  if (subsets.lbp || subsets.lm2) counts = maps.histograms.box_sum(rect);
  if (subsets.lbp) {
    out.segment(at, kLbpBins) = counts.segment(maps.lbp_slot, kLbpBins).cast<double>() / n;
    at += kLbpBins;
  }
  if (subsets.lm1) {
    for (int k = 0; k < kLmFilters; ++k) {
      const auto [m, sd] = mean_std(kChanLm0 + k);
      out[at + k] = m;
      out[at + kLmFilters + k] = sd;
    }
    at += kLm1Dim;
  }
  if (subsets.lm2) {
    out.segment(at, kLmFilters) = counts.segment(maps.argmax_slot, kLmFilters).cast<double>() / n;
    at += kLm2Dim;
  }
}

FeatureVector block_features(const BlockRect& rect, const FeatureMaps& maps, const FeatureSubsets& subsets) {
  FeatureVector v;
  v.values.resize(subsets.block_dim());
  block_features_into(rect, maps, subsets, v.values);
  FeatureLayout layout;
  layout.subsets = subsets;
  layout.road_blocks = false;
  layout.spatial = false;
  v.layout_tag = layout.tag();
  return v;
}

void dump_feature_maps(const FeatureMaps& maps, const std::string& dir, const std::string& image_id) {
  std::filesystem::create_directories(dir);
  auto write_real = [&](const RealPlane& p, const std::string& name) {
    if (p.empty()) return;
    const auto [lo, hi] = std::minmax_element(p.data().begin(), p.data().end());
    const double span = *hi - *lo;
    Mask img(p.width(), p.height());
    for (std::size_t i = 0; i < p.pixel_count(); ++i) {
      const double t = span > 0 ? (p.data()[i] - *lo) / span : 0.0;
      img.data()[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
    write_png(img, (std::filesystem::path(dir) / (image_id + "." + name + ".png")).string());
  };
  auto codes_to_real = [](const CodePlane& c) {
    RealPlane r(c.width(), c.height());
    for (std::size_t i = 0; i < c.pixel_count(); ++i) r.data()[i] = c.data()[i];
    return r;
  };
  write_real(maps.gray, "gray");
  write_real(maps.entropy, "entropy");
  if (!maps.lbp.empty()) write_real(codes_to_real(maps.lbp), "lbp");
  for (std::size_t k = 0; k < maps.lm_responses.size(); ++k) {
    write_real(maps.lm_responses[k], "lm" + std::to_string(k));
  }
  if (!maps.lm_argmax.empty()) write_real(codes_to_real(maps.lm_argmax), "lm_argmax");
}

}  // namespace roadblocks
