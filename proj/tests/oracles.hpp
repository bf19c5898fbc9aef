// Brute-force reference implementations used as test oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "roadblocks/context.hpp"
#include "roadblocks/eval.hpp"
#include "roadblocks/features.hpp"
#include "roadblocks/model.hpp"

namespace oracle {

using namespace roadblocks;

inline RgbImage random_rgb(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  RgbImage img(w, h, 3);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

// Smooth-ish image: random noise plus gradients, so statistics vary by region.
inline RgbImage textured_rgb(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 25);
  RgbImage img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double base = 60 + 120.0 * x / w + 40 * std::sin(0.05 * y * (c + 1));
        img(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(base + n(rng)), 0L, 255L));
      }
    }
  }
  return img;
}

inline int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

inline RealPlane entropy(const RealPlane& gray, int radius) {
  RealPlane out(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      std::vector<int> hist(256, 0);
      int n = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int u = x + dx, v = y + dy;
          if (u < 0 || v < 0 || u >= gray.width() || v >= gray.height()) continue;
          const long level = std::clamp(std::lround(gray(u, v)), 0L, 255L);
          ++hist[static_cast<std::size_t>(level)];
          ++n;
        }
      }
      double e = 0;
      for (int c : hist) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        e -= p * std::log2(p);
      }
      out(x, y) = e;
    }
  }
  return out;
}

inline CodePlane lbp(const RealPlane& g) {
  CodePlane out(g.width(), g.height());
  const int w = g.width(), h = g.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = g(x, y);
      int code = 0;
      if (g(clampi(x + 1, 0, w - 1), y) >= c) code |= 1;
      if (g(x, clampi(y - 1, 0, h - 1)) >= c) code |= 2;
      if (g(clampi(x - 1, 0, w - 1), y) >= c) code |= 4;
      if (g(x, clampi(y + 1, 0, h - 1)) >= c) code |= 8;
      out(x, y) = static_cast<std::uint8_t>(code);
    }
  }
  return out;
}

// Direct spatial correlation with edge replication.
inline RealPlane correlate(const RealPlane& img, const Eigen::MatrixXd& k) {
  const int r = static_cast<int>(k.rows()) / 2;
  RealPlane out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double s = 0;
      for (int i = 0; i < k.rows(); ++i) {
        for (int j = 0; j < k.cols(); ++j) {
          s += k(i, j) * img(clampi(x + j - r, 0, img.width() - 1), clampi(y + i - r, 0, img.height() - 1));
        }
      }
      out(x, y) = s;
    }
  }
  return out;
}

struct Stats {
  double mean, std;
};

inline Stats stats(const RealPlane& p, const BlockRect& r, int c = 0) {
  double s = 0;
  for (int y = r.y0; y < r.y1(); ++y)
    for (int x = r.x0; x < r.x1(); ++x) s += p(x, y, c);
  const double mean = s / r.area();
  double v = 0;
  for (int y = r.y0; y < r.y1(); ++y)
    for (int x = r.x0; x < r.x1(); ++x) v += (p(x, y, c) - mean) * (p(x, y, c) - mean);
  return {mean, std::sqrt(v / r.area())};
}

inline Stats stats(const RgbImage& p, const BlockRect& r, int c) {
  RealPlane tmp(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) tmp(x, y) = p(x, y, c);
  return stats(tmp, r);
}

inline std::vector<double> histogram(const CodePlane& codes, const BlockRect& r, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (int y = r.y0; y < r.y1(); ++y)
    for (int x = r.x0; x < r.x1(); ++x) h[codes(x, y)] += 1.0;
  for (double& v : h) v /= r.area();
  return h;
}

// Subset order from the per-pixel planes, independent of any integral.
inline Eigen::VectorXd block_features(const FeatureMaps& m, const BlockRect& r, const FeatureSubsets& s) {
  std::vector<double> v;
  if (s.rgb) {
    Stats st[3];
    for (int c = 0; c < 3; ++c) st[c] = stats(m.rgb, r, c);
    for (int c = 0; c < 3; ++c) v.push_back(st[c].mean);
    for (int c = 0; c < 3; ++c) v.push_back(st[c].std);
  }
  if (s.gray) {
    const Stats st = stats(m.gray, r);
    v.insert(v.end(), {st.mean, st.std});
  }
  if (s.entropy) {
    const Stats st = stats(m.entropy, r);
    v.insert(v.end(), {st.mean, st.std});
  }
  if (s.lbp) {
    const auto h = histogram(m.lbp, r, 16);
    v.insert(v.end(), h.begin(), h.end());
  }
  if (s.lm1) {
    std::vector<Stats> st;
    for (const auto& p : m.lm_responses) st.push_back(stats(p, r));
    for (const auto& x : st) v.push_back(x.mean);
    for (const auto& x : st) v.push_back(x.std);
  }
  if (s.lm2) {
    const auto h = histogram(m.lm_argmax, r, 15);
    v.insert(v.end(), h.begin(), h.end());
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Final vector built piece by piece from the layout rects.
inline Eigen::VectorXd final_vector(const FeatureMaps& maps, const BlockLayout& l, const FeatureLayout& flags,
                                    const PaddedFrame& frame) {
  std::vector<Eigen::VectorXd> parts;
  const Eigen::VectorXd cls = block_features(maps, l.class_rect, flags.subsets);
  parts.push_back(cls);
  for (const auto& r : l.context_rects) parts.push_back(block_features(maps, r, flags.subsets));
  if (l.support_rect) parts.push_back(block_features(maps, *l.support_rect, flags.subsets));
  if (flags.road_blocks) {
    for (const auto& r : l.road_rects) parts.push_back(block_features(maps, r, flags.subsets) - cls);
  }
  if (flags.spatial) {
    const SpatialPrior s = spatial_prior(l.class_rect, frame);
    Eigen::VectorXd sp(kSpatialDim);
    for (int k = 0; k < kSpatialDim; ++k) sp[k] = s.bits[static_cast<std::size_t>(k)];
    parts.push_back(sp);
  }
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1.0); }

// Threshold sweep by full recomputation at each threshold.
inline std::vector<double> max_f_curve(const RealPlane& prob, const Mask& gt, int ignore_rows, int steps) {
  std::vector<double> curve;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    Mask pred(prob.width(), prob.height());
    for (int y = 0; y < prob.height(); ++y)
      for (int x = 0; x < prob.width(); ++x) pred(x, y) = prob(x, y) >= t ? 255 : 0;
    long tp = 0, fp = 0, fn = 0;
    for (int y = ignore_rows; y < gt.height(); ++y) {
      for (int x = 0; x < gt.width(); ++x) {
        const bool p = pred(x, y) == 255, g = gt(x, y) == 255;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
      }
    }
    const double pr = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rc = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    curve.push_back(pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0);
  }
  return curve;
}

// Random model and batch whose hidden pre-activations all keep |a| >= margin,
// so central differences never straddle a ReLU kink.
struct GradientPoint {
  MlpModel model;
  RowMatrix x;
  Eigen::VectorXd labels;
};

inline GradientPoint gradient_point(std::uint64_t seed, int n = 6, int d = 5, int nh = 4, double margin = 1e-3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  for (;;) {
    GradientPoint p{MlpModel::initialized(d, nh, seed), RowMatrix(n, d), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < p.model.hidden.size(); ++i) p.model.hidden.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < p.model.output.size(); ++i) p.model.output[i] = g(rng);
    for (Eigen::Index i = 0; i < p.x.size(); ++i) p.x.data()[i] = g(rng);
    for (int i = 0; i < n; ++i) p.labels[i] = (rng() & 1) ? 1.0 : 0.0;
    const Eigen::MatrixXd pre = p.x * p.model.hidden.leftCols(d).transpose() +
                                Eigen::VectorXd::Ones(n) * p.model.hidden.col(d).transpose();
    if (pre.cwiseAbs().minCoeff() >= margin) return p;
  }
}

// Norm-wise relative error between analytic and central-difference gradients.
inline double gradient_error(const GradientPoint& p, double h = 1e-6) {
  const Gradients analytic = loss_and_gradient(p.model, p.x, p.labels);
  MlpModel m = p.model;
  auto numeric = [&](double& w) {
    const double keep = w;
    w = keep + h;
    const double up = loss(m, p.x, p.labels);
    w = keep - h;
    const double down = loss(m, p.x, p.labels);
    w = keep;
    return (up - down) / (2 * h);
  };
  Eigen::MatrixXd nh(m.hidden.rows(), m.hidden.cols());
  for (Eigen::Index i = 0; i < m.hidden.size(); ++i) nh.data()[i] = numeric(m.hidden.data()[i]);
  Eigen::RowVectorXd no(m.output.size());
  for (Eigen::Index i = 0; i < m.output.size(); ++i) no[i] = numeric(m.output[i]);
  const double diff = std::sqrt((analytic.hidden - nh).squaredNorm() + (analytic.output - no).squaredNorm());
  const double scale = std::max(std::sqrt(analytic.hidden.squaredNorm() + analytic.output.squaredNorm()),
                                std::sqrt(nh.squaredNorm() + no.squaredNorm()));
  return diff / std::max(scale, 1e-12);
}

}  // namespace oracle
