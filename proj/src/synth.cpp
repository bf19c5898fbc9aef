#include <algorithm>
#include <cmath>
#include <random>

#include "roadblocks/data.hpp"

namespace roadblocks {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Bilinear-smoothstep lattice noise in [-1, 1].
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int width, int height, double cell)
      : cell_(cell), cols_(static_cast<int>(width / cell) + 2), rows_(static_cast<int>(height / cell) + 2),
        lattice_(static_cast<std::size_t>(cols_ * rows_)) {
    for (double& v : lattice_) v = uniform(rng, -1.0, 1.0);
  }

  double operator()(double x, double y) const {
    const double fx = x / cell_, fy = y / cell_;
    const int ix = std::min(static_cast<int>(fx), cols_ - 2);
    const int iy = std::min(static_cast<int>(fy), rows_ - 2);
    const double tx = smooth(fx - ix), ty = smooth(fy - iy);
    const double a = at(ix, iy) + tx * (at(ix + 1, iy) - at(ix, iy));
    const double b = at(ix, iy + 1) + tx * (at(ix + 1, iy + 1) - at(ix, iy + 1));
    return a + ty * (b - a);
  }

 private:
  static double smooth(double t) { return t * t * (3 - 2 * t); }
  double at(int x, int y) const { return lattice_[static_cast<std::size_t>(y * cols_ + x)]; }

  double cell_;
  int cols_, rows_;
  std::vector<double> lattice_;
};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Rgb {
  double r, g, b;
};

// The road surface process; decoys reuse it with their own noise draws.
struct RoadTexture {
  Rgb base;
  double grain;      // per-pixel noise std
  double mottle;     // value-noise amplitude
  double cell;

  static RoadTexture random(Rng& rng) {
    const double g = uniform(rng, 80, 130);
    const double tint = uniform(rng, -4, 4);
    return {{g + tint, g, g - tint}, uniform(rng, 8, 14), uniform(rng, 8, 18), uniform(rng, 5, 10)};
  }
};

class RoadPainter {
 public:
  RoadPainter(const RoadTexture& tex, Rng& rng, int width, int height)
      : tex_(tex), noise_(rng, width, height, tex.cell) {}

  Rgb at(int x, int y, Rng& rng) const {
    const double m = tex_.mottle * noise_(x, y);
    const double n = std::normal_distribution<double>(0.0, tex_.grain)(rng);
    return {tex_.base.r + m + n, tex_.base.g + m + n, tex_.base.b + m + n};
  }

 private:
  RoadTexture tex_;
  ValueNoise noise_;
};

void put(RgbImage& img, int x, int y, const Rgb& c) {
  img(x, y, 0) = to_byte(c.r);
  img(x, y, 1) = to_byte(c.g);
  img(x, y, 2) = to_byte(c.b);
}

struct Trapezoid {
  double top_y, bottom_y;
  double top_left, top_right, bottom_left, bottom_right;

  bool row_span(int y, double& left, double& right) const {
    if (y + 0.5 < top_y) return false;
    const double t = std::clamp((y + 0.5 - top_y) / (bottom_y - top_y), 0.0, 1.0);
    left = top_left + t * (bottom_left - top_left);
    right = top_right + t * (bottom_right - top_right);
    return true;
  }
};

SynthScene render(Rng& rng, int w, int h) {
  SynthScene scene;
  scene.image = RgbImage(w, h, 3);
  scene.mask = Mask(w, h);
  scene.horizon = static_cast<int>(std::lround(uniform(rng, 0.38, 0.46) * h));
  const int horizon = scene.horizon;

  // Sky gradient and buildings above the horizon.
  const Rgb sky_top{uniform(rng, 110, 170), uniform(rng, 150, 200), uniform(rng, 200, 250)};
  const Rgb sky_low{uniform(rng, 190, 230), uniform(rng, 200, 235), uniform(rng, 215, 245)};
  for (int y = 0; y < horizon; ++y) {
    const double t = static_cast<double>(y) / std::max(horizon - 1, 1);
    const Rgb c{sky_top.r + t * (sky_low.r - sky_top.r), sky_top.g + t * (sky_low.g - sky_top.g),
                sky_top.b + t * (sky_low.b - sky_top.b)};
    for (int x = 0; x < w; ++x) put(scene.image, x, y, c);
  }
  const int n_buildings = uniform_int(rng, 2, 6);
  for (int i = 0; i < n_buildings; ++i) {
    const int bw = uniform_int(rng, w / 12, w / 4);
    const int bx = uniform_int(rng, -bw / 2, w - bw / 2);
    const int bh = static_cast<int>(uniform(rng, 0.1, 0.35) * h);
    const Rgb c{uniform(rng, 90, 200), uniform(rng, 80, 180), uniform(rng, 70, 170)};
    const int window = uniform_int(rng, 4, 8);
    for (int y = std::max(horizon - bh, 0); y < horizon; ++y) {
      for (int x = std::max(bx, 0); x < std::min(bx + bw, w); ++x) {
        const bool win = ((x - bx) % window < window / 2) && ((horizon - y) % window < window / 2);
        const double f = win ? 0.6 : 1.0;
        const double n = std::normal_distribution<double>(0.0, 5.0)(rng);
        put(scene.image, x, y, {c.r * f + n, c.g * f + n, c.b * f + n});
      }
    }
  }

  // Ground: grass and dirt blended by a coarse noise field.
  const Rgb grass{uniform(rng, 55, 90), uniform(rng, 95, 140), uniform(rng, 35, 70)};
  const Rgb dirt{uniform(rng, 115, 150), uniform(rng, 90, 120), uniform(rng, 65, 90)};
  const ValueNoise mix(rng, w, h, uniform(rng, 40, 90));
  const ValueNoise grass_fine(rng, w, h, 3.0);
  const ValueNoise dirt_mid(rng, w, h, 12.0);
  const double dirt_bias = uniform(rng, -0.4, 0.4);
  for (int y = horizon; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = std::clamp(0.5 + 1.5 * (mix(x, y) + dirt_bias), 0.0, 1.0);
      const double gn = 25 * grass_fine(x, y);
      const double dn = 18 * dirt_mid(x, y);
      const double n = std::normal_distribution<double>(0.0, 9.0)(rng);
      put(scene.image, x, y,
          {(1 - a) * (grass.r + gn) + a * (dirt.r + dn) + n, (1 - a) * (grass.g + gn) + a * (dirt.g + dn) + n,
           (1 - a) * (grass.b + gn) + a * (dirt.b + dn) + n});
    }
  }

  // Road trapezoid converging toward a vanishing point on the horizon.
  const double vx = uniform(rng, 0.35, 0.65) * w;
  const double top_half = uniform(rng, 0.02, 0.06) * w;
  const Trapezoid road{static_cast<double>(horizon), static_cast<double>(h), vx - top_half, vx + top_half,
                       uniform(rng, -0.1, 0.2) * w, uniform(rng, 0.8, 1.1) * w};
  const RoadTexture tex = RoadTexture::random(rng);
  const RoadPainter road_paint(tex, rng, w, h);
  for (int y = horizon; y < h; ++y) {
    double left = 0, right = 0;
    if (!road.row_span(y, left, right)) continue;
    for (int x = 0; x < w; ++x) {
      if (x + 0.5 < left || x + 0.5 >= right) continue;
      scene.mask(x, y) = kRoadValue;
      put(scene.image, x, y, road_paint.at(x, y, rng));
    }
  }

  // Dashed center marking; part of the road in the mask.
  if (uniform(rng, 0, 1) < 0.6) {
    const double dash_phase = uniform(rng, 0, 1);
    const double bright = uniform(rng, 200, 240);
    for (int y = horizon; y < h; ++y) {
      double left = 0, right = 0;
      if (!road.row_span(y, left, right)) continue;
      const double t = (y + 0.5 - road.top_y) / (road.bottom_y - road.top_y);
      if (std::fmod(std::sqrt(t) * 7 + dash_phase, 1.0) >= 0.5) continue;
      const double half = 0.5 + 0.008 * w * t;
      const double cx = 0.5 * (left + right);
      for (int x = std::max(0, static_cast<int>(cx - half)); x < std::min(w, static_cast<int>(cx + half) + 1); ++x) {
        if (scene.mask(x, y) != kRoadValue) continue;
        const double n = std::normal_distribution<double>(0.0, 6.0)(rng);
        put(scene.image, x, y, {bright + n, bright + n, bright - 10 + n});
      }
    }
  }

  // Decoys: background patches drawn with the road's texture process.
  const RoadPainter decoy_paint(tex, rng, w, h);
  const int n_decoys = uniform_int(rng, 3, 6);
  for (int attempt = 0; attempt < 400 && static_cast<int>(scene.decoys.size()) < n_decoys; ++attempt) {
    const int dw = uniform_int(rng, 30, 60);
    const int dh = uniform_int(rng, 20, 40);
    if (h - dh <= horizon + 2 || w - dw <= 0) break;
    const BlockRect r{uniform_int(rng, 0, w - dw), uniform_int(rng, horizon + 2, h - dh), dw, dh};
    constexpr int kMargin = 6;
    bool clear = true;
    for (int y = std::max(r.y0 - kMargin, 0); y < std::min(r.y1() + kMargin, h) && clear; ++y) {
      for (int x = std::max(r.x0 - kMargin, 0); x < std::min(r.x1() + kMargin, w); ++x) {
        if (scene.mask(x, y) == kRoadValue) {
          clear = false;
          break;
        }
      }
    }
    for (const BlockRect& d : scene.decoys) {
      if (r.x0 < d.x1() + kMargin && d.x0 < r.x1() + kMargin && r.y0 < d.y1() + kMargin && d.y0 < r.y1() + kMargin) {
        clear = false;
      }
    }
    if (!clear) continue;
    for (int y = r.y0; y < r.y1(); ++y) {
      for (int x = r.x0; x < r.x1(); ++x) put(scene.image, x, y, decoy_paint.at(x, y, rng));
    }
    scene.decoys.push_back(r);
  }

  // Shadow ellipses darken whatever lies beneath.
  const int n_shadows = uniform_int(rng, 1, 3);
  for (int i = 0; i < n_shadows; ++i) {
    const double cx = uniform(rng, 0, w), cy = uniform(rng, horizon, h);
    const double ax = uniform(rng, 20, 80), ay = uniform(rng, 8, 25);
    const double k = uniform(rng, 0.55, 0.8);
    for (int y = std::max(0, static_cast<int>(cy - ay)); y < std::min(h, static_cast<int>(cy + ay) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(cx - ax)); x < std::min(w, static_cast<int>(cx + ax) + 1); ++x) {
        const double dx = (x + 0.5 - cx) / ax, dy = (y + 0.5 - cy) / ay;
        if (dx * dx + dy * dy > 1) continue;
        for (int c = 0; c < 3; ++c) scene.image(x, y, c) = to_byte(scene.image(x, y, c) * k);
      }
    }
  }
  return scene;
}

double road_fraction(const Mask& mask) {
  const auto road = std::count(mask.data().begin(), mask.data().end(), kRoadValue);
  return static_cast<double>(road) / static_cast<double>(mask.data().size());
}

}  // namespace

SynthScene synth_scene(std::uint64_t seed, int width, int height) {
  if (width < 64 || height < 32) throw std::invalid_argument("synth_scene: image must be at least 64x32");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5c3eu};
  Rng rng(seq);
  // Redraw until the road covers a plausible share of the frame.
  for (int attempt = 0; attempt < 64; ++attempt) {
    SynthScene scene = render(rng, width, height);
    const double f = road_fraction(scene.mask);
    if (f >= 0.15 && f <= 0.5) return scene;
  }
  throw std::logic_error("synth_scene: road fraction out of range after 64 draws");
}

}  // namespace roadblocks
