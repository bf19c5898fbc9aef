#include "roadblocks/eval.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "roadblocks/context.hpp"

namespace roadblocks {

namespace {

void require_same_size(const char* what, int w1, int h1, int w2, int h2) {
  if (w1 != w2 || h1 != h2) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(w1) + "x" +
                                std::to_string(h1) + " vs " + std::to_string(w2) + "x" + std::to_string(h2) + ")");
  }
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double f_of(const ConfusionCounts& c) {
  const double p = ratio(c.tp, c.tp + c.fp);
  const double r = ratio(c.tp, c.tp + c.fn);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

using Clock = std::chrono::steady_clock;
double seconds(Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); }

}  // namespace

ConfusionCounts confusion(const Mask& pred, const Mask& gt, int ignore_rows) {
  require_same_size("confusion", pred.width(), pred.height(), gt.width(), gt.height());
  if (pred.channels() != 1 || gt.channels() != 1) throw std::invalid_argument("confusion: masks must be single-channel");
  ConfusionCounts c;
  for (int y = std::max(ignore_rows, 0); y < gt.height(); ++y) {
    const auto p = pred.row(y);
    const auto g = gt.row(y);
    for (std::size_t x = 0; x < g.size(); ++x) {
      const bool pr = p[x] == kRoadValue;
      const bool gr = g[x] == kRoadValue;
      if (pr && gr) ++c.tp;
      else if (pr) ++c.fp;
      else if (gr) ++c.fn;
      else ++c.tn;
    }
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0) throw std::invalid_argument("metrics: negative count");
  if (c.total() == 0) throw std::invalid_argument("metrics: empty confusion");
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f_measure = f_of(c);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.fnr = ratio(c.fn, c.fn + c.tp);
  return m;
}

std::vector<ConfusionCounts> sweep_counts(const RealPlane& prob, const Mask& gt, int ignore_rows, int steps) {
  require_same_size("max_f_sweep", prob.width(), prob.height(), gt.width(), gt.height());
  if (steps < 1) throw std::invalid_argument("max_f_sweep: step must be in (0, 1]");
  const auto n = static_cast<std::size_t>(steps) + 1;
  // hist[k]: pixels whose highest passing threshold index is k; index n means none pass.
  std::vector<std::int64_t> road_hist(n + 1, 0), bg_hist(n + 1, 0);
  for (int y = std::max(ignore_rows, 0); y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      const double p = prob(x, y);
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("max_f_sweep: probabilities must lie in [0, 1]");
      // Largest k with k/steps <= p, computed with the same division the thresholds use.
      int k = std::min(static_cast<int>(p * steps), steps);
      while (k < steps && static_cast<double>(k + 1) / steps <= p) ++k;
      while (k >= 0 && static_cast<double>(k) / steps > p) --k;
      const std::size_t slot = k < 0 ? n : static_cast<std::size_t>(k);
      (gt(x, y) == kRoadValue ? road_hist : bg_hist)[slot]++;
    }
  }
  std::int64_t road_total = 0, bg_total = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    road_total += road_hist[i];
    bg_total += bg_hist[i];
  }
  // Pixels positive at threshold i are those with slot >= i (excluding "none").
  std::vector<ConfusionCounts> out(n);
  std::int64_t road_above = 0, bg_above = 0;
  for (std::size_t i = n; i-- > 0;) {
    road_above += road_hist[i];
    bg_above += bg_hist[i];
    out[i] = {road_above, bg_above, bg_total - bg_above, road_total - road_above};
  }
  return out;
}

MaxFResult max_f_from_counts(const std::vector<ConfusionCounts>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("max_f_from_counts: need at least two thresholds");
  const int steps = static_cast<int>(counts.size()) - 1;
  MaxFResult r;
  r.max_f = -1;
  for (int i = 0; i <= steps; ++i) {
    if (counts[static_cast<std::size_t>(i)].total() == 0) throw std::invalid_argument("max_f_sweep: empty confusion");
    const double t = static_cast<double>(i) / steps;
    const double f = f_of(counts[static_cast<std::size_t>(i)]);
    r.thresholds.push_back(t);
    r.curve.push_back(f);
    if (f > r.max_f) {
      r.max_f = f;
      r.threshold = t;
    }
  }
  return r;
}

MaxFResult max_f_sweep(const RealPlane& prob, const Mask& gt, int ignore_rows, double step) {
  if (!(step > 0 && step <= 1)) throw std::invalid_argument("max_f_sweep: step must be in (0, 1]");
  const int steps = static_cast<int>(std::lround(1.0 / step));
  return max_f_from_counts(sweep_counts(prob, gt, ignore_rows, steps));
}

Mask threshold_mask(const RealPlane& prob, double threshold) {
  Mask m(prob.width(), prob.height());
  for (std::size_t i = 0; i < prob.data().size(); ++i) {
    m.data()[i] = prob.data()[i] >= threshold ? kRoadValue : kNonRoadValue;
  }
  return m;
}

RgbImage render_overlay(const RgbImage& rgb, const Mask& pred, const Mask& gt) {
  require_same_size("render_overlay", rgb.width(), rgb.height(), pred.width(), pred.height());
  require_same_size("render_overlay", rgb.width(), rgb.height(), gt.width(), gt.height());
  if (rgb.channels() != 3) throw std::invalid_argument("render_overlay: expected an RGB image");
  RgbImage out = rgb;
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const bool p = pred(x, y) == kRoadValue;
      const bool g = gt(x, y) == kRoadValue;
      if (!p && !g) continue;
      const int channel = p && g ? 1 : (g ? 0 : 2);  // TP green, FN red, FP blue
      for (int c = 0; c < 3; ++c) {
        const int tint = c == channel ? 255 : 0;
        out(x, y, c) = static_cast<std::uint8_t>((rgb(x, y, c) + tint + 1) / 2);
      }
    }
  }
  return out;
}

Prediction paint_blocks(const Eigen::VectorXd& probs, std::span<const BlockRect> blocks, const PaddedFrame& frame) {
  if (probs.size() != static_cast<Eigen::Index>(blocks.size())) {
    throw std::invalid_argument("paint_blocks: one probability per block expected");
  }
  Prediction out{Mask(frame.width, frame.height), RealPlane(frame.width, frame.height)};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockRect& r = blocks[i];
    const double p = probs[static_cast<Eigen::Index>(i)];
    const std::uint8_t label = threshold_label(p) == Label::Road ? kRoadValue : kNonRoadValue;
    const int x0 = std::max(r.x0 - frame.pad, 0), y0 = std::max(r.y0 - frame.pad, 0);
    const int x1 = std::min(r.x1() - frame.pad, frame.width), y1 = std::min(r.y1() - frame.pad, frame.height);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        out.mask(x, y) = label;
        out.prob(x, y) = p;
      }
    }
  }
  return out;
}

Prediction timed_predict(const RgbImage& rgb, const MlpModel& model, const LmFilterBank& bank, TimingReport& timing) {
  if (rgb.channels() != 3) throw std::invalid_argument("predict: expected an RGB image");
  const BlockConfig& cfg = model.block_config;
  const FeatureLayout& layout = model.layout;
  if (expected_dim(cfg, layout) != model.input_dim()) {
    throw std::invalid_argument("predict: model input dimension " + std::to_string(model.input_dim()) +
                                " does not match its layout (" + std::to_string(expected_dim(cfg, layout)) + ")");
  }
  timing = {};
  timing.radius = cfg.radius;
  const auto t0 = Clock::now();
  const PaddedFrame frame = make_frame(rgb.width(), rgb.height(), cfg);
  FeatureMaps maps = compute_feature_planes(pad_to_frame(rgb, frame), bank, layout.subsets);
  const auto t1 = Clock::now();
  build_integrals(maps, layout.subsets);
  const auto blocks = frame_blocks(frame, cfg);
  RowMatrix x = assemble_block_matrix(blocks, maps, cfg, layout, frame);
  model.standardization.apply(Eigen::Ref<RowMatrix>(x));
  const auto t2 = Clock::now();
  const Eigen::VectorXd probs = forward_batch(model, x);
  const auto t3 = Clock::now();

  Prediction out = paint_blocks(probs, blocks, frame);
  const auto t4 = Clock::now();
  timing.feature_extraction = seconds(t0, t1);
  timing.preprocessing_concat = seconds(t1, t2);
  timing.model_prediction = seconds(t2, t3);
  timing.total = seconds(t0, t4);
  return out;
}

Prediction predict(const RgbImage& rgb, const MlpModel& model, const LmFilterBank& bank) {
  TimingReport ignored;
  return timed_predict(rgb, model, bank, ignored);
}

Metrics aggregate_metrics(const std::vector<ImageMetrics>& rows) {
  ConfusionCounts sum;
  for (const auto& r : rows) sum += r.counts;
  return metrics(sum);
}

double aggregate_max_f(const std::vector<ImageMetrics>& rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<ConfusionCounts> sum(rows.front().sweep.size());
  for (const auto& r : rows) {
    if (r.sweep.empty() || r.sweep.size() != sum.size()) return std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r.sweep[i];
  }
  return max_f_from_counts(sum).max_f;
}

void write_metrics_csv(const std::vector<ImageMetrics>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "id,MaxF,F,Acc,Pre,Rec,FPR,FNR,tp,fp,tn,fn\n" << std::setprecision(6) << std::fixed;
  auto line = [&](const std::string& id, double max_f, const ConfusionCounts& c) {
    const Metrics m = metrics(c);
    out << id << ',';
    if (!std::isnan(max_f)) out << max_f;
    out << ',' << m.f_measure << ',' << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.fpr << ','
        << m.fnr << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << '\n';
  };
  ConfusionCounts sum;
  for (const auto& r : rows) {
    line(r.id, r.sweep.empty() ? std::numeric_limits<double>::quiet_NaN() : max_f_from_counts(r.sweep).max_f,
         r.counts);
    sum += r.counts;
  }
  if (!rows.empty()) line("aggregate", aggregate_max_f(rows), sum);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_timing_csv(const std::vector<std::pair<std::string, TimingReport>>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "id,radius,feature_extraction,preprocessing_concat,model_prediction,total\n" << std::setprecision(6)
      << std::fixed;
  TimingReport mean;
  for (const auto& [id, t] : rows) {
    out << id << ',' << t.radius << ',' << t.feature_extraction << ',' << t.preprocessing_concat << ','
        << t.model_prediction << ',' << t.total << '\n';
    mean.feature_extraction += t.feature_extraction;
    mean.preprocessing_concat += t.preprocessing_concat;
    mean.model_prediction += t.model_prediction;
    mean.total += t.total;
    mean.radius = t.radius;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    out << "mean," << mean.radius << ',' << mean.feature_extraction / n << ',' << mean.preprocessing_concat / n << ','
        << mean.model_prediction / n << ',' << mean.total / n << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace roadblocks
