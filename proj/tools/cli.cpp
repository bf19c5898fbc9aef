#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "roadblocks/context.hpp"
#include "roadblocks/image_io.hpp"
#include "roadblocks/parallel.hpp"

namespace fs = std::filesystem;

namespace roadblocks::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("invalid value '" + value + "' for '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("invalid boolean '" + value + "' for '" + key + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

FeatureSubsets parse_subsets(const std::string& value) {
  FeatureSubsets s{false, false, false, false, false, false};
  if (value == "all") return FeatureSubsets{};
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part == "rgb") s.rgb = true;
    else if (part == "gray") s.gray = true;
    else if (part == "entropy") s.entropy = true;
    else if (part == "lbp") s.lbp = true;
    else if (part == "lm1") s.lm1 = true;
    else if (part == "lm2") s.lm2 = true;
    else if (!part.empty()) throw ConfigError("unknown feature subset '" + part + "'");
  }
  return s;
}

std::string subsets_text(const FeatureSubsets& s) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(s.rgb, "rgb");
  add(s.gray, "gray");
  add(s.entropy, "entropy");
  add(s.lbp, "lbp");
  add(s.lm1, "lm1");
  add(s.lm2, "lm2");
  return out;
}

struct Key {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key int_key(std::string name, std::string doc, T RunConfig::*group, int T::*field) {
  return {name, doc, [=](RunConfig& c, const std::string& v) { (c.*group).*field = parse_number<int>(name, v); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <typename T>
Key real_key(std::string name, std::string doc, T RunConfig::*group, double T::*field) {
  return {name, doc, [=](RunConfig& c, const std::string& v) { (c.*group).*field = parse_number<double>(name, v); },
          [=](const RunConfig& c) { return fmt((c.*group).*field); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(int_key("class_size", "classification block side in pixels", &RunConfig::block, &BlockConfig::class_size));
    k.push_back(int_key("context_size", "contextual block side in pixels", &RunConfig::block, &BlockConfig::context_size));
    k.push_back(int_key("radius", "number of contextual rings", &RunConfig::block, &BlockConfig::radius));
    k.push_back(int_key("ignore_top", "rows ignored at the top of a 375-row image (scaled by height)",
                        &RunConfig::block, &BlockConfig::ignore_top));
    k.push_back({"features", "comma list of rgb,gray,entropy,lbp,lm1,lm2 (or 'all')",
                 [](RunConfig& c, const std::string& v) { c.layout.subsets = parse_subsets(v); },
                 [](const RunConfig& c) { return subsets_text(c.layout.subsets); }});
    k.push_back({"road_blocks", "append road-block differences (true/false)",
                 [](RunConfig& c, const std::string& v) { c.layout.road_blocks = parse_bool("road_blocks", v); },
                 [](const RunConfig& c) { return std::string(c.layout.road_blocks ? "true" : "false"); }});
    k.push_back({"spatial", "append the spatial prior (true/false)",
                 [](RunConfig& c, const std::string& v) { c.layout.spatial = parse_bool("spatial", v); },
                 [](const RunConfig& c) { return std::string(c.layout.spatial ? "true" : "false"); }});
    k.push_back(int_key("n_hidden", "hidden units", &RunConfig::train, &TrainConfig::n_hidden));
    k.push_back(real_key("learning_rate", "SGD learning rate", &RunConfig::train, &TrainConfig::learning_rate));
    k.push_back(real_key("momentum", "SGD momentum", &RunConfig::train, &TrainConfig::momentum));
    k.push_back(int_key("batch_size", "mini-batch size", &RunConfig::train, &TrainConfig::batch_size));
    k.push_back(int_key("patience", "epochs without improvement before stopping", &RunConfig::train,
                        &TrainConfig::patience));
    k.push_back(int_key("max_epochs", "hard epoch cap", &RunConfig::train, &TrainConfig::max_epochs));
    k.push_back(real_key("max_norm_hidden", "max norm of hidden-unit weight rows", &RunConfig::train,
                         &TrainConfig::max_norm_hidden));
    k.push_back(real_key("max_norm_output", "max norm of the output weight row", &RunConfig::train,
                         &TrainConfig::max_norm_output));
    k.push_back({"train_ratio", "training share of the train/validation split",
                 [](RunConfig& c, const std::string& v) { c.train_ratio = parse_number<double>("train_ratio", v); },
                 [](const RunConfig& c) { return fmt(c.train_ratio); }});
    k.push_back({"hpo_fraction", "subsampling fraction for the hyperparameter search",
                 [](RunConfig& c, const std::string& v) { c.hpo_fraction = parse_number<double>("hpo_fraction", v); },
                 [](const RunConfig& c) { return fmt(c.hpo_fraction); }});
    k.push_back(int_key("hpo_particles", "swarm size", &RunConfig::hpo, &HpoSpace::particles));
    k.push_back(int_key("hpo_iterations", "swarm iterations", &RunConfig::hpo, &HpoSpace::iterations));
    k.push_back(real_key("hpo_n_hidden_min", "search bound", &RunConfig::hpo, &HpoSpace::n_hidden_min));
    k.push_back(real_key("hpo_n_hidden_max", "search bound", &RunConfig::hpo, &HpoSpace::n_hidden_max));
    k.push_back(real_key("hpo_learning_rate_min", "search bound", &RunConfig::hpo, &HpoSpace::learning_rate_min));
    k.push_back(real_key("hpo_learning_rate_max", "search bound", &RunConfig::hpo, &HpoSpace::learning_rate_max));
    k.push_back(real_key("hpo_max_norm_hidden_min", "search bound", &RunConfig::hpo, &HpoSpace::max_norm_hidden_min));
    k.push_back(real_key("hpo_max_norm_hidden_max", "search bound", &RunConfig::hpo, &HpoSpace::max_norm_hidden_max));
    k.push_back(real_key("hpo_max_norm_output_min", "search bound", &RunConfig::hpo, &HpoSpace::max_norm_output_min));
    k.push_back(real_key("hpo_max_norm_output_max", "search bound", &RunConfig::hpo, &HpoSpace::max_norm_output_max));
    k.push_back({"seed", "seed for splits, initialization and the swarm",
                 [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    return k;
  }();
  return table;
}

std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int n = 0;
  while (std::getline(ss, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create directory '" + dir.string() + "'");
}

std::vector<std::pair<std::string, std::string>> collect_pngs(const std::vector<std::string>& inputs) {
  std::vector<std::pair<std::string, std::string>> out;  // (id, path)
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out.emplace_back(f.stem().string(), f.string());
    } else if (fs::is_regular_file(in)) {
      out.emplace_back(fs::path(in).stem().string(), in);
    } else {
      throw DatasetError("input '" + in + "' does not exist");
    }
  }
  if (out.empty()) throw DatasetError("no input images");
  return out;
}

RealPlane prob_from_u16(const ImagePlane<std::uint16_t>& p) {
  RealPlane out(p.width(), p.height());
  for (std::size_t i = 0; i < p.data().size(); ++i) out.data()[i] = p.data()[i] / 65535.0;
  return out;
}

ImagePlane<std::uint16_t> prob_to_u16(const RealPlane& p) {
  ImagePlane<std::uint16_t> out(p.width(), p.height());
  for (std::size_t i = 0; i < p.data().size(); ++i) {
    out.data()[i] = static_cast<std::uint16_t>(std::lround(std::clamp(p.data()[i], 0.0, 1.0) * 65535.0));
  }
  return out;
}

std::string describe(const BlockConfig& b, const FeatureLayout& l) {
  return "class_size=" + std::to_string(b.class_size) + " context_size=" + std::to_string(b.context_size) +
         " radius=" + std::to_string(b.radius) + " ignore_top=" + std::to_string(b.ignore_top) + " layout=" + l.tag();
}

// Standardizes both parts with statistics of the training part.
Standardization standardize_split(SampleSet& train_part, SampleSet& val_part) {
  Standardization s = standardize_fit(train_part.features);
  s.apply(Eigen::Ref<RowMatrix>(train_part.features));
  s.apply(Eigen::Ref<RowMatrix>(val_part.features));
  return s;
}

MlpModel finish_model(MlpModel model, Standardization s, const RunConfig& cfg) {
  model.standardization = std::move(s);
  model.block_config = cfg.block;
  model.layout = cfg.layout;
  return model;
}

}  // namespace

void RunConfig::validate() const {
  block.validate();
  train.validate();
  hpo.validate();
  if (!layout.subsets.any()) throw ConfigError("at least one feature subset must be enabled");
  if (!(train_ratio > 0 && train_ratio < 1)) throw ConfigError("train_ratio must be in (0, 1)");
  if (!(hpo_fraction > 0 && hpo_fraction <= 1)) throw ConfigError("hpo_fraction must be in (0, 1]");
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const auto docs = [] {
    std::vector<std::pair<std::string, std::string>> d;
    for (const auto& k : keys()) d.emplace_back(k.name, k.doc);
    return d;
  }();
  return docs;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  for (const auto& [k, v] : parse_lines(text, origin)) {
    try {
      apply_setting(cfg, k, v);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) apply_config_text(cfg, read_text(path), path);
  for (const auto& o : overrides) apply_config_text(cfg, o, "--set");
  cfg.validate();
  return cfg;
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

void write_hyperparams(const HyperParams& hp, double score, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "n_hidden = " << hp.n_hidden << "\nlearning_rate = " << fmt(hp.learning_rate)
      << "\nmax_norm_hidden = " << fmt(hp.max_norm_hidden) << "\nmax_norm_output = " << fmt(hp.max_norm_output)
      << "\n# best validation accuracy on the subsampled split\nscore = " << fmt(score) << "\n";
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

HyperParams read_hyperparams(const std::string& path) {
  HyperParams hp;
  int seen = 0;
  for (const auto& [k, v] : parse_lines(read_text(path), path)) {
    if (k == "n_hidden") hp.n_hidden = parse_number<int>(k, v), seen |= 1;
    else if (k == "learning_rate") hp.learning_rate = parse_number<double>(k, v), seen |= 2;
    else if (k == "max_norm_hidden") hp.max_norm_hidden = parse_number<double>(k, v), seen |= 4;
    else if (k == "max_norm_output") hp.max_norm_output = parse_number<double>(k, v), seen |= 8;
    else if (k != "score") throw ConfigError(path + ": unknown hyperparameter '" + k + "'");
  }
  if (seen != 15) throw ConfigError(path + ": hyperparameter file must set n_hidden, learning_rate, max_norm_hidden "
                                           "and max_norm_output");
  return hp;
}

DatasetIndex cmd_synth(int n_images, const std::string& out_dir, std::uint64_t seed, int width, int height) {
  ensure_dir(out_dir);
  return write_synth_dataset(out_dir, n_images, seed, width, height);
}

HpoOutcome cmd_hpo(const RunConfig& cfg, const std::string& dataset_dir, const std::string& hp_out,
                   const std::string& trace_out, int threads) {
  cfg.validate();
  const DatasetIndex ds = load_dataset(dataset_dir);
  const LmFilterBank bank = build_lm_bank();
  auto [train_part, val_part] = [&] {
    const SampleSet all = build_samples(ds, cfg.block, cfg.layout, bank, threads);
    return split_train_val(all, cfg.train_ratio, cfg.seed);
  }();
  standardize_split(train_part, val_part);
  const SampleSet train_sub = subsample(train_part, cfg.hpo_fraction, cfg.seed);
  const SampleSet val_sub = subsample(val_part, cfg.hpo_fraction, cfg.seed + 1);
  if (train_sub.size() == 0 || val_sub.size() == 0) throw DatasetError("hpo: subsampled split is empty");

  TrainConfig fixed = cfg.train;
  fixed.seed = cfg.seed;
  PsoSettings settings;
  settings.particles = cfg.hpo.particles;
  settings.iterations = cfg.hpo.iterations;
  settings.threads = threads;
  HpoOutcome outcome;
  outcome.pso = pso_optimize(hpo_objective(train_sub, val_sub, fixed), cfg.hpo.box(), settings, cfg.seed);
  outcome.best = HyperParams::from_vector(outcome.pso.best_params);
  outcome.best_score = outcome.pso.best_score;
  if (!hp_out.empty()) write_hyperparams(outcome.best, outcome.best_score, hp_out);
  if (!trace_out.empty()) write_trace_csv(outcome.pso, trace_out);
  return outcome;
}

TrainOutcome cmd_train(const RunConfig& cfg_in, const std::string& dataset_dir, const std::string& hp_file,
                       const std::string& model_out, const std::string& log_out, int threads) {
  RunConfig cfg = cfg_in;
  if (!hp_file.empty()) cfg.train = read_hyperparams(hp_file).apply(cfg.train);
  cfg.train.seed = cfg.seed;
  cfg.validate();
  const DatasetIndex ds = load_dataset(dataset_dir);
  const LmFilterBank bank = build_lm_bank();
  auto [train_part, val_part] = [&] {
    const SampleSet all = build_samples(ds, cfg.block, cfg.layout, bank, threads);
    return split_train_val(all, cfg.train_ratio, cfg.seed);
  }();
  if (train_part.size() == 0 || val_part.size() == 0) throw DatasetError("train: split produced an empty part");
  Standardization s = standardize_split(train_part, val_part);
  TrainOutcome out;
  out.result = train(train_part, val_part, cfg.train);
  out.model = finish_model(out.result.model, std::move(s), cfg);
  if (!model_out.empty()) save_model(out.model, model_out);
  if (!log_out.empty()) {
    std::ofstream log(log_out);
    if (!log) throw std::runtime_error("cannot write '" + log_out + "'");
    log << "epoch,train_loss,val_accuracy,improved\n" << std::setprecision(10);
    for (const auto& r : out.result.history) {
      log << r.epoch << ',' << r.train_loss << ',' << r.val_accuracy << ',' << (r.improved ? 1 : 0) << '\n';
    }
  }
  return out;
}

std::vector<std::pair<std::string, TimingReport>> cmd_predict(const std::string& model_file,
                                                              const std::vector<std::string>& inputs,
                                                              const std::string& out_dir,
                                                              const std::optional<RunConfig>& expected,
                                                              const std::string& gt_dir, int threads) {
  const MlpModel model = load_model(model_file);
  if (expected && (expected->block != model.block_config || expected->layout != model.layout)) {
    throw ConfigError("configuration does not match the model:\n  config: " +
                      describe(expected->block, expected->layout) +
                      "\n  model:  " + describe(model.block_config, model.layout));
  }
  const auto images = collect_pngs(inputs);
  const fs::path out(out_dir);
  for (const char* sub : {"masks", "prob", "overlays"}) ensure_dir(out / sub);
  const LmFilterBank bank = build_lm_bank();
  std::vector<std::pair<std::string, TimingReport>> timings(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const auto& [id, path] = images[i];
    const RgbImage rgb = read_rgb_png(path);
    TimingReport t;
    const Prediction p = timed_predict(rgb, model, bank, t);
    write_png(p.mask, (out / "masks" / (id + ".png")).string());
    write_png16(prob_to_u16(p.prob), (out / "prob" / (id + ".png")).string());
    Mask gt = p.mask;
    if (!gt_dir.empty()) {
      const fs::path gp = fs::path(gt_dir) / (id + ".png");
      if (fs::exists(gp)) gt = read_mask_png(gp.string());
    }
    write_png(render_overlay(rgb, p.mask, gt), (out / "overlays" / (id + ".png")).string());
    timings[i] = {id, t};
  });
  write_timing_csv(timings, (out / "timing.csv").string());
  return timings;
}

std::vector<ImageMetrics> cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& csv_out,
                                   const EvalOptions& opts) {
  if (!fs::is_directory(gt_dir)) throw DatasetError("ground-truth directory '" + gt_dir + "' does not exist");
  const fs::path pred_root(pred_dir);
  const fs::path mask_dir = fs::is_directory(pred_root / "masks") ? pred_root / "masks" : pred_root;
  const fs::path prob_dir = pred_root / "prob";
  const auto gts = collect_pngs({gt_dir});
  std::vector<std::string> missing;
  for (const auto& [id, path] : gts) {
    if (!fs::exists(mask_dir / (id + ".png"))) missing.push_back((mask_dir / (id + ".png")).string());
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " predicted mask(s) missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DatasetError(msg);
  }
  BlockConfig ignore;
  ignore.ignore_top = opts.ignore_top;
  std::vector<ImageMetrics> rows(gts.size());
  parallel_for(gts.size(), opts.threads, [&](std::size_t i) {
    const auto& [id, gt_path] = gts[i];
    Mask gt = read_mask_png(gt_path);
    Mask pred = read_mask_png((mask_dir / (id + ".png")).string());
    validate_mask(gt);
    validate_mask(pred);
    if (pred.width() != gt.width() || pred.height() != gt.height()) {
      throw DatasetError("size mismatch between prediction and ground truth for '" + id + "'");
    }
    std::optional<RealPlane> prob;
    if (fs::exists(prob_dir / (id + ".png"))) prob = prob_from_u16(read_png16((prob_dir / (id + ".png")).string()));
    int ignore_rows = ignore.ignore_rows(gt.height());
    if (opts.homography) {
      gt = warp_mask(gt, *opts.homography, opts.bev_width, opts.bev_height);
      pred = warp_mask(pred, *opts.homography, opts.bev_width, opts.bev_height);
      if (prob) prob = warp_nearest(*prob, *opts.homography, opts.bev_width, opts.bev_height);
      ignore_rows = 0;
    }
    rows[i].id = id;
    rows[i].counts = confusion(pred, gt, ignore_rows);
    if (prob) rows[i].sweep = sweep_counts(*prob, gt, ignore_rows);
  });
  if (!csv_out.empty()) write_metrics_csv(rows, csv_out);
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<ExperimentResult> run_experiment(const RunConfig& cfg, const DatasetIndex& train_set,
                                             const DatasetIndex& test_set, const std::vector<std::uint64_t>& seeds,
                                             int threads) {
  cfg.validate();
  const LmFilterBank bank = build_lm_bank();
  const SampleSet samples = build_samples(train_set, cfg.block, cfg.layout, bank, threads);

  struct TestImage {
    Mask gt;
    PaddedFrame frame;
    std::vector<BlockRect> blocks;
    RowMatrix x;
  };
  std::vector<TestImage> tests(test_set.entries.size());
  parallel_for(tests.size(), threads, [&](std::size_t i) {
    const DatasetEntry& e = test_set.entries[i];
    const RgbImage rgb = read_rgb_png(e.image_path);
    TestImage& t = tests[i];
    t.gt = read_mask_png(e.mask_path);
    validate_mask(t.gt);
    t.frame = make_frame(rgb.width(), rgb.height(), cfg.block);
    const FeatureMaps maps = compute_feature_maps(pad_to_frame(rgb, t.frame), bank, cfg.layout.subsets);
    t.blocks = frame_blocks(t.frame, cfg.block);
    t.x = assemble_block_matrix(t.blocks, maps, cfg.block, cfg.layout, t.frame);
  });

  std::vector<ExperimentResult> results;
  for (const std::uint64_t seed : seeds) {
    auto [train_part, val_part] = split_train_val(samples, cfg.train_ratio, seed);
    Standardization s = standardize_split(train_part, val_part);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const TrainResult tr = train(train_part, val_part, tc);
    const MlpModel model = finish_model(tr.model, std::move(s), cfg);

    std::vector<ImageMetrics> rows(tests.size());
    parallel_for(tests.size(), threads, [&](std::size_t i) {
      const TestImage& t = tests[i];
      RowMatrix x = t.x;
      model.standardization.apply(Eigen::Ref<RowMatrix>(x));
      const Prediction p = paint_blocks(forward_batch(model, x), t.blocks, t.frame);
      const int ignore_rows = cfg.block.ignore_rows(t.gt.height());
      rows[i].counts = confusion(p.mask, t.gt, ignore_rows);
      rows[i].sweep = sweep_counts(p.prob, t.gt, ignore_rows);
    });
    ExperimentResult r;
    r.seed = seed;
    r.metrics = aggregate_metrics(rows);
    r.max_f = aggregate_max_f(rows);
    r.best_epoch = tr.best_epoch;
    r.val_accuracy = tr.best_val_accuracy;
    results.push_back(r);
  }
  return results;
}

void cmd_ablate(const RunConfig& cfg, const std::string& train_dir, const std::string& test_dir,
                const std::string& out_dir, const AblateOptions& opts) {
  cfg.validate();
  ensure_dir(out_dir);
  const DatasetIndex train_set = load_dataset(train_dir);
  const DatasetIndex test_set = load_dataset(test_dir, DatasetRole::Test);
  std::map<std::string, std::vector<ExperimentResult>> cache;
  auto run = [&](const RunConfig& c) -> const std::vector<ExperimentResult>& {
    const std::string key = std::to_string(c.block.radius) + "|" + c.layout.tag();
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::cerr << "ablate: radius " << c.block.radius << ", features " << c.layout.tag() << "\n";
      it = cache.emplace(key, run_experiment(c, train_set, test_set, opts.seeds, opts.threads)).first;
    }
    return it->second;
  };
  auto median_of = [](const std::vector<ExperimentResult>& rs, double Metrics::*field) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(r.metrics.*field);
    return median(v);
  };
  auto median_max_f = [](const std::vector<ExperimentResult>& rs) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(r.max_f);
    return median(v);
  };
  auto write_rows = [&](std::ostream& os, const std::string& label, const std::vector<ExperimentResult>& rs,
                        std::optional<double> reference_f) {
    for (const auto& r : rs) {
      os << label << ',' << r.seed << ',' << r.metrics.f_measure << ',' << r.metrics.accuracy << ','
         << r.metrics.precision << ',' << r.metrics.recall << ',' << r.max_f << ",\n";
    }
    const double f = median_of(rs, &Metrics::f_measure);
    os << label << ",median," << f << ',' << median_of(rs, &Metrics::accuracy) << ','
       << median_of(rs, &Metrics::precision) << ',' << median_of(rs, &Metrics::recall) << ',' << median_max_f(rs)
       << ',';
    if (reference_f) os << f - *reference_f;
    os << '\n';
  };
  auto open = [&](const char* name) {
    std::ofstream os(fs::path(out_dir) / name);
    if (!os) throw std::runtime_error(std::string("cannot write ") + name);
    os << std::setprecision(6) << std::fixed;
    return os;
  };

  if (opts.radius_grid) {
    auto os = open("radius.csv");
    os << "radius,seed,F,Acc,Pre,Rec,MaxF,Diff\n";
    for (int radius : opts.radii) {
      RunConfig c = cfg;
      c.block.radius = radius;
      write_rows(os, std::to_string(radius), run(c), std::nullopt);
    }
  }
  const double reference_f =
      opts.road_grid || opts.feature_grid ? median_of(run(cfg), &Metrics::f_measure) : 0.0;
  if (opts.road_grid) {
    auto os = open("road_blocks.csv");
    os << "setting,seed,F,Acc,Pre,Rec,MaxF,Diff\n";
    write_rows(os, "all blocks", run(cfg), reference_f);
    RunConfig c = cfg;
    c.layout.road_blocks = !cfg.layout.road_blocks;
    write_rows(os, cfg.layout.road_blocks ? "without road blocks" : "with road blocks", run(c), reference_f);
  }
  if (opts.feature_grid) {
    auto os = open("features.csv");
    os << "removed,seed,F,Acc,Pre,Rec,MaxF,Diff\n";
    write_rows(os, "none", run(cfg), reference_f);
    const std::vector<std::pair<const char*, bool FeatureSubsets::*>> subsets = {
        {"rgb", &FeatureSubsets::rgb}, {"gray", &FeatureSubsets::gray}, {"entropy", &FeatureSubsets::entropy},
        {"lbp", &FeatureSubsets::lbp}, {"lm1", &FeatureSubsets::lm1},   {"lm2", &FeatureSubsets::lm2}};
    for (const auto& [name, field] : subsets) {
      if (!(cfg.layout.subsets.*field)) continue;
      RunConfig c = cfg;
      c.layout.subsets.*field = false;
      if (!c.layout.subsets.any()) continue;
      write_rows(os, name, run(c), reference_f);
    }
    if (cfg.layout.spatial) {
      RunConfig c = cfg;
      c.layout.spatial = false;
      write_rows(os, "spatial", run(c), reference_f);
    }
  }
}

}  // namespace roadblocks::cli
