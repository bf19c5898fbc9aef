#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "roadblocks/data.hpp"
#include "roadblocks/eval.hpp"
#include "roadblocks/hpo.hpp"
#include "roadblocks/model.hpp"

namespace roadblocks::cli {

/// Every knob of a run. Text form is one `key = value` per line, `#` starts
/// a comment; see `config_keys()` for the accepted keys.
struct RunConfig {
  BlockConfig block;
  FeatureLayout layout;
  TrainConfig train;
  HpoSpace hpo;
  double hpo_fraction = 0.2;
  double train_ratio = 0.7;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Accepted keys with a one-line description each.
const std::vector<std::pair<std::string, std::string>>& config_keys();

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Parses `key=value` text; unknown keys and malformed values throw ConfigError.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<text>");
/// Defaults, then the file (when non-empty), then each `key=value` override.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
std::string to_text(const RunConfig& cfg);

void write_hyperparams(const HyperParams& hp, double score, const std::string& path);
HyperParams read_hyperparams(const std::string& path);

// ---------------------------------------------------------------------------

DatasetIndex cmd_synth(int n_images, const std::string& out_dir, std::uint64_t seed, int width = kSynthWidth,
                       int height = kSynthHeight);

struct HpoOutcome {
  HyperParams best;
  double best_score = 0;
  PsoResult pso;
};

/// Subsamples both splits by `hpo_fraction`, runs the swarm and writes the
/// winner (key=value) and the trace CSV.
HpoOutcome cmd_hpo(const RunConfig& cfg, const std::string& dataset_dir, const std::string& hp_out,
                   const std::string& trace_out, int threads);

struct TrainOutcome {
  MlpModel model;
  TrainResult result;
};

/// Samples, split, standardization fitted on the training part, early
/// stopping training. Writes the model and a per-epoch log CSV.
TrainOutcome cmd_train(const RunConfig& cfg, const std::string& dataset_dir, const std::string& hp_file,
                       const std::string& model_out, const std::string& log_out, int threads);

/// Writes `masks/`, `prob/` (16-bit), `overlays/` and `timing.csv` under
/// `out_dir`. `inputs` are PNG files or directories of PNGs. When
/// `expected` is set its block config and layout must match the model's.
/// Overlays compare against `gt_dir/<id>.png` when given.
std::vector<std::pair<std::string, TimingReport>> cmd_predict(const std::string& model_file,
                                                              const std::vector<std::string>& inputs,
                                                              const std::string& out_dir,
                                                              const std::optional<RunConfig>& expected,
                                                              const std::string& gt_dir, int threads);

struct EvalOptions {
  int ignore_top = 150;
  std::optional<Eigen::Matrix3d> homography;
  int bev_width = 0, bev_height = 0;
  int threads = 1;
};

/// Compares `pred_dir/masks/<id>.png` (or `pred_dir/<id>.png`) with every
/// `gt_dir/<id>.png`; MaxF uses `pred_dir/prob/` when present.
std::vector<ImageMetrics> cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& csv_out,
                                   const EvalOptions& opts);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentResult {
  std::uint64_t seed = 0;
  Metrics metrics;
  double max_f = 0;
  int best_epoch = 0;
  double val_accuracy = 0;
};

/// Trains one model per seed on `train_set` and evaluates each on
/// `test_set` with summed-pixel aggregation. Features are computed once.
std::vector<ExperimentResult> run_experiment(const RunConfig& cfg, const DatasetIndex& train_set,
                                             const DatasetIndex& test_set, const std::vector<std::uint64_t>& seeds,
                                             int threads);

struct AblateOptions {
  std::vector<int> radii = {0, 1, 2, 3};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool radius_grid = true;
  bool road_grid = true;
  bool feature_grid = true;
  int threads = 1;
};

/// Writes radius.csv, road_blocks.csv and features.csv under `out_dir`.
void cmd_ablate(const RunConfig& cfg, const std::string& train_dir, const std::string& test_dir,
                const std::string& out_dir, const AblateOptions& opts);

double median(std::vector<double> v);

}  // namespace roadblocks::cli
