#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "roadblocks/parallel.hpp"

using namespace roadblocks;
using namespace roadblocks::cli;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  int threads = default_threads();

  RunConfig load() const {
    RunConfig cfg = load_config(config_path, sets);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
  bool has_config() const { return !config_path.empty() || !sets.empty(); }
};

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) {
    app->add_option("--config", c.config_path, "key = value config file (see `roadblocks config --keys`)")
        ->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override one config key, e.g. --set radius=2 (repeatable)");
    app->add_option("--seed", c.seed, "seed (overrides the config value)");
  }
  app->add_option("--threads", c.threads, "worker threads (default: $ROADBLOCKS_THREADS or 1)")
      ->check(CLI::PositiveNumber);
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::uint64_t>& v) {
  if (v.empty()) throw ConfigError("at least one seed is required");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roadblocks: block-based road segmentation with contextual blocks"};
  app.require_subcommand(1);

  // config
  bool list_keys = false;
  Common config_common;
  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration or the accepted keys");
  add_common(config_cmd, config_common);
  config_cmd->add_flag("--keys", list_keys, "list accepted keys with descriptions");

  // synth
  int synth_n = 100;
  std::string synth_out;
  std::uint64_t synth_seed = 1;
  int synth_w = kSynthWidth, synth_h = kSynthHeight;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (images/, masks/, index.txt)");
  synth->add_option("-n,--count", synth_n, "number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "seed of the first scene");
  synth->add_option("--width", synth_w, "image width")->check(CLI::Range(64, 100000));
  synth->add_option("--height", synth_h, "image height")->check(CLI::Range(32, 100000));

  // import
  std::string kitti_dir, import_out;
  auto* import_cmd = app.add_subcommand("import", "Convert KITTI road ground truth to binary masks");
  import_cmd->add_option("--kitti", kitti_dir, "KITTI road directory (image_2/, gt_image_2/)")->required();
  import_cmd->add_option("-o,--out", import_out, "output dataset directory")->required();

  // hpo
  Common hpo_common;
  std::string hpo_data, hpo_out = "hyperparams.txt", hpo_trace = "hpo_trace.csv";
  auto* hpo = app.add_subcommand("hpo", "Particle-swarm hyperparameter search on subsampled splits");
  add_common(hpo, hpo_common);
  hpo->add_option("--data", hpo_data, "training/validation dataset directory")->required();
  hpo->add_option("--out", hpo_out, "winning hyperparameters (key = value)");
  hpo->add_option("--trace", hpo_trace, "per-training trace CSV");

  // train
  Common train_common;
  std::string train_data, train_hp, train_model = "model.rbm", train_log = "train_log.csv";
  auto* train_cmd = app.add_subcommand("train", "Train a model with early stopping");
  add_common(train_cmd, train_common);
  train_cmd->add_option("--data", train_data, "training/validation dataset directory")->required();
  train_cmd->add_option("--hp", train_hp, "hyperparameter file from `hpo`")->check(CLI::ExistingFile);
  train_cmd->add_option("--model", train_model, "output model file");
  train_cmd->add_option("--log", train_log, "per-epoch log CSV");

  // predict
  Common predict_common;
  std::string predict_model, predict_out, predict_gt;
  std::vector<std::string> predict_inputs;
  auto* predict = app.add_subcommand("predict", "Segment images; writes masks, probabilities, overlays, timing");
  add_common(predict, predict_common);
  predict->add_option("--model", predict_model, "model file")->required()->check(CLI::ExistingFile);
  predict->add_option("inputs", predict_inputs, "PNG files or directories")->required();
  predict->add_option("-o,--out", predict_out, "output directory")->required();
  predict->add_option("--gt", predict_gt, "ground-truth mask directory for overlays");

  // eval
  Common eval_common;
  std::string eval_pred, eval_gt, eval_csv = "metrics.csv", eval_h;
  int eval_ignore = 150;
  std::vector<int> bev_size;
  auto* eval = app.add_subcommand("eval", "Pixel-wise metrics of predictions against ground truth");
  add_common(eval, eval_common, false);
  eval->add_option("--pred", eval_pred, "prediction directory (from `predict`)")->required();
  eval->add_option("--gt", eval_gt, "ground-truth mask directory")->required();
  eval->add_option("--out", eval_csv, "metrics CSV");
  eval->add_option("--ignore-top", eval_ignore, "rows ignored at the top of a 375-row image");
  eval->add_option("--homography", eval_h, "file with 9 numbers (row-major 3x3) mapping image to BEV coordinates");
  eval->add_option("--bev-size", bev_size, "BEV output width and height")->expected(2);

  // ablate
  Common ablate_common;
  std::string ablate_train, ablate_test, ablate_out;
  AblateOptions ablate_opts;
  std::vector<std::uint64_t> ablate_seeds = {1, 2, 3};
  std::string ablate_grid = "all";
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate over radius and feature-subset grids");
  add_common(ablate, ablate_common);
  ablate->add_option("--train", ablate_train, "training dataset directory")->required();
  ablate->add_option("--test", ablate_test, "test dataset directory")->required();
  ablate->add_option("-o,--out", ablate_out, "output directory")->required();
  ablate->add_option("--seeds", ablate_seeds, "training seeds; medians are reported")->delimiter(',');
  ablate->add_option("--radii", ablate_opts.radii, "radii of the radius grid")->delimiter(',');
  ablate->add_option("--grid", ablate_grid, "radius, road, features or all")
      ->check(CLI::IsMember({"radius", "road", "features", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (config_cmd->parsed()) {
      if (list_keys) {
        for (const auto& [k, doc] : config_keys()) std::cout << k << "\t" << doc << "\n";
      } else {
        std::cout << to_text(config_common.load());
      }
    } else if (synth->parsed()) {
      cmd_synth(synth_n, synth_out, synth_seed, synth_w, synth_h);
      std::cout << "wrote " << synth_n << " scenes to " << synth_out << "\n";
    } else if (import_cmd->parsed()) {
      const auto idx = import_kitti(kitti_dir, import_out);
      std::cout << "imported " << idx.entries.size() << " images to " << import_out << "\n";
    } else if (hpo->parsed()) {
      const auto out = cmd_hpo(hpo_common.load(), hpo_data, hpo_out, hpo_trace, hpo_common.threads);
      std::cout << "best score " << out.best_score << ": n_hidden=" << out.best.n_hidden
                << " learning_rate=" << out.best.learning_rate << " max_norm_hidden=" << out.best.max_norm_hidden
                << " max_norm_output=" << out.best.max_norm_output << " (" << out.pso.trace.size()
                << " trainings)\n";
    } else if (train_cmd->parsed()) {
      const auto out =
          cmd_train(train_common.load(), train_data, train_hp, train_model, train_log, train_common.threads);
      std::cout << "best epoch " << out.result.best_epoch << " of " << out.result.history.size()
                << ", validation accuracy " << out.result.best_val_accuracy << "; model written to " << train_model
                << "\n";
    } else if (predict->parsed()) {
      std::optional<RunConfig> expected;
      if (predict_common.has_config()) expected = predict_common.load();
      const auto t = cmd_predict(predict_model, predict_inputs, predict_out, expected, predict_gt,
                                 predict_common.threads);
      std::cout << "predicted " << t.size() << " images into " << predict_out << "\n";
    } else if (eval->parsed()) {
      EvalOptions opts;
      opts.ignore_top = eval_ignore;
      opts.threads = eval_common.threads;
      if (!eval_h.empty()) {
        std::ifstream in(eval_h);
        Eigen::Matrix3d h;
        for (int i = 0; i < 9; ++i) {
          if (!(in >> h(i / 3, i % 3))) throw ConfigError("homography file must hold 9 numbers");
        }
        if (bev_size.size() != 2 || bev_size[0] <= 0 || bev_size[1] <= 0) {
          throw ConfigError("--homography requires --bev-size W H");
        }
        opts.homography = h;
        opts.bev_width = bev_size[0];
        opts.bev_height = bev_size[1];
      }
      const auto rows = cmd_eval(eval_pred, eval_gt, eval_csv, opts);
      const Metrics m = aggregate_metrics(rows);
      std::cout << "aggregate over " << rows.size() << " images: F=" << m.f_measure << " MaxF="
                << aggregate_max_f(rows) << " Acc=" << m.accuracy << " Pre=" << m.precision << " Rec=" << m.recall
                << "\n";
    } else if (ablate->parsed()) {
      ablate_opts.seeds = parse_seeds(ablate_seeds);
      ablate_opts.threads = ablate_common.threads;
      ablate_opts.radius_grid = ablate_grid == "all" || ablate_grid == "radius";
      ablate_opts.road_grid = ablate_grid == "all" || ablate_grid == "road";
      ablate_opts.feature_grid = ablate_grid == "all" || ablate_grid == "features";
      cmd_ablate(ablate_common.load(), ablate_train, ablate_test, ablate_out, ablate_opts);
      std::cout << "wrote ablation tables to " << ablate_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
