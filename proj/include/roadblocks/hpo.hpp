#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roadblocks/model.hpp"

namespace roadblocks {

/// Box constraints; `integer[i]` marks dimensions rounded before evaluation.
struct SearchBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<bool> integer;

  Eigen::Index dim() const { return lower.size(); }
  void validate() const;
  /// Clamps to the box and rounds integer dimensions.
  Eigen::VectorXd evaluation_point(const Eigen::VectorXd& position) const;
};

struct PsoSettings {
  int particles = 10;
  int iterations = 10;
  double inertia = 0.7298;
  double cognitive = 1.49618;
  double social = 1.49618;
  /// Velocity limit as a fraction of the box width.
  double velocity_clamp = 0.5;
  int threads = 1;
};

struct PsoEvaluation {
  int iteration = 0;
  int particle = 0;
  Eigen::VectorXd params;  // as evaluated (integer dims rounded)
  double score = 0.0;
};

struct PsoResult {
  Eigen::VectorXd best_params;
  double best_score = 0.0;
  std::vector<PsoEvaluation> trace;     // particles x iterations, in order
  std::vector<double> best_by_iteration;
};

/// Objective to maximize. Must be safe to call concurrently when
/// `PsoSettings::threads > 1`.
using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Particle swarm maximization: every iteration evaluates every particle
/// once, then updates velocities with inertia/cognitive/social weights.
/// Non-finite scores count as -inf.
PsoResult pso_optimize(const Objective& objective, const SearchBox& box, const PsoSettings& settings,
                       std::uint64_t seed);

/// Hyperparameter ranges searched by the swarm.
struct HpoSpace {
  double n_hidden_min = 16, n_hidden_max = 2000;
  double learning_rate_min = 0.001, learning_rate_max = 0.5;
  double max_norm_hidden_min = 0.5, max_norm_hidden_max = 5;
  double max_norm_output_min = 0.5, max_norm_output_max = 5;
  int particles = 10;
  int iterations = 10;

  void validate() const;
  SearchBox box() const;
};

/// Order of the searched vector: n_hidden, learning rate, hidden max norm,
/// output max norm.
struct HyperParams {
  int n_hidden = 100;
  double learning_rate = 0.01;
  double max_norm_hidden = 2.0;
  double max_norm_output = 2.0;

  static HyperParams from_vector(const Eigen::VectorXd& v);
  Eigen::VectorXd to_vector() const;
  TrainConfig apply(TrainConfig cfg) const;
};

/// Trains on `train_sub` with the candidate hyperparameters and returns the
/// best validation accuracy on `val_sub`; divergence scores -inf. Both sets
/// must already be standardized.
Objective hpo_objective(const SampleSet& train_sub, const SampleSet& val_sub, const TrainConfig& fixed);

/// CSV: iteration,particle,n_hidden,learning_rate,max_norm_hidden,max_norm_output,score
void write_trace_csv(const PsoResult& result, const std::string& path);

}  // namespace roadblocks
