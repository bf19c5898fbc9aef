#include "roadblocks/hpo.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "roadblocks/parallel.hpp"

namespace roadblocks {

void SearchBox::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) throw std::invalid_argument("SearchBox: bad bounds");
  if (!integer.empty() && static_cast<Eigen::Index>(integer.size()) != lower.size()) {
    throw std::invalid_argument("SearchBox: integer mask size mismatch");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw std::invalid_argument("SearchBox: lower bound must be < upper bound");
  }
}

Eigen::VectorXd SearchBox::evaluation_point(const Eigen::VectorXd& position) const {
  Eigen::VectorXd p = position.cwiseMax(lower).cwiseMin(upper);
  for (std::size_t i = 0; i < integer.size(); ++i) {
    if (integer[i]) {
      const auto k = static_cast<Eigen::Index>(i);
      p[k] = std::clamp(std::round(p[k]), std::ceil(lower[k]), std::floor(upper[k]));
    }
  }
  return p;
}

PsoResult pso_optimize(const Objective& objective, const SearchBox& box, const PsoSettings& settings,
                       std::uint64_t seed) {
  box.validate();
  if (settings.particles < 1 || settings.iterations < 1) {
    throw std::invalid_argument("pso_optimize: particles and iterations must be >= 1");
  }
  const Eigen::Index dim = box.dim();
  const auto np = static_cast<std::size_t>(settings.particles);
  const Eigen::VectorXd width = box.upper - box.lower;
  const Eigen::VectorXd vmax = settings.velocity_clamp * width;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // One stream per particle so results do not depend on evaluation order.
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(np);
  for (std::size_t i = 0; i < np; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x9507u};
    rngs.emplace_back(seq);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Eigen::VectorXd> pos(np, Eigen::VectorXd(dim));
  std::vector<Eigen::VectorXd> vel(np, Eigen::VectorXd(dim));
  for (std::size_t i = 0; i < np; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      pos[i][k] = box.lower[k] + unit(rngs[i]) * width[k];
      vel[i][k] = (2 * unit(rngs[i]) - 1) * vmax[k];
    }
  }
  std::vector<Eigen::VectorXd> best_pos = pos;
  std::vector<double> best_score(np, kNegInf);
  Eigen::VectorXd global_pos = pos[0];
  Eigen::VectorXd global_params = box.evaluation_point(pos[0]);
  double global_score = kNegInf;
  bool have_global = false;

  PsoResult result;
  result.trace.reserve(np * static_cast<std::size_t>(settings.iterations));
  std::vector<PsoEvaluation> evals(np);
  for (int it = 0; it < settings.iterations; ++it) {
    for (std::size_t i = 0; i < np; ++i) {
      evals[i].iteration = it;
      evals[i].particle = static_cast<int>(i);
      evals[i].params = box.evaluation_point(pos[i]);
    }
    parallel_for(np, settings.threads, [&](std::size_t i) {
      const double s = objective(evals[i].params);
      evals[i].score = std::isfinite(s) ? s : kNegInf;
    });

    for (std::size_t i = 0; i < np; ++i) {
      result.trace.push_back(evals[i]);
      if (evals[i].score > best_score[i]) {
        best_score[i] = evals[i].score;
        best_pos[i] = pos[i];
      }
      if (!have_global || evals[i].score > global_score) {
        have_global = true;
        global_score = evals[i].score;
        global_pos = pos[i];
        global_params = evals[i].params;
      }
    }
    result.best_by_iteration.push_back(global_score);

    if (it + 1 == settings.iterations) break;
    for (std::size_t i = 0; i < np; ++i) {
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double r1 = unit(rngs[i]);
        const double r2 = unit(rngs[i]);
        double v = settings.inertia * vel[i][k] + settings.cognitive * r1 * (best_pos[i][k] - pos[i][k]) +
                   settings.social * r2 * (global_pos[k] - pos[i][k]);
        v = std::clamp(v, -vmax[k], vmax[k]);
        vel[i][k] = v;
        pos[i][k] = std::clamp(pos[i][k] + v, box.lower[k], box.upper[k]);
      }
    }
  }
  result.best_params = global_params;
  result.best_score = global_score;
  return result;
}

void HpoSpace::validate() const {
  box().validate();
  if (particles < 1 || iterations < 1) throw std::invalid_argument("HpoSpace: particles and iterations must be >= 1");
  if (n_hidden_min < 1) throw std::invalid_argument("HpoSpace: n_hidden lower bound must be >= 1");
}

SearchBox HpoSpace::box() const {
  SearchBox b;
  b.lower = Eigen::Vector4d(n_hidden_min, learning_rate_min, max_norm_hidden_min, max_norm_output_min);
  b.upper = Eigen::Vector4d(n_hidden_max, learning_rate_max, max_norm_hidden_max, max_norm_output_max);
  b.integer = {true, false, false, false};
  return b;
}

HyperParams HyperParams::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != 4) throw std::invalid_argument("HyperParams: expected 4 values");
  return {static_cast<int>(std::lround(v[0])), v[1], v[2], v[3]};
}

Eigen::VectorXd HyperParams::to_vector() const {
  return Eigen::Vector4d(n_hidden, learning_rate, max_norm_hidden, max_norm_output);
}

TrainConfig HyperParams::apply(TrainConfig cfg) const {
  cfg.n_hidden = n_hidden;
  cfg.learning_rate = learning_rate;
  cfg.max_norm_hidden = max_norm_hidden;
  cfg.max_norm_output = max_norm_output;
  return cfg;
}

Objective hpo_objective(const SampleSet& train_sub, const SampleSet& val_sub, const TrainConfig& fixed) {
  return [&train_sub, &val_sub, fixed](const Eigen::VectorXd& params) {
    const TrainConfig cfg = HyperParams::from_vector(params).apply(fixed);
    try {
      return train(train_sub, val_sub, cfg).best_val_accuracy;
    } catch (const TrainingDiverged&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
}

void write_trace_csv(const PsoResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open '" + path + "'");
  const Eigen::Index dim = result.trace.empty() ? 0 : result.trace.front().params.size();
  out << "iteration,particle";
  if (dim == 4) {
    out << ",n_hidden,learning_rate,max_norm_hidden,max_norm_output";
  } else {
    for (Eigen::Index k = 0; k < dim; ++k) out << ",p" << k;
  }
  out << ",score\n";
  out << std::setprecision(17);
  for (const auto& e : result.trace) {
    out << e.iteration << ',' << e.particle;
    for (Eigen::Index k = 0; k < e.params.size(); ++k) out << ',' << e.params[k];
    out << ',' << e.score << '\n';
  }
  if (!out) throw std::runtime_error("write_trace_csv: write failed for '" + path + "'");
}

}  // namespace roadblocks
