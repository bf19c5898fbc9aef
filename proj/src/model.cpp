#include "roadblocks/model.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace roadblocks {

void Standardization::apply(Eigen::Ref<RowMatrix> x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("Standardization: dimension mismatch");
  const Eigen::RowVectorXd inv = scale.cwiseInverse().transpose();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x.row(i) = (x.row(i) - mean.transpose()).cwiseProduct(inv);
  }
}

Eigen::VectorXd Standardization::apply(const Eigen::VectorXd& v) const {
  if (v.size() != mean.size()) throw std::invalid_argument("Standardization: dimension mismatch");
  return (v - mean).cwiseQuotient(scale);
}

Standardization Standardization::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Standardization standardize_fit(const Eigen::Ref<const RowMatrix>& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("standardize_fit: empty sample set");
  const double n = static_cast<double>(samples.rows());
  Standardization s;
  s.mean = samples.colwise().sum().transpose() / n;
  s.scale = Eigen::VectorXd::Zero(samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    s.scale += (samples.row(i).transpose() - s.mean).cwiseAbs2();
  }
  s.scale = (s.scale / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (s.scale[j] < 1e-12) s.scale[j] = 1.0;
  }
  return s;
}

MlpModel MlpModel::initialized(Eigen::Index input_dim, Eigen::Index n_hidden, std::uint64_t seed) {
  if (input_dim <= 0 || n_hidden <= 0) throw std::invalid_argument("MlpModel: dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto fill = [&](auto& w, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c + 1 < w.cols(); ++c) w(r, c) = dist(rng);
      w(r, w.cols() - 1) = 0.0;
    }
  };
  MlpModel m;
  m.hidden.resize(n_hidden, input_dim + 1);
  m.output.resize(n_hidden + 1);
  fill(m.hidden, input_dim, n_hidden);
  fill(m.output, n_hidden, 1);
  m.standardization = Standardization::identity(input_dim);
  return m;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_input(const MlpModel& model, Eigen::Index cols) {
  if (cols != model.input_dim()) throw std::invalid_argument("MLP: input dimension mismatch");
}

// Hidden pre-activations, rows x n_hidden.
Eigen::MatrixXd hidden_pre(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x) {
  const Eigen::Index d = model.input_dim();
  Eigen::MatrixXd a = x * model.hidden.leftCols(d).transpose();
  a.rowwise() += model.hidden.col(d).transpose();
  return a;
}

// log(1 + exp(z)) - y z
double bce(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Eigen::VectorXd logits(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x) {
  check_input(model, x.cols());
  const Eigen::Index nh = model.n_hidden();
  const Eigen::MatrixXd h = hidden_pre(model, x).cwiseMax(0.0);
  Eigen::VectorXd z = h * model.output.head(nh).transpose();
  z.array() += model.output[nh];
  return z;
}

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x) {
  return logits(model, x).unaryExpr([](double z) { return sigmoid(z); });
}

double forward(const MlpModel& model, const Eigen::VectorXd& v) {
  check_input(model, v.size());
  RowMatrix row = v.transpose();
  return forward_batch(model, row)[0];
}

Label predict_label(const MlpModel& model, const Eigen::VectorXd& v) {
  return threshold_label(forward(model, v));
}

Gradients loss_and_gradient(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& labels) {
  check_input(model, x.cols());
  if (labels.size() != x.rows() || x.rows() == 0) throw std::invalid_argument("loss_and_gradient: bad batch");
  const Eigen::Index d = model.input_dim();
  const Eigen::Index nh = model.n_hidden();
  const double n = static_cast<double>(x.rows());

  const Eigen::MatrixXd pre = hidden_pre(model, x);
  const Eigen::MatrixXd h = pre.cwiseMax(0.0);
  Eigen::VectorXd z = h * model.output.head(nh).transpose();
  z.array() += model.output[nh];

  Gradients g;
  Eigen::VectorXd dz(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += bce(z[i], labels[i]);
    dz[i] = (sigmoid(z[i]) - labels[i]) / n;
  }
  g.loss = total / n;

  g.output.resize(nh + 1);
  g.output.head(nh) = dz.transpose() * h;
  g.output[nh] = dz.sum();

  Eigen::MatrixXd da = dz * model.output.head(nh);
  da = da.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  g.hidden.resize(nh, d + 1);
  g.hidden.leftCols(d).noalias() = da.transpose() * x;
  g.hidden.col(d) = da.colwise().sum().transpose();
  return g;
}

double loss(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (labels.size() != x.rows() || x.rows() == 0) throw std::invalid_argument("loss: bad batch");
  const Eigen::VectorXd z = logits(model, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += bce(z[i], labels[i]);
  return total / static_cast<double>(z.size());
}

namespace {

// Scales `w` down when its norm exceeds `limit`. The target sits a relative
// 1e-12 below the limit so that re-evaluating the norm with another summation
// order or FMA contraction still stays within it.
template <typename Row>
void project_norm(Row&& w, double limit) {
  const double target = limit * (1.0 - 1e-12);
  double norm = w.norm();
  while (norm > target) {
    w *= std::nextafter(target / norm, 0.0);
    norm = w.norm();
  }
}

}  // namespace

void apply_max_norm(MlpModel& model, double max_norm_hidden, double max_norm_output) {
  const Eigen::Index d = model.input_dim();
  for (Eigen::Index r = 0; r < model.hidden.rows(); ++r) project_norm(model.hidden.row(r).head(d), max_norm_hidden);
  project_norm(model.output.head(model.n_hidden()), max_norm_output);
}

double accuracy(const MlpModel& model, const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (x.rows() == 0) return 0.0;
  const Eigen::VectorXd z = logits(model, x);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const bool road = threshold_label(sigmoid(z[i])) == Label::Road;
    if (road == (labels[i] > 0.5)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  if (n_hidden < 1) throw std::invalid_argument("TrainConfig: n_hidden must be >= 1");
  if (!(max_norm_hidden > 0) || !(max_norm_output > 0)) {
    throw std::invalid_argument("TrainConfig: max norms must be > 0");
  }
}

TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty train or validation set");
  if (train_set.dim() != val_set.dim()) throw std::invalid_argument("train: train/validation dimension mismatch");

  const Eigen::Index n = train_set.size();
  const Eigen::Index d = train_set.dim();
  // Separate streams for initialization and shuffling.
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5eedu};
  std::mt19937_64 shuffle_rng(seq);

  MlpModel model = MlpModel::initialized(d, cfg.n_hidden, cfg.seed);
  Eigen::MatrixXd vel_hidden = Eigen::MatrixXd::Zero(model.hidden.rows(), model.hidden.cols());
  Eigen::RowVectorXd vel_output = Eigen::RowVectorXd::Zero(model.output.size());

  auto score = [&](int epoch) {
    if (hooks.validation_scorer) return hooks.validation_scorer(model, epoch);
    return accuracy(model, val_set.features, val_set.labels);
  };

  TrainResult result;
  result.model = model;
  result.best_val_accuracy = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  int since_best = 0;

  RowMatrix batch_x;
  Eigen::VectorXd batch_y;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      batch_x.resize(len, d);
      batch_y.resize(len);
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
        batch_x.row(i) = train_set.features.row(src);
        batch_y[i] = train_set.labels[src];
      }
      const Gradients g = loss_and_gradient(model, batch_x, batch_y);
      if (!std::isfinite(g.loss) || !g.hidden.allFinite() || !g.output.allFinite()) {
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += g.loss * static_cast<double>(len);

      vel_hidden = cfg.momentum * vel_hidden - cfg.learning_rate * g.hidden;
      vel_output = cfg.momentum * vel_output - cfg.learning_rate * g.output;
      model.hidden += vel_hidden;
      model.output += vel_output;
      apply_max_norm(model, cfg.max_norm_hidden, cfg.max_norm_output);
#ifndef NDEBUG
      for (Eigen::Index r = 0; r < model.hidden.rows(); ++r) {
        assert(model.hidden.row(r).head(d).norm() <= cfg.max_norm_hidden);
      }
      assert(model.output.head(model.n_hidden()).norm() <= cfg.max_norm_output);
#endif
      if (hooks.after_update) hooks.after_update(model);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(n);
    rec.val_accuracy = score(epoch);
    rec.improved = rec.val_accuracy > result.best_val_accuracy;
    if (!std::isfinite(rec.train_loss)) throw TrainingDiverged("train: non-finite epoch loss");
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (rec.improved) {
      result.best_val_accuracy = rec.val_accuracy;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace roadblocks
