#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "roadblocks/model.hpp"

using namespace roadblocks;

namespace {

// Two Gaussian blobs split by the sign of the first coordinate.
SampleSet blobs(int n, int d, std::uint64_t seed, double gap = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 0.5);
  SampleSet s;
  s.features.resize(n, d);
  s.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const bool road = i % 2 == 0;
    for (int j = 0; j < d; ++j) s.features(i, j) = g(rng);
    s.features(i, 0) += road ? gap : -gap;
    s.labels[i] = road ? 1.0 : 0.0;
    s.sources.push_back({"toy", i});
  }
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "roadblocks_test_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

MlpModel small_model() {
  MlpModel m = MlpModel::initialized(7, 3, 42);
  m.standardization.mean = Eigen::VectorXd::LinSpaced(7, -1, 1);
  m.standardization.scale = Eigen::VectorXd::Constant(7, 0.25);
  m.block_config = BlockConfig{10, 20, 2, 120};
  m.layout.subsets.lm1 = false;
  return m;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("zero weights give probability one half") {
    MlpModel m = MlpModel::initialized(4, 3, 1);
    m.hidden.setZero();
    m.output.setZero();
    CHECK(forward(m, Eigen::VectorXd::Random(4)) == doctest::Approx(0.5));
    CHECK(predict_label(m, Eigen::VectorXd::Zero(4)) == Label::NonRoad);
  }

  TEST_CASE("label threshold is strict at one half") {
    CHECK(threshold_label(0.5) == Label::NonRoad);
    CHECK(threshold_label(0.51) == Label::Road);
    CHECK(threshold_label(0.49) == Label::NonRoad);
  }

  TEST_CASE("forward matches a hand computation") {
    MlpModel m = MlpModel::initialized(2, 2, 1);
    m.hidden << 1, -1, 0.5,  //
        -2, 1, 0;
    m.output << 0.5, -1, 0.25;
    Eigen::VectorXd v(2);
    v << 1, 2;
    // hidden: relu(1 - 2 + 0.5) = 0, relu(-2 + 2) = 0; logit 0.25
    CHECK(forward(m, v) == doctest::Approx(1 / (1 + std::exp(-0.25))));
    v << 3, 0;
    // hidden: relu(3.5) = 3.5, relu(-6) = 0; logit 1.75 + 0.25
    CHECK(forward(m, v) == doctest::Approx(1 / (1 + std::exp(-2.0))));
  }

  TEST_CASE("sigmoid is stable at extremes") {
    CHECK(sigmoid(0) == 0.5);
    CHECK(sigmoid(1000) == 1.0);
    CHECK(sigmoid(-1000) >= 0.0);
    CHECK(std::isfinite(sigmoid(-1000)));
  }

  TEST_CASE("initialization bounds and determinism") {
    const MlpModel a = MlpModel::initialized(50, 20, 9);
    const MlpModel b = MlpModel::initialized(50, 20, 9);
    CHECK(a.hidden == b.hidden);
    CHECK(a.output == b.output);
    CHECK(a.hidden.col(50).isZero());
    CHECK(a.output[20] == 0.0);
    CHECK(a.hidden.leftCols(50).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 70));
    CHECK(MlpModel::initialized(50, 20, 10).hidden != a.hidden);
  }

  TEST_CASE("standardization examples") {
    RowMatrix x(2, 2);
    x << 0, 5,  //
        2, 5;
    const Standardization s = standardize_fit(x);
    CHECK(s.mean[0] == doctest::Approx(1));
    CHECK(s.scale[0] == doctest::Approx(1));
    CHECK(s.mean[1] == doctest::Approx(5));
    CHECK(s.scale[1] == 1.0);  // constant column
    s.apply(Eigen::Ref<RowMatrix>(x));
    CHECK(x(0, 0) == doctest::Approx(-1));
    CHECK(x(1, 0) == doctest::Approx(1));
    CHECK(x.col(1).isZero());
    CHECK_THROWS(standardize_fit(RowMatrix(0, 3)));
  }

  TEST_CASE("standardized training features have zero mean and unit std") {
    SampleSet s = blobs(200, 5, 3);
    s.features.array() *= 7.0;
    s.features.array() += 3.0;
    const Standardization st = standardize_fit(s.features);
    st.apply(Eigen::Ref<RowMatrix>(s.features));
    const Standardization after = standardize_fit(s.features);
    CHECK(after.mean.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((after.scale.array() - 1).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("analytic gradient agrees with central differences") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      CAPTURE(seed);
      CHECK(oracle::gradient_error(oracle::gradient_point(seed)) < 1e-4);
    }
  }

  TEST_CASE("loss_and_gradient reports the same loss as loss") {
    const auto p = oracle::gradient_point(77);
    CHECK(loss_and_gradient(p.model, p.x, p.labels).loss == doctest::Approx(loss(p.model, p.x, p.labels)));
  }

  TEST_CASE("max-norm rescales only rows above the limit") {
    MlpModel m = MlpModel::initialized(2, 2, 1);
    m.hidden << 6, 8, 3,  // norm 10, bias untouched
        0.3, 0.4, 7;      // norm 0.5
    m.output << 3, 4, 9;  // norm 5
    apply_max_norm(m, 5, 10);
    CHECK(m.hidden(0, 0) == doctest::Approx(3));
    CHECK(m.hidden(0, 1) == doctest::Approx(4));
    CHECK(m.hidden.row(0).head(2).norm() <= 5.0);
    CHECK(m.hidden(0, 2) == 3);
    CHECK(m.hidden(1, 0) == 0.3);
    CHECK(m.hidden(1, 2) == 7);
    CHECK(m.output[0] == 3);
    apply_max_norm(m, 5, 2);
    CHECK(m.output.head(2).norm() <= 2.0);
    CHECK(m.output[2] == 9);
  }

  TEST_CASE("early stopping stops exactly patience epochs after the best") {
    const SampleSet s = blobs(40, 3, 1);
    TrainConfig cfg;
    cfg.n_hidden = 4;
    cfg.patience = 5;
    cfg.max_epochs = 100;
    // Improves until epoch 7, then flat.
    TrainHooks hooks;
    hooks.validation_scorer = [](const MlpModel&, int epoch) { return epoch <= 7 ? epoch * 0.1 : 0.3; };
    const TrainResult r = train(s, s, cfg, hooks);
    CHECK(r.best_epoch == 7);
    CHECK(r.history.size() == 12);
    CHECK(r.best_val_accuracy == doctest::Approx(0.7));
    CHECK(r.history[6].improved);
    CHECK_FALSE(r.history[7].improved);
  }

  TEST_CASE("equal validation scores do not count as improvement") {
    const SampleSet s = blobs(20, 2, 1);
    TrainConfig cfg;
    cfg.n_hidden = 2;
    cfg.patience = 3;
    TrainHooks hooks;
    hooks.validation_scorer = [](const MlpModel&, int) { return 0.5; };
    const TrainResult r = train(s, s, cfg, hooks);
    CHECK(r.best_epoch == 1);
    CHECK(r.history.size() == 4);
  }

  TEST_CASE("returned model is the best-epoch snapshot") {
    const SampleSet s = blobs(60, 3, 2);
    TrainConfig cfg;
    cfg.n_hidden = 4;
    cfg.patience = 3;
    std::vector<MlpModel> snapshots;
    TrainHooks hooks;
    hooks.validation_scorer = [&](const MlpModel& m, int epoch) {
      snapshots.push_back(m);
      return epoch == 2 ? 1.0 : 0.0;
    };
    const TrainResult r = train(s, s, cfg, hooks);
    REQUIRE(r.best_epoch == 2);
    CHECK(r.model.hidden == snapshots[1].hidden);
    CHECK(r.model.output == snapshots[1].output);
  }

  TEST_CASE("every update respects the max-norm limits") {
    const SampleSet s = blobs(200, 6, 5, 4.0);
    TrainConfig cfg;
    cfg.n_hidden = 8;
    cfg.learning_rate = 0.5;
    cfg.batch_size = 10;
    cfg.max_epochs = 5;
    cfg.max_norm_hidden = 0.7;
    cfg.max_norm_output = 1.1;
    long updates = 0;
    bool ok = true;
    double worst_h = 0, worst_o = 0;
    TrainHooks hooks;
    hooks.after_update = [&](const MlpModel& m) {
      ++updates;
      for (Eigen::Index r = 0; r < m.hidden.rows(); ++r) {
        worst_h = std::max(worst_h, m.hidden.row(r).head(6).norm());
        ok = ok && m.hidden.row(r).head(6).norm() <= 0.7;
      }
      worst_o = std::max(worst_o, m.output.head(8).norm());
      ok = ok && m.output.head(8).norm() <= 1.1;
    };
    train(s, s, cfg, hooks);
    CHECK(updates == 5 * 20);
    CAPTURE(worst_h);
    CAPTURE(worst_o);
    CHECK(ok);
  }

  TEST_CASE("separable toy set is learned perfectly") {
    const SampleSet tr = blobs(300, 4, 11, 3.0);
    const SampleSet va = blobs(100, 4, 12, 3.0);
    TrainConfig cfg;
    cfg.n_hidden = 8;
    cfg.learning_rate = 0.05;
    cfg.patience = 10;
    cfg.max_epochs = 200;
    const TrainResult r = train(tr, va, cfg);
    CHECK(r.best_val_accuracy == 1.0);
    CHECK(accuracy(r.model, va.features, va.labels) == 1.0);
    CHECK(r.history.front().train_loss > r.history[r.best_epoch - 1].train_loss);
  }

  TEST_CASE("training is deterministic in the seed") {
    const SampleSet s = blobs(100, 4, 3);
    TrainConfig cfg;
    cfg.n_hidden = 6;
    cfg.max_epochs = 10;
    const TrainResult a = train(s, s, cfg), b = train(s, s, cfg);
    CHECK(serialize_model(a.model) == serialize_model(b.model));
    cfg.seed = 2;
    CHECK(serialize_model(train(s, s, cfg).model) != serialize_model(a.model));
  }

  TEST_CASE("invalid training inputs throw") {
    const SampleSet s = blobs(10, 2, 1);
    TrainConfig cfg;
    cfg.patience = 0;
    CHECK_THROWS_AS(train(s, s, cfg), std::invalid_argument);
    CHECK_THROWS_AS(train(SampleSet{}, s, TrainConfig{}), std::invalid_argument);
    CHECK_THROWS_AS(train(s, blobs(10, 3, 1), TrainConfig{}), std::invalid_argument);
  }

  TEST_CASE("huge learning rate is reported as divergence") {
    SampleSet s = blobs(50, 3, 1);
    s.features *= 1e300;
    TrainConfig cfg;
    cfg.learning_rate = 1e300;
    cfg.max_norm_hidden = cfg.max_norm_output = 1e300;
    CHECK_THROWS_AS(train(s, s, cfg), TrainingDiverged);
  }

  TEST_CASE("model file round trip is bit exact") {
    const MlpModel m = small_model();
    const auto path = temp_file("m.rbm");
    save_model(m, path.string());
    const MlpModel back = load_model(path.string());
    CHECK(back.hidden == m.hidden);
    CHECK(back.output == m.output);
    CHECK(back.standardization.mean == m.standardization.mean);
    CHECK(back.standardization.scale == m.standardization.scale);
    CHECK(back.block_config.radius == 2);
    CHECK(back.block_config == m.block_config);
    CHECK(back.layout.tag() == m.layout.tag());
    CHECK(serialize_model(back) == serialize_model(m));
  }

  TEST_CASE("corrupt model files are rejected") {
    const auto bytes = serialize_model(small_model());
    SUBCASE("magic") {
      auto b = bytes;
      b[0] = 'X';
      CHECK_THROWS_AS(deserialize_model(b), ModelFormatError);
    }
    SUBCASE("version") {
      auto b = bytes;
      b[4] = static_cast<std::uint8_t>(kModelFormatVersion + 1);
      CHECK_THROWS_AS(deserialize_model(b), ModelVersionError);
    }
    SUBCASE("truncated") {
      for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{8}, bytes.size() / 2, bytes.size() - 1}) {
        CHECK_THROWS_AS(deserialize_model(std::span(bytes.data(), n)), ModelFormatError);
      }
    }
    SUBCASE("flipped payload bit") {
      auto b = bytes;
      b[b.size() / 2] ^= 0x10;
      CHECK_THROWS_AS(deserialize_model(b), ModelFormatError);
    }
    SUBCASE("missing file") { CHECK_THROWS(load_model("/nonexistent/model.rbm")); }
  }
}
