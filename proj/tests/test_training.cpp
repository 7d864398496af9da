#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "tckae/training.hpp"

using namespace tckae;

namespace {

SplitDataset rotation_split(std::size_t n_total, std::size_t n_train, double amplitude = 0.5) {
  const Matrix a = oracle::rotation(0.3);
  TimeSeriesDataset d;
  d.dt = 0.1;
  std::vector<Matrix> cols;
  Matrix x = Matrix::column({amplitude, 0.0});
  for (std::size_t i = 0; i < n_total; ++i) {
    cols.push_back(x);
    x = oracle::naive_matmul(a, x);
  }
  d.x = hcat(cols);
  return split(d, n_train);
}

SplitDataset index_split(std::size_t n_train) {
  // row 0 holds the column index, so windows can be traced back
  TimeSeriesDataset d;
  d.x = Matrix(1, n_train + 5);
  for (std::size_t c = 0; c < d.x.cols(); ++c) d.x(0, c) = static_cast<double>(c);
  return split(d, n_train);
}

}  // namespace

TEST(LrSchedule, StepsAtListedEpochs) {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.lr_decay_factor = 0.5;
  cfg.lr_decay_epochs = {30, 200, 400, 700};
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 0), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 29), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 30), 5e-4);
  EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 750), 6.25e-5);
  for (std::size_t e = 1; e < 800; ++e) EXPECT_LE(lr_at_epoch(cfg, e), lr_at_epoch(cfg, e - 1));
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lr_decay_epochs = {30, 30};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lr_decay_factor = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.e_switch = cfg.epochs + 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.lr = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(MakeBatches, WindowCount) {
  const auto batches = make_batches(index_split(32), 8, 10, 0, 0);
  EXPECT_EQ(batches.size(), 15u);
  for (const Batch& b : batches) {
    EXPECT_EQ(b.m, 8u);
    EXPECT_EQ(b.window.cols(), 18u);
    EXPECT_EQ(b.window(0, 0), static_cast<double>(b.origin));
    for (std::size_t c = 1; c < 18; ++c) EXPECT_EQ(b.window(0, c), b.window(0, c - 1) + 1.0);
  }
}

TEST(MakeBatches, CoversEverySnapshot) {
  const auto batches = make_batches(index_split(32), 8, 10, 3, 4);
  std::set<double> seen;
  for (const Batch& b : batches)
    for (double v : b.window.data()) seen.insert(v);
  EXPECT_EQ(seen.size(), 32u);
  EXPECT_EQ(*seen.rbegin(), 31.0);  // nothing from the test segment
}

TEST(MakeBatches, ShuffleIsDeterministicPerSeedAndEpoch) {
  const SplitDataset s = index_split(64);
  auto origins = [&](std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> o;
    for (const Batch& b : make_batches(s, 8, 4, seed, epoch)) o.push_back(b.origin);
    return o;
  };
  EXPECT_EQ(origins(1, 2), origins(1, 2));
  EXPECT_NE(origins(1, 2), origins(1, 3));
  EXPECT_NE(origins(1, 2), origins(2, 2));
  auto sorted = origins(1, 2);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
}

TEST(MakeBatches, InfeasibleGeometryReportsLargestBatch) {
  try {
    make_batches(index_split(32), 30, 8, 0, 0);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("24"), std::string::npos) << e.what();
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Matrix w = Matrix::column({1.0, -2.0});
  const Matrix before = w;
  AdamState state;
  std::array<Matrix*, 1> params{&w};
  const std::array<Matrix, 1> grads{Matrix(2, 1)};
  adam_step(params, grads, state, {});
  EXPECT_EQ(w, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // f(w) = w^2 / 2 at w = 1: g = 1, m_hat = 1, v_hat = 1
  Matrix w = Matrix::column({1.0});
  AdamState state;
  std::array<Matrix*, 1> params{&w};
  const std::array<Matrix, 1> grads{Matrix::column({1.0})};
  adam_step(params, grads, state, {0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(w(0, 0), 0.9, 1e-8);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, DeterministicTrajectory) {
  auto run = [] {
    Matrix w = Matrix::column({1.0, 3.0});
    AdamState state;
    std::array<Matrix*, 1> params{&w};
    for (int i = 0; i < 50; ++i) {
      const std::array<Matrix, 1> grads{w};
      adam_step(params, grads, state, {0.05, 0.9, 0.999, 1e-8});
    }
    return w;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatchRejected) {
  Matrix w(2, 1);
  AdamState state;
  std::array<Matrix*, 1> params{&w};
  const std::array<Matrix, 1> grads{Matrix(3, 1)};
  EXPECT_THROW(adam_step(params, grads, state, {}), DimensionError);
}

TEST(Train, ZeroWeightsLeaveModelUnchanged) {
  const SplitDataset s = rotation_split(40, 20);
  const KoopmanAutoencoder m = init_model({2, 4, 2}, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.weights.gamma_id = 0.0;
  const TrainResult r = train(m, s, cfg);
  EXPECT_TRUE(r.model == m);
  EXPECT_EQ(r.log.epochs.size(), 5u);
}

TEST(Train, LearnsLinearRotation) {
  const SplitDataset s = rotation_split(60, 24);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.lr_decay_epochs = {500, 1000, 1500};
  cfg.weights.gamma_fwd = 1.0;
  cfg.weights.k_max_fwd = 4;
  cfg.seed = 3;
  const TrainResult r = train(init_model({2, 8, 2}, 3), s, cfg);
  const double first = r.log.epochs.front().total;
  const double last = r.log.epochs.back().total;
  EXPECT_LT(last, 1e-4);
  EXPECT_LT(last, 0.01 * first);
}

TEST(Train, ConsistencyTermWaitsForSwitchEpoch) {
  const SplitDataset s = rotation_split(40, 20);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.weights.gamma_tc = 0.1;
  cfg.weights.kappa_max_tc = 2;
  cfg.e_switch = 3;
  const TrainResult r = train(init_model({2, 4, 2}, 1), s, cfg);
  for (const EpochRecord& e : r.log.epochs) {
    if (e.epoch < 3) {
      EXPECT_EQ(e.tc_evaluations, 0u);
      EXPECT_FALSE(e.terms.tc.has_value());
    } else {
      EXPECT_GT(e.tc_evaluations, 0u);
      EXPECT_TRUE(e.terms.tc.has_value());
    }
  }
}

TEST(Train, RunsAreBitIdentical) {
  const SplitDataset s = rotation_split(40, 20);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 4;
  cfg.weights.gamma_fwd = 0.5;
  cfg.weights.gamma_bwd = 0.1;
  cfg.weights.gamma_con = 0.1;
  cfg.weights.gamma_tc = 0.1;
  cfg.weights.k_max_fwd = 2;
  cfg.weights.kappa_max_tc = 2;
  cfg.seed = 9;
  const TrainResult a = train(init_model({2, 4, 2}, 9), s, cfg);
  const TrainResult b = train(init_model({2, 4, 2}, 9), s, cfg);
  EXPECT_TRUE(a.model == b.model);
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) EXPECT_EQ(a.log.epochs[i].total, b.log.epochs[i].total);
}

TEST(Train, RejectsLinearTestMode) {
  KoopmanAutoencoder m = init_model({2, 4, 2}, 1);
  m.activation = Activation::linear_for_tests;
  EXPECT_THROW(train(m, rotation_split(40, 20), TrainConfig{}), std::invalid_argument);
}

TEST(Train, RejectsDimensionMismatch) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  EXPECT_THROW(train(init_model({3, 4, 2}, 1), rotation_split(40, 20), cfg), DimensionError);
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  KoopmanAutoencoder m = init_model({2, 4, 2}, 1);
  m.decoder[2].bias(0, 0) = std::numeric_limits<double>::infinity();
  try {
    train(m, rotation_split(40, 20), cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 0u);
    EXPECT_EQ(e.batch(), 0u);
  }
}

TEST(Train, WritesCheckpointsAndLog) {
  const auto dir = std::filesystem::temp_directory_path() / "tckae_train_ckpt";
  std::filesystem::remove_all(dir);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.checkpoint_every = 2;
  cfg.weights.gamma_fwd = 1.0;
  std::size_t callbacks = 0;
  TrainOptions opts;
  opts.checkpoint_dir = dir;
  opts.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const TrainResult r = train(init_model({2, 4, 2}, 1), rotation_split(40, 20), cfg, opts);
  EXPECT_EQ(callbacks, 5u);
  EXPECT_TRUE(std::filesystem::exists(dir / "model_epoch0002.tckm"));
  EXPECT_TRUE(std::filesystem::exists(dir / "model_epoch0004.tckm"));
  EXPECT_FALSE(std::filesystem::exists(dir / "model_epoch0005.tckm"));
  EXPECT_TRUE(load_checkpoint(dir / "model.tckm") == r.model);

  r.log.write_csv(dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epoch,lr,loss_id,loss_fwd,loss_bwd,loss_con,loss_tc,loss_total,seconds");
  // bwd, con and tc were not computed, so their cells are empty
  EXPECT_NE(row.find(",,,"), std::string::npos) << row;
  std::filesystem::remove_all(dir);
}
