#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tckae/data.hpp"
#include "tckae/losses.hpp"
#include "tckae/model.hpp"

namespace tckae {

struct TrainConfig {
  std::size_t epochs = 600;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lr_decay_factor = 0.5;
  std::vector<std::size_t> lr_decay_epochs{30, 200, 400, 700};
  LossWeights weights;
  std::size_t e_switch = 0;  // gamma_tc is held at 0 for epochs < e_switch
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t checkpoint_every = 100;

  void validate() const;
};

/// lr * factor^(number of schedule entries <= epoch)
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

/// Every contiguous window of m + horizon training columns, in a per-(seed, epoch) shuffled order.
std::vector<Batch> make_batches(const SplitDataset& split, std::size_t m, std::size_t horizon,
                                std::uint64_t seed, std::size_t epoch);

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. An empty state is initialised on first use.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamHyper& hyper);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown terms;  // batch means; unset when the term was not computed
  double total = 0.0;
  double seconds = 0.0;
  std::size_t tc_evaluations = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// epoch,lr,loss_id,loss_fwd,loss_bwd,loss_con,loss_tc,loss_total,seconds
  void write_csv(const std::filesystem::path& path) const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct TrainOptions {
  /// When set, model_epochNNNN.tckm is written every checkpoint_every epochs and model.tckm at the end.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  KoopmanAutoencoder model;
  TrainLog log;
};

/// One Adam step per batch. Refuses models in the test-only linear activation mode.
TrainResult train(KoopmanAutoencoder model, const SplitDataset& split, const TrainConfig& cfg,
                  const TrainOptions& options = {});

}  // namespace tckae
