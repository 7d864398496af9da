#include "tckae/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace tckae {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw std::invalid_argument("TrainConfig: lr_decay_factor must be in (0, 1]");
  }
  for (std::size_t i = 1; i < lr_decay_epochs.size(); ++i) {
    if (lr_decay_epochs[i] <= lr_decay_epochs[i - 1]) {
      throw std::invalid_argument("TrainConfig: lr_decay_epochs must be strictly increasing");
    }
  }
  if (e_switch > epochs) throw std::invalid_argument("TrainConfig: e_switch must be <= epochs");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("TrainConfig: adam_eps must be > 0");
  weights.validate();
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  const auto passed = std::count_if(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(),
                                    [epoch](std::size_t e) { return e <= epoch; });
  return cfg.lr * std::pow(cfg.lr_decay_factor, static_cast<double>(passed));
}

std::vector<Batch> make_batches(const SplitDataset& split, std::size_t m, std::size_t horizon,
                                std::uint64_t seed, std::size_t epoch) {
  const std::size_t n = split.train.length();
  if (m == 0) throw std::invalid_argument("make_batches: batch size must be >= 1");
  if (n < m + horizon) {
    const std::string largest = n > horizon ? std::to_string(n - horizon) : std::string("none");
    throw std::invalid_argument("make_batches: " + std::to_string(n) +
                                " training samples cannot hold batch " + std::to_string(m) +
                                " + horizon " + std::to_string(horizon) +
                                "; largest feasible batch size is " + largest);
  }
  std::vector<std::size_t> starts(n - m - horizon + 1);
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(starts.begin(), starts.end(), rng);

  std::vector<Batch> out;
  out.reserve(starts.size());
  for (std::size_t s : starts) out.push_back(Batch{col_block(split.train.x, s, m + horizon), m, s});
  return out;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(*params[i], grads[i]) || !same_shape(*params[i], state.first_moment[i])) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " is " +
                           params[i]->shape() + ", gradient is " + grads[i].shape());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void accumulate(std::optional<double>& sum, const std::optional<double>& term) {
  if (term) sum = sum.value_or(0.0) + *term;
}

void average(std::optional<double>& sum, std::size_t count) {
  if (sum) *sum /= static_cast<double>(count);
}

std::filesystem::path epoch_checkpoint(const std::filesystem::path& dir, std::size_t epoch) {
  char name[48];
  std::snprintf(name, sizeof(name), "model_epoch%04zu.tckm", epoch);
  return dir / name;
}

}  // namespace

void TrainLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,lr,loss_id,loss_fwd,loss_bwd,loss_con,loss_tc,loss_total,seconds\n";
  for (const auto& r : epochs) {
    out << r.epoch << ',' << format_double(r.lr) << ',' << format_optional(r.terms.id) << ','
        << format_optional(r.terms.fwd) << ',' << format_optional(r.terms.bwd) << ','
        << format_optional(r.terms.con) << ',' << format_optional(r.terms.tc) << ','
        << format_double(r.total) << ',' << format_double(r.seconds) << '\n';
  }
}

TrainResult train(KoopmanAutoencoder model, const SplitDataset& split, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (model.activation != Activation::tanh) {
    throw std::invalid_argument("train: the linear test activation cannot be trained");
  }
  if (split.train.dim() != model.arch.n_in) {
    throw DimensionError("train: dataset has " + std::to_string(split.train.dim()) +
                         " features, model expects " + std::to_string(model.arch.n_in));
  }
  const std::size_t horizon = cfg.weights.horizon();
  // Fail early on an infeasible geometry rather than at the first epoch.
  (void)make_batches(split, cfg.batch_size, horizon, cfg.seed, 0);

  TrainResult result;
  AdamState adam;
  auto params = model.parameters();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    LossWeights weights = cfg.weights;
    if (epoch < cfg.e_switch) weights.gamma_tc = 0.0;
    const AdamHyper hyper{lr_at_epoch(cfg, epoch), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    EpochRecord record;
    record.epoch = epoch;
    record.lr = hyper.lr;
    const auto batches = make_batches(split, cfg.batch_size, horizon, cfg.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tape tape;
      const TapedModel taped = bind(tape, model);
      const TapedLoss loss =
          loss_total(taped, tape.constant(batches[b].window), batches[b].m, weights);
      const double total = loss.total.scalar();
      if (!std::isfinite(total)) {
        throw TrainingDiverged(epoch, b, "train: non-finite loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(b) + " (window origin " +
                                             std::to_string(batches[b].origin) + ")");
      }
      if (loss.terms.tc) ++record.tc_evaluations;
      accumulate(record.terms.id, loss.terms.id);
      accumulate(record.terms.fwd, loss.terms.fwd);
      accumulate(record.terms.bwd, loss.terms.bwd);
      accumulate(record.terms.con, loss.terms.con);
      accumulate(record.terms.tc, loss.terms.tc);
      record.total += total;

      const auto grads = tape.gradient(loss.total, taped.params);
      adam_step(params, grads, adam, hyper);
      for (const Matrix* p : params) {
        if (!all_finite(*p)) {
          throw TrainingDiverged(epoch, b, "train: non-finite parameters after epoch " +
                                               std::to_string(epoch) + ", batch " +
                                               std::to_string(b));
        }
      }
    }
    const std::size_t n = batches.size();
    average(record.terms.id, n);
    average(record.terms.fwd, n);
    average(record.terms.bwd, n);
    average(record.terms.con, n);
    average(record.terms.tc, n);
    record.total /= static_cast<double>(n);
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);

    if (options.checkpoint_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(model, epoch_checkpoint(*options.checkpoint_dir, epoch + 1));
    }
  }
  if (options.checkpoint_dir) save_checkpoint(model, *options.checkpoint_dir / "model.tckm");
  result.model = std::move(model);
  return result;
}

}  // namespace tckae
