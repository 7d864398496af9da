#include "tckae/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace tckae {

void LossWeights::validate() const {
  const double gammas[] = {gamma_id, gamma_fwd, gamma_bwd, gamma_con, gamma_tc};
  for (double g : gammas) {
    if (!std::isfinite(g) || g < 0.0) {
      throw std::invalid_argument("LossWeights: loss weights must be finite and >= 0");
    }
  }
  if (uses_labels_ahead() && k_max_fwd == 0) {
    throw std::invalid_argument("LossWeights: k_max_fwd must be >= 1 when gamma_fwd or gamma_bwd > 0");
  }
  if (gamma_tc > 0.0 && kappa_max_tc == 0) {
    throw std::invalid_argument("LossWeights: kappa_max_tc must be >= 1 when gamma_tc > 0");
  }
}

namespace {

void require_window(const char* term, const Var& window, std::size_t needed) {
  const std::size_t have = window.value().cols();
  if (have < needed) {
    throw DimensionError(std::string(term) + ": window has " + std::to_string(have) +
                         " columns, needs " + std::to_string(needed));
  }
}

void require_batch(const char* term, std::size_t batch) {
  if (batch == 0) throw std::invalid_argument(std::string(term) + ": batch size must be >= 1");
}

Var id_term(const TapedModel& m, Var window, Var latent, std::size_t batch) {
  Var recon = decode(m, col_block(latent, 0, batch));
  Var resid = recon - col_block(window, 0, batch);
  return scale(sum_squares(resid), 1.0 / (2.0 * static_cast<double>(batch)));
}

// Shared by forward and backward terms: advance `start` with `op` k = 1..k_max
// times and compare each step against the labels beginning at label_first(k).
template <typename LabelFirst>
Var multistep_term(const TapedModel& m, Var window, Var op, Var start, std::size_t batch,
                   std::size_t k_max, LabelFirst label_first) {
  std::vector<Var> latents;
  std::vector<Var> labels;
  Var z = start;
  for (std::size_t k = 1; k <= k_max; ++k) {
    z = matmul(op, z);
    latents.push_back(z);
    labels.push_back(col_block(window, label_first(k), batch));
  }
  Var resid = decode(m, hcat(latents)) - hcat(labels);
  return scale(sum_squares(resid),
               1.0 / (2.0 * static_cast<double>(k_max) * static_cast<double>(batch)));
}

Var fwd_term(const TapedModel& m, Var window, Var latent, std::size_t batch, std::size_t k_max) {
  return multistep_term(m, window, m.k_fwd(), col_block(latent, 0, batch), batch, k_max,
                        [](std::size_t k) { return k; });
}

Var bwd_term(const TapedModel& m, Var window, Var latent, std::size_t batch, std::size_t k_max) {
  return multistep_term(m, window, m.k_bwd(), col_block(latent, k_max, batch), batch, k_max,
                        [k_max](std::size_t k) { return k_max - k; });
}

Var tc_term(Var k, Var starts, std::size_t kappa_max) {
  const std::size_t batch = starts.value().cols();
  // powers[j] = K^j Z_n, j = 0 .. kappa_max + batch - 1
  std::vector<Var> powers{starts};
  for (std::size_t j = 1; j < kappa_max + batch; ++j) powers.push_back(matmul(k, powers.back()));

  std::vector<Var> terms;
  std::vector<double> weights;
  const double outer = 1.0 / (2.0 * static_cast<double>(kappa_max) * static_cast<double>(batch - 1));
  for (std::size_t kappa = 1; kappa <= kappa_max; ++kappa) {
    for (std::size_t q = 1; q < batch; ++q) {
      // For p = q .. batch-1 the target time n+kappa+p is reached both by
      // K^kappa from x_{n+p} and by K^{kappa+q} from x_{n+p-q}.
      const std::size_t count = batch - q;
      Var diff = col_block(powers[kappa], q, count) - col_block(powers[kappa + q], 0, count);
      std::vector<double> inv_p(count);
      for (std::size_t c = 0; c < count; ++c) inv_p[c] = 1.0 / static_cast<double>(q + c);
      terms.push_back(weighted_col_sum_squares(diff, std::move(inv_p)));
      weights.push_back(outer);
    }
  }
  return weighted_sum(terms, weights);
}

void check_tc_args(std::size_t batch, std::size_t kappa_max) {
  if (batch < 2) {
    throw std::invalid_argument("loss_tc: batch size must be >= 2, got " + std::to_string(batch));
  }
  if (kappa_max == 0) throw std::invalid_argument("loss_tc: kappa_max must be >= 1");
}

Batch checked(const Batch& b) {
  require_batch("loss", b.m);
  return b;
}

}  // namespace

Var loss_id(const TapedModel& m, Var window, std::size_t batch) {
  require_batch("loss_id", batch);
  require_window("loss_id", window, batch);
  Var starts = col_block(window, 0, batch);
  return id_term(m, starts, encode(m, starts), batch);
}

Var loss_fwd(const TapedModel& m, Var window, std::size_t batch, std::size_t k_max) {
  require_batch("loss_fwd", batch);
  if (k_max == 0) throw std::invalid_argument("loss_fwd: k_max must be >= 1");
  require_window("loss_fwd", window, batch + k_max);
  return fwd_term(m, window, encode(m, col_block(window, 0, batch)), batch, k_max);
}

Var loss_bwd(const TapedModel& m, Var window, std::size_t batch, std::size_t k_max) {
  require_batch("loss_bwd", batch);
  if (k_max == 0) throw std::invalid_argument("loss_bwd: k_max must be >= 1");
  require_window("loss_bwd", window, batch + k_max);
  return bwd_term(m, window, encode(m, col_block(window, 0, batch + k_max)), batch, k_max);
}

Var loss_con(Var k_fwd, Var k_bwd) {
  const Matrix& k = k_fwd.value();
  const Matrix& kb = k_bwd.value();
  if (k.rows() != k.cols() || !same_shape(k, kb)) {
    throw DimensionError("loss_con: operators must be square and equal-shaped, got " + k.shape() +
                         " and " + kb.shape());
  }
  Tape& tape = *k_fwd.tape;
  const std::size_t n = k.rows();
  std::vector<Var> terms;
  std::vector<double> weights;
  for (std::size_t i = 1; i <= n; ++i) {
    Var eye = tape.constant(Matrix::identity(i));
    Var inner = matmul(row_block(k_bwd, 0, i), col_block(k_fwd, 0, i)) - eye;
    Var outer = matmul(row_block(k_fwd, 0, i), col_block(k_bwd, 0, i)) - eye;
    terms.push_back(frobenius_norm(inner));
    terms.push_back(frobenius_norm(outer));
    weights.push_back(1.0 / (2.0 * static_cast<double>(i)));
    weights.push_back(1.0 / (2.0 * static_cast<double>(i)));
  }
  return weighted_sum(terms, weights);
}

Var loss_tc(const TapedModel& m, Var window, std::size_t batch, std::size_t kappa_max) {
  check_tc_args(batch, kappa_max);
  require_window("loss_tc", window, batch);
  return tc_term(m.k_fwd(), encode(m, col_block(window, 0, batch)), kappa_max);
}

TapedLoss loss_total(const TapedModel& m, Var window, std::size_t batch,
                     const LossWeights& weights) {
  weights.validate();
  Tape& tape = *window.tape;
  TapedLoss out;
  std::vector<Var> terms;
  std::vector<double> gammas;

  const bool need_latent = weights.gamma_id > 0.0 || weights.gamma_fwd > 0.0 ||
                           weights.gamma_bwd > 0.0 || weights.gamma_tc > 0.0;
  if (need_latent) {
    require_batch("loss_total", batch);
    std::size_t needed = batch + weights.horizon();
    require_window("loss_total", window, needed);
    if (weights.gamma_tc > 0.0) check_tc_args(batch, weights.kappa_max_tc);

    Var latent = encode(m, col_block(window, 0, needed));
    if (weights.gamma_id > 0.0) {
      Var t = id_term(m, window, latent, batch);
      out.terms.id = t.scalar();
      terms.push_back(t);
      gammas.push_back(weights.gamma_id);
    }
    if (weights.gamma_fwd > 0.0) {
      Var t = fwd_term(m, window, latent, batch, weights.k_max_fwd);
      out.terms.fwd = t.scalar();
      terms.push_back(t);
      gammas.push_back(weights.gamma_fwd);
    }
    if (weights.gamma_bwd > 0.0) {
      Var t = bwd_term(m, window, latent, batch, weights.k_max_fwd);
      out.terms.bwd = t.scalar();
      terms.push_back(t);
      gammas.push_back(weights.gamma_bwd);
    }
    if (weights.gamma_tc > 0.0) {
      Var t = tc_term(m.k_fwd(), col_block(latent, 0, batch), weights.kappa_max_tc);
      out.terms.tc = t.scalar();
      terms.push_back(t);
      gammas.push_back(weights.gamma_tc);
    }
  }
  if (weights.gamma_con > 0.0) {
    Var t = loss_con(m.k_fwd(), m.k_bwd());
    out.terms.con = t.scalar();
    terms.push_back(t);
    gammas.push_back(weights.gamma_con);
  }

  out.total = terms.empty() ? tape.constant(Matrix(1, 1, 0.0)) : weighted_sum(terms, gammas);
  return out;
}

double loss_id(const KoopmanAutoencoder& m, const Batch& b) {
  Tape tape;
  return loss_id(bind(tape, m), tape.constant(checked(b).window), b.m).scalar();
}

double loss_fwd(const KoopmanAutoencoder& m, const Batch& b, std::size_t k_max) {
  Tape tape;
  return loss_fwd(bind(tape, m), tape.constant(checked(b).window), b.m, k_max).scalar();
}

double loss_bwd(const KoopmanAutoencoder& m, const Batch& b, std::size_t k_max) {
  Tape tape;
  return loss_bwd(bind(tape, m), tape.constant(checked(b).window), b.m, k_max).scalar();
}

double loss_con(const Matrix& k_fwd, const Matrix& k_bwd) {
  Tape tape;
  return loss_con(tape.constant(k_fwd), tape.constant(k_bwd)).scalar();
}

double loss_tc(const KoopmanAutoencoder& m, const Batch& b, std::size_t kappa_max) {
  Tape tape;
  return loss_tc(bind(tape, m), tape.constant(b.window), b.m, kappa_max).scalar();
}

double loss_tc_latent(const Matrix& k_fwd, const Matrix& latents, std::size_t kappa_max) {
  check_tc_args(latents.cols(), kappa_max);
  Tape tape;
  return tc_term(tape.constant(k_fwd), tape.constant(latents), kappa_max).scalar();
}

LossValue loss_total(const KoopmanAutoencoder& m, const Batch& b, const LossWeights& weights) {
  Tape tape;
  TapedLoss t = loss_total(bind(tape, m), tape.constant(b.window), b.m, weights);
  return {t.total.scalar(), t.terms};
}

}  // namespace tckae
