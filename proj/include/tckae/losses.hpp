#pragma once

#include <cstddef>
#include <optional>

#include "tckae/matrix.hpp"
#include "tckae/model.hpp"
#include "tckae/tape.hpp"

namespace tckae {

/// Weights of the five loss terms and their look-ahead horizons.
struct LossWeights {
  double gamma_id = 1.0;
  double gamma_fwd = 0.0;
  double gamma_bwd = 0.0;
  double gamma_con = 0.0;
  double gamma_tc = 0.0;
  std::size_t k_max_fwd = 1;     // labelled look-ahead of the forward/backward terms
  std::size_t kappa_max_tc = 1;  // latent look-ahead of the temporal-consistency term

  void validate() const;
  bool uses_labels_ahead() const noexcept { return gamma_fwd > 0.0 || gamma_bwd > 0.0; }
  /// Extra snapshots a batch window needs beyond its m start snapshots.
  std::size_t horizon() const noexcept { return uses_labels_ahead() ? k_max_fwd : 0; }
};

/// A run of consecutive snapshots: columns window[:, 0..m) are the batch start
/// states, the remaining columns supply forward/backward labels.
struct Batch {
  Matrix window;
  std::size_t m = 0;
  std::size_t origin = 0;  // index of window column 0 within the source series
};

struct LossBreakdown {
  std::optional<double> id;
  std::optional<double> fwd;
  std::optional<double> bwd;
  std::optional<double> con;
  std::optional<double> tc;

  bool empty() const noexcept { return !id && !fwd && !bwd && !con && !tc; }
};

struct LossValue {
  double total = 0.0;
  LossBreakdown terms;
};

struct TapedLoss {
  Var total;
  LossBreakdown terms;
};

// Taped forms. `window` holds the batch columns, `m` the number of start states.
//
// loss_id  = 1/(2m)      sum_n ||dec(enc(x_n)) - x_n||^2
// loss_fwd = 1/(2 k m)   sum_{k,n} ||dec(K^k enc(x_n)) - x_{n+k}||^2
// loss_bwd = 1/(2 k m)   sum_{k,n} ||dec(K_b^k enc(x_{n+k_max})) - x_{n+k_max-k}||^2
// loss_con = sum_i 1/(2i) (||K_b[:i,:] K[:,:i] - I_i||_F + ||K[:i,:] K_b[:,:i] - I_i||_F)
// loss_tc  : see loss_tc below
Var loss_id(const TapedModel& m, Var window, std::size_t batch);
Var loss_fwd(const TapedModel& m, Var window, std::size_t batch, std::size_t k_max);
Var loss_bwd(const TapedModel& m, Var window, std::size_t batch, std::size_t k_max);
Var loss_con(Var k_fwd, Var k_bwd);

/// Temporal consistency in latent space. With z(j, t) = K^j enc(x_{t-j}),
///   L_kappa = 1/(m-1) sum_{p=1}^{m-1} 1/p sum_{q=1}^{p} ||z(kappa, n+kappa+p) - z(kappa+q, n+kappa+p)||^2
///   L_tc    = 1/(2 kappa_max) sum_{kappa=1}^{kappa_max} L_kappa
/// Only the m start snapshots are encoded; no later labels are read.
Var loss_tc(const TapedModel& m, Var window, std::size_t batch, std::size_t kappa_max);

/// Weighted total. Terms with zero weight are never built on the tape.
TapedLoss loss_total(const TapedModel& m, Var window, std::size_t batch,
                     const LossWeights& weights);

// Value-only conveniences (build a private tape).
double loss_id(const KoopmanAutoencoder& m, const Batch& b);
double loss_fwd(const KoopmanAutoencoder& m, const Batch& b, std::size_t k_max);
double loss_bwd(const KoopmanAutoencoder& m, const Batch& b, std::size_t k_max);
double loss_con(const Matrix& k_fwd, const Matrix& k_bwd);
double loss_tc(const KoopmanAutoencoder& m, const Batch& b, std::size_t kappa_max);
LossValue loss_total(const KoopmanAutoencoder& m, const Batch& b, const LossWeights& weights);

/// L_tc evaluated on latent states directly: columns of `latents` are enc(x_n..x_{n+m-1}).
double loss_tc_latent(const Matrix& k_fwd, const Matrix& latents, std::size_t kappa_max);

}  // namespace tckae
