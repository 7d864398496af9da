#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tckae/matrix.hpp"

namespace tckae {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  /// Convenience for 1x1 results.
  double scalar() const;
};

/// Reverse-mode tape with one node per matrix primitive.
///
/// Nodes are appended in evaluation order, so the creation index is a
/// topological order and the reverse sweep simply walks indices downwards.
/// A tape is single-owner; build one per loss evaluation.
class Tape {
 public:
  enum class Op : std::uint8_t {
    leaf,
    matmul,
    add,
    sub,
    scale,
    add_bias,
    tanh,
    col_block,
    row_block,
    hcat,
    sum_squares,
    weighted_col_sum_squares,
    frobenius_norm,
    weighted_sum,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A leaf that gradients may be requested for.
  Var variable(Matrix value);
  /// A leaf that never receives gradient (data, targets).
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return nodes_.at(v.id).op; }

  /// Exact gradient of the 1x1 `output` with respect to each of `wrt`.
  /// Leaves that `output` does not depend on get a zero matrix. The tape is not
  /// modified, so repeated calls return identical results.
  std::vector<Matrix> gradient(Var output, std::span<const Var> wrt) const;

  /// Order in which the last gradient() call visited nodes (for tests of the sweep order).
  const std::vector<std::size_t>& last_sweep() const noexcept { return last_sweep_; }

 private:
  struct Node {
    Op op = Op::leaf;
    std::vector<std::size_t> inputs;
    Matrix value;
    bool requires_grad = false;
    std::size_t offset = 0;        // col_block / row_block start
    double factor = 0.0;           // scale
    std::vector<double> weights;   // weighted_col_sum_squares / weighted_sum
  };

  Var push(Node node);
  bool needs_grad(std::span<const std::size_t> inputs) const;
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  mutable std::vector<std::size_t> last_sweep_;

  friend Var matmul(Var a, Var b);
  friend Var operator+(Var a, Var b);
  friend Var operator-(Var a, Var b);
  friend Var scale(Var a, double s);
  friend Var add_bias(Var x, Var bias);
  friend Var tanh_map(Var x);
  friend Var col_block(Var m, std::size_t first, std::size_t count);
  friend Var row_block(Var m, std::size_t first, std::size_t count);
  friend Var hcat(std::span<const Var> blocks);
  friend Var sum_squares(Var a);
  friend Var weighted_col_sum_squares(Var a, std::vector<double> weights);
  friend Var frobenius_norm(Var a);
  friend Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);
};

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var scale(Var a, double s);
Var add_bias(Var x, Var bias);
Var tanh_map(Var x);
Var col_block(Var m, std::size_t first, std::size_t count);
Var row_block(Var m, std::size_t first, std::size_t count);
Var hcat(std::span<const Var> blocks);
/// sum of squared entries, 1x1
Var sum_squares(Var a);
/// sum_c weights[c] * ||a[:, c]||^2, 1x1
Var weighted_col_sum_squares(Var a, std::vector<double> weights);
/// unsquared Frobenius norm, 1x1; the subgradient at 0 is taken as 0
Var frobenius_norm(Var a);
/// sum_i weights[i] * scalars[i], 1x1
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);
/// K^kappa z recorded as kappa matmul nodes.
Var mat_pow_apply(Var k, Var z, std::size_t kappa);

}  // namespace tckae
