#include "tckae/tape.hpp"

#include <cmath>
#include <string>

namespace tckae {

const Matrix& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
  const Matrix& m = value();
  if (m.rows() != 1 || m.cols() != 1) {
    throw DimensionError("Var::scalar: value has shape " + m.shape());
  }
  return m(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

bool Tape::needs_grad(std::span<const std::size_t> inputs) const {
  for (auto i : inputs)
    if (nodes_[i].requires_grad) return true;
  return false;
}

void Tape::check_owner(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("Tape: variable does not belong to this tape");
  }
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

namespace {

Tape& common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("tape operands recorded on different tapes");
  }
  return *a.tape;
}

}  // namespace

// Each primitive: compute the value eagerly, then record the node.

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  Tape::Node n;
  n.op = Tape::Op::matmul;
  n.inputs = {a.id, b.id};
  n.value = matmul(t.nodes_[a.id].value, t.nodes_[b.id].value);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var operator+(Var a, Var b) {
  Tape& t = common_tape(a, b);
  Tape::Node n;
  n.op = Tape::Op::add;
  n.inputs = {a.id, b.id};
  n.value = t.nodes_[a.id].value + t.nodes_[b.id].value;
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var operator-(Var a, Var b) {
  Tape& t = common_tape(a, b);
  Tape::Node n;
  n.op = Tape::Op::sub;
  n.inputs = {a.id, b.id};
  n.value = t.nodes_[a.id].value - t.nodes_[b.id].value;
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  t.check_owner(a);
  Tape::Node n;
  n.op = Tape::Op::scale;
  n.inputs = {a.id};
  n.factor = s;
  n.value = s * t.nodes_[a.id].value;
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var add_bias(Var x, Var bias) {
  Tape& t = common_tape(x, bias);
  Tape::Node n;
  n.op = Tape::Op::add_bias;
  n.inputs = {x.id, bias.id};
  n.value = add_bias(t.nodes_[x.id].value, t.nodes_[bias.id].value);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var tanh_map(Var x) {
  Tape& t = *x.tape;
  t.check_owner(x);
  Tape::Node n;
  n.op = Tape::Op::tanh;
  n.inputs = {x.id};
  n.value = tanh_map(t.nodes_[x.id].value);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var col_block(Var m, std::size_t first, std::size_t count) {
  Tape& t = *m.tape;
  t.check_owner(m);
  Tape::Node n;
  n.op = Tape::Op::col_block;
  n.inputs = {m.id};
  n.offset = first;
  n.value = col_block(t.nodes_[m.id].value, first, count);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var row_block(Var m, std::size_t first, std::size_t count) {
  Tape& t = *m.tape;
  t.check_owner(m);
  Tape::Node n;
  n.op = Tape::Op::row_block;
  n.inputs = {m.id};
  n.offset = first;
  n.value = row_block(t.nodes_[m.id].value, first, count);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var hcat(std::span<const Var> blocks) {
  if (blocks.empty()) throw std::invalid_argument("hcat: no blocks");
  Tape& t = *blocks.front().tape;
  std::vector<Matrix> values;
  Tape::Node n;
  n.op = Tape::Op::hcat;
  for (const Var& b : blocks) {
    t.check_owner(b);
    n.inputs.push_back(b.id);
    values.push_back(t.nodes_[b.id].value);
  }
  n.value = hcat(values);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var sum_squares(Var a) {
  Tape& t = *a.tape;
  t.check_owner(a);
  Tape::Node n;
  n.op = Tape::Op::sum_squares;
  n.inputs = {a.id};
  n.value = Matrix(1, 1, squared_norm(t.nodes_[a.id].value));
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var weighted_col_sum_squares(Var a, std::vector<double> weights) {
  Tape& t = *a.tape;
  t.check_owner(a);
  const Matrix& av = t.nodes_[a.id].value;
  if (weights.size() != av.cols()) {
    throw DimensionError("weighted_col_sum_squares: " + std::to_string(weights.size()) +
                         " weights for " + av.shape());
  }
  double s = 0.0;
  for (std::size_t c = 0; c < av.cols(); ++c) {
    double cs = 0.0;
    for (double v : av.col(c)) cs += v * v;
    s += weights[c] * cs;
  }
  Tape::Node n;
  n.op = Tape::Op::weighted_col_sum_squares;
  n.inputs = {a.id};
  n.weights = std::move(weights);
  n.value = Matrix(1, 1, s);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var frobenius_norm(Var a) {
  Tape& t = *a.tape;
  t.check_owner(a);
  Tape::Node n;
  n.op = Tape::Op::frobenius_norm;
  n.inputs = {a.id};
  n.value = Matrix(1, 1, frobenius_norm(t.nodes_[a.id].value));
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.empty()) throw std::invalid_argument("weighted_sum: no terms");
  if (scalars.size() != weights.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(scalars.size()) + " terms but " +
                         std::to_string(weights.size()) + " weights");
  }
  Tape& t = *scalars.front().tape;
  Tape::Node n;
  n.op = Tape::Op::weighted_sum;
  double s = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    t.check_owner(scalars[i]);
    const Matrix& v = t.nodes_[scalars[i].id].value;
    if (v.rows() != 1 || v.cols() != 1) {
      throw DimensionError("weighted_sum: term has shape " + v.shape());
    }
    n.inputs.push_back(scalars[i].id);
    s += weights[i] * v(0, 0);
  }
  n.weights.assign(weights.begin(), weights.end());
  n.value = Matrix(1, 1, s);
  n.requires_grad = t.needs_grad(n.inputs);
  return t.push(std::move(n));
}

Var mat_pow_apply(Var k, Var z, std::size_t kappa) {
  const Matrix& kv = k.value();
  if (kv.rows() != kv.cols()) {
    throw DimensionError("mat_pow_apply: operator must be square, got " + kv.shape());
  }
  if (kv.cols() != z.value().rows()) {
    throw DimensionError("mat_pow_apply: incompatible shapes " + kv.shape() + " and " +
                         z.value().shape());
  }
  Var out = z;
  for (std::size_t i = 0; i < kappa; ++i) out = matmul(k, out);
  return out;
}

std::vector<Matrix> Tape::gradient(Var output, std::span<const Var> wrt) const {
  if (output.tape != this || output.id >= nodes_.size()) {
    throw std::invalid_argument("Tape::gradient: output does not belong to this tape");
  }
  const Matrix& out = nodes_[output.id].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError("Tape::gradient: output must be scalar, got " + out.shape());
  }

  std::vector<Matrix> adj(output.id + 1);
  auto accumulate = [&](std::size_t id, const Matrix& g) {
    if (!nodes_[id].requires_grad) return;
    if (adj[id].empty()) {
      adj[id] = g;
    } else {
      adj[id] += g;
    }
  };
  adj[output.id] = Matrix(1, 1, 1.0);
  last_sweep_.clear();

  for (std::size_t id = output.id + 1; id-- > 0;) {
    if (adj[id].empty()) continue;
    const Node& n = nodes_[id];
    const Matrix& g = adj[id];
    last_sweep_.push_back(id);
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        const Matrix& a = nodes_[n.inputs[0]].value;
        const Matrix& b = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].requires_grad) accumulate(n.inputs[0], matmul_nt(g, b));
        if (nodes_[n.inputs[1]].requires_grad) accumulate(n.inputs[1], matmul_tn(a, g));
        break;
      }
      case Op::add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::sub:
        accumulate(n.inputs[0], g);
        if (nodes_[n.inputs[1]].requires_grad) accumulate(n.inputs[1], -1.0 * g);
        break;
      case Op::scale:
        accumulate(n.inputs[0], n.factor * g);
        break;
      case Op::add_bias: {
        accumulate(n.inputs[0], g);
        if (nodes_[n.inputs[1]].requires_grad) {
          Matrix gb(g.rows(), 1);
          for (std::size_t c = 0; c < g.cols(); ++c)
            for (std::size_t r = 0; r < g.rows(); ++r) gb(r, 0) += g(r, c);
          accumulate(n.inputs[1], gb);
        }
        break;
      }
      case Op::tanh: {
        Matrix gx = g;
        auto y = n.value.data();
        auto gd = gx.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= 1.0 - y[i] * y[i];
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::col_block: {
        const Matrix& src = nodes_[n.inputs[0]].value;
        Matrix gx(src.rows(), src.cols());
        for (std::size_t c = 0; c < g.cols(); ++c)
          for (std::size_t r = 0; r < g.rows(); ++r) gx(r, n.offset + c) = g(r, c);
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::row_block: {
        const Matrix& src = nodes_[n.inputs[0]].value;
        Matrix gx(src.rows(), src.cols());
        for (std::size_t c = 0; c < g.cols(); ++c)
          for (std::size_t r = 0; r < g.rows(); ++r) gx(n.offset + r, c) = g(r, c);
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::hcat: {
        std::size_t first = 0;
        for (std::size_t in : n.inputs) {
          const std::size_t cols = nodes_[in].value.cols();
          if (nodes_[in].requires_grad) accumulate(in, col_block(g, first, cols));
          first += cols;
        }
        break;
      }
      case Op::sum_squares:
        accumulate(n.inputs[0], (2.0 * g(0, 0)) * nodes_[n.inputs[0]].value);
        break;
      case Op::weighted_col_sum_squares: {
        Matrix gx = nodes_[n.inputs[0]].value;
        for (std::size_t c = 0; c < gx.cols(); ++c) {
          const double w = 2.0 * g(0, 0) * n.weights[c];
          for (double& v : gx.col(c)) v *= w;
        }
        accumulate(n.inputs[0], gx);
        break;
      }
      case Op::frobenius_norm: {
        const Matrix& a = nodes_[n.inputs[0]].value;
        const double norm = n.value(0, 0);
        accumulate(n.inputs[0], norm > 0.0 ? (g(0, 0) / norm) * a : Matrix(a.rows(), a.cols()));
        break;
      }
      case Op::weighted_sum:
        for (std::size_t i = 0; i < n.inputs.size(); ++i)
          accumulate(n.inputs[i], Matrix(1, 1, n.weights[i] * g(0, 0)));
        break;
    }
  }

  std::vector<Matrix> result;
  result.reserve(wrt.size());
  for (const Var& v : wrt) {
    check_owner(v);
    if (v.id <= output.id && !adj[v.id].empty()) {
      result.push_back(adj[v.id]);
    } else {
      const Matrix& val = nodes_[v.id].value;
      result.emplace_back(val.rows(), val.cols());
    }
  }
  return result;
}

}  // namespace tckae
