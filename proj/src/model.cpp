#include "tckae/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "binary_io.hpp"

namespace tckae {

void Architecture::validate() const {
  if (n_in == 0 || n_hidden == 0 || n_latent == 0) {
    throw std::invalid_argument("Architecture: all dimensions must be >= 1 (n_in=" +
                                std::to_string(n_in) + ", n_hidden=" + std::to_string(n_hidden) +
                                ", n_latent=" + std::to_string(n_latent) + ")");
  }
}

std::array<Matrix*, KoopmanAutoencoder::kParameterMatrices> KoopmanAutoencoder::parameters() {
  return {&encoder[0].weight, &encoder[0].bias, &encoder[1].weight, &encoder[1].bias,
          &encoder[2].weight, &encoder[2].bias, &decoder[0].weight, &decoder[0].bias,
          &decoder[1].weight, &decoder[1].bias, &decoder[2].weight, &decoder[2].bias,
          &k_fwd,             &k_bwd};
}

std::array<const Matrix*, KoopmanAutoencoder::kParameterMatrices> KoopmanAutoencoder::parameters()
    const {
  auto mut = const_cast<KoopmanAutoencoder*>(this)->parameters();
  std::array<const Matrix*, kParameterMatrices> out{};
  std::copy(mut.begin(), mut.end(), out.begin());
  return out;
}

std::size_t KoopmanAutoencoder::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* p : parameters()) n += p->size();
  return n;
}

bool KoopmanAutoencoder::operator==(const KoopmanAutoencoder& other) const {
  if (!(arch == other.arch) || seed != other.seed || activation != other.activation) return false;
  auto a = parameters();
  auto b = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i] == *b[i])) return false;
  return true;
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer{Matrix(out, in), Matrix(out, 1)};
  for (double& w : layer.weight.data()) w = dist(rng);
  return layer;
}

Matrix near_identity(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.01, 0.01);
  Matrix k = Matrix::identity(n);
  for (double& v : k.data()) v += dist(rng);
  return k;
}

Matrix activate(const KoopmanAutoencoder& m, Matrix x) {
  return m.activation == Activation::tanh ? tanh_map(x) : x;
}

Var activate(const TapedModel& m, Var x) {
  return m.model->activation == Activation::tanh ? tanh_map(x) : x;
}

Matrix run_stack(const KoopmanAutoencoder& m, const std::array<DenseLayer, 3>& layers, Matrix x) {
  x = activate(m, add_bias(matmul(layers[0].weight, x), layers[0].bias));
  x = activate(m, add_bias(matmul(layers[1].weight, x), layers[1].bias));
  return add_bias(matmul(layers[2].weight, x), layers[2].bias);
}

Var run_stack(const TapedModel& m, std::size_t first_param, Var x) {
  const auto& p = m.params;
  x = activate(m, add_bias(matmul(p[first_param], x), p[first_param + 1]));
  x = activate(m, add_bias(matmul(p[first_param + 2], x), p[first_param + 3]));
  return add_bias(matmul(p[first_param + 4], x), p[first_param + 5]);
}

void require_rows(const char* what, const Matrix& x, std::size_t rows) {
  if (x.rows() != rows) {
    throw DimensionError(std::string(what) + ": input has " + std::to_string(x.rows()) +
                         " rows, model expects " + std::to_string(rows) + " (input shape " +
                         x.shape() + ")");
  }
}

}  // namespace

KoopmanAutoencoder init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  KoopmanAutoencoder m;
  m.arch = arch;
  m.seed = seed;
  m.encoder = {make_layer(arch.n_in, arch.n_hidden, rng),
               make_layer(arch.n_hidden, arch.n_hidden, rng),
               make_layer(arch.n_hidden, arch.n_latent, rng)};
  m.decoder = {make_layer(arch.n_latent, arch.n_hidden, rng),
               make_layer(arch.n_hidden, arch.n_hidden, rng),
               make_layer(arch.n_hidden, arch.n_in, rng)};
  m.k_fwd = near_identity(arch.n_latent, rng);
  m.k_bwd = near_identity(arch.n_latent, rng);
  return m;
}

Matrix encode(const KoopmanAutoencoder& m, const Matrix& x) {
  require_rows("encode", x, m.arch.n_in);
  return run_stack(m, m.encoder, x);
}

Matrix decode(const KoopmanAutoencoder& m, const Matrix& z) {
  require_rows("decode", z, m.arch.n_latent);
  return run_stack(m, m.decoder, z);
}

Matrix predict(const KoopmanAutoencoder& m, const Matrix& x0, std::size_t k, Direction direction) {
  const Matrix& op = direction == Direction::forward ? m.k_fwd : m.k_bwd;
  return decode(m, mat_pow_apply(op, encode(m, x0), k));
}

TapedModel bind(Tape& tape, const KoopmanAutoencoder& m) {
  TapedModel t;
  t.model = &m;
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) t.params[i] = tape.variable(*params[i]);
  return t;
}

Var encode(const TapedModel& m, Var x) {
  require_rows("encode", x.value(), m.model->arch.n_in);
  return run_stack(m, 0, x);
}

Var decode(const TapedModel& m, Var z) {
  require_rows("decode", z.value(), m.model->arch.n_latent);
  return run_stack(m, 6, z);
}

Spectrum spectrum_of(const Matrix& k, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("spectrum: dt must be positive");
  if (k.rows() != k.cols()) throw DimensionError("spectrum: operator must be square, got " + k.shape());
  const auto n = static_cast<Eigen::Index>(k.rows());
  Eigen::Map<const Eigen::MatrixXd> km(k.data().data(), n, n);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(km, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectrum: eigensolver did not converge for " + k.shape() + " operator");
  }

  std::vector<std::complex<double>> eig(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(eig.begin(), eig.end(), [](std::complex<double> a, std::complex<double> b) {
    const double ma = std::abs(a);
    const double mb = std::abs(b);
    if (std::abs(ma - mb) > 1e-12 * std::max(1.0, std::max(ma, mb))) return ma > mb;
    return std::arg(a) < std::arg(b);
  });

  Spectrum s;
  s.eigenvalues = std::move(eig);
  for (const auto& l : s.eigenvalues) {
    s.magnitudes.push_back(std::abs(l));
    s.phases.push_back(std::arg(l));
    s.frequencies_hz.push_back(std::arg(l) / (2.0 * std::numbers::pi * dt));
  }
  return s;
}

Spectrum spectrum(const KoopmanAutoencoder& m, double dt) { return spectrum_of(m.k_fwd, dt); }

void save_checkpoint(const KoopmanAutoencoder& m, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.put_raw("TCKM", 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.arch.n_in));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.arch.n_hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.arch.n_latent));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(Architecture::hidden_layers_per_half));
  w.put<std::uint64_t>(m.seed);
  for (const Matrix* p : m.parameters()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->cols()));
    w.put_payload(*p);
  }
  detail::write_file<CheckpointError>(path, w.bytes());
}

KoopmanAutoencoder load_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_file<CheckpointError>(path));
  const std::string where = path.string();
  auto need = [&](std::size_t n) {
    if (!r.has(n)) {
      throw CheckpointError(where + ": truncated checkpoint (" + std::to_string(r.size()) +
                            " bytes, needed at least " + std::to_string(r.position() + n) + ")");
    }
  };
  need(4);
  if (r.get_raw(4) != "TCKM") throw CheckpointError(where + ": bad magic, not a checkpoint");
  need(4 * 5 + 8);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  KoopmanAutoencoder m;
  m.arch.n_in = r.get<std::uint32_t>();
  m.arch.n_hidden = r.get<std::uint32_t>();
  m.arch.n_latent = r.get<std::uint32_t>();
  const auto layers = r.get<std::uint32_t>();
  if (layers != Architecture::hidden_layers_per_half) {
    throw CheckpointError(where + ": unsupported depth " + std::to_string(layers));
  }
  m.arch.validate();
  m.seed = r.get<std::uint64_t>();

  const KoopmanAutoencoder shape_ref = init_model(m.arch, 0);
  auto expected = shape_ref.parameters();
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    need(8);
    const std::size_t rows = r.get<std::uint32_t>();
    const std::size_t cols = r.get<std::uint32_t>();
    if (rows != expected[i]->rows() || cols != expected[i]->cols()) {
      throw CheckpointError(where + ": parameter " + std::to_string(i) + " has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                            expected[i]->shape());
    }
    need(rows * cols * sizeof(double));
    *params[i] = r.get_payload(rows, cols);
  }
  if (r.position() != r.size()) {
    throw CheckpointError(where + ": " + std::to_string(r.size() - r.position()) +
                          " trailing bytes after last parameter");
  }
  return m;
}

}  // namespace tckae
