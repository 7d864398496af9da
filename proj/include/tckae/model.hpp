#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "tckae/matrix.hpp"
#include "tckae/tape.hpp"

namespace tckae {

/// Layer widths of the autoencoder. The output width always equals n_in.
struct Architecture {
  static constexpr std::size_t hidden_layers_per_half = 2;

  std::size_t n_in = 0;
  std::size_t n_hidden = 0;
  std::size_t n_latent = 0;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Hidden-layer nonlinearity. `linear_for_tests` replaces tanh with the identity
/// so invariant-subspace identities can be checked exactly on linear systems;
/// train() refuses models in that mode.
enum class Activation : std::uint8_t { tanh, linear_for_tests };

enum class Direction : std::uint8_t { forward, backward };

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
};

/// Encoder: n_in -> n_hidden -> n_hidden -> n_latent (last layer linear).
/// Decoder: n_latent -> n_hidden -> n_hidden -> n_in (last layer linear).
struct KoopmanAutoencoder {
  static constexpr std::size_t kParameterMatrices = 14;

  Architecture arch;
  std::array<DenseLayer, 3> encoder;
  std::array<DenseLayer, 3> decoder;
  Matrix k_fwd;
  Matrix k_bwd;
  std::uint64_t seed = 0;
  Activation activation = Activation::tanh;

  /// Fixed order: encoder (W, b) x3, decoder (W, b) x3, K, K_b. The checkpoint
  /// format and the optimizer both rely on this order.
  std::array<Matrix*, kParameterMatrices> parameters();
  std::array<const Matrix*, kParameterMatrices> parameters() const;

  /// Number of scalar parameters.
  std::size_t parameter_count() const;

  bool operator==(const KoopmanAutoencoder& other) const;
};

/// Affine weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases,
/// K and K_b = I + U(-0.01, 0.01) entrywise.
KoopmanAutoencoder init_model(const Architecture& arch, std::uint64_t seed);

/// Columns of `x` are states; result columns are latents.
Matrix encode(const KoopmanAutoencoder& m, const Matrix& x);
Matrix decode(const KoopmanAutoencoder& m, const Matrix& z);
/// decode(K^k encode(x0)) (K_b for backward); k == 0 is plain reconstruction.
Matrix predict(const KoopmanAutoencoder& m, const Matrix& x0, std::size_t k,
               Direction direction = Direction::forward);

/// Parameters of a model bound as tape variables, same order as parameters().
struct TapedModel {
  const KoopmanAutoencoder* model = nullptr;
  std::array<Var, KoopmanAutoencoder::kParameterMatrices> params;

  Var k_fwd() const { return params[12]; }
  Var k_bwd() const { return params[13]; }
};

TapedModel bind(Tape& tape, const KoopmanAutoencoder& m);
Var encode(const TapedModel& m, Var x);
Var decode(const TapedModel& m, Var z);

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> magnitudes;
  std::vector<double> phases;          // radians, (-pi, pi]
  std::vector<double> frequencies_hz;  // phase / (2 pi dt)
};

/// Eigenvalues of k_fwd, sorted by descending magnitude then ascending phase.
Spectrum spectrum(const KoopmanAutoencoder& m, double dt);
Spectrum spectrum_of(const Matrix& k, double dt);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout, little-endian:
///   "TCKM" | u32 version | u32 n_in | u32 n_hidden | u32 n_latent |
///   u32 hidden_layers_per_half | u64 seed |
///   14 x (u32 rows | u32 cols | f64[rows*cols] column-major)
void save_checkpoint(const KoopmanAutoencoder& m, const std::filesystem::path& path);
KoopmanAutoencoder load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace tckae
