#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "tckae/matrix.hpp"

namespace tckae {

/// Affine map applied to a dataset: stored = (raw - offset) * factor.
struct Scaling {
  double offset = 0.0;
  double factor = 1.0;

  Matrix apply(const Matrix& raw) const;
  Matrix undo(const Matrix& stored) const;
  bool operator==(const Scaling&) const = default;
};

/// Uniformly sampled state snapshots, one column per time sample.
struct TimeSeriesDataset {
  Matrix x;
  double dt = 1.0;
  std::string name;
  std::optional<double> noise_snr_db;    // set iff clean_reference is set
  std::optional<Matrix> clean_reference;
  std::optional<Scaling> scaling;

  std::size_t dim() const noexcept { return x.rows(); }
  std::size_t length() const noexcept { return x.cols(); }
  /// Noise-free ground truth: clean_reference when present, x otherwise.
  const Matrix& truth() const { return clean_reference ? *clean_reference : x; }
};

struct SplitDataset {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Undamped pendulum theta'' + (g/l) sin(theta) = 0 by classical RK4 with
/// `substeps` internal steps per sample. Row 0 is theta, row 1 is theta-dot;
/// column 0 is the initial state.
TimeSeriesDataset simulate_pendulum(double theta0, double omega0, double g, double length,
                                    double dt, std::size_t n, std::size_t substeps = 100);

/// Advances one pendulum state by `samples` sampling intervals using the same
/// integrator as simulate_pendulum.
Matrix advance_pendulum(const Matrix& state, double g, double length, double dt,
                        std::size_t samples, std::size_t substeps = 100);

/// rows x cols matrix with orthonormal columns: thin-QR of a seeded Gaussian matrix.
Matrix random_orthonormal_columns(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// X = P * Theta with P = random_orthonormal_columns(target_dim, Theta.rows(), seed).
TimeSeriesDataset orthogonal_lift(const TimeSeriesDataset& theta, std::size_t target_dim,
                                  std::uint64_t seed);

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds i.i.d. N(0, sigma^2) with sigma^2 = mean(x^2) / 10^(snr_db/10). snr_db = +inf is a no-op.
TimeSeriesDataset add_noise(const TimeSeriesDataset& data, double snr_db, std::uint64_t seed);

/// Mean squared entry of `x`.
double signal_power(const Matrix& x);

/// Contiguous prefix/suffix split.
SplitDataset split(const TimeSeriesDataset& data, std::size_t n_train);

/// Global min-max scaling of x (and clean_reference) to [-1, 1].
TimeSeriesDataset minmax_scale(const TimeSeriesDataset& data);

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, malformed };

  DatasetError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Binary layout, little-endian:
///   "TCKD" | u32 version=1 | u32 rows | u32 cols | f64 dt | u8 flags |
///   [f64 snr_db        if flags bit1] |
///   [f64 offset, factor if flags bit2] |
///   f64[rows*cols] x | [f64[rows*cols] clean_reference if flags bit0]
void save_dataset(const TimeSeriesDataset& data, const std::filesystem::path& path);
TimeSeriesDataset load_dataset(const std::filesystem::path& path);

/// Plain CSV, one row per feature and one column per time sample, no header.
TimeSeriesDataset import_csv(const std::filesystem::path& path, double dt);

}  // namespace tckae
