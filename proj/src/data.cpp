#include "tckae/data.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace tckae {

Matrix Scaling::apply(const Matrix& raw) const {
  Matrix out = raw;
  for (double& v : out.data()) v = (v - offset) * factor;
  return out;
}

Matrix Scaling::undo(const Matrix& stored) const {
  Matrix out = stored;
  for (double& v : out.data()) v = v / factor + offset;
  return out;
}

namespace {

struct PendulumState {
  double theta;
  double omega;
};

PendulumState rk4_step(PendulumState s, double accel, double h) {
  auto f = [accel](PendulumState y) { return PendulumState{y.omega, -accel * std::sin(y.theta)}; };
  const PendulumState k1 = f(s);
  const PendulumState k2 = f({s.theta + 0.5 * h * k1.theta, s.omega + 0.5 * h * k1.omega});
  const PendulumState k3 = f({s.theta + 0.5 * h * k2.theta, s.omega + 0.5 * h * k2.omega});
  const PendulumState k4 = f({s.theta + h * k3.theta, s.omega + h * k3.omega});
  return {s.theta + h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
          s.omega + h / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega)};
}

void check_pendulum_args(double g, double length, double dt, std::size_t substeps) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_pendulum: dt must be positive");
  if (!(length > 0.0)) throw std::invalid_argument("simulate_pendulum: length must be positive");
  if (!std::isfinite(g)) throw std::invalid_argument("simulate_pendulum: g must be finite");
  if (substeps == 0) throw std::invalid_argument("simulate_pendulum: substeps must be >= 1");
}

}  // namespace

TimeSeriesDataset simulate_pendulum(double theta0, double omega0, double g, double length,
                                    double dt, std::size_t n, std::size_t substeps) {
  check_pendulum_args(g, length, dt, substeps);
  if (n == 0) throw std::invalid_argument("simulate_pendulum: n must be >= 1");
  const double accel = g / length;
  const double h = dt / static_cast<double>(substeps);

  TimeSeriesDataset out;
  out.x = Matrix(2, n);
  out.dt = dt;
  out.name = "pendulum";
  PendulumState s{theta0, omega0};
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) {
      for (std::size_t k = 0; k < substeps; ++k) s = rk4_step(s, accel, h);
    }
    out.x(0, j) = s.theta;
    out.x(1, j) = s.omega;
  }
  return out;
}

Matrix advance_pendulum(const Matrix& state, double g, double length, double dt,
                        std::size_t samples, std::size_t substeps) {
  check_pendulum_args(g, length, dt, substeps);
  if (state.rows() != 2 || state.cols() != 1) {
    throw DimensionError("advance_pendulum: state must be 2x1, got " + state.shape());
  }
  const double accel = g / length;
  const double h = dt / static_cast<double>(substeps);
  PendulumState s{state(0, 0), state(1, 0)};
  for (std::size_t j = 0; j < samples * substeps; ++j) s = rk4_step(s, accel, h);
  return Matrix::column({s.theta, s.omega});
}

Matrix random_orthonormal_columns(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (cols == 0 || rows < cols) {
    throw DimensionError("random_orthonormal_columns: need rows >= cols >= 1, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) a(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  return Matrix(rows, cols, std::vector<double>(q.data(), q.data() + q.size()));
}

TimeSeriesDataset orthogonal_lift(const TimeSeriesDataset& theta, std::size_t target_dim,
                                  std::uint64_t seed) {
  if (target_dim < theta.dim()) {
    throw DimensionError("orthogonal_lift: target_dim " + std::to_string(target_dim) +
                         " below source dimension " + std::to_string(theta.dim()));
  }
  const Matrix p = random_orthonormal_columns(target_dim, theta.dim(), seed);
  TimeSeriesDataset out = theta;
  out.x = matmul(p, theta.x);
  if (theta.clean_reference) out.clean_reference = matmul(p, *theta.clean_reference);
  out.name = theta.name + "_lift" + std::to_string(target_dim);
  return out;
}

double signal_power(const Matrix& x) {
  if (x.empty()) return 0.0;
  return squared_norm(x) / static_cast<double>(x.size());
}

TimeSeriesDataset add_noise(const TimeSeriesDataset& data, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("add_noise: snr_db must be finite (or +inf for no noise)");
  }
  if (std::isinf(snr_db)) return data;
  const double variance = signal_power(data.x) / std::pow(10.0, snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));

  TimeSeriesDataset out = data;
  out.clean_reference = data.truth();
  for (double& v : out.x.data()) v += gauss(rng);
  out.noise_snr_db = snr_db;
  return out;
}

SplitDataset split(const TimeSeriesDataset& data, std::size_t n_train) {
  const std::size_t total = data.length();
  if (n_train == 0 || n_train >= total) {
    throw std::out_of_range("split: n_train must be in [1, " + std::to_string(total - 1) +
                            "], got " + std::to_string(n_train));
  }
  auto part = [&](std::size_t first, std::size_t count) {
    TimeSeriesDataset d = data;
    d.x = col_block(data.x, first, count);
    if (data.clean_reference) d.clean_reference = col_block(*data.clean_reference, first, count);
    return d;
  };
  SplitDataset s;
  s.train = part(0, n_train);
  s.test = part(n_train, total - n_train);
  s.n_train = n_train;
  s.n_test = total - n_train;
  return s;
}

TimeSeriesDataset minmax_scale(const TimeSeriesDataset& data) {
  if (data.x.empty()) throw std::invalid_argument("minmax_scale: empty dataset");
  const auto [lo, hi] = std::minmax_element(data.x.data().begin(), data.x.data().end());
  if (!(*hi > *lo)) throw std::invalid_argument("minmax_scale: constant dataset cannot be scaled");
  const Scaling step{0.5 * (*hi + *lo), 2.0 / (*hi - *lo)};
  TimeSeriesDataset out = data;
  out.x = step.apply(data.x);
  if (data.clean_reference) out.clean_reference = step.apply(*data.clean_reference);
  // compose with an existing map so undo() still returns raw units
  out.scaling = data.scaling ? Scaling{data.scaling->offset + step.offset / data.scaling->factor,
                                       data.scaling->factor * step.factor}
                             : step;
  return out;
}

void save_dataset(const TimeSeriesDataset& data, const std::filesystem::path& path) {
  if (data.noise_snr_db.has_value() != data.clean_reference.has_value()) {
    throw std::invalid_argument("save_dataset: clean_reference and noise_snr_db must come together");
  }
  if (data.clean_reference && !same_shape(*data.clean_reference, data.x)) {
    throw DimensionError("save_dataset: clean_reference shape " + data.clean_reference->shape() +
                         " differs from " + data.x.shape());
  }
  detail::ByteWriter w;
  w.put_raw("TCKD", 4);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(data.x.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(data.x.cols()));
  w.put<double>(data.dt);
  std::uint8_t flags = 0;
  if (data.clean_reference) flags |= 1u;
  if (data.noise_snr_db) flags |= 2u;
  if (data.scaling) flags |= 4u;
  w.put<std::uint8_t>(flags);
  if (data.noise_snr_db) w.put<double>(*data.noise_snr_db);
  if (data.scaling) {
    w.put<double>(data.scaling->offset);
    w.put<double>(data.scaling->factor);
  }
  w.put_payload(data.x);
  if (data.clean_reference) w.put_payload(*data.clean_reference);
  try {
    detail::write_file<std::runtime_error>(path, w.bytes());
  } catch (const std::runtime_error& e) {
    throw DatasetError(DatasetError::Kind::io, e.what());
  }
}

TimeSeriesDataset load_dataset(const std::filesystem::path& path) {
  using Kind = DatasetError::Kind;
  const std::string where = path.string();
  std::vector<char> bytes;
  try {
    bytes = detail::read_file<std::runtime_error>(path);
  } catch (const std::runtime_error& e) {
    throw DatasetError(Kind::io, e.what());
  }
  detail::ByteReader r(std::move(bytes));
  constexpr std::size_t kFixedHeader = 4 + 4 + 4 + 4 + 8 + 1;
  if (r.size() < 4 || r.get_raw(4) != "TCKD") {
    throw DatasetError(Kind::bad_magic, where + ": bad magic, not a TCKD dataset file");
  }
  if (r.size() < kFixedHeader) {
    throw DatasetError(Kind::truncated, where + ": truncated header: expected at least " +
                                            std::to_string(kFixedHeader) + " bytes, got " +
                                            std::to_string(r.size()));
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw DatasetError(Kind::version_mismatch, where + ": dataset version " +
                                                   std::to_string(version) + ", expected " +
                                                   std::to_string(kDatasetVersion));
  }
  const std::size_t rows = r.get<std::uint32_t>();
  const std::size_t cols = r.get<std::uint32_t>();
  TimeSeriesDataset d;
  d.dt = r.get<double>();
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~std::uint8_t{7}) {
    throw DatasetError(Kind::malformed, where + ": unknown flag bits " + std::to_string(flags));
  }
  if (bool(flags & 1u) != bool(flags & 2u)) {
    throw DatasetError(Kind::malformed, where + ": clean reference and SNR flags must be set together");
  }
  const std::size_t payload = rows * cols * sizeof(double);
  const std::size_t expected = kFixedHeader + ((flags & 2u) ? 8 : 0) + ((flags & 4u) ? 16 : 0) +
                               payload * ((flags & 1u) ? 2 : 1);
  if (r.size() != expected) {
    throw DatasetError(r.size() < expected ? Kind::truncated : Kind::malformed,
                       where + ": expected " + std::to_string(expected) + " bytes for " +
                           std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                           std::to_string(r.size()));
  }
  if (flags & 2u) d.noise_snr_db = r.get<double>();
  if (flags & 4u) {
    Scaling s;
    s.offset = r.get<double>();
    s.factor = r.get<double>();
    d.scaling = s;
  }
  d.x = r.get_payload(rows, cols);
  if (flags & 1u) d.clean_reference = r.get_payload(rows, cols);
  d.name = path.stem().string();
  return d;
}

TimeSeriesDataset import_csv(const std::filesystem::path& path, double dt) {
  using Kind = DatasetError::Kind;
  if (!(dt > 0.0)) throw std::invalid_argument("import_csv: dt must be positive");
  std::ifstream in(path);
  if (!in) throw DatasetError(Kind::io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DatasetError(Kind::malformed, path.string() + ":" + std::to_string(line_no) +
                                                ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DatasetError(Kind::malformed, path.string() + ":" + std::to_string(line_no) + ": " +
                                              std::to_string(row.size()) + " columns, expected " +
                                              std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DatasetError(Kind::malformed, path.string() + ": no data");
  TimeSeriesDataset d;
  d.x = Matrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) d.x(i, j) = rows[i][j];
  d.dt = dt;
  d.name = path.stem().string();
  return d;
}

}  // namespace tckae
