#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tckae/data.hpp"
#include "tckae/evaluation.hpp"
#include "tckae/model.hpp"
#include "tckae/training.hpp"

namespace tckae {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string generator = "pendulum";  // "pendulum" or "file"
  std::filesystem::path path;          // generator = file: .tckd or .csv
  double theta0 = 0.8;
  double omega0 = 0.0;
  double g = 9.8;
  double length = 1.0;
  double dt = 0.1;
  std::size_t n = 2200;
  std::size_t lift_dim = 64;           // 0 keeps the raw 2-D state
  double snr_db = kNoNoise;
  std::uint64_t seed = 0;
  std::string scale = "none";          // "none" or "minmax"
};

/// One run, fully described. Flat `section.key = value` text on disk; see config_keys().
struct ExperimentConfig {
  std::string name = "run";
  DatasetSpec dataset;
  std::size_t n_train = 32;
  std::size_t n_hidden = 16;
  std::size_t n_latent = 6;
  TrainConfig train;
  EvalOptions eval;
};

/// Every accepted key, in documentation order.
const std::vector<std::string>& config_keys();

ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` assignment; throws ConfigError naming the key on failure.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Round-trips through parse_config.
std::string render_config(const ExperimentConfig& cfg);

TimeSeriesDataset build_dataset(const DatasetSpec& spec);

struct RunOutcome {
  KoopmanAutoencoder model;
  TrainLog log;
  EvalReport report;
};

/// split -> init -> train -> evaluate. With out_dir set, writes model.tckm,
/// train_log.csv, report.csv and config.resolved there.
RunOutcome run_experiment(const ExperimentConfig& cfg, const TimeSeriesDataset& data,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// One grid axis: keys that move together and their value tuples.
struct GridAxis {
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> values;
};

/// Grid file: one axis per line, tuples separated by '|', tied keys and tuple
/// members separated by ','. A `seeds = 1 | 2 | 3` line lists training seeds.
///
///   train.gamma_bwd, train.gamma_con = 0, 0 | 1e-2, 1e-1
///   train.gamma_tc = 0 | 1e-1
///   seeds = 1 | 2 | 3
struct AblationGrid {
  std::vector<GridAxis> axes;
  std::vector<std::uint64_t> seeds;

  std::size_t point_count() const;
};

AblationGrid parse_grid(std::string_view text, const std::string& origin = "<grid>");
AblationGrid load_grid(const std::filesystem::path& path);

/// Config for grid point `point` (row-major over axes, last axis fastest).
ExperimentConfig grid_point_config(const ExperimentConfig& base, const AblationGrid& grid,
                                   std::size_t point);

struct AblationRow {
  std::size_t point = 0;
  LossWeights weights;
  std::optional<std::uint64_t> seed;  // nullopt marks the per-point median row
  double mean_error_pct = 0.0;
  double ci90_width_pct = 0.0;
  std::string status = "ok";
};

/// Runs every (point, seed) pair on `jobs` worker threads; failures are recorded
/// in the row status and the grid continues.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                      const TimeSeriesDataset& data, std::size_t jobs,
                                      const std::optional<std::filesystem::path>& out_dir);

/// point,gamma_id,gamma_fwd,gamma_bwd,gamma_con,gamma_tc,seed,mean_error_pct,ci90_width_pct,status
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

double median(std::vector<double> values);

}  // namespace tckae
