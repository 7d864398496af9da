#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tckae/data.hpp"
#include "tckae/model.hpp"

namespace tckae {

struct EvalReport {
  double mean_error_pct = 0.0;
  double ci90_width_pct = 0.0;  // p95 - p5 of the pooled errors
  std::vector<double> per_init;  // mean error (%) per initial condition
  std::vector<double> per_step;  // mean error (%) per prediction horizon, step 1 first
  std::size_t n_inits = 0;
  std::size_t n_steps = 0;       // longest horizon evaluated
  std::size_t n_excluded = 0;    // (init, step) pairs skipped because the truth had zero norm

  bool operator==(const EvalReport&) const = default;
};

/// Column j-1 is predict(x_init, j) for j = 1..steps; the latent is advanced
/// incrementally from a single encoding. x_init may hold several columns; the
/// result then has steps blocks of x_init.cols() columns, step-major.
Matrix rollout(const KoopmanAutoencoder& m, const Matrix& x_init, std::size_t steps);

/// ||x_hat - x|| / ||x||, or nullopt when ||x|| == 0.
std::optional<double> relative_error(std::span<const double> x_hat, std::span<const double> x_true);

/// Linear interpolation between closest ranks (rank = q * (n - 1)).
double percentile(std::vector<double> values, double q);

struct EvalOptions {
  std::size_t n_inits = 30;
  /// 0 means roll out to the end of the test window.
  std::size_t max_steps = 0;
};

/// Rolls out from each of the first n_inits test columns and scores every step
/// against the noise-free truth (unscaled when the dataset carries a scaling).
EvalReport evaluate(const KoopmanAutoencoder& m, const SplitDataset& split,
                    const EvalOptions& options = {});

/// "2.936 (9.20)"
std::string format_summary_cell(const EvalReport& r);
/// "mean_pct=<v> width_pct=<v>"
std::string summary_line(const EvalReport& r);

/// Sections: "# summary", "# per_step", "# per_init"; floats in shortest round-trip form.
void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace tckae
