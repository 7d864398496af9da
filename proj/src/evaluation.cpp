#include "tckae/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tckae {

Matrix rollout(const KoopmanAutoencoder& m, const Matrix& x_init, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("rollout: steps must be >= 1");
  Matrix z = encode(m, x_init);
  std::vector<Matrix> frames;
  frames.reserve(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    z = matmul(m.k_fwd, z);
    frames.push_back(decode(m, z));
  }
  return hcat(frames);
}

std::optional<double> relative_error(std::span<const double> x_hat, std::span<const double> x_true) {
  if (x_hat.size() != x_true.size()) {
    throw DimensionError("relative_error: lengths " + std::to_string(x_hat.size()) + " and " +
                         std::to_string(x_true.size()));
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    const double d = x_hat[i] - x_true[i];
    num += d * d;
    den += x_true[i] * x_true[i];
  }
  if (den == 0.0) return std::nullopt;
  return std::sqrt(num) / std::sqrt(den);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double rank = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

EvalReport evaluate(const KoopmanAutoencoder& m, const SplitDataset& split,
                    const EvalOptions& options) {
  const TimeSeriesDataset& test = split.test;
  if (test.noise_snr_db && !test.clean_reference) {
    throw std::invalid_argument("evaluate: noisy dataset has no clean reference to score against");
  }
  if (options.n_inits == 0) throw std::invalid_argument("evaluate: n_inits must be >= 1");
  if (test.length() <= options.n_inits) {
    throw std::invalid_argument("evaluate: test set has " + std::to_string(test.length()) +
                                " samples, needs more than n_inits = " +
                                std::to_string(options.n_inits));
  }
  if (test.dim() != m.arch.n_in) {
    throw DimensionError("evaluate: dataset has " + std::to_string(test.dim()) +
                         " features, model expects " + std::to_string(m.arch.n_in));
  }

  const std::size_t n_inits = options.n_inits;
  std::size_t n_steps = test.length() - 1;
  if (options.max_steps > 0) n_steps = std::min(n_steps, options.max_steps);
  const Matrix truth = test.scaling ? test.scaling->undo(test.truth()) : test.truth();

  EvalReport report;
  report.n_inits = n_inits;
  report.n_steps = n_steps;
  std::vector<double> pooled;
  std::vector<double> init_sum(n_inits, 0.0);
  std::vector<std::size_t> init_count(n_inits, 0);
  report.per_step.assign(n_steps, 0.0);
  std::vector<std::size_t> step_count(n_steps, 0);

  // All initial conditions advance together, one column each.
  Matrix z = encode(m, col_block(test.x, 0, n_inits));
  for (std::size_t step = 1; step <= n_steps; ++step) {
    z = matmul(m.k_fwd, z);
    Matrix x_hat = decode(m, z);
    if (test.scaling) x_hat = test.scaling->undo(x_hat);
    for (std::size_t i = 0; i < n_inits; ++i) {
      const std::size_t target = i + step;
      if (target >= test.length()) continue;
      const auto err = relative_error(x_hat.col(i), truth.col(target));
      if (!err) {
        ++report.n_excluded;
        continue;
      }
      const double pct = 100.0 * *err;
      pooled.push_back(pct);
      init_sum[i] += pct;
      ++init_count[i];
      report.per_step[step - 1] += pct;
      ++step_count[step - 1];
    }
  }

  if (pooled.empty()) throw std::runtime_error("evaluate: every target had zero norm");
  double sum = 0.0;
  for (double e : pooled) sum += e;
  report.mean_error_pct = sum / static_cast<double>(pooled.size());
  report.ci90_width_pct = percentile(pooled, 0.95) - percentile(pooled, 0.05);
  for (std::size_t i = 0; i < n_inits; ++i) {
    report.per_init.push_back(init_count[i] ? init_sum[i] / static_cast<double>(init_count[i]) : 0.0);
  }
  for (std::size_t s = 0; s < n_steps; ++s) {
    if (step_count[s]) report.per_step[s] /= static_cast<double>(step_count[s]);
  }
  return report;
}

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("read_report: bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

std::string format_summary_cell(const EvalReport& r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f (%.2f)", r.mean_error_pct, r.ci90_width_pct);
  return buf;
}

std::string summary_line(const EvalReport& r) {
  return "mean_pct=" + shortest(r.mean_error_pct) + " width_pct=" + shortest(r.ci90_width_pct);
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_report: cannot write " + path.string());
  out << "# summary\n"
      << "mean_error_pct,ci90_width_pct,n_inits,n_steps,n_excluded\n"
      << shortest(r.mean_error_pct) << ',' << shortest(r.ci90_width_pct) << ',' << r.n_inits << ','
      << r.n_steps << ',' << r.n_excluded << '\n'
      << "# per_step\n"
      << "step,mean_error_pct\n";
  for (std::size_t s = 0; s < r.per_step.size(); ++s) out << s + 1 << ',' << shortest(r.per_step[s]) << '\n';
  out << "# per_init\n"
      << "init,mean_error_pct\n";
  for (std::size_t i = 0; i < r.per_init.size(); ++i) out << i << ',' << shortest(r.per_init[i]) << '\n';
  if (!out) throw std::runtime_error("write_report: write failed for " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_report: cannot open " + path.string());
  EvalReport r;
  std::string line;
  std::string section;
  bool header_pending = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      section = line.substr(2);
      header_pending = true;
      continue;
    }
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto cells = split_csv(line);
    if (section == "summary" && cells.size() == 5) {
      r.mean_error_pct = parse_double(cells[0]);
      r.ci90_width_pct = parse_double(cells[1]);
      r.n_inits = std::stoul(cells[2]);
      r.n_steps = std::stoul(cells[3]);
      r.n_excluded = std::stoul(cells[4]);
    } else if (section == "per_step" && cells.size() == 2) {
      r.per_step.push_back(parse_double(cells[1]));
    } else if (section == "per_init" && cells.size() == 2) {
      r.per_init.push_back(parse_double(cells[1]));
    } else {
      throw std::runtime_error("read_report: unexpected line in section '" + section + "': " + line);
    }
  }
  return r;
}

}  // namespace tckae
