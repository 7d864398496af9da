#include "tckae/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace tckae {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "none") return kNoNoise;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  for (const auto& item : split_on(v, ',')) out.push_back(to_size(key, item));
  return out;
}

struct KeyHandler {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;

#define TCKAE_DOUBLE(KEY, EXPR)                                                              \
  t.push_back({KEY, [](C& c, const S& v) { c.EXPR = to_double(KEY, v); },                    \
               [](const C& c) { return fmt(c.EXPR); }})
#define TCKAE_SIZE(KEY, EXPR)                                                                \
  t.push_back({KEY, [](C& c, const S& v) { c.EXPR = to_size(KEY, v); },                      \
               [](const C& c) { return std::to_string(c.EXPR); }})
#define TCKAE_U64(KEY, EXPR)                                                                 \
  t.push_back({KEY, [](C& c, const S& v) { c.EXPR = to_u64(KEY, v); },                       \
               [](const C& c) { return std::to_string(c.EXPR); }})

    t.push_back({"run.name", [](C& c, const S& v) { c.name = v; },
                 [](const C& c) { return c.name; }});
    t.push_back({"dataset.generator",
                 [](C& c, const S& v) {
                   if (v != "pendulum" && v != "file") {
                     throw ConfigError("dataset.generator: expected 'pendulum' or 'file', got '" + v + "'");
                   }
                   c.dataset.generator = v;
                 },
                 [](const C& c) { return c.dataset.generator; }});
    t.push_back({"dataset.path", [](C& c, const S& v) { c.dataset.path = v; },
                 [](const C& c) { return c.dataset.path.string(); }});
    TCKAE_DOUBLE("dataset.theta0", dataset.theta0);
    TCKAE_DOUBLE("dataset.omega0", dataset.omega0);
    TCKAE_DOUBLE("dataset.g", dataset.g);
    TCKAE_DOUBLE("dataset.length", dataset.length);
    TCKAE_DOUBLE("dataset.dt", dataset.dt);
    TCKAE_SIZE("dataset.n", dataset.n);
    TCKAE_SIZE("dataset.lift_dim", dataset.lift_dim);
    TCKAE_DOUBLE("dataset.snr_db", dataset.snr_db);
    TCKAE_U64("dataset.seed", dataset.seed);
    t.push_back({"dataset.scale",
                 [](C& c, const S& v) {
                   if (v != "none" && v != "minmax") {
                     throw ConfigError("dataset.scale: expected 'none' or 'minmax', got '" + v + "'");
                   }
                   c.dataset.scale = v;
                 },
                 [](const C& c) { return c.dataset.scale; }});
    TCKAE_SIZE("split.n_train", n_train);
    TCKAE_SIZE("model.n_hidden", n_hidden);
    TCKAE_SIZE("model.n_latent", n_latent);
    TCKAE_SIZE("train.epochs", train.epochs);
    TCKAE_SIZE("train.batch_size", train.batch_size);
    TCKAE_DOUBLE("train.lr", train.lr);
    TCKAE_DOUBLE("train.lr_decay_factor", train.lr_decay_factor);
    t.push_back({"train.lr_decay_epochs",
                 [](C& c, const S& v) { c.train.lr_decay_epochs = to_size_list("train.lr_decay_epochs", v); },
                 [](const C& c) {
                   if (c.train.lr_decay_epochs.empty()) return S("none");
                   S out;
                   for (auto e : c.train.lr_decay_epochs) out += (out.empty() ? "" : ",") + std::to_string(e);
                   return out;
                 }});
    TCKAE_DOUBLE("train.gamma_id", train.weights.gamma_id);
    TCKAE_DOUBLE("train.gamma_fwd", train.weights.gamma_fwd);
    TCKAE_DOUBLE("train.gamma_bwd", train.weights.gamma_bwd);
    TCKAE_DOUBLE("train.gamma_con", train.weights.gamma_con);
    TCKAE_DOUBLE("train.gamma_tc", train.weights.gamma_tc);
    TCKAE_SIZE("train.k_max_fwd", train.weights.k_max_fwd);
    TCKAE_SIZE("train.kappa_max_tc", train.weights.kappa_max_tc);
    TCKAE_SIZE("train.e_switch", train.e_switch);
    TCKAE_U64("train.seed", train.seed);
    TCKAE_DOUBLE("train.adam_beta1", train.adam_beta1);
    TCKAE_DOUBLE("train.adam_beta2", train.adam_beta2);
    TCKAE_DOUBLE("train.adam_eps", train.adam_eps);
    TCKAE_SIZE("train.checkpoint_every", train.checkpoint_every);
    TCKAE_SIZE("eval.n_inits", eval.n_inits);
    TCKAE_SIZE("eval.max_steps", eval.max_steps);
#undef TCKAE_DOUBLE
#undef TCKAE_SIZE
#undef TCKAE_U64
    return t;
  }();
  return table;
}

// Older tables name the temporal-consistency weight gamma_pc.
std::string canonical_key(const std::string& key) {
  if (key == "train.gamma_pc") return "train.gamma_tc";
  return key;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const std::string k = canonical_key(key);
  for (const auto& h : handlers()) {
    if (h.key == k) {
      h.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(std::string_view text, const std::string& origin) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& h : handlers()) out += h.key + " = " + h.get(cfg) + "\n";
  return out;
}

TimeSeriesDataset build_dataset(const DatasetSpec& spec) {
  TimeSeriesDataset data;
  if (spec.generator == "pendulum") {
    data = simulate_pendulum(spec.theta0, spec.omega0, spec.g, spec.length, spec.dt, spec.n);
    if (spec.lift_dim > 0) data = orthogonal_lift(data, spec.lift_dim, spec.seed);
  } else if (spec.generator == "file") {
    if (spec.path.empty()) throw ConfigError("dataset.path: required when dataset.generator = file");
    data = spec.path.extension() == ".csv" ? import_csv(spec.path, spec.dt) : load_dataset(spec.path);
  } else {
    throw ConfigError("dataset.generator: unknown generator '" + spec.generator + "'");
  }
  if (!std::isinf(spec.snr_db)) data = add_noise(data, spec.snr_db, spec.seed + 1);
  if (spec.scale == "minmax") data = minmax_scale(data);
  return data;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const TimeSeriesDataset& data,
                          const std::optional<std::filesystem::path>& out_dir) {
  const SplitDataset parts = split(data, cfg.n_train);
  const Architecture arch{data.dim(), cfg.n_hidden, cfg.n_latent};
  TrainOptions options;
  options.checkpoint_dir = out_dir;
  TrainResult trained = train(init_model(arch, cfg.train.seed), parts, cfg.train, options);
  RunOutcome outcome{std::move(trained.model), std::move(trained.log), {}};
  outcome.report = evaluate(outcome.model, parts, cfg.eval);
  if (out_dir) {
    outcome.log.write_csv(*out_dir / "train_log.csv");
    write_report(outcome.report, *out_dir / "report.csv");
    std::ofstream(*out_dir / "config.resolved") << render_config(cfg);
  }
  return outcome;
}

std::size_t AblationGrid::point_count() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

AblationGrid parse_grid(std::string_view text, const std::string& origin) {
  AblationGrid grid;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'keys = values'");
    const auto lhs = trim(line.substr(0, eq));
    const auto rhs = trim(line.substr(eq + 1));
    if (lhs == "seeds") {
      for (const auto& s : split_on(rhs, '|')) grid.seeds.push_back(to_u64("seeds", s));
      continue;
    }
    GridAxis axis;
    for (const auto& k : split_on(lhs, ',')) {
      const std::string key = canonical_key(k);
      if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
        throw ConfigError(where + "unknown config key '" + k + "'");
      }
      axis.keys.push_back(key);
    }
    for (const auto& tuple : split_on(rhs, '|')) {
      auto values = split_on(tuple, ',');
      if (values.size() != axis.keys.size()) {
        throw ConfigError(where + "tuple '" + tuple + "' has " + std::to_string(values.size()) +
                          " values for " + std::to_string(axis.keys.size()) + " keys");
      }
      axis.values.push_back(std::move(values));
    }
    grid.axes.push_back(std::move(axis));
  }
  return grid;
}

AblationGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str(), path.string());
}

ExperimentConfig grid_point_config(const ExperimentConfig& base, const AblationGrid& grid,
                                   std::size_t point) {
  if (point >= grid.point_count()) throw std::out_of_range("grid point out of range");
  ExperimentConfig cfg = base;
  std::size_t rest = point;
  for (std::size_t a = grid.axes.size(); a-- > 0;) {
    const auto& axis = grid.axes[a];
    const std::size_t idx = rest % axis.values.size();
    rest /= axis.values.size();
    for (std::size_t k = 0; k < axis.keys.size(); ++k) set_config_value(cfg, axis.keys[k], axis.values[idx][k]);
  }
  cfg.train.validate();
  return cfg;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                      const TimeSeriesDataset& data, std::size_t jobs,
                                      const std::optional<std::filesystem::path>& out_dir) {
  const std::vector<std::uint64_t> seeds =
      grid.seeds.empty() ? std::vector<std::uint64_t>{base.train.seed} : grid.seeds;
  const std::size_t points = grid.point_count();
  const std::size_t tasks = points * seeds.size();
  std::vector<AblationRow> results(tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t point = t / seeds.size();
      const std::uint64_t seed = seeds[t % seeds.size()];
      AblationRow& row = results[t];
      row.point = point;
      row.seed = seed;
      try {
        ExperimentConfig cfg = grid_point_config(base, grid, point);
        cfg.train.seed = seed;
        row.weights = cfg.train.weights;
        std::optional<std::filesystem::path> dir;
        if (out_dir) {
          dir = *out_dir / ("point" + std::to_string(point) + "_seed" + std::to_string(seed));
        }
        const RunOutcome outcome = run_experiment(cfg, data, dir);
        row.mean_error_pct = outcome.report.mean_error_pct;
        row.ci90_width_pct = outcome.report.ci90_width_pct;
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
        std::replace(row.status.begin(), row.status.end(), ',', ';');
        std::replace(row.status.begin(), row.status.end(), '\n', ' ');
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, tasks));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<AblationRow> rows;
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<double> means;
    std::vector<double> widths;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const AblationRow& r = results[p * seeds.size() + s];
      rows.push_back(r);
      if (r.status == "ok") {
        means.push_back(r.mean_error_pct);
        widths.push_back(r.ci90_width_pct);
      }
    }
    if (seeds.size() > 1) {
      AblationRow m;
      m.point = p;
      m.weights = results[p * seeds.size()].weights;
      m.seed = std::nullopt;
      if (means.empty()) {
        m.status = "failed: no successful seeds";
      } else {
        m.mean_error_pct = median(means);
        m.ci90_width_pct = median(widths);
      }
      rows.push_back(m);
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "point,gamma_id,gamma_fwd,gamma_bwd,gamma_con,gamma_tc,seed,mean_error_pct,ci90_width_pct,status\n";
  for (const auto& r : rows) {
    out << r.point << ',' << fmt(r.weights.gamma_id) << ',' << fmt(r.weights.gamma_fwd) << ','
        << fmt(r.weights.gamma_bwd) << ',' << fmt(r.weights.gamma_con) << ','
        << fmt(r.weights.gamma_tc) << ',' << (r.seed ? std::to_string(*r.seed) : "median") << ','
        << fmt(r.mean_error_pct) << ',' << fmt(r.ci90_width_pct) << ',' << r.status << '\n';
  }
}

}  // namespace tckae
