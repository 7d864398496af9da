// tckae: generate data, train, evaluate, inspect spectra and run ablation grids.
//
//   tckae gen-data --config cfg [--out dir] [--seed n]
//   tckae train    --config cfg [--data file.tckd] [--out dir] [--seed n] [--eval]
//   tckae eval     --checkpoint model.tckm (--config cfg | --data file --n-train n) [--n-inits n]
//   tckae spectrum --checkpoint model.tckm --dt 0.1
//   tckae ablate   --config cfg --grid grid [--jobs n] [--out dir]
//
// Outputs land in <out>/<run.name>/, with <out> defaulting to $TCKAE_OUT, then ./runs.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tckae/experiment.hpp"

namespace fs = std::filesystem;
using namespace tckae;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string data;
  std::string checkpoint;
  std::string grid;
  std::optional<std::size_t> n_train;
  std::optional<std::size_t> n_inits;
  std::size_t jobs = 1;
  double dt = 0.0;
  bool eval_after_train = false;
};

fs::path out_root(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("TCKAE_OUT"); env && *env) return env;
  return "runs";
}

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.n_train) cfg.n_train = *o.n_train;
  if (o.n_inits) cfg.eval.n_inits = *o.n_inits;
  cfg.train.validate();
  return cfg;
}

TimeSeriesDataset dataset_for(const Options& o, const ExperimentConfig& cfg) {
  return o.data.empty() ? build_dataset(cfg.dataset) : load_dataset(o.data);
}

const char* or_none(const std::optional<double>& v, char* buf, std::size_t n) {
  if (!v) return "-";
  std::snprintf(buf, n, "%.4e", *v);
  return buf;
}

int cmd_gen_data(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.seed) cfg.dataset.seed = *o.seed;
  const TimeSeriesDataset data = build_dataset(cfg.dataset);
  const fs::path path = out_root(o) / cfg.name / "dataset.tckd";
  save_dataset(data, path);
  std::printf("%s: %zux%zu dt=%g snr_db=%s\n", path.string().c_str(), data.dim(), data.length(), data.dt,
              data.noise_snr_db ? std::to_string(*data.noise_snr_db).c_str() : "inf");
  return 0;
}

int cmd_train(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.seed) cfg.train.seed = *o.seed;
  const TimeSeriesDataset data = dataset_for(o, cfg);
  const fs::path dir = out_root(o) / cfg.name;
  fs::create_directories(dir);

  const SplitDataset parts = split(data, cfg.n_train);
  TrainOptions options;
  options.checkpoint_dir = dir;
  const std::size_t every = std::max<std::size_t>(1, cfg.train.epochs / 10);
  options.on_epoch = [&](const EpochRecord& r) {
    if ((r.epoch + 1) % every != 0 && r.epoch + 1 != cfg.train.epochs) return;
    char a[32], b[32];
    std::printf("epoch %4zu  lr %.3g  total %.4e  tc %s  fwd %s\n", r.epoch + 1, r.lr, r.total,
                or_none(r.terms.tc, a, sizeof a), or_none(r.terms.fwd, b, sizeof b));
    std::fflush(stdout);
  };
  const TrainResult result =
      train(init_model({data.dim(), cfg.n_hidden, cfg.n_latent}, cfg.train.seed), parts, cfg.train, options);
  result.log.write_csv(dir / "train_log.csv");
  std::ofstream(dir / "config.resolved") << render_config(cfg);
  std::printf("wrote %s\n", (dir / "model.tckm").string().c_str());

  if (o.eval_after_train) {
    const EvalReport report = evaluate(result.model, parts, cfg.eval);
    write_report(report, dir / "report.csv");
    std::printf("%s\n", summary_line(report).c_str());
  }
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.config.empty() && (o.data.empty() || !o.n_train)) {
    throw ConfigError("eval needs --config, or --data together with --n-train");
  }
  const ExperimentConfig cfg = load(o);
  const KoopmanAutoencoder model = load_checkpoint(o.checkpoint);
  const TimeSeriesDataset data = dataset_for(o, cfg);
  if (data.dim() != model.arch.n_in) {
    throw DimensionError("checkpoint expects " + std::to_string(model.arch.n_in) +
                         " features, dataset has " + std::to_string(data.dim()));
  }
  const EvalReport report = evaluate(model, split(data, cfg.n_train), cfg.eval);
  const fs::path path = out_root(o) / cfg.name / "report.csv";
  write_report(report, path);
  std::printf("%s  %s\n", summary_line(report).c_str(), format_summary_cell(report).c_str());
  return 0;
}

int cmd_spectrum(const Options& o) {
  if (!(o.dt > 0.0)) throw ConfigError("--dt must be positive");
  const Spectrum s = spectrum(load_checkpoint(o.checkpoint), o.dt);
  std::printf("mode,real,imag,magnitude,phase,frequency_hz\n");
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    std::printf("%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, s.eigenvalues[i].real(), s.eigenvalues[i].imag(),
                s.magnitudes[i], s.phases[i], s.frequencies_hz[i]);
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  ExperimentConfig cfg = load(o);
  if (o.seed) cfg.train.seed = *o.seed;
  const AblationGrid grid = load_grid(o.grid);
  const TimeSeriesDataset data = dataset_for(o, cfg);
  const fs::path dir = out_root(o) / cfg.name;
  const auto rows = run_ablation(cfg, grid, data, o.jobs, dir);
  write_ablation_csv(rows, dir / "ablation.csv");
  std::printf("%5s %8s %8s %8s %8s %8s %7s %10s %10s  %s\n", "point", "id", "fwd", "bwd", "con", "tc", "seed",
              "mean_pct", "width_pct", "status");
  for (const AblationRow& r : rows) {
    const auto& w = r.weights;
    std::printf("%5zu %8g %8g %8g %8g %8g %7s %10.3f %10.2f  %s\n", r.point, w.gamma_id, w.gamma_fwd,
                w.gamma_bwd, w.gamma_con, w.gamma_tc, r.seed ? std::to_string(*r.seed).c_str() : "median",
                r.mean_error_pct, r.ci90_width_pct, r.status.c_str());
  }
  std::printf("wrote %s\n", (dir / "ablation.csv").string().c_str());
  for (const AblationRow& r : rows)
    if (r.status != "ok") return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporally consistent Koopman autoencoder"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run config (key = value lines)");
    sub->add_option("--out", o.out, "output root (default $TCKAE_OUT, then ./runs)");
    sub->add_option("--set", o.sets, "override one config key, key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen-data", "simulate, lift and optionally corrupt a dataset");
  add_common(gen);
  gen->add_option("--seed", o.seed, "overrides dataset.seed");

  auto* tr = app.add_subcommand("train", "train a model and write its checkpoint and log");
  add_common(tr);
  tr->add_option("--seed", o.seed, "overrides train.seed");
  tr->add_option("--data", o.data, "dataset file; generated from the config when omitted")->check(CLI::ExistingFile);
  tr->add_option("--n-train", o.n_train, "overrides split.n_train");
  tr->add_flag("--eval", o.eval_after_train, "evaluate after training and write report.csv");

  auto* ev = app.add_subcommand("eval", "roll out a checkpoint over the test split");
  add_common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "model.tckm")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", o.data, "dataset file")->check(CLI::ExistingFile);
  ev->add_option("--n-train", o.n_train, "training prefix length to skip");
  ev->add_option("--n-inits", o.n_inits, "number of initial conditions (default 30)");

  auto* sp = app.add_subcommand("spectrum", "eigenvalues of the learned forward operator as CSV");
  sp->add_option("--checkpoint", o.checkpoint, "model.tckm")->required()->check(CLI::ExistingFile);
  sp->add_option("--dt", o.dt, "sampling interval in seconds")->required();

  auto* ab = app.add_subcommand("ablate", "train and evaluate every point of a weight grid");
  add_common(ab);
  ab->add_option("--grid", o.grid, "grid file")->required()->check(CLI::ExistingFile);
  ab->add_option("--seed", o.seed, "overrides train.seed when the grid lists no seeds");
  ab->add_option("--data", o.data, "dataset file; generated from the config when omitted")->check(CLI::ExistingFile);
  ab->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_data(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*sp) return cmd_spectrum(o);
    if (*ab) return cmd_ablate(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
