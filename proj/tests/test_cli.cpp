#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tckae/experiment.hpp"

using namespace tckae;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(TCKAE_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 512> buf;
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("tckae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "small.cfg") << "run.name = small\n"
                                         "dataset.n = 100\n"
                                         "dataset.lift_dim = 6\n"
                                         "split.n_train = 32\n"
                                         "model.n_hidden = 8\n"
                                         "model.n_latent = 4\n"
                                         "train.epochs = 2\n"
                                         "train.batch_size = 8\n"
                                         "train.gamma_fwd = 0.5\n"
                                         "train.k_max_fwd = 4\n"
                                         "eval.n_inits = 5\n";
  }
  void TearDown() override { fs::remove_all(root); }

  std::string out_flag() const { return "--out " + root.string(); }

  fs::path root;
};

fs::path preset(const std::string& name) { return fs::path(TCKAE_SOURCE_DIR) / "configs" / "pendulum" / name; }

}  // namespace

TEST_F(Cli, GenDataDefaultPendulum) {
  std::ofstream(root / "default.cfg") << "run.name = pend\n";
  const Result r = run("gen-data --config " + (root / "default.cfg").string() + " " + out_flag());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("64x2200"), std::string::npos) << r.out;
  const TimeSeriesDataset d = load_dataset(root / "pend" / "dataset.tckd");
  EXPECT_EQ(d.x.rows(), 64u);
  EXPECT_EQ(d.x.cols(), 2200u);
  EXPECT_FALSE(d.clean_reference.has_value());

  const std::string first = slurp(root / "pend" / "dataset.tckd");
  ASSERT_EQ(run("gen-data --config " + (root / "default.cfg").string() + " " + out_flag()).code, 0);
  EXPECT_EQ(slurp(root / "pend" / "dataset.tckd"), first);
}

TEST_F(Cli, GenDataNoisyKeepsReference) {
  const Result r = run("gen-data --config " + (root / "small.cfg").string() + " --set dataset.snr_db=30 " +
                       out_flag());
  ASSERT_EQ(r.code, 0) << r.out;
  const TimeSeriesDataset d = load_dataset(root / "small" / "dataset.tckd");
  EXPECT_TRUE(d.clean_reference.has_value());
  EXPECT_EQ(d.noise_snr_db, 30.0);
}

TEST_F(Cli, OutputRootFromEnvironment) {
  const std::string cmd = "TCKAE_OUT=" + root.string() + " " + std::string(TCKAE_CLI) + " gen-data --config " +
                          (root / "small.cfg").string() + " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(root / "small" / "dataset.tckd"));
}

TEST_F(Cli, TrainEvalSpectrum) {
  const std::string cfg = (root / "small.cfg").string();
  const Result t = run("train --config " + cfg + " " + out_flag() + " --eval --seed 5");
  ASSERT_EQ(t.code, 0) << t.out;
  const fs::path dir = root / "small";
  for (const char* f : {"model.tckm", "train_log.csv", "config.resolved", "report.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_NE(t.out.find("mean_pct="), std::string::npos) << t.out;
  EXPECT_EQ(load_checkpoint(dir / "model.tckm").seed, 5u);
  const std::string report = slurp(dir / "report.csv");

  // eval from the checkpoint reproduces the report written by train --eval
  fs::rename(dir / "report.csv", root / "train_report.csv");
  const Result e = run("eval --checkpoint " + (dir / "model.tckm").string() + " --config " + cfg + " " + out_flag());
  ASSERT_EQ(e.code, 0) << e.out;
  EXPECT_NE(e.out.find("width_pct="), std::string::npos);
  EXPECT_EQ(slurp(dir / "report.csv"), report);

  const Result s = run("spectrum --checkpoint " + (dir / "model.tckm").string() + " --dt 0.1");
  ASSERT_EQ(s.code, 0) << s.out;
  std::size_t lines = 0;
  for (char c : s.out) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 4u);  // header + one row per latent mode
  EXPECT_EQ(s.out.rfind("mode,real,imag,magnitude,phase,frequency_hz", 0), 0u);
}

TEST_F(Cli, EvalWithDatasetFile) {
  const std::string cfg = (root / "small.cfg").string();
  ASSERT_EQ(run("gen-data --config " + cfg + " " + out_flag()).code, 0);
  const std::string data = (root / "small" / "dataset.tckd").string();
  ASSERT_EQ(run("train --config " + cfg + " --data " + data + " " + out_flag()).code, 0);
  const Result e = run("eval --checkpoint " + (root / "small" / "model.tckm").string() + " --data " + data +
                       " --n-train 32 --n-inits 3 " + out_flag());
  EXPECT_EQ(e.code, 0) << e.out;
  EXPECT_EQ(read_report(root / "run" / "report.csv").n_inits, 3u);
}

TEST_F(Cli, SpectrumOfIdentityOperator) {
  KoopmanAutoencoder m = init_model({3, 4, 3}, 0);
  m.k_fwd = Matrix::identity(3);
  save_checkpoint(m, root / "id.tckm");
  const Result s = run("spectrum --checkpoint " + (root / "id.tckm").string() + " --dt 0.5");
  ASSERT_EQ(s.code, 0) << s.out;
  std::istringstream in(s.out);
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",1,0,"), std::string::npos) << line;  // magnitude 1, phase 0
  }
  EXPECT_EQ(rows, 3u);
}

TEST_F(Cli, ErrorsGiveNonzeroExit) {
  EXPECT_NE(run("eval --checkpoint " + (root / "missing.tckm").string() + " --config " +
                (root / "small.cfg").string()).code,
            0);
  std::ofstream(root / "bad.cfg") << "train.not_a_key = 1\n";
  const Result bad = run("train --config " + (root / "bad.cfg").string() + " " + out_flag());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("train.not_a_key"), std::string::npos) << bad.out;
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);

  // a checkpoint whose input width does not match the dataset
  save_checkpoint(init_model({3, 4, 2}, 0), root / "narrow.tckm");
  const Result mismatch = run("eval --checkpoint " + (root / "narrow.tckm").string() + " --config " +
                              (root / "small.cfg").string() + " " + out_flag());
  EXPECT_EQ(mismatch.code, 1);
  EXPECT_NE(mismatch.out.find("features"), std::string::npos) << mismatch.out;
}

TEST_F(Cli, AblateWritesTable) {
  std::ofstream(root / "g.grid") << "train.gamma_tc = 0 | 1e-1\n";
  const Result r = run("ablate --config " + (root / "small.cfg").string() + " --grid " + (root / "g.grid").string() +
                       " --jobs 2 " + out_flag());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream in(slurp(root / "small" / "ablation.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2u);
  EXPECT_TRUE(fs::exists(root / "small" / "point1_seed0" / "report.csv"));
}

TEST(Presets, AllPendulumPresetsParse) {
  std::size_t count = 0;
  for (const char* method : {"dae", "ckae", "tckae"})
    for (const char* n : {"32", "50", "90"})
      for (const char* noise : {"clean", "40db", "30db"}) {
        const std::string name = std::string(method) + "_n" + n + "_" + noise + ".cfg";
        SCOPED_TRACE(name);
        const ExperimentConfig cfg = load_config(preset(name));
        EXPECT_EQ(cfg.n_train, std::stoul(n));
        EXPECT_EQ(cfg.train.epochs, 600u);
        EXPECT_EQ(cfg.dataset.lift_dim, 64u);
        EXPECT_EQ(cfg.dataset.n, 2200u);
        const std::string nz = noise;
        EXPECT_EQ(cfg.dataset.snr_db, nz == "clean" ? kNoNoise : nz == "40db" ? 40.0 : 30.0);
        const LossWeights& w = cfg.train.weights;
        EXPECT_EQ(w.gamma_id, 1.0);
        if (std::string(method) == "dae") {
          EXPECT_EQ(w.gamma_bwd, 0.0);
          EXPECT_EQ(w.gamma_con, 0.0);
          EXPECT_EQ(w.gamma_tc, 0.0);
        } else if (std::string(method) == "ckae") {
          EXPECT_GT(w.gamma_bwd, 0.0);
          EXPECT_GT(w.gamma_con, 0.0);
          EXPECT_EQ(w.gamma_tc, 0.0);
        } else {
          EXPECT_GT(w.gamma_tc, 0.0);
        }
        ++count;
      }
  EXPECT_EQ(count, 27u);
}

TEST(Presets, TcKaeThirtyTwoCleanWeights) {
  const LossWeights w = load_config(preset("tckae_n32_clean.cfg")).train.weights;
  EXPECT_EQ(w.gamma_id, 1.0);
  EXPECT_EQ(w.gamma_fwd, 0.5);
  EXPECT_EQ(w.gamma_bwd, 1e-2);
  EXPECT_EQ(w.gamma_con, 1e-1);
  EXPECT_EQ(w.gamma_tc, 1e-1);
}

TEST(Presets, CkaeDiffersFromTcKaeOnlyInConsistencyTerm) {
  for (const char* suffix : {"n32_clean", "n50_40db", "n90_30db"}) {
    SCOPED_TRACE(suffix);
    ExperimentConfig c = load_config(preset(std::string("ckae_") + suffix + ".cfg"));
    ExperimentConfig t = load_config(preset(std::string("tckae_") + suffix + ".cfg"));
    t.train.weights.gamma_tc = 0.0;
    t.train.weights.kappa_max_tc = c.train.weights.kappa_max_tc;
    t.train.e_switch = c.train.e_switch;
    t.name = c.name;
    EXPECT_EQ(render_config(c), render_config(t));
  }
}

TEST(Presets, AblationGridHasFourPoints) {
  const AblationGrid g = load_grid(preset("ablation_n32.grid"));
  EXPECT_EQ(g.point_count(), 4u);
  EXPECT_EQ(g.seeds.size(), 3u);
}
