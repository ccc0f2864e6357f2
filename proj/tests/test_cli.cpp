#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "subrad/commands.hpp"

namespace fs = std::filesystem;
using namespace subrad;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("subrad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  Result cli(const std::string& args) {
    const fs::path o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = std::string(SUBRAD_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  ADD_FAILURE() << "missing column " << name;
  return 0;
}

const char* kReference = R"({"n_atoms": 10, "g_over_2pi_hz": 24000, "delta_ratio": 30, "field": {"kind": "fock", "n": 0}})";

}  // namespace

TEST_F(CliTest, ProtocolReferenceRun) {
  const fs::path cfg = write_config("c.json", kReference);
  const Result r = cli("protocol --config " + cfg.string() + " --out " + (dir_ / "out").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(slurp(dir_ / "out" / "report.json"));
  EXPECT_NEAR(doc.at("results").at("t_m").get<double>(), 22e-6, 0.5e-6);
  EXPECT_NEAR(doc.at("display").at("t_m_us").get<double>(), 22.0, 0.5);
  EXPECT_GE(doc.at("results").at("fidelity_subradiant").get<double>(), 0.97);
  const auto traj = read_csv(dir_ / "out" / "trajectory.csv");
  ASSERT_EQ(traj.size(), 401u);
  EXPECT_EQ(traj[0][0], "t_seconds");
}

TEST_F(CliTest, SingleAtomHasNoSubradiantSector) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 1, "g_over_2pi_hz": 24000, "delta_ratio": 30})");
  const Result r = cli("protocol --config " + cfg.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no subradiant sector"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedConfigIsAnError) {
  const fs::path cfg = write_config("c.json", "{ not json");
  const Result r = cli("protocol --config " + cfg.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_EQ(cli("protocol --config " + (dir_ / "missing.json").string()).code != 0, true);
  EXPECT_NE(cli("nonsense").code, 0);
}

TEST_F(CliTest, ValidityRefusalAndOverride) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 6, "g_over_2pi_hz": 24000, "delta_ratio": 5})");
  const Result refused = cli("protocol --config " + cfg.string() + " --out " + (dir_ / "a").string());
  EXPECT_EQ(refused.code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "a" / "report.json"));
  const Result forced = cli("protocol --force --config " + cfg.string() + " --out " + (dir_ / "b").string());
  EXPECT_EQ(forced.code, 0) << forced.err;
  const json doc = json::parse(slurp(dir_ / "b" / "report.json"));
  EXPECT_EQ(doc.at("results").at("validity_class").get<std::string>(), "invalid");
}

TEST_F(CliTest, ReportsAreByteIdentical) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 4, "g_over_2pi_hz": 24000, "delta_ratio": 40,
      "field": {"kind": "thermal", "mean_n": 0.4}, "protocol": {"mixture": "sampled", "samples": 20}})");
  ASSERT_EQ(cli("protocol --seed 5 --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(cli("protocol --seed 5 --jobs 3 --config " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "report.json"), slurp(dir_ / "b" / "report.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "trajectory.csv"), slurp(dir_ / "b" / "trajectory.csv"));
  const json doc = json::parse(slurp(dir_ / "a" / "report.json"));
  EXPECT_EQ(doc.at("config").at("seed").get<int>(), 5);
  // round trip of the emitted document
  EXPECT_EQ(config_to_json(config_from_json(doc.at("config"))), doc.at("config"));
  EXPECT_EQ(report_to_json(report_from_json(doc.at("results"))), doc.at("results"));
}

TEST_F(CliTest, SweepOverDetuning) {
  const fs::path cfg = write_config("c.json", kReference);
  const Result r = cli("sweep --axis delta_ratio --grid 30,100,300 --jobs 2 --config " + cfg.string() + " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir_ / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  const std::size_t fid = column(rows[0], "fidelity"), val = column(rows[0], "value");
  EXPECT_EQ(rows[1][val], "30");
  EXPECT_EQ(rows[2][val], "100");
  EXPECT_EQ(rows[3][val], "300");
  const double f30 = std::stod(rows[1][fid]), f100 = std::stod(rows[2][fid]), f300 = std::stod(rows[3][fid]);
  // leaving the edge of the dispersive window helps; beyond that the residual
  // loss is an O(N g^2/Delta^2) ripple and need not shrink point by point
  EXPECT_GT(f100, f30);
  EXPECT_GT(f300, f30);
  EXPECT_LE(1.0 - f100, 40.0 / (100.0 * 100.0));
  EXPECT_LE(1.0 - f300, 40.0 / (300.0 * 300.0));
}

TEST_F(CliTest, SweepValidityFlagFlips) {
  const fs::path cfg = write_config("c.json", kReference);
  ASSERT_EQ(cli("sweep --axis mean_n --grid 0,1,4,8 --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto rows = read_csv(dir_ / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  const std::size_t flag = column(rows[0], "validity_flag");
  EXPECT_EQ(rows[1][flag], "marginal");
  EXPECT_EQ(rows[3][flag], "marginal");
  EXPECT_EQ(rows[4][flag], "invalid");
}

TEST_F(CliTest, SweepOverAtomNumberFollowsTimingFormula) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 10, "g_over_2pi_hz": 24000, "delta_ratio": 100})");
  ASSERT_EQ(cli("sweep --axis N --grid 2,3,4,5,6,7,8,9,10,11,12 --jobs 3 --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto rows = read_csv(dir_ / "sweep.csv");
  ASSERT_EQ(rows.size(), 12u);
  const std::size_t tm = column(rows[0], "t_m_s"), na = column(rows[0], "n_atoms"), err = column(rows[0], "error");
  const double g = kTwoPi * 24e3;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int n = std::stoi(rows[i][na]);
    EXPECT_EQ(n, static_cast<int>(i) + 1);
    const double alpha = n * g * g / (2.0 * 100.0 * g);
    EXPECT_NEAR(std::stod(rows[i][tm]), std::asin(std::sqrt(n / (4.0 * n - 4.0))) / alpha, 1e-15);
    EXPECT_TRUE(rows[i].size() <= err || rows[i][err].empty());
  }
}

TEST_F(CliTest, SweepRecordsPointFailures) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 3, "g_over_2pi_hz": 24000, "delta_ratio": 100})");
  ASSERT_EQ(cli("sweep --axis N --grid 1,2 --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto rows = read_csv(dir_ / "sweep.csv");
  ASSERT_EQ(rows.size(), 3u);
  const std::size_t err = column(rows[0], "error");
  EXPECT_NE(rows[1][err].find("no subradiant sector"), std::string::npos);
  EXPECT_TRUE(rows[2].size() <= err || rows[2][err].empty());
}

TEST_F(CliTest, SweepOrderIndependentOfJobs) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 4, "g_over_2pi_hz": 24000, "delta_ratio": 50,
      "sweep": {"axis": "mean_n", "values": [0, 1, 2, 3]}})");
  ASSERT_EQ(cli("sweep --jobs 1 --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(cli("sweep --jobs 4 --config " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "sweep.csv"), slurp(dir_ / "b" / "sweep.csv"));
}

TEST_F(CliTest, SpectrumSplittingAtLargeDetuning) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 10, "g_over_2pi_hz": 24000, "delta_ratio": 300, "spectrum": {"block": 1}})");
  ASSERT_EQ(cli("spectrum --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const json s = json::parse(slurp(dir_ / "spectrum.json"));
  EXPECT_LE(s.at("splitting_rel_error").get<double>(), 1e-3);
  const auto rows = read_csv(dir_ / "spectrum.csv");
  ASSERT_EQ(rows.size(), 12u);
  const std::size_t lvl = column(rows[0], "pt_level");
  int sym = 0, sub = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    sym += rows[i][lvl] == "symmetric";
    sub += rows[i][lvl] == "subradiant";
  }
  EXPECT_EQ(sym, 1);
  EXPECT_EQ(sub, 9);
}

TEST_F(CliTest, SpectrumJaynesCummingsDoublet) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 1, "g_over_2pi_hz": 1000, "omega_a_over_2pi_hz": 1.0e6,
      "omega_c_over_2pi_hz": 1.002e6, "spectrum": {"block": 1}})");
  ASSERT_EQ(cli("spectrum --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto rows = read_csv(dir_ / "spectrum.csv");
  ASSERT_EQ(rows.size(), 3u);
  const std::size_t ev = column(rows[0], "eigenvalue_rad_s");
  const double g = kTwoPi * 1e3, d = kTwoPi * 2e3, wc = kTwoPi * 1.002e6;
  const double root = std::sqrt(d * d / 4 + g * g);
  EXPECT_NEAR(std::stod(rows[1][ev]), wc / 2 - root, 1e-6);
  EXPECT_NEAR(std::stod(rows[2][ev]), wc / 2 + root, 1e-6);
}

TEST_F(CliTest, SpectrumWithoutCouplingIsDegenerate) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 6, "g_over_2pi_hz": 24000, "delta_ratio": 30, "spectrum": {"block": 2, "g_zero": true}})");
  ASSERT_EQ(cli("spectrum --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const json s = json::parse(slurp(dir_ / "spectrum.json"));
  EXPECT_EQ(s.at("sector_spread_rad_s").get<double>(), 0.0);
  const auto rows = read_csv(dir_ / "spectrum.csv");
  const std::size_t sh = column(rows[0], "shift_rad_s"), k = column(rows[0], "atomic_excitation");
  int members = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i][k] == "1") {
      ++members;
      EXPECT_EQ(std::stod(rows[i][sh]), 0.0);
    }
  EXPECT_EQ(members, 6);
}

TEST_F(CliTest, SpectrumBlockOutOfRange) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 2, "g_over_2pi_hz": 24000, "delta_ratio": 30, "spectrum": {"block": -1}})");
  EXPECT_EQ(cli("spectrum --config " + cfg.string() + " --out " + dir_.string()).code, 1);
}

TEST_F(CliTest, EvolveWritesTrajectoryAndAmplitudes) {
  const fs::path cfg = write_config("c.json", R"({"n_atoms": 3, "g_over_2pi_hz": 24000, "delta_ratio": 30, "evolve": {"points": 25}})");
  ASSERT_EQ(cli("evolve --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto traj = read_csv(dir_ / "trajectory.csv");
  ASSERT_EQ(traj.size(), 26u);
  const auto amps = read_csv(dir_ / "amplitudes.csv");
  ASSERT_GE(amps.size(), 2u);
  EXPECT_EQ(amps[0], (std::vector<std::string>{"index", "atoms", "photons", "re", "im"}));
  double norm = 0.0;
  for (std::size_t i = 1; i < amps.size(); ++i) norm += std::pow(std::stod(amps[i][3]), 2) + std::pow(std::stod(amps[i][4]), 2);
  EXPECT_NEAR(norm, 1.0, 1e-10);
}

TEST_F(CliTest, DimensionCapFromEnvironment) {
  const fs::path cfg = write_config("c.json", kReference);
  const std::string cmd = "SUBRAD_MAX_DIM=1000 " + std::string(SUBRAD_CLI_PATH) + " protocol --config " + cfg.string() +
                          " --out " + dir_.string() + " >/dev/null 2>" + (dir_ / "e.txt").string();
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 1);
  EXPECT_NE(slurp(dir_ / "e.txt").find("SUBRAD_MAX_DIM"), std::string::npos);
}
