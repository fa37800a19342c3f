#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "noether/conservation.hpp"
#include "output.hpp"

using namespace noether;
using namespace noether::app;

namespace {

const std::string kConfigs = std::string(NOETHER_SOURCE_DIR) + "/configs/";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return j;
  ADD_FAILURE() << "no column " << name;
  return 0;
}

std::string config_error_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

const char* kMinimal = R"(
[architecture]
dims = [3, 1]
activation = "linear"
[loss]
kind = "potential"
potential = "radial_quartic"
[initial_state]
w = [0.5, 0.5, 0.5]
)";

class OutDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           (std::string("noether_app_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string write_config(const std::string& text) const {
    std::filesystem::create_directories(dir_);
    const auto p = dir_ / "config.toml";
    std::ofstream(p) << text;
    return p.string();
  }

  int dispatch_quiet(const std::string& cmd, const std::string& cfg, std::string* out_text = nullptr,
                     std::string* err_text = nullptr, std::optional<std::uint64_t> seed = std::nullopt) const {
    std::ostringstream out, err;
    const int code = dispatch(cmd, cfg, (dir_ / "out").string(), seed, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
  }

  std::filesystem::path out() const { return dir_ / "out"; }

  std::filesystem::path dir_;
};

}  // namespace

TEST(Format, SeventeenSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(format_number(1.5), "1.5");
  EXPECT_EQ(format_number(-2.0), "-2");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -1e-17}) EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Format, CsvQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Format, CsvAndJsonlLayout) {
  Trajectory<double> traj;
  MonitorRecord<double> r;
  r.step = 0;
  r.t = 0.0;
  r.loss = 2.5;
  r.quantities.emplace_back("gap,1", 0.25);
  r.quantities.emplace_back("B", Matrix<double>{{3.0, 0.0}, {0.0, 4.0}});
  traj.records.push_back(r);
  std::ostringstream csv, jsonl;
  write_csv(csv, traj);
  EXPECT_EQ(csv.str(), "step,t,loss,\"gap,1\",B\r\n0,0,2.5,0.25,5\r\n");
  write_jsonl(jsonl, traj);
  const auto j = nlohmann::json::parse(jsonl.str());
  EXPECT_EQ(j["quantities"]["B"]["data"][1][1], 4.0);
  EXPECT_EQ(j["quantities"]["B"]["frobenius"], 5.0);

  traj.records[0].quantities = {{"big", Matrix<double>(Matrix<double>::Zero(65, 65))}};
  traj.truncated = true;
  traj.truncation_step = 7;
  std::ostringstream big;
  write_jsonl(big, traj);
  std::istringstream lines(big.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_FALSE(nlohmann::json::parse(first)["quantities"]["big"].contains("data"));
  EXPECT_EQ(nlohmann::json::parse(second)["truncation_step"], 7);
}

TEST(Format, SvgHasTwoSeries) {
  const std::string svg = svg_two_axis("a & b", "t", {0, 1, 2}, {"loss", {3, 2, 1}}, {"gap", {0, 0, 0}});
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("version=\"1.1\""), std::string::npos);
  EXPECT_NE(svg.find("a &amp; b"), std::string::npos);
  std::size_t paths = 0;
  for (std::size_t at = svg.find("<path"); at != std::string::npos; at = svg.find("<path", at + 1)) ++paths;
  EXPECT_EQ(paths, 2u);
}

TEST(Config, MinimalDefaults) {
  const Config cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.dynamics.kind, "gf");
  EXPECT_EQ(cfg.dynamics.steps, 0u);
  EXPECT_EQ(cfg.loss, "potential");
  EXPECT_EQ(cfg.arch.dims, (std::vector<Index>{3, 1}));
  EXPECT_EQ(*cfg.w0, Vector<double>({{0.5, 0.5, 0.5}}));
}

TEST(Config, ErrorsCarryFieldPaths) {
  EXPECT_EQ(config_error_path(""), "architecture");
  EXPECT_EQ(config_error_path("[architecture]\ndims = [3, 0, 1]"), "architecture.dims[1]");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[dynamics]\nsteps = -1"), "dynamics.steps");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[dynamics]\neta = \"fast\""), "dynamics.eta");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[dynamics]\nkind = \"sgd\""), "dynamics.kind");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[run]\ncolour = 1"), "run.colour");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[extras]\na = 1"), "extras");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[[generators]]\nfamily = \"scaling\""),
            "generators[0].family");
  EXPECT_EQ(config_error_path(std::string(kMinimal) + "[[monitors]]\nkind = \"hamiltonian\"\n[[monitors]]\nkind = \"x\""),
            "monitors[1].kind");
  EXPECT_EQ(config_error_path("[architecture]\ndims = [2, 1]\nactivation = \"tanh\""), "architecture.activation");
  EXPECT_EQ(config_error_path("[architecture]\ndims = [2, 1]\n[loss]\nkind = \"nll\""), "loss.kind");
  EXPECT_EQ(config_error_path("[architecture\n"), "<string>");
}

TEST(Config, BuildersReportPaths) {
  Config cfg = parse_config(kMinimal);
  cfg.w0 = Vector<double>::Ones(2);
  try {
    build_network(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "initial_state.w");
  }
  cfg = parse_config(std::string(kMinimal) + "[[monitors]]\nkind = \"hamiltonian\"");
  try {
    build_monitors(cfg, build_network(cfg));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "monitors[0].kind");
  }
  cfg = parse_config("[architecture]\ndims = [3, 5, 1]\n[initial_state]\ninit = \"unbiased_pairs\"\n[loss]\nkind=\"potential\"");
  EXPECT_THROW(build_network(cfg), ConfigError);
}

TEST(Config, SeedOverrideReseedsDerivedSeeds) {
  const std::string text = "[run]\nseed = 4\n[architecture]\ndims = [3, 4, 1]\n[dataset]\nkind = \"sphere\"\nn = 5\n";
  const Config a = parse_config(text);
  EXPECT_EQ(a.init_seed, 4u);
  EXPECT_EQ(a.dataset.seed, 4u);
  const Config b = parse_config(text, "<string>", 9);
  EXPECT_EQ(b.seed, 9u);
  EXPECT_EQ(b.init_seed, 9u);
  EXPECT_EQ(b.dataset.seed, 9u);
  EXPECT_NE(build_network(a).flatten(), build_network(b).flatten());
}

TEST_F(OutDir, EmptyStepsGivesSingleRow) {
  const std::string cfg = write_config(std::string(kMinimal) + "[[monitors]]\nkind = \"total_abs_gap\"\n");
  ASSERT_EQ(dispatch_quiet("run", cfg), kExitOk);
  const auto rows = read_csv(out() / "trajectory.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"step", "t", "loss", "total_abs_gap"}));
  EXPECT_EQ(rows[1][2], "0.0625");
}

TEST_F(OutDir, RotationConfigStartsAtKnownAngularMomentum) {
  ASSERT_EQ(dispatch_quiet("run", kConfigs + "rot_nd.toml"), kExitOk);
  const auto rows = read_csv(out() / "trajectory.csv");
  const auto& h = rows[0];
  EXPECT_EQ(rows[1][column(h, "L_x")], "0");
  EXPECT_EQ(rows[1][column(h, "L_y")], "1.5");
  EXPECT_EQ(rows[1][column(h, "L_z")], "-1.5");
  EXPECT_TRUE(std::filesystem::exists(out() / "plot_L_y.svg"));
  EXPECT_TRUE(std::filesystem::exists(out() / "trajectory.jsonl"));
  const auto meta = nlohmann::json::parse(slurp(out() / "run.json"));
  EXPECT_EQ(meta["truncated"], false);
}

TEST_F(OutDir, DivergedRunExitsThreeWithPartialLog) {
  const std::string cfg = write_config(
      "[architecture]\ndims = [3, 1]\nactivation = \"linear\"\n"
      "[initial_state]\nw = [2.0, 2.0, 2.0]\n"
      "[loss]\nkind = \"potential\"\npotential = \"radial_quartic\"\n"
      "[dynamics]\nkind = \"gf\"\neta = 1.0\nsteps = 50\n");
  std::string text;
  ASSERT_EQ(dispatch_quiet("run", cfg, &text), kExitDiverged);
  EXPECT_NE(text.find("truncated at step"), std::string::npos);
  const auto meta = nlohmann::json::parse(slurp(out() / "run.json"));
  EXPECT_EQ(meta["truncated"], true);
  EXPECT_EQ(read_csv(out() / "trajectory.csv").size(), meta["samples"].get<std::size_t>() + 1);
}

TEST_F(OutDir, ConfigErrorsExitTwo) {
  std::string err;
  const std::string cfg = write_config(std::string(kMinimal) + "[[generators]]\nfamily = \"scaling\"\n");
  EXPECT_EQ(dispatch_quiet("check", cfg, nullptr, &err), kExitConfig);
  EXPECT_NE(err.find("generators[0].family"), std::string::npos);
  EXPECT_EQ(dispatch_quiet("run", (dir_ / "missing.toml").string()), kExitConfig);
  EXPECT_EQ(dispatch_quiet("fly", cfg), kExitConfig);
}

TEST_F(OutDir, CheckReluHomogeneityPasses) {
  std::string text;
  EXPECT_EQ(dispatch_quiet("check", kConfigs + "check_relu_gf.toml", &text), kExitOk) << text;
  const auto report = nlohmann::json::parse(slurp(out() / "check.json"));
  EXPECT_EQ(report["failures"], 0);
  EXPECT_EQ(report["generators"].size(), 32u);
}

TEST_F(OutDir, CheckLinearGeneratorsAndTraceForm) {
  std::string text;
  EXPECT_EQ(dispatch_quiet("check", kConfigs + "check_linear.toml", &text), kExitOk) << text;
  const auto report = nlohmann::json::parse(slurp(out() / "check.json"));
  ASSERT_EQ(report["generators"].size(), 40u);
  for (const auto& g : report["generators"]) EXPECT_EQ(g["trace_form"], "PASS");
}

TEST_F(OutDir, CheckRotationNegativeControlBlamesData) {
  std::string text;
  EXPECT_EQ(dispatch_quiet("check", kConfigs + "check_rotation_negative.toml", &text), kExitFail);
  const auto report = nlohmann::json::parse(slurp(out() / "check.json"));
  for (const auto& g : report["generators"]) {
    EXPECT_EQ(g["verdict"], "FAIL");
    EXPECT_NE(g["reasons"][0].get<std::string>().find("dataset"), std::string::npos);
  }
  EXPECT_EQ(dispatch_quiet("check", kConfigs + "check_rotation.toml", &text), kExitOk) << text;
}

TEST_F(OutDir, NtkRejectsVectorOutput) {
  std::string err;
  const std::string cfg = write_config("[architecture]\ndims = [3, 4, 2]\n[dataset]\nkind = \"cross_polytope\"\ntarget = [1.0, 2.0]\n");
  EXPECT_EQ(dispatch_quiet("ntk", cfg, nullptr, &err), kExitConfig);
  EXPECT_NE(err.find("architecture.dims"), std::string::npos);
}

TEST_F(OutDir, NtkZeroPotentialGivesZeroStats) {
  const std::string cfg = write_config(
      "[architecture]\ndims = [3, 8, 1]\n[initial_state]\ninit = \"unbiased_pairs\"\n"
      "[loss]\nkind = \"potential\"\npotential = \"zero\"\n"
      "[dynamics]\nkind = \"nd\"\neta = 1e-4\nsteps = 20\n[ntk]\nwidths = [8]\n");
  ASSERT_EQ(dispatch_quiet("ntk", cfg), kExitOk);
  const auto report = nlohmann::json::parse(slurp(out() / "ntk.json"));
  const auto& row = report["widths"][0];
  for (const char* key : {"loss0", "sup_v_norm", "norm_bound", "sup_v_avg", "avg_bound", "weight_movement"})
    EXPECT_EQ(row[key], 0.0) << key;
  EXPECT_TRUE(row["kernel_divergence"].is_null());
}

TEST_F(OutDir, NtkSweepPassesAndIsReproducible) {
  std::string text;
  ASSERT_EQ(dispatch_quiet("ntk", kConfigs + "ntk_sweep.toml", &text), kExitOk) << text;
  const std::string first = slurp(out() / "ntk.json");
  const std::string first_csv = slurp(out() / "ntk.csv");
  ASSERT_EQ(dispatch_quiet("ntk", kConfigs + "ntk_sweep.toml"), kExitOk);
  EXPECT_EQ(slurp(out() / "ntk.json"), first);
  EXPECT_EQ(slurp(out() / "ntk.csv"), first_csv);
  const auto report = nlohmann::json::parse(first);
  EXPECT_EQ(report["trends"]["weight_movement_decreasing"], true);
  EXPECT_EQ(report["trends"]["kernel_divergence_decreasing"], true);
}

TEST_F(OutDir, Figure1aConfigNormGapDriftIsSmall) {
  ASSERT_EQ(dispatch_quiet("run", kConfigs + "fig1a_gf.toml"), kExitOk);
  const auto rows = read_csv(out() / "trajectory.csv");
  const auto& h = rows[0];
  const double loss_scale = std::stod(rows[1][column(h, "loss")]);
  for (const char* name : {"norm_gap_1", "norm_gap_2", "norm_gap_3", "norm_gap_4"}) {
    const std::size_t c = column(h, name);
    const double g0 = std::stod(rows[1][c]);
    double drift = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) drift = std::max(drift, std::abs(std::stod(rows[r][c]) - g0));
    EXPECT_LE(drift, 0.01 * loss_scale) << name;
  }
}

TEST_F(OutDir, RunIsBitReproducible) {
  ASSERT_EQ(dispatch_quiet("run", kConfigs + "rot_nd.toml"), kExitOk);
  const std::string a = slurp(out() / "trajectory.jsonl");
  ASSERT_EQ(dispatch_quiet("run", kConfigs + "rot_nd.toml"), kExitOk);
  EXPECT_EQ(slurp(out() / "trajectory.jsonl"), a);
}
