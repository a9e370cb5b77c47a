#include "homog/cli/run.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace homog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "homog_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "no error";
}

const char* constant_config = R"(
name = "scaled_identity"
[tensor]
preset = "identity"
scale = 2.5
[sweep]
epsilon = [0.25, 0.125, 0.0625]
eigen_epsilon = [0.23529411764705882, 0.12121212121212122, 0.061538461538461542]
[cell]
resolution = 16
[strip]
points_per_period = 8
)";

}  // namespace

// ---------------------------------------------------------------------------
// TOML reader and configuration

TEST(Toml, ScalarsTablesAndArrays) {
  const auto j = parse_toml(R"(# comment
name = "a \"quoted\" name" # trailing
n = 3
x = -1.5e-3
flag = true
[t]
list = [1, 2,
        3]  # multiline
nested = [[0.0, 1.0], [], [2, 3]]
d.e = "dotted"
)");
  EXPECT_EQ(j["name"], "a \"quoted\" name");
  EXPECT_EQ(j["n"], 3);
  EXPECT_DOUBLE_EQ(j["x"].get<Real>(), -1.5e-3);
  EXPECT_EQ(j["flag"], true);
  EXPECT_EQ(j["t"]["list"].size(), 3u);
  EXPECT_EQ(j["t"]["nested"][1].size(), 0u);
  EXPECT_EQ(j["t"]["d"]["e"], "dotted");
}

TEST(Toml, ErrorsCarrySourceAndLine) {
  const auto msg = error_code([] { parse_toml("a = 1\nb = 2\nc = \"open\n", "cfg.toml"); });
  EXPECT_NE(msg.find("cli.ConfigParse"), std::string::npos) << msg;
  EXPECT_NE(msg.find("cfg.toml:3"), std::string::npos) << msg;
  EXPECT_NE(error_code([] { parse_toml("a = 1\na = 2\n"); }).find("cli.ConfigParse"), std::string::npos);
  EXPECT_NE(error_code([] { parse_toml("[t\n"); }).find("<string>:1"), std::string::npos);
}

TEST(Toml, RealsRoundTripExactly) {
  for (Real x : {0.1, 1.0 / 3.0, 1e-300, 12345.0, -2.5e17, 1.0 / 8.25}) {
    const auto j = parse_toml("x = " + cfg::format_real(x));
    EXPECT_TRUE(j["x"].is_number_float());
    EXPECT_EQ(j["x"].get<Real>(), x);
  }
}

TEST(Config, DefaultsAndKeys) {
  const auto c = parse_config(constant_config);
  EXPECT_EQ(c.name, "scaled_identity");
  EXPECT_EQ(c.tensor.scale, 2.5);
  EXPECT_EQ(c.cell_resolution, 16);
  EXPECT_EQ(c.cells_per_period, 4);
  EXPECT_EQ(c.vertices.size(), 4u);
  EXPECT_EQ(c.expansion_epsilon().size(), 3u);
  EXPECT_EQ(c.modes, std::vector<int>{0});
}

TEST(Config, RoundTripIsIdentity) {
  std::vector<std::string> texts{constant_config, R"(
name = "odd \\ name ü"
seed = 99
output_dir = "x/y"
[tensor]
preset = "laminate"
components = 2
phase = [0.1, 0.30000000000000004]
[domain]
vertices = [[0, 0], [1, 0], [0.5, 0.8660254037844386]]
exact_normals = [[0, 1], [], [1, -1]]
[sweep]
epsilon = [0.1, 0.05]
modes = [0, 3]
[mesh]
cells_per_period = 2
allow_coarse = true
[tolerances]
eigen = 1e-9
slope_margin = 0.05
)"};
  for (const auto& p : fs::directory_iterator(fs::path(HOMOG_SOURCE_DIR) / "presets")) texts.push_back(slurp(p.path()));
  ASSERT_GE(texts.size(), 4u);
  for (const auto& t : texts) {
    const auto c1 = parse_config(t);
    const auto s1 = serialize_config(c1);
    const auto c2 = parse_config(s1);
    EXPECT_EQ(config_to_json(c1), config_to_json(c2));
    EXPECT_EQ(serialize_config(c2), s1);
  }
}

TEST(Config, Validation) {
  auto code = [](const std::string& extra) { return error_code([&] { parse_config(extra, "bad.toml"); }); };
  EXPECT_NE(code("[sweep]\nepsilon = [0.1, 0.2]\n").find("strictly decreasing"), std::string::npos);
  EXPECT_NE(code("[sweep]\nepsilon = [0.1, 0.0]\n").find("not positive"), std::string::npos);
  EXPECT_NE(code("[mesh]\ncells_per_period = 2\n").find("allow_coarse"), std::string::npos);
  EXPECT_NE(code("[cell]\nresolution = 48\n").find("power of two"), std::string::npos);
  EXPECT_NE(code("colour = 1\n").find("unknown key"), std::string::npos);
  EXPECT_NE(code("[cell]\nresolution = \"big\"\n").find("wrong type"), std::string::npos);
  EXPECT_NE(code("[tolerances]\nslope_margin = -1.0\n").find("slope_margin"), std::string::npos);
  EXPECT_NE(code("[mesh]\ncells_per_period = 2\n").find("bad.toml"), std::string::npos);
  EXPECT_NE(error_code([] { load_config("/nonexistent/run.toml"); }).find("/nonexistent/run.toml"), std::string::npos);
  EXPECT_EQ(error_code([] { parse_stage("mesh"); }).substr(0, 15), "cli.ConfigParse");
}

// ---------------------------------------------------------------------------
// Plot data

TEST(Plot, SingleRowHasNoFitLine) {
  const auto dir = scratch("plot1");
  const auto r = make_report("one", {{0.1, 0.5}}, 1.0);
  const auto pf = emit_plotdata(r, dir.string());
  EXPECT_FALSE(pf.has_fit);
  EXPECT_EQ(slurp(pf.data_path), "# epsilon value\n0.10000000000000001 0.5\n");
  EXPECT_EQ(slurp(pf.svg_path).find("<line"), std::string::npos);
}

TEST(Plot, FitLineMatchesReportSlope) {
  const auto dir = scratch("plot3");
  const auto r = make_report("three", {{0.5, 0.3}, {0.25, 0.11}, {0.125, 0.05}}, 1.0);
  const auto pf = emit_plotdata(r, dir.string());
  ASSERT_TRUE(pf.has_fit);
  const auto j = nlohmann::json::parse(expansion::to_json(r).dump());
  EXPECT_NEAR(pf.drawn_slope(), j["slope"].get<Real>(), 1e-12);
  EXPECT_NE(slurp(pf.svg_path).find("<line"), std::string::npos);
}

TEST(Plot, NamesAreSanitizedAndEmptyReportsRejected) {
  EXPECT_EQ(plot::sanitize("λ error/mode 1"), "__error_mode_1");
  EXPECT_EQ(plot::sanitize("λ error/mode 1"), plot::sanitize("λ error/mode 1"));
  EXPECT_EQ(plot::sanitize("ok-name_1.5"), "ok-name_1.5");
  EXPECT_EQ(plot::sanitize(".."), "quantity");
  const auto dir = scratch("plotu");
  const auto pf = emit_plotdata(make_report("ε²·χ", {{0.1, 1.0}}, 1.0), dir.string());
  EXPECT_EQ(fs::path(pf.data_path).filename(), "____.dat");
  ConvergenceReport empty;
  empty.quantity = "nothing";
  EXPECT_EQ(error_code([&] { emit_plotdata(empty, dir.string()); }).substr(0, 15), "cli.EmptyReport");
}

// ---------------------------------------------------------------------------
// Orchestrator

TEST(Run, ConstantTensorPassesAndReproducesInput) {
  const auto dir = scratch("constant");
  RunOptions o;
  o.out = dir.string();
  o.strict = true;
  const auto r = run_experiment(parse_config(constant_config), o);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.all_pass);
  const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(s["pass"].get<bool>());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(s["cell"]["homogenized"][i][j].get<Real>(), i == j ? 2.5 : 0.0, 1e-12);
  EXPECT_EQ(s["cell"]["chi_max"].get<Real>(), 0.0);
  for (const char* f : {"run.log", "cell_summary.json", "tails.json", "spectrum.csv", "reports/homogenized_l2_error.csv",
                        "reports/eigen_first_order_residual_mode0.json", "plots/chi_term.svg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Run, OutputsAreByteIdentical) {
  const auto c = parse_config(constant_config);
  std::array<fs::path, 2> dirs{scratch("det0"), scratch("det1")};
  for (int k = 0; k < 2; ++k) {
    RunOptions o;
    o.out = dirs[k].string();
    o.jobs = 1 + k;
    run_experiment(c, o);
  }
  int compared = 0;
  for (const auto& p : fs::recursive_directory_iterator(dirs[0])) {
    if (!p.is_regular_file() || p.path().filename() == "run.log") continue;
    const auto other = dirs[1] / fs::relative(p.path(), dirs[0]);
    EXPECT_EQ(slurp(p.path()), slurp(other)) << p.path();
    ++compared;
  }
  EXPECT_GT(compared, 10);
}

TEST(Run, LaminateSummaryHasOracleTensor) {
  const auto dir = scratch("laminate");
  auto c = parse_config(slurp(fs::path(HOMOG_SOURCE_DIR) / "presets" / "laminate_square.toml"));
  RunOptions o;
  o.out = dir.string();
  o.only = Stage::cell;
  run_experiment(c, o);
  const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
  const auto& a0 = s["cell"]["homogenized"];
  EXPECT_NEAR(a0[0][0].get<Real>(), std::sqrt(3.0), 1e-8);
  EXPECT_NEAR(a0[1][1].get<Real>(), 2.0, 1e-8);
  EXPECT_NEAR(a0[0][1].get<Real>(), 0.0, 1e-8);
  EXPECT_FALSE(s.contains("reports") && !s["reports"].empty());
  EXPECT_FALSE(fs::exists(dir / "spectrum.csv"));
}

TEST(Run, StrictModeReflectsFailedChecks) {
  // at 1/ε ∈ ℕ the two vertical edges cancel, so the first-order term cannot beat the zeroth-order one
  const auto c = parse_config("[tensor]\npreset = \"laminate\"\n[sweep]\nepsilon = [0.25, 0.125, 0.0625]\n");
  for (bool strict : {false, true}) {
    RunOptions o;
    o.out = scratch(cat("strict", strict)).string();
    o.strict = strict;
    o.only = Stage::expansion;
    const auto r = run_experiment(c, o);
    EXPECT_FALSE(r.all_pass);
    EXPECT_EQ(r.exit_code, strict ? 1 : 0);
    EXPECT_NE(std::find(r.failures.begin(), r.failures.end(), "first_order_dominates_mode0"), r.failures.end());
  }
}

TEST(Run, MissingTensorFileIsConfigParseWithPath) {
  const auto dir = scratch("missing");
  const auto cfg = write_file(dir / "run.toml", "output_dir = \"" + (dir / "out").string() +
                                                    "\"\n[tensor]\nfile = \"/no/such/tensor.csv\"\n");
  std::ostringstream err;
  EXPECT_EQ(run_config_file(cfg.string(), {}, err), 2);
  EXPECT_NE(err.str().find("microstructure.ConfigParse"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("/no/such/tensor.csv"), std::string::npos) << err.str();
  std::ostringstream err2;
  EXPECT_EQ(run_config_file((dir / "absent.toml").string(), {}, err2), 2);
  EXPECT_NE(err2.str().find("cli.ConfigParse"), std::string::npos);
}

TEST(Run, OutputDirectoryPrecedence) {
  const auto base = scratch("precedence");
  auto c = parse_config(constant_config);
  c.output_dir = (base / "config").string();
  RunOptions o;
  o.only = Stage::cell;
  ::setenv(output_dir_env, (base / "env").string().c_str(), 1);
  EXPECT_EQ(run_experiment(c, o).output_dir, (base / "env").string());
  o.out = (base / "flag").string();
  EXPECT_EQ(run_experiment(c, o).output_dir, (base / "flag").string());
  ::unsetenv(output_dir_env);
  o.out.clear();
  EXPECT_EQ(run_experiment(c, o).output_dir, (base / "config").string());
  for (const char* d : {"env", "flag", "config"}) EXPECT_TRUE(fs::exists(base / d / "summary.json")) << d;
}
