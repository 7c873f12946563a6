#include "donorsim/csv.hpp"
#include "donorsim/scenarios.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace donorsim;
namespace fs = std::filesystem;

namespace {

const std::string kDevice = std::string(DONORSIM_SOURCE_DIR) + "/configs/device_default.json";

fs::path scratch_root() { return fs::temp_directory_path() / ("donorsim_cli_" + std::to_string(::getpid())); }

struct RemoveScratch : ::testing::Environment {
  void TearDown() override { fs::remove_all(scratch_root()); }
};
const auto* const kCleanup = ::testing::AddGlobalTestEnvironment(new RemoveScratch);

fs::path scratch(const std::string& name) {
  const auto p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("DONORSIM_LOG=error ") + DONORSIM_CLI + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int run(const std::string& scenario, const std::string& config, std::uint64_t seed, const fs::path& out,
        const std::string& extra = "") {
  return cli("run " + scenario + " --config " + config + " --seed " + std::to_string(seed) + " --out " + out.string() +
             " " + extra);
}

// small overrides so the CLI tests stay quick
fs::path small_config(const fs::path& dir) {
  const auto p = dir / "small.json";
  write_file(p, R"({
  "device_file": ")" + kDevice + R"(",
  "scenarios": {
    "donor_sampling": {"trials": 3000},
    "rb_1q": {"lengths": [1, 5, 10, 20, 40, 80], "sequences": 4, "shots": 50, "bootstrap": 100},
    "elzerman_study": {"shots": 500, "threshold_points": 50, "qnd_trials": 500, "qnd_repetitions": [1, 3],
                       "spam_shots": 200}
  }
})");
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST(Registry, NamesAndDefaults) {
  const std::set<std::string> expected{
      "toffoli_truth_table", "bell_pairs",      "ghz_witness",   "error_sweep_z",  "error_sweep_x",
      "error_sweep_y",       "stabilizer_basis_table", "arbitrary_error_grid", "dephasing_detection",
      "pfu_recovery",        "rb_1q",           "irb_2q",        "ramsey_suite",   "elzerman_study",
      "donor_sampling",      "bias_ratio",      "cccz_calibration", "error_budget"};
  std::set<std::string> names;
  for (const auto& s : scenarios()) {
    EXPECT_TRUE(names.insert(s.name).second) << s.name;
    EXPECT_NO_THROW(NoiseMode::parse(s.default_noise)) << s.name;
    EXPECT_TRUE(s.defaults.is_object()) << s.name;
    EXPECT_EQ(find_scenario(s.name), &s);
  }
  EXPECT_EQ(names, expected);
  EXPECT_EQ(find_scenario("nope"), nullptr);
}

TEST(Registry, ParameterOverrides) {
  const auto* info = find_scenario("donor_sampling");
  ASSERT_NE(info, nullptr);
  const json p = resolve_params(*info, json{{"donor_sampling", {{"trials", 7}}}});
  EXPECT_EQ(p.at("trials"), 7);
  EXPECT_EQ(p.at("cap"), info->defaults.at("cap"));
  EXPECT_EQ(resolve_params(*info, json::object()), info->defaults);
  EXPECT_THROW(resolve_params(*info, json{{"donor_sampling", {{"trails", 7}}}}), ConfigError);
  EXPECT_THROW(resolve_params(*info, json{{"donor_sampling", 3}}), ConfigError);
  EXPECT_THROW(NoiseMode::parse("loud"), ConfigError);
  const auto both = NoiseMode::parse("both");
  EXPECT_TRUE(both.decoherence && both.crosstalk);
}

TEST(Registry, ConfigForms) {
  const auto dir = scratch("forms");
  const auto bare = load_config(kDevice);
  EXPECT_EQ(bare.spec.nuclei.size(), default_device().nuclei.size());
  write_file(dir / "wrapped.json", R"({"scenarios": {"rb_1q": {"shots": 3}}})");
  const auto wrapped = load_config((dir / "wrapped.json").string());
  EXPECT_EQ(wrapped.scenario_params.at("rb_1q").at("shots"), 3);
  write_file(dir / "bad.json", "{\"nuclei\": ");
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  write_file(dir / "array.json", "[1, 2]");
  EXPECT_THROW(load_config((dir / "array.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
}

TEST(Csv, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(1.0), "1");
  for (double v : {1.0 / 3, 2.718281828459045, -1e-300, 123456.789}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  EXPECT_EQ(cli("list"), 0);
  EXPECT_EQ(run("no_such_scenario", kDevice, 1, dir / "a"), 2);
  write_file(dir / "broken.json", "{ not json");
  EXPECT_EQ(run("toffoli_truth_table", (dir / "broken.json").string(), 1, dir / "b"), 3);
  EXPECT_EQ(run("toffoli_truth_table", (dir / "absent.json").string(), 1, dir / "c"), 3);
  write_file(dir / "unknown_key.json", R"({"scenarios": {"toffoli_truth_table": {"colour": "red"}}})");
  EXPECT_EQ(run("toffoli_truth_table", (dir / "unknown_key.json").string(), 1, dir / "d"), 3);
  write_file(dir / "bad_label.json", R"({"scenarios": {"toffoli_truth_table": {"target": "N9"}}})");
  EXPECT_EQ(run("toffoli_truth_table", (dir / "bad_label.json").string(), 1, dir / "e"), 3);
  write_file(dir / "abort.json", R"({"scenarios": {"rb_1q": {"lengths": []}}})");
  EXPECT_EQ(run("rb_1q", (dir / "abort.json").string(), 1, dir / "f"), 4);
  // usage errors are not scenario failures
  EXPECT_EQ(cli("run toffoli_truth_table --config " + kDevice + " --out " + (dir / "g").string()), 1);
  EXPECT_EQ(run("toffoli_truth_table", kDevice, 1, dir / "h", "--noise loud"), 1);
}

TEST(Cli, ResultsEmbedResolvedConfig) {
  const auto dir = scratch("results");
  const auto cfg = small_config(dir);
  ASSERT_EQ(run("donor_sampling", cfg.string(), 42, dir / "out", "--threads 1"), 0);
  const json r = json::parse(slurp(dir / "out" / "results.json"));
  const auto& c = r.at("config");
  EXPECT_EQ(c.at("scenario"), "donor_sampling");
  EXPECT_EQ(c.at("seed"), 42u);
  EXPECT_EQ(c.at("noise"), "none");
  EXPECT_EQ(c.at("params").at("trials"), 3000);
  EXPECT_EQ(c.at("params").at("cap"), 64);
  EXPECT_EQ(c.at("device").at("nuclei").size(), default_device().nuclei.size());
  for (const auto& f : r.at("files")) EXPECT_TRUE(fs::exists(dir / "out" / f.get<std::string>())) << f;
  EXPECT_TRUE(r.at("summary").contains("mean"));
}

TEST(Cli, RerunIsByteIdentical) {
  const auto dir = scratch("rerun");
  const auto cfg = small_config(dir);
  for (const std::string s : {"donor_sampling", "rb_1q", "elzerman_study", "error_sweep_y"}) {
    ASSERT_EQ(run(s, cfg.string(), 7, dir / (s + "_a")), 0) << s;
    ASSERT_EQ(run(s, cfg.string(), 7, dir / (s + "_b"), "--threads 1"), 0) << s;
    const auto a = csv_files(dir / (s + "_a")), b = csv_files(dir / (s + "_b"));
    ASSERT_FALSE(a.empty()) << s;
    EXPECT_EQ(a, b) << s;
  }
  ASSERT_EQ(run("donor_sampling", cfg.string(), 8, dir / "donor_other"), 0);
  EXPECT_NE(csv_files(dir / "donor_other"), csv_files(dir / "donor_sampling_a"));
}

TEST(Cli, CsvLayouts) {
  const auto dir = scratch("layouts");
  const auto cfg = small_config(dir);
  ASSERT_EQ(run("rb_1q", cfg.string(), 3, dir / "rb"), 0);
  const auto decay = read_csv(dir / "rb" / "rb_1q_decay.csv");
  EXPECT_EQ(decay.front(), (std::vector<std::string>{"length", "mean_p", "stderr", "n_sequences"}));
  EXPECT_EQ(decay.size(), 7u);

  ASSERT_EQ(run("elzerman_study", cfg.string(), 3, dir / "elz"), 0);
  const auto spam = read_csv(dir / "elz" / "spam_matrix.csv");
  std::vector<std::string> header{"measured"};
  for (int i = 0; i < 16; ++i) header.push_back(bits_to_string(i, 4));
  EXPECT_EQ(spam.front(), header);
  // columns are prepared states, so each sums to one
  for (std::size_t col = 1; col < header.size(); ++col) {
    double s = 0;
    for (std::size_t row = 1; row < spam.size(); ++row) s += std::stod(spam[row][col]);
    EXPECT_NEAR(s, 1.0, 1e-12) << header[col];
  }
}

TEST(Cli, ErrorSweepCsvMatchesOracle) {
  const auto dir = scratch("sweep");
  ASSERT_EQ(run("error_sweep_y", kDevice, 1, dir), 0);
  const auto rows = read_csv(dir / "error_sweep_y.csv");
  ASSERT_EQ(rows.size(), 34u);
  ASSERT_EQ(rows.front()[0], "theta");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double th = std::stod(rows[i][0]);
    // p_11 carries the Y error on phi+
    EXPECT_NEAR(std::stod(rows[i][4]), std::pow(std::sin(th / 2), 2), 1e-6) << th;
    EXPECT_NEAR(std::stod(rows[i][1]), std::pow(std::cos(th / 2), 2), 1e-6) << th;
    // every numeric cell round-trips
    for (const auto& c : rows[i]) EXPECT_EQ(format_double(std::stod(c)), c);
  }
}

TEST(Cli, NoiselessToffoliFidelity) {
  const auto dir = scratch("toffoli");
  ASSERT_EQ(run("toffoli_truth_table", kDevice, 1, dir, "--noise none"), 0);
  const json r = json::parse(slurp(dir / "results.json"));
  EXPECT_NEAR(r.at("summary").at("fidelity").get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(fs::exists(dir / "toffoli_circuit.txt"));
}
