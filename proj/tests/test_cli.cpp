#include "mwres/config.hpp"
#include "mwres/errors.hpp"
#include "mwres/io.hpp"
#include "mwres/report.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mwres;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mwres_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MWRES_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough to finish in a few seconds.
const char* kSmallConfig = R"([design]
kind = multi_wave
n_quarter = 3
[tls]
fluct_amp = 3e-7
[protocol]
densities = 0.01, 1, 100, 10000
dwell_s = 2
repeats = 4
repeat_spacing_s = 100
psd_duration_s = 20
psd_densities = 1, 100
ecdf_density = 1
[run]
seed = 5
)";

}  // namespace

TEST_CASE("config text round-trips through serialization") {
  ExperimentConfig cfg = parse_config(kSmallConfig);
  CHECK(cfg.design.n_quarter == 3);
  CHECK(cfg.protocol.densities == std::vector<double>{0.01, 1, 100, 10000});
  CHECK(cfg.seed == 5);
  cfg.tls.xi0 = 1.0 / 3.0 * 1e-6;
  const ExperimentConfig back = parse_config(serialize_config(cfg));
  CHECK(back.tls.xi0 == cfg.tls.xi0);
  CHECK(serialize_config(back) == serialize_config(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(back).size() == 64);
  cfg.seed = 6;
  CHECK(config_hash(cfg) != config_hash(back));
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config("[tls]\nxi_zero = 1e-6\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("fs_hz = 500\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[protocol]\nfs_hz = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[design]\nn_quarter = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[protocol]\ndensities = 1,,2\n"), ConfigError);
  try {
    parse_config("[tls]\nxi_zero = 1e-6\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("xi_zero") != std::string::npos);
  }
}

TEST_CASE("CSV helpers round-trip doubles exactly") {
  const fs::path dir = scratch("csv");
  CsvTable t;
  t.meta["fs_hz"] = "500";
  t.header = {"a", "b"};
  t.rows = {{0.1, 1.0 / 3.0}, {-2.5e-300, 6.02214076e23}};
  write_csv((dir / "t.csv").string(), t);
  const CsvTable back = read_csv((dir / "t.csv").string());
  CHECK(back.meta.at("fs_hz") == "500");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.values("b")[0] == 1.0 / 3.0);
  CHECK_THROWS_AS(back.column("c"), ConfigError);
  CHECK_THROWS_AS(parse_double("1.0x"), ConfigError);
}

TEST_CASE("CLI pipeline runs from sweep to spectrum") {
  const fs::path dir = scratch("pipeline");
  write_text(dir / "cfg.ini", kSmallConfig);
  const std::string common = "--config " + (dir / "cfg.ini").string() + " --out " + dir.string();
  REQUIRE(run("synth-sweep " + common) == 0);
  REQUIRE(run("fit-sweep " + (dir / "sweep.csv").string() + " " + common) == 0);
  const auto fit = read_key_values((dir / "fit.csv").string());
  const auto truth = read_key_values((dir / "sweep_truth.csv").string());
  CHECK(parse_double(fit.at("qi")) == Approx(parse_double(truth.at("qi"))).epsilon(0.05));

  REQUIRE(run("synth-series --density 1 --duration 20 " + common) == 0);
  const std::string series = (dir / "series.csv").string(), fitp = (dir / "fit.csv").string();
  REQUIRE(run("map-series " + series + " " + fitp + " " + common) == 0);
  REQUIRE(run("psd " + series + " " + fitp + " " + common + " --format svg") == 0);
  CHECK(fs::exists(dir / "psd.csv"));
  CHECK(fs::exists(dir / "psd.svg"));
  const auto noise = read_key_values((dir / "noise.csv").string());
  CHECK(parse_double(noise.at("rms")) > 0.0);

  CsvTable vals;
  vals.header = {"xi"};
  for (double v : {3.1e-7, 3.5e-7, 2.9e-7, 4.2e-7, 3.8e-7, 3.3e-7}) vals.rows.push_back({v});
  write_csv((dir / "vals.csv").string(), vals);
  REQUIRE(run("ecdf " + (dir / "vals.csv").string() + " --out " + dir.string()) == 0);
  CHECK(read_key_values((dir / "lognormal.csv").string()).at("n") == "6");
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = scratch("codes");
  write_text(dir / "bad.ini", "[tls]\nxi_zero = 1e-6\n");
  CHECK(run("synth-sweep --config " + (dir / "bad.ini").string() + " --out " + dir.string()) == 2);
  CHECK(run("synth-sweep --format pdf --out " + dir.string()) == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("fit-sweep " + (dir / "missing.csv").string()) == 2);

  // a sweep with no resonance cannot be fitted
  CsvTable flat;
  flat.header = {"freq_hz", "re", "im"};
  for (int i = 0; i < 50; ++i) flat.rows.push_back({5e9 + 1e3 * i, 1.0, 0.0});
  write_csv((dir / "flat.csv").string(), flat);
  CHECK(run("fit-sweep " + (dir / "flat.csv").string() + " --out " + dir.string()) == 3);

  nlohmann::json m;
  m["config_hash"] = "0";
  m["seed"] = 1;
  m["stages"] = nlohmann::json::array();
  m["arms"] = nlohmann::json::array();
  m["paired"] = {{"n_ratio", 33.0}, {"var_ratio", 33.5}, {"a_ratio", 2.0}, {"rel_err_ratio", 5.7}};
  std::ofstream(dir / "manifest.json") << m.dump();
  CHECK(run("report " + (dir / "manifest.json").string()) == 4);
  m["paired"]["a_ratio"] = 6.0;
  std::ofstream(dir / "manifest.json") << m.dump();
  CHECK(run("report " + dir.string()) == 0);
}

TEST_CASE("report names the failing criterion") {
  nlohmann::json m;
  m["truth"] = {{"xi0", 1.25e-6}};
  m["arms"] = nlohmann::json::array();
  m["paired"] = {{"n_ratio", 33.0}, {"var_ratio", 20.0}, {"a_ratio", 5.7}, {"rel_err_ratio", 5.7}};
  const Report r = build_report(m);
  CHECK_FALSE(r.passed());
  REQUIRE(r.failing().size() == 1);
  CHECK(r.failing()[0] == "variance ratio QW/MW");
  std::ostringstream out;
  CHECK(emit_report(m, out) == 4);
  CHECK(out.str().find("[variance ratio QW/MW]") != std::string::npos);
}

TEST_CASE("experiment output is reproducible for a fixed seed") {
  const fs::path a = scratch("exp_a"), b = scratch("exp_b");
  write_text(a / "cfg.ini", kSmallConfig);
  REQUIRE(run("experiment --config " + (a / "cfg.ini").string() + " --out " + a.string()) == 0);
  REQUIRE(run("experiment --config " + (a / "cfg.ini").string() + " --out " + b.string()) == 0);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json" ||
        entry.path().filename() == "cfg.ini")
      continue;
    const fs::path rel = fs::relative(entry.path(), a);
    INFO(rel.string());
    REQUIRE(fs::exists(b / rel));
    CHECK(read_text(entry.path()) == read_text(b / rel));
  }
  CHECK(fs::exists(a / "summary.csv"));
  CHECK(fs::exists(a / "fig_ecdf.svg"));
  // a different seed changes the data
  const fs::path c = scratch("exp_c");
  REQUIRE(run("experiment --config " + (a / "cfg.ini").string() + " --seed 6 --format csv --out " +
              c.string()) == 0);
  CHECK(read_text(a / "arm_N3" / "xi_samples.csv") != read_text(c / "arm_N3" / "xi_samples.csv"));
  CHECK_FALSE(fs::exists(c / "fig_ecdf.svg"));
}
