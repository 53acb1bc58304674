#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doctest.h"
#include "kten/cli.hpp"

using namespace kten;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "kten_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json load(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run(std::vector<std::string> args, const fs::path& out) {
  args.insert(args.begin(), {"--quiet", "--output-dir", out.string()});
  return dispatch(args);
}

}  // namespace

TEST_CASE("usage and unknown subcommands") {
  CHECK(dispatch({}) == 1);
  CHECK(dispatch({"--quiet", "frobnicate"}) == 1);
  CHECK(dispatch({"--quiet", "spreading", "--no-such-flag", "1"}) == 1);
  CHECK(dispatch({"--help"}) == 0);
}

TEST_CASE("spreading subcommand") {
  const fs::path out = scratch("spreading");
  CHECK(run({"spreading", "--beta", "0.8", "--gamma", "-1", "--s", "0.5", "--d", "3", "--t0", "0.5",
             "--l0", "0.1", "--K", "1e-3", "--n-max", "30"},
            out) == 0);
  const json j = load(out / "spreading.json");
  CHECK(j["envelope"]["p"].get<double>() ==
        doctest::Approx(std::log(2.0) / std::log(std::sqrt(1.64))).epsilon(1e-13));
  CHECK(j["envelope_below_trace"].get<bool>());
  CHECK(std::abs(j["R_final_over_rho_n"].get<double>() - 0.288788) < 1e-3);

  const json m = load(out / "manifest.json");
  CHECK(m["subcommand"] == "spreading");
  CHECK(m["outputs"].size() == 2);

  CHECK(run({"spreading", "--beta", "1.2"}, scratch("bad_beta")) == 1);
  // a huge spreading constant breaks the level guard: a numerical failure
  CHECK(run({"spreading", "--K", "1e6", "--l0", "0.9"}, scratch("guard")) == 2);
}

TEST_CASE("replay reproduces outputs at other thread counts") {
  const fs::path out = scratch("region");
  CHECK(run({"region", "--R", "1,2", "--eps", "0.05,0.1", "--samples", "150000"}, out) == 0);
  const json r = load(out / "region.json");
  CHECK(r["R_exponent"][0]["fit"]["slope"].get<double>() == doctest::Approx(5.0).epsilon(1e-9));
  for (const char* t : {"1", "3"})
    CHECK(dispatch({"--quiet", "--replay", (out / "manifest.json").string(), "--threads", t,
                    "--output-dir", (out / ("replay" + std::string(t))).string()}) == 0);

  const fs::path geo = scratch("geometry");
  CHECK(run({"verify-geometry", "--collisions", "50000"}, geo) == 0);
  const json g = load(geo / "geometry.json");
  CHECK(g["mixture_energy_residual"].get<double>() < 1e-10);
  CHECK(g["relative_speed_increases"].get<int>() == 0);
  CHECK(dispatch({"--quiet", "--replay", (geo / "manifest.json").string(), "--threads", "4"}) == 0);
}

TEST_CASE("replay detects changed outputs") {
  const fs::path out = scratch("tamper");
  CHECK(run({"cancellation", "--family", "elastic"}, out) == 0);
  json m = load(out / "manifest.json");
  m["outputs"][0]["fnv1a64"] = "0000000000000000";
  std::ofstream(out / "manifest.json") << m.dump();
  CHECK(dispatch({"--quiet", "--replay", (out / "manifest.json").string()}) == 2);
}

TEST_CASE("simulate then tails") {
  const fs::path dir = scratch("simulate");
  std::ofstream(dir / "run.cfg") << "model = inelastic\nalpha = 0.5\nparticles = 3000\n"
                                    "s_or_h = h\ngamma = 0\ndt = 0.05\nsteps = 6\n"
                                    "snapshot_every = 3\n";
  const fs::path out = dir / "out";
  CHECK(run({"simulate", "--config", (dir / "run.cfg").string()}, out) == 0);
  for (const char* f : {"moments.csv", "snapshots.csv", "tails.csv", "summary.json", "config.txt",
                        "snapshots/step_000003_s0.bin"})
    CHECK(fs::exists(out / f));
  std::ifstream mc(out / "moments.csv");
  std::string line;
  int rows = 0;
  while (std::getline(mc, line)) ++rows;
  CHECK(rows == 1 + 7);

  std::ofstream(dir / "env.json") << R"({"envelope": {"a": 1e-9, "b": 1.0, "p": 2.0}})";
  CHECK(run({"tails", "--snapshots", out.string(), "--envelope", (dir / "env.json").string(),
             "--t0", "0.1"},
            dir / "tails") == 0);
  const json t = load(dir / "tails" / "tails_report.json");
  CHECK(t["uniform"].get<bool>());
  CHECK(t["species"][0]["times"].size() == 2);
  CHECK(run({"tails", "--snapshots", out.string(), "--envelope", (dir / "env.json").string(),
             "--t0", "100"},
            dir / "tails_empty") == 1);

  CHECK(dispatch({"--quiet", "--replay", (out / "manifest.json").string(), "--threads", "2"}) == 0);
  CHECK(run({"simulate", "--config", (dir / "missing.cfg").string()}, out) == 1);
}

TEST_CASE("file hashing") {
  const fs::path dir = scratch("hash");
  std::ofstream(dir / "a", std::ios::binary) << "a";
  std::ofstream(dir / "empty", std::ios::binary);
  CHECK(fnv1a_file((dir / "empty").string()) == "cbf29ce484222325");
  CHECK(fnv1a_file((dir / "a").string()) == "af63dc4c8601ec8c");
}
