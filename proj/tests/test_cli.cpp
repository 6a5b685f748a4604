#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "metarenewal/cli.hpp"
#include "metarenewal/config.hpp"

using namespace metarenewal;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(METARENEWAL_DATA_DIR) + "/" + name + ".json"; }

struct run_result {
  int code;
  std::string out, err;
};

run_result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("metarenewal_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string write_config(const std::string& name, const json& j) {
  auto path = fs::temp_directory_path() / ("metarenewal_cli_" + name + ".json");
  std::ofstream(path, std::ios::binary) << j.dump(2);
  return path.string();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

double value_after(const std::string& text, const std::string& key) {
  auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size()));
}

json load(const std::string& name) { return json::parse(slurp(data(name))); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate exit codes") {
    auto ok = run({"validate", data("two_patch_symmetric")});
    CHECK(ok.code == exit_ok);
    CHECK(ok.out.find("valid") != std::string::npos);

    auto bad = run({"validate", data("negative_dispersal")});
    CHECK(bad.code == exit_failure);
    CHECK(bad.out.find("H3  FAIL") != std::string::npos);

    auto missing = run({"validate", data("does_not_exist")});
    CHECK(missing.code == exit_input_error);
    CHECK(missing.err.find("cannot open") != std::string::npos);

    CHECK(run({"validate"}).code == exit_input_error);
    CHECK(run({"frobnicate", data("single_patch")}).code == exit_input_error);
    CHECK(run({"validate", data("single_patch"), "--da", "-1"}).code == exit_input_error);
    CHECK(run({"--help"}).code == exit_ok);
  }

  TEST_CASE("parse errors report line and column") {
    auto path = fs::temp_directory_path() / "metarenewal_cli_broken.json";
    std::ofstream(path, std::ios::binary) << "{\n  \"version\": 1,\n  \"model\": {\n    \"lifespan\": 4,,\n";
    auto r = run({"validate", path.string()});
    CHECK(r.code == exit_input_error);
    CHECK(r.err.find("line 4, column 19") != std::string::npos);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    const json base = load("envelope_seasonal");
    // every object location in the document, as a JSON pointer
    std::vector<std::string> objects{""};
    auto flat = base.flatten();
    for (auto it = flat.begin(); it != flat.end(); ++it) {
      std::string p = it.key();
      while (!p.empty()) {
        p = p.substr(0, p.rfind('/'));
        json::json_pointer ptr(p);
        if (base.contains(ptr) && base.at(ptr).is_object()) objects.push_back(p);
      }
    }
    std::sort(objects.begin(), objects.end());
    objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
    CHECK(objects.size() >= 10);
    for (const auto& p : objects) {
      json j = base;
      j[json::json_pointer(p + "/bogus")] = 1;
      try {
        parse_config(j.dump());
        FAIL("accepted an unknown key at " << p);
      } catch (const config_error& e) {
        CHECK(e.location() == p + "/bogus");
      }
    }
  }

  TEST_CASE("schema errors carry their location") {
    json j = load("single_patch");
    j["version"] = 2;
    CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("/version"), config_error);

    j = load("single_patch");
    j["model"]["patches"][0]["birth"]["type"] = "gaussian";
    CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("/model/patches/0/birth/type"), config_error);

    j = load("single_patch");
    j["model"]["patches"][0]["birth"]["from"] = 3;
    CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("/model/patches/0/birth"), config_error);

    j = load("single_patch");
    j["model"]["patches"][0].erase("mortality");
    CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("'mortality'"), config_error);

    j = load("two_patch_symmetric");
    j["model"]["dispersal"][1] = {0.2};
    CHECK_THROWS_WITH_AS(parse_config(j.dump()), doctest::Contains("/model/dispersal/1"), config_error);

    j = load("single_patch");
    j["settings"] = {{"phase_nodes", 2.5}};
    auto r = run({"validate", write_config("schema", j)});
    CHECK(r.code == exit_input_error);
    CHECK(r.err.find("/settings/phase_nodes") != std::string::npos);
  }

  TEST_CASE("every rate type round-trips through the config") {
    json j = load("single_patch");
    j["model"]["patches"][0]["birth"] = {{"type", "separable"},
                                         {"age", {{"type", "piecewise_linear"}, {"knots", {{1, 0}, {1.5, 2}, {2, 0}}}}},
                                         {"period", 2},
                                         {"samples", {{0, 1}, {1, 3}}}};
    j["model"]["patches"][0]["initial"] = {{"type", "constant"}, {"value", 0.25}};
    j["model"]["patches"][0]["mortality"] = {{"law", "power"}, {"mu", 0.5}, {"p", 0.1}, {"gamma", 2}};
    auto c = parse_config(j.dump());
    const auto& m = c.model;
    CHECK(m.time_dependent());
    CHECK(m.birth(0)(1.25, 0.0) == doctest::Approx(1.0));
    CHECK(m.birth(0)(1.25, 1.0) == doctest::Approx(3.0));
    CHECK(m.birth(0)(1.25, 2.5) == doctest::Approx(2.0));
    CHECK(m.initial(0)(3.0) == 0.25);
    CHECK(m.mortality(0)(2.0, 1.0) == doctest::Approx(0.5 + 0.1 * 4.0));
    CHECK(c.t_end() == 80.0);
    CHECK(c.settings.eps_ladder.size() == 3);
  }

  TEST_CASE("simulate writes the documented table") {
    auto dir = scratch("simulate");
    auto r = run({"simulate", data("two_patch_symmetric"), "--out", dir.string(), "--tend", "10"});
    REQUIRE(r.code == exit_ok);
    auto text = slurp(dir / "simulate.csv");
    CHECK(text.find('\r') == std::string::npos);
    auto rows = read_csv(text);
    REQUIRE(rows.size() == 322);
    CHECK(rows[0] == std::vector<std::string>{"t", "rho_1", "rho_2", "P_1", "P_2"});
    CHECK(std::stod(rows.back()[0]) == 10.0);
    // full precision: the value survives a text round trip exactly
    auto report = read_json(dir / "simulate.json");
    double p1 = report["final_P"][0];
    CHECK(std::stod(rows.back()[3]) == p1);
    CHECK(report["certified"] == true);

    auto again = scratch("simulate_again");
    REQUIRE(run({"simulate", data("two_patch_symmetric"), "--out", again.string(), "--tend", "10"}).code == exit_ok);
    CHECK(slurp(again / "simulate.csv") == text);
  }

  TEST_CASE("simulate agrees with analyze and the dichotomy") {
    auto dir = scratch("dichotomy");
    REQUIRE(run({"simulate", data("single_patch"), "--out", (dir / "sim").string()}).code == exit_ok);
    REQUIRE(run({"analyze", data("single_patch"), "--out", (dir / "an").string()}).code == exit_ok);
    auto rows = read_csv(slurp(dir / "sim" / "simulate.csv"));
    double theta = read_json(dir / "an" / "analyze.json")["theta"][0];
    CHECK(std::abs(std::stod(rows.back()[1]) - theta) < 1e-3);

    auto sub = run({"simulate", data("subcritical")});
    REQUIRE(sub.code == exit_ok);
    auto srows = read_csv(sub.out);
    CHECK(std::stod(srows.back()[1]) < 1e-4);

    auto zero = run({"simulate", data("zero_initial")});
    REQUIRE(zero.code == exit_ok);
    auto zrows = read_csv(zero.out);
    for (std::size_t i = 1; i < zrows.size(); ++i)
      for (std::size_t c = 1; c < zrows[i].size(); ++c) CHECK(std::stod(zrows[i][c]) == 0.0);
  }

  TEST_CASE("analyze reports") {
    auto single = run({"analyze", data("single_patch")});
    REQUIRE(single.code == exit_ok);
    CHECK(std::abs(value_after(single.out, "sigma(R0) = ") - 6.0 * (std::exp(-0.5) - std::exp(-1.0))) < 1e-6);
    CHECK(single.out.find("sigma bounds:") != std::string::npos);

    auto sub = run({"analyze", data("subcritical")});
    REQUIRE(sub.code == exit_ok);
    CHECK(sub.out.find("classification = Extinction") != std::string::npos);

    auto unc = run({"analyze", data("uncoupled")});
    REQUIRE(unc.code == exit_ok);
    CHECK(unc.out.find("sigma_1 = ") != std::string::npos);
    CHECK(unc.out.find("sigma_2 = ") != std::string::npos);
    CHECK(unc.out.find("reducible") != std::string::npos);
    CHECK(value_after(unc.out, "remainder slope = ") >= 1.8);

    json j = load("two_patch_symmetric");
    j["model"]["dispersal"] = {{-0.1, 0.3}, {0.3, -0.1}};
    auto na = run({"analyze", write_config("columns", j)});
    REQUIRE(na.code == exit_ok);
    CHECK(na.out.find("sigma bounds: not applicable") != std::string::npos);

    auto seasonal = run({"analyze", data("seasonal")});
    CHECK(seasonal.code == exit_failure);
    CHECK(seasonal.out.find("periodic") != std::string::npos);
  }

  TEST_CASE("periodic matches analyze for a time-independent model") {
    auto an = run({"analyze", data("two_patch_symmetric")});
    auto pe = run({"periodic", data("two_patch_symmetric"), "--phase-nodes", "8"});
    REQUIRE(an.code == exit_ok);
    REQUIRE(pe.code == exit_ok);
    CHECK(std::abs(value_after(an.out, "sigma(R0) = ") - value_after(pe.err, "sigma(R0~) = ")) < 1e-6);
    auto rows = read_csv(pe.out);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == std::vector<std::string>{"phase", "theta_1", "theta_2"});
    double theta = value_after(an.out, "theta = [");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::abs(std::stod(rows[i][1]) - theta) < 1e-7);
  }

  TEST_CASE("envelope command") {
    auto dir = scratch("envelope");
    auto deg = run({"envelope", data("envelope_degenerate"), "--out", dir.string(), "--phase-nodes", "32"});
    REQUIRE(deg.code == exit_ok);
    auto rep = read_json(dir / "envelope.json");
    CHECK(rep["case"] == "sandwich");
    CHECK(rep["violations"].empty());
    CHECK(rep["witness"].is_object());
    auto rows = read_csv(slurp(dir / "envelope.csv"));
    CHECK(rows[0] == std::vector<std::string>{"t", "rho_1", "lower_1", "upper_1"});

    auto bad = run({"envelope", data("envelope_malformed")});
    CHECK(bad.code == exit_failure);
    CHECK(bad.err.find("m- <= m <= m+") != std::string::npos);

    auto sub = run({"envelope", data("envelope_subcritical")});
    CHECK(sub.code == exit_ok);
    CHECK(sub.err.find("case = extinction") != std::string::npos);

    CHECK(run({"envelope", data("single_patch")}).code == exit_input_error);
  }
}
