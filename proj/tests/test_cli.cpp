#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "causalrd/cli.hpp"

using namespace causalrd;
using namespace causalrd::cli;
using nlohmann::json;

namespace {

json bss_config(const std::string& mode) {
  return json{{"schema_version", 1},
              {"horizon", 2},
              {"source", {{"type", "iid"}, {"pmf", {0.5, 0.5}}}},
              {"distortion", {{"type", "hamming"}}},
              {"mode", mode},
              {"solver", {{"s", -2.0}}}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("causalrd_cli_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const json& doc) const {
    std::ofstream(path / name) << doc.dump(2);
    return path / name;
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("emit_csv") {
  SUBCASE("single point") {
    RdCurve c;
    c.points = {{0.0, 0.5, 0.0, 0.0, 1, true, 0.0, ""}};
    std::ostringstream os;
    emit_csv(c, Units::nats, os);
    CHECK(os.str() == std::string(kCsvHeader) + "\n0,0.5,0,0,1,true,0\n");
  }
  SUBCASE("ln 2 nats is one bit") {
    RdCurve c;
    c.points = {{-1.0, 0.1, std::log(2.0), std::log(2.0) / 2, 3, false, 1e-3, ""}};
    std::ostringstream os;
    emit_csv(c, Units::bits, os);
    const auto row = cells(lines(os.str())[1]);
    CHECK(row[2] == "1");
    CHECK(row[3] == "0.5");
    CHECK(row[5] == "false");
  }
  SUBCASE("twelve significant digits") {
    RdCurve c;
    c.points = {{-1.0 / 3.0, 0.1, 0.0, 0.0, 1, true, 0.0, ""}};
    std::ostringstream os;
    emit_csv(c, Units::nats, os);
    CHECK(cells(lines(os.str())[1])[0] == "-0.333333333333");
  }
}

TEST_CASE("solve_s at s = 0") {
  json doc = bss_config("solve_s");
  doc["solver"]["s"] = 0.0;
  const auto r = execute(parse_config(doc));
  CHECK(r.exit_code == kExitOk);
  const auto rows = lines(r.csv);
  REQUIRE(rows.size() == 2);
  const auto row = cells(rows[1]);
  CHECK(row[1] == "0.5");
  CHECK(row[2] == "0");
  CHECK(row[5] == "true");
}

TEST_CASE("curve with 20 multipliers") {
  json doc = bss_config("curve");
  json s = json::array();
  for (int j = 0; j < 20; ++j) s.push_back(-0.25 * (j + 1));
  doc["solver"] = {{"s_values", s}};
  doc["checks"] = {{"enabled", true}, {"perturbations", 10}};
  const auto r = execute(parse_config(doc));
  CHECK(r.exit_code == kExitOk);
  CHECK(lines(r.csv).size() == 21);
  CHECK(lines(r.csv)[0] == kCsvHeader);
  CHECK(r.curve.checks.monotone);
  CHECK(r.curve.checks.convex);
  REQUIRE(r.checks.size() == 4);
  for (const auto& ch : r.checks) CHECK_MESSAGE(ch.passed, ch.name);
  CHECK(r.report["checks"].size() == 4);
  CHECK(r.report["points"].size() == 20);
}

TEST_CASE("bits output equals nats over ln 2") {
  json doc = bss_config("curve");
  doc["solver"] = {{"s_values", {-0.7, -1.3, -2.9}}};
  const auto nats = execute(parse_config(doc));
  doc["output"] = {{"units", "bits"}};
  const auto bits = execute(parse_config(doc));
  const auto a = lines(nats.csv), b = lines(bits.csv);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 1; k < a.size(); ++k) {
    const auto ra = cells(a[k]), rb = cells(b[k]);
    CHECK(ra[1] == rb[1]);
    for (int col : {2, 3}) {
      const double expect = std::stod(ra[col]) / std::log(2.0);
      CHECK(std::abs(std::stod(rb[col]) - expect) <= 1e-11 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("target modes and exit codes") {
  SUBCASE("solved target") {
    json doc = bss_config("target_d");
    doc["solver"] = {{"D_target", 0.1}};
    const auto r = execute(parse_config(doc));
    CHECK(r.exit_code == kExitOk);
    CHECK(std::abs(r.curve.points[0].distortion_per_symbol - 0.1) <= 1e-6);
  }
  SUBCASE("infeasible target exits 4") {
    json doc = bss_config("target_d");
    doc["distortion"] = {{"type", "stage_tables"},
                         {"tables", {{{0, 1}, {1, 0}},
                                     {{0, 0, 1, 1}, {1, 1, 0, 0}, {0, 0, 1, 1}, {1, 1, 0, 0}}}}};
    doc["solver"] = {{"D_target", 0.1}};
    const auto r = execute(parse_config(doc));
    CHECK(r.exit_code == kExitInfeasible);
    CHECK(std::isinf(r.curve.points[0].rate_total_nats));
    CHECK(r.report["points"][0]["target_status"] == "infeasible");
  }
  SUBCASE("non-convergence exits 3 with diagnostics") {
    json doc = bss_config("solve_s");
    doc["source"] = {{"type", "markov"}, {"initial", {0.5, 0.5}}, {"transition", {{0.7, 0.3}, {0.3, 0.7}}}};
    doc["solver"] = {{"s", -1.0}, {"max_sweeps", 2}};
    const auto r = execute(parse_config(doc));
    CHECK(r.exit_code == kExitNumerical);
    CHECK(r.message.find("no convergence") != std::string::npos);
    CHECK(lines(r.csv).size() == 2);
    CHECK(cells(lines(r.csv)[1])[5] == "false");
  }
  SUBCASE("horizon sweep") {
    json doc = bss_config("horizon_sweep");
    doc.erase("horizon");
    doc["solver"] = {{"D_target", 0.2}, {"horizons", {1, 2, 3}}};
    const auto r = execute(parse_config(doc));
    CHECK(r.exit_code == kExitOk);
    REQUIRE(r.curve.points.size() == 3);
    for (const auto& p : r.curve.points) {
      CHECK(std::abs(p.rate_per_symbol_nats - r.curve.points[0].rate_per_symbol_nats) < 1e-6);
    }
    CHECK(r.report["points"][2]["horizon"] == 3);
  }
  SUBCASE("verify runs the checks") {
    json doc = bss_config("verify");
    const auto r = execute(parse_config(doc));
    CHECK(r.exit_code == kExitOk);
    CHECK(r.checks.size() == 4);
  }
}

TEST_CASE("config errors name the field") {
  json doc = bss_config("solve_s");
  doc["source"] = {{"type", "general"}, {"kernels", {{{0.5, 0.5}}, {{0.5, 0.5}, {0.5, 0.4}}}}};
  const std::string row = config_error(doc);
  CHECK(row.find("source.kernels[1][1]") != std::string::npos);
  CHECK(row.find("stage 1") != std::string::npos);
  CHECK(row.find("history 1") != std::string::npos);

  doc = bss_config("solve_s");
  doc["source"]["pmf"] = {0.5, 0.4};
  CHECK(config_error(doc).rfind("source.pmf", 0) == 0);

  doc = bss_config("solve_s");
  doc["solver"]["damping"] = 1.5;
  CHECK(config_error(doc).rfind("solver.damping", 0) == 0);

  doc = bss_config("solve_s");
  doc["solver"]["colour"] = 1;
  CHECK(config_error(doc).rfind("solver.colour: unknown field", 0) == 0);

  doc = bss_config("solve_s");
  doc["schema_version"] = 2;
  CHECK(config_error(doc).rfind("schema_version", 0) == 0);

  doc = bss_config("curve");
  CHECK(config_error(doc).rfind("solver.s_values", 0) == 0);

  doc = bss_config("solve_s");
  doc["distortion"] = {{"type", "single_letter"}, {"table", {{0, 1}, {1}}}};
  CHECK(config_error(doc).rfind("distortion.table[1]", 0) == 0);

  doc = bss_config("solve_s");
  doc["distortion"] = {{"type", "stage_tables"}, {"tables", {{{0, 1}, {1, 0}}, {{0, 1}, {1, 0}}}}};
  CHECK(config_error(doc).rfind("distortion.tables[1]", 0) == 0);

  doc = bss_config("solve_s");
  doc["source"] = {{"type", "markov"}, {"initial", {0.5, 0.5}}, {"transition", {{0.7, 0.3}, {0.3, 0.8}}}};
  CHECK(config_error(doc).rfind("source.transition[1]", 0) == 0);

  doc = bss_config("solve_s");
  doc["horizon"] = 60;
  CHECK(config_error(doc).rfind("horizon", 0) == 0);
}

TEST_CASE("serialized config reloads to a bit-identical run") {
  json doc = bss_config("curve");
  doc["source"] = {{"type", "markov"}, {"initial", {0.4, 0.6}}, {"transition", {{0.7, 0.3}, {0.2, 0.8}}}};
  doc["solver"] = {{"s_values", {-0.3, -1.1, -2.7}}, {"damping", 0.9}};
  const RunConfig first = parse_config(doc);
  const json dumped = to_json(first);
  const RunConfig second = parse_config(json::parse(dumped.dump()));
  CHECK(to_json(second) == dumped);
  const auto a = execute(first);
  const auto b = execute(second);
  CHECK(a.csv == b.csv);
  CHECK(a.report["points"] == b.report["points"]);
}

TEST_CASE("run writes artifacts and applies overrides") {
  TempDir dir;
  json doc = bss_config("solve_s");
  doc["output"] = {{"path", (dir.path / "out.csv").string()}};
  const auto cfg = dir.write("cfg.json", doc);
  std::ostringstream err;

  CHECK(run(cfg, {}, err) == kExitOk);
  CHECK(lines(slurp(dir.path / "out.csv"))[0] == kCsvHeader);
  const json report = json::parse(slurp(dir.path / "out.csv.report.json"));
  CHECK(report.contains("timing_seconds"));
  CHECK(report["config"]["mode"] == "solve_s");

  Overrides o;
  o.mode = Mode::verify;
  o.units = Units::bits;
  o.out = (dir.path / "verify.json").string();
  o.seed = 7;
  CHECK(run(cfg, o, err) == kExitOk);
  const json v = json::parse(slurp(dir.path / "verify.json.report.json"));
  CHECK(v["units"] == "bits");
  CHECK(v["config"]["checks"]["seed"] == 7);
  CHECK(v["checks"].size() == 4);

  doc["source"]["pmf"] = {0.5, 0.4};
  const auto bad = dir.write("bad.json", doc);
  std::ostringstream bad_err;
  CHECK(run(bad, {}, bad_err) == kExitConfig);
  CHECK(bad_err.str().find("source.pmf") != std::string::npos);

  std::ostringstream missing_err;
  CHECK(run(dir.path / "missing.json", {}, missing_err) == kExitConfig);
}
