#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "brwlab/analysis.hpp"
#include "brwlab/cli.hpp"
#include "doctest.h"

using namespace brwlab;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "brwlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("brwlab_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("lambda grids") {
    CHECK(parse_lambda_grid("0.5,1,2") == std::vector<double>{0.5, 1.0, 2.0});
    const auto g = parse_lambda_grid("0.5:2.0:0.25");
    REQUIRE(g.size() == 7);
    CHECK(g.back() == doctest::Approx(2.0));
    CHECK_THROWS_AS(parse_lambda_grid("1:0:0.1"), UsageError);
    CHECK_THROWS_AS(parse_lambda_grid("a,b"), UsageError);
    CHECK_THROWS_AS(parse_lambda_grid("-1,2"), UsageError);
  }

  TEST_CASE("model specs") {
    const BrwModel m = load_model_spec(R"({"constructor": "tree", "parameters": {"d": 3}, "truncation": {"depth": 2}})");
    CHECK(m.vertex_count() == 10);
    try {
      load_model_spec("{\n  \"constructor\": \"tree\",\n  \"parameters\": {\"d\": 3,,}\n}");
      FAIL("expected a parse error");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    try {
      load_model_spec(R"({"parameters": {}})");
      FAIL("expected a missing-field error");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("constructor") != std::string::npos);
    }
    CHECK_THROWS_AS(load_model_spec(R"({"constructor": "tree", "parameters": {"d": "three", "depth": 2}})"),
                    UsageError);
  }

  TEST_CASE("exit codes") {
    CHECK(run({"--help"}).code == kExitOk);
    CHECK(run({"sweep", "--help"}).out.find("wilson_lo") != std::string::npos);
    CHECK(run({"report"}).code == kExitUsage);
    CHECK(run({"report", "--frobnicate"}).code == kExitUsage);
    CHECK(run({}).code == kExitUsage);
    CHECK(run({"sweep", "--model", "single_site", "--lambda-grid", "1"}).code == kExitUsage);
    CHECK(run({"simulate", "--model", "single_site", "--param", "k"}).code == kExitUsage);
    CHECK(run({"zoo"}).out.find("tree_with_lines") != std::string::npos);

    const auto spec = temp_path("corrupt.json");
    std::ofstream(spec) << "{ \"constructor\": ";
    const Run bad = run({"verify", "--spec", spec.string()});
    CHECK(bad.code != kExitOk);
    CHECK(bad.err.find("line") != std::string::npos);
    std::filesystem::remove(spec);
  }

  TEST_CASE("report with a q-bar column") {
    const auto out = temp_path("report.json");
    const Run r = run({"report", "--model", "single_site", "--param", "k=1", "--lambda-grid", "0.5,1,2", "--out",
                       out.string()});
    REQUIRE(r.code == kExitOk);
    const nlohmann::json j = nlohmann::json::parse(slurp(out));
    REQUIRE(j["sweep"].size() == 3);
    CHECK(j["sweep"][0]["q_bar"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(j["sweep"][1]["q_bar"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(j["sweep"][2]["q_bar"].get<double>() == doctest::Approx(0.5).epsilon(1e-10));
    auto csv = out;
    csv.replace_extension(".csv");
    CHECK(slurp(csv).rfind(kSweepCsvHeader, 0) == 0);
    std::filesystem::remove(out);
    std::filesystem::remove(csv);

    const Run tree = run({"report", "--model", "tree", "--param", "d=3", "--depth", "12", "--lambda", "0.5"});
    CHECK(tree.code == kExitOk);
    CHECK(nlohmann::json::parse(tree.out)["model"]["vertices"] == 3 * 4096 - 2);
  }

  TEST_CASE("sweep is monotone and byte-stable") {
    std::vector<std::string> args{"sweep", "--model", "single_site", "--lambda-grid", "0.5:2.0:0.25",
                                  "--trials", "2000", "--horizon", "50", "--cap", "10000", "--seed", "3"};
    const Run a = run(args);
    REQUIRE(a.code == kExitOk);
    std::istringstream lines(a.out);
    std::string line;
    std::getline(lines, line);
    double prev = -1.0;
    while (std::getline(lines, line)) {
      std::stringstream fields(line);
      std::string lam, q, mc;
      std::getline(fields, lam, ',');
      std::getline(fields, q, ',');
      std::getline(fields, mc, ',');
      CHECK(std::stod(mc) >= prev - 0.05);
      prev = std::stod(mc);
    }
    CHECK(prev > 0.4);

    for (const char* threads : {"1", "4", "8"}) {
      auto with = args;
      with.push_back("--threads");
      with.push_back(threads);
      CHECK(run(with).out == a.out);
    }
  }

  TEST_CASE("verify on zoo models") {
    CHECK(run({"verify", "--model", "star", "--param", "d=4", "--param", "depth=40"}).code == kExitOk);
    const Run ex = run({"verify", "--model", "example_finally", "--param", "half_length=200"});
    CHECK(ex.code == kExitOk);
    CHECK(ex.out.find("sandwich") != std::string::npos);
    CHECK(ex.out.find("2^{1+n/2}") != std::string::npos);
  }
}
