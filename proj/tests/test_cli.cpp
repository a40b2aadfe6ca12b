#include "rpo/cli.hpp"

#include <json.hpp>

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace rpo;
namespace fs = std::filesystem;

namespace {

ErrorCode parse_error(const std::string& text) {
  try {
    parse_returns_csv_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rpo_cli_test_" + std::to_string(std::hash<std::string>{}(
                                  std::to_string(reinterpret_cast<std::uintptr_t>(this)))));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("CSV parsing") {
  const ReturnsMatrix r = parse_returns_csv_text("A,B\n0.01,-0.02\n0.03,0.04\n");
  CHECK(r.samples() == 2);
  CHECK(r.assets() == 2);
  CHECK(r.values()(0, 1) == -0.02);
  CHECK(r.asset_names()[0] == "A");

  CHECK(parse_returns_csv_text("A,B\r\n1,2\r\n\r\n3,4").samples() == 2);
  CHECK(parse_returns_csv_text("\"Asset, one\",B\n1,2\n").asset_names()[0] == "Asset, one");
  CHECK(parse_returns_csv_text("A\n1e-3\n+2\n").values()(1, 0) == 2.0);

  CHECK(parse_error("A,B\n1,2,3\n") == ErrorCode::kRaggedRow);
  CHECK(parse_error("A,B\n1\n") == ErrorCode::kRaggedRow);
  CHECK(parse_error("A,B\n\"0,01\",1\n") == ErrorCode::kUnparsableNumber);
  CHECK(parse_error("A,B\n0.01,1x\n") == ErrorCode::kUnparsableNumber);
  CHECK(parse_error("A,B\n1,1,000\n") == ErrorCode::kRaggedRow);
  CHECK(parse_error("") == ErrorCode::kEmptyFile);
  CHECK(parse_error("A,B\n") == ErrorCode::kEmptyFile);
  CHECK(parse_error("A,A\n1,2\n") == ErrorCode::kDuplicateAssetName);
  CHECK(parse_error("A,B\n1,nan\n") == ErrorCode::kNonFiniteEntry);
}

TEST_CASE("CSV errors carry the location") {
  try {
    parse_returns_csv_text("A,B\n1,2\n3,x\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3, column 2") != std::string::npos);
  }
  try {
    parse_returns_csv("/nonexistent/returns.csv");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIoError);
  }
}

TEST_CASE("solve report JSON") {
  SolveJson j;
  j.status = "optimal";
  j.names = {"A", "B"};
  j.weights = Eigen::Vector2d(0.5, 0.5);
  j.objective = 0.1;
  j.epsilon = 0.0;
  j.duality_gap = 1e-12;
  j.kkt_residual = 3e-15;
  j.n_eff = 2.0;
  j.nu = 0.3;
  j.c = 1.0;
  j.seed = 42;
  const std::string text = solve_json(j);
  const auto parsed = nlohmann::ordered_json::parse(text);

  std::vector<std::string> keys;
  for (const auto& [k, v] : parsed.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"status", "weights", "objective", "epsilon",
                                         "duality_gap", "kkt_residual", "n_eff", "nu", "c",
                                         "seed", "wall_time_ms"});
  CHECK(parsed["weights"]["A"].get<double>() == 0.5);
  CHECK(parsed["weights"]["B"].get<double>() == 0.5);
  CHECK(parsed["wall_time_ms"].is_null());
  CHECK(text.find("0.29999999999999999") != std::string::npos);  // 17 digits

  SUBCASE("numbers round-trip exactly") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 200; ++i) {
      j.objective = u(rng) * std::pow(10.0, i % 20 - 10);
      j.weights = Eigen::Vector2d(u(rng), u(rng));
      const auto p = nlohmann::ordered_json::parse(solve_json(j));
      CHECK(p["objective"].get<double>() == *j.objective);
      CHECK(p["weights"]["A"].get<double>() == (*j.weights)[0]);
      CHECK(p["weights"]["B"].get<double>() == (*j.weights)[1]);
    }
  }
  SUBCASE("unbounded report") {
    SolveJson u;
    u.status = "unbounded";
    u.names = {"A", "B"};
    u.certificate = Eigen::Vector2d(1.0, -1.0);
    const auto p = nlohmann::ordered_json::parse(solve_json(u));
    CHECK(p["status"] == "unbounded");
    REQUIRE(p["certificate"].is_array());
    CHECK(p["certificate"][1].get<double>() == -1.0);
    CHECK(p["weights"].is_null());
  }
}

TEST_CASE("config validation aggregates problems") {
  RunConfig c;
  c.command = Command::kOptimize;
  c.nu = 1.5;
  c.c = -2.0;
  c.tol.relative = 0.0;
  try {
    validate(c);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
    const std::string msg = e.what();
    CHECK(msg.find("--input") != std::string::npos);
    CHECK(msg.find("--nu") != std::string::npos);
    CHECK(msg.find("--c ") != std::string::npos);
    CHECK(msg.find("--tol") != std::string::npos);
  }
  RunConfig s;
  s.command = Command::kSweep;
  s.n = 20;
  s.t = {40, 10};
  s.trials = 0;
  try {
    validate(s);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("--t value 10") != std::string::npos);
    CHECK(std::string(e.what()).find("--trials") != std::string::npos);
  }
}

TEST_CASE("tolerance from the environment") {
  ::setenv("RPO_TOL", "1e-7", 1);
  CHECK(default_tolerances().relative == 1e-7);
  ::setenv("RPO_TOL", "abc", 1);
  CHECK_THROWS_AS(default_tolerances(), Error);
  ::unsetenv("RPO_TOL");
  CHECK(default_tolerances().relative == Tolerances{}.relative);
}

TEST_CASE("run: commands, exit codes and reports") {
  TempDir dir;
  const std::string csv = dir.file("r.csv");
  write(csv, "A,B\n0.01,-0.02\n0.03,0.04\n-0.01,0.02\n0.02,-0.03\n0.00,0.01\n");
  const std::string before = slurp(csv);
  std::ostringstream out, err;

  SUBCASE("optimize") {
    RunConfig c;
    c.command = Command::kOptimize;
    c.input = csv;
    c.nu = 0.4;
    c.output = dir.file("rep.json");
    CHECK(run(c, out, err) == 0);
    const auto p = nlohmann::ordered_json::parse(slurp(c.output));
    CHECK(p["status"] == "optimal");
    CHECK(p["weights"].size() == 2);
    CHECK(slurp(csv) == before);
  }
  SUBCASE("es-lp on a dominated asset") {
    const std::string dom = dir.file("dom.csv");
    write(dom, "A,B\n0.02,0.01\n-0.01,-0.03\n0.04,0.00\n0.00,-0.02\n0.01,0.005\n");
    RunConfig c;
    c.command = Command::kEsLp;
    c.input = dom;
    c.nu = 0.4;
    c.output = dir.file("lp.json");
    CHECK(run(c, out, err) == 2);
    const auto p = nlohmann::ordered_json::parse(slurp(c.output));
    CHECK(p["status"] == "unbounded");
    CHECK(p["certificate"].size() == 2);
  }
  SUBCASE("sweep") {
    RunConfig c;
    c.command = Command::kSweep;
    c.n = 20;
    c.t = {40, 60, 100, 200};
    c.trials = 200;
    c.seed = 7;
    c.output = dir.file("sweep.json");
    CHECK(run(c, out, err) == 0);
    const auto p = nlohmann::ordered_json::parse(slurp(c.output));
    CHECK(p["q0_mean"].size() == 4);
    CHECK(p["t"][3] == 200);
  }
  SUBCASE("minvar and crossval on synthetic input") {
    RunConfig c;
    c.command = Command::kMinVar;
    c.input = "synthetic:iid:n=5,t=40";
    c.output = dir.file("mv.json");
    CHECK(run(c, out, err) == 0);
    c.command = Command::kCrossVal;
    c.c_grid = {0.1, 1.0};
    c.folds = 4;
    c.output = dir.file("cv.json");
    CHECK(run(c, out, err) == 0);
    const auto p = nlohmann::ordered_json::parse(slurp(c.output));
    CHECK(p["fold_scores"].size() == 2);
    CHECK(p["fold_scores"][0].size() == 4);
  }
  SUBCASE("errors exit 1 with the location") {
    const std::string bad = dir.file("bad.csv");
    write(bad, "A,B\n0.01,0.02\n\"0,01\",0.02\n");
    RunConfig c;
    c.command = Command::kOptimize;
    c.input = bad;
    CHECK(run(c, out, err) == 1);
    CHECK(err.str().find("line 3, column 1") != std::string::npos);

    c.input = "synthetic:iid:n=5";
    CHECK(run(c, out, err) == 1);

    c.input = csv;
    c.output = dir.file("missing/dir/rep.json");
    CHECK(run(c, out, err) == 1);
    CHECK(err.str().find("IoError") != std::string::npos);
  }
  SUBCASE("identical config gives identical bytes") {
    for (Command cmd : {Command::kOptimize, Command::kEsLp, Command::kMinVar, Command::kSweep,
                        Command::kStability, Command::kCrossVal}) {
      RunConfig c;
      c.command = cmd;
      c.input = "synthetic:iid:n=6,t=40";
      c.seed = 11;
      c.n = 6;
      c.t = cmd == Command::kSweep ? std::vector<int>{10, 20} : std::vector<int>{30};
      c.trials = 5;
      c.test_t = 300;
      c.c_grid = {0.1, 1.0};
      c.folds = 3;
      c.output = dir.file("a.json");
      const int first = run(c, out, err);
      const std::string a = slurp(c.output);
      c.output = dir.file("b.json");
      CHECK(run(c, out, err) == first);
      CHECK(a == slurp(c.output));
      CHECK(!a.empty());
    }
  }
}
