#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "popsyn/cli.hpp"
#include "popsyn/dataset.hpp"
#include "popsyn/model_io.hpp"
#include "popsyn/schema.hpp"

using namespace popsyn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("popsyn_cli_" + name);
  fs::remove_all(p);
  return p.string();
}

std::size_t lines(const std::string& path) {
  const auto text = read_text_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string join(const std::string& a, const std::string& b) { return (fs::path(a) / b).string(); }

// One generated dataset shared by the tests below.
const std::string& dataset_dir() {
  static const std::string dir = [] {
    const auto d = scratch("data");
    REQUIRE(cli({"gen-data", "--variant", "extended", "-n", "6893", "--seed", "7", "--out", d}).code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data writes the benchmark dataset and schema") {
  const auto& d = dataset_dir();
  CHECK(lines(join(d, "data.csv")) == 6894);
  const auto header = read_text_file(join(d, "data.csv")).substr(0, read_text_file(join(d, "data.csv")).find('\n'));
  CHECK(std::count(header.begin(), header.end(), ',') == 11);
  CHECK(load_schema(join(d, "schema.json")).output_width() == 45);
  const auto echo = nlohmann::json::parse(read_text_file(join(d, "effective_config.json")));
  CHECK(echo["records"] == 6893);
  CHECK(echo["seed"] == 7);
  CHECK(echo["variant"] == "extended");

  const auto one = scratch("one");
  REQUIRE(cli({"gen-data", "-n", "1", "--out", one}).code == 0);
  CHECK(lines(join(one, "data.csv")) == 2);

  const auto again = scratch("again");
  REQUIRE(cli({"gen-data", "--variant", "extended", "-n", "6893", "--seed", "7", "--out", again}).code == 0);
  CHECK(read_text_file(join(again, "data.csv")) == read_text_file(join(d, "data.csv")));
}

TEST_CASE("flags override config file values") {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  write_text_file(join(dir, "c.json"), R"({"records": 5, "variant": "original", "seed": 2})");
  const auto out = join(dir, "out");
  REQUIRE(cli({"gen-data", "--config", join(dir, "c.json"), "--records", "3", "--out", out}).code == 0);
  CHECK(lines(join(out, "data.csv")) == 4);
  const auto echo = nlohmann::json::parse(read_text_file(join(out, "effective_config.json")));
  CHECK(echo["records"] == 3);
  CHECK(echo["variant"] == "original");
  CHECK(echo["seed"] == 2);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"nonsense"}).code == 1);
  CHECK(cli({"gen-data", "--records", "abc", "--out", scratch("x")}).code == 1);
  CHECK(cli({"gen-data", "--variant", "huge", "--out", scratch("x")}).code == 1);
  CHECK(cli({"gen-data", "--config", "/nonexistent/c.json", "--out", scratch("x")}).code == 2);
  CHECK(cli({"gen-data", "--out", "/proc/popsyn/forbidden"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  const auto r = cli({"train", "--model", "cvae", "--out", scratch("x")});
  CHECK(r.code == 1);
  CHECK(r.err.find("'schema'") != std::string::npos);
}

TEST_CASE("train, sample and evaluate") {
  const auto& d = dataset_dir();
  const auto data = join(d, "data.csv"), schema = join(d, "schema.json");

  const auto zero = scratch("cvae0");
  REQUIRE(cli({"train", "--model", "cvae", "--epochs", "0", "--data", data, "--schema", schema, "--out", zero}).code == 0);
  CHECK(fs::exists(join(zero, "manifest.json")));
  CHECK(fs::exists(join(zero, "encoder.bin")));
  CHECK(lines(join(zero, "trace_batches.csv")) == 1);
  CHECK(fs::exists(join(zero, "effective_config.json")));

  const auto base = scratch("baseline");
  REQUIRE(cli({"train", "--model", "baseline", "--data", data, "--schema", schema, "--out", base}).code == 0);

  // 200 townhouses: one agent per conditional row.
  const auto text = read_text_file(data);
  std::istringstream in(text);
  std::string line, cond = "";
  std::getline(in, line);
  auto tail = [](const std::string& l) {
    std::size_t pos = 0;
    for (int i = 0; i < 5; ++i) pos = l.find(',', pos) + 1;
    return l.substr(pos);
  };
  cond += tail(line) + "\n";
  for (int i = 0; i < 200 && std::getline(in, line); ++i) cond += tail(line) + "\n";
  const auto cdir = scratch("cond");
  fs::create_directories(cdir);
  write_text_file(join(cdir, "c.csv"), cond);

  const auto s1 = scratch("s1");
  REQUIRE(cli({"sample", "--model", zero, "--conditionals", join(cdir, "c.csv"), "--n-per-row", "1", "--out", s1}).code == 0);
  CHECK(lines(join(s1, "samples.csv")) == 201);
  const auto sch = load_schema(schema);
  CHECK_NOTHROW(read_dataset_csv(join(s1, "samples.csv"), sch));

  const auto s0 = scratch("s0");
  REQUIRE(cli({"sample", "--model", base, "--data", join(cdir, "c.csv"), "--n-per-row", "0", "--out", s0}).code == 0);
  CHECK(lines(join(s0, "samples.csv")) == 1);

  write_text_file(join(cdir, "short.csv"), "distance_phase1,distance_phase2\n0,0\n");
  const auto missing = cli({"sample", "--model", base, "--data", join(cdir, "short.csv"), "--out", scratch("sx")});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("distance_greenfield") != std::string::npos);

  const auto ev = scratch("eval");
  REQUIRE(cli({"evaluate", "--samples", data, "--truth", data, "--train", data, "--schema", schema, "--out", ev}).code == 0);
  const auto report = nlohmann::json::parse(read_text_file(join(ev, "report.json")));
  for (const char* k : {"marginal", "bivariate", "trivariate1", "trivariate2"}) CHECK(report["srmse"][k] == 0.0);
  CHECK(report["marginal_r_squared"].get<double>() == doctest::Approx(1.0));
  CHECK(report["zero_sample_pct"] == 0.0);
  CHECK(lines(join(ev, "fig6_marginals.csv")) == sch.output_width() + 1);

  write_text_file(join(cdir, "other.csv"), "age,gender,nationality\n0,0,0\n");
  const auto mismatch = cli({"evaluate", "--samples", join(cdir, "other.csv"), "--truth", data, "--schema", schema,
                             "--out", scratch("ev2")});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("investor") != std::string::npos);
}

TEST_CASE("train reports corrupt rows and mismatched features") {
  const auto& d = dataset_dir();
  const auto dir = scratch("corrupt");
  fs::create_directories(dir);
  auto text = read_text_file(join(d, "data.csv")).substr(0, 2000);
  text = text.substr(0, text.rfind('\n') + 1) + "0,0,0,0,0,0,0,0,0,0,0\n";
  write_text_file(join(dir, "bad.csv"), text);
  const auto n = std::count(text.begin(), text.end(), '\n');
  const auto r = cli({"train", "--model", "baseline", "--data", join(dir, "bad.csv"), "--schema",
                      join(d, "schema.json"), "--out", join(dir, "m")});
  CHECK(r.code == 1);
  CHECK(r.err.find("line " + std::to_string(n)) != std::string::npos);

  const auto orig = scratch("orig_schema");
  REQUIRE(cli({"gen-data", "--variant", "original", "-n", "5", "--out", orig}).code == 0);
  write_text_file(join(dir, "renamed.csv"), "age,sex,nationality,investor,prior_home,distance_phase1,distance_phase2,"
                                            "distance_greenfield,sales_price,size,floor,property_type\n");
  const auto m = cli({"train", "--model", "baseline", "--data", join(dir, "renamed.csv"), "--schema",
                      join(orig, "schema.json"), "--out", join(dir, "m2")});
  CHECK(m.code == 1);
  CHECK(m.err.find("gender") != std::string::npos);
  CHECK(m.err.find("sex") != std::string::npos);
}

TEST_CASE("protocol command") {
  const auto dir = scratch("protocol");
  fs::create_directories(dir);
  write_text_file(join(dir, "p.json"), R"({"seed": 3, "records": 1200, "variants": ["extended"], "samples_per_row": 1,
    "cvae": {"epochs": 1, "hidden_units": 8, "bottleneck_dim": 3},
    "cgan": {"epochs": 1, "hidden_units": 8, "noise_dim": 3}})");
  const auto a = join(dir, "a"), b = join(dir, "b");
  REQUIRE(cli({"protocol", "--config", join(dir, "p.json"), "--out", a}).code == 0);
  REQUIRE(cli({"protocol", "--config", join(dir, "p.json"), "--out", b}).code == 0);
  for (const char* f : {"table2.json", "table3.json", "selection.json", "effective_config.json",
                        "figures/extended/fig6_marginals_test.csv", "figures/extended/fig7_joints_test.csv",
                        "figures/extended/fig8_joints_application.csv"}) {
    CHECK_MESSAGE(read_text_file(join(a, f)) == read_text_file(join(b, f)), f);
  }
  write_text_file(join(dir, "missing.json"), R"({"seed": 3, "records": 1200, "variants": ["extended"], "cvae": {}})");
  const auto r = cli({"protocol", "--config", join(dir, "missing.json"), "--out", join(dir, "c")});
  CHECK(r.code == 1);
  CHECK(r.err.find("'cgan'") != std::string::npos);
}

TEST_CASE("grid command") {
  const auto out = scratch("grid");
  const auto r = cli({"grid", "--model", "cvae", "--variant", "original", "--records", "1200", "--epochs", "1",
                      "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("8 configs x 5 folds") != std::string::npos);
  const auto ranking = nlohmann::json::parse(read_text_file(join(out, "ranking.json")));
  CHECK(ranking.size() == 8);
  CHECK(ranking[0].contains("wall_seconds"));
  const auto first = join(join(out, "experiments"), "config_" + std::to_string(ranking[0]["config_index"].get<int>()));
  CHECK(fs::exists(join(join(first, "model"), "manifest.json")));
  CHECK(fs::exists(join(first, "trace_batches.csv")));
}

}  // TEST_SUITE
