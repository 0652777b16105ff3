#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("rdforest_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const auto out = workdir() / "stdout.txt";
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = std::string(RDFOREST_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("dgp sample writes a reproducible csv") {
  REQUIRE(run("dgp sample --preset lee --n 1000 --seed 7 --out " + path("d.csv")).code == 0);
  const std::string first = slurp(path("d.csv"));
  CHECK(first.rfind("y,x1,d\n", 0) == 0);
  CHECK(std::count(first.begin(), first.end(), '\n') == 1001);
  REQUIRE(run("dgp sample --preset lee --n 1000 --seed 7 --out " + path("d2.csv")).code == 0);
  CHECK(slurp(path("d2.csv")) == first);
  REQUIRE(run("--threads 1 dgp sample --preset lee --n 1000 --seed 7 --out " + path("d3.csv")).code == 0);
  CHECK(slurp(path("d3.csv")) == first);
}

TEST_CASE("true effect") {
  const auto r = run("true-effect --preset lee --at 0");
  CHECK(r.code == 0);
  CHECK(r.out == "0.04\n");
  const auto off = run("true-effect --preset lee --at 0.5");
  CHECK(off.code == 2);
  CHECK(off.err.rfind("error[BoundaryError]", 0) == 0);
}

TEST_CASE("estimate, collapse and diagnose") {
  REQUIRE(run("dgp sample --preset lee --n 2000 --seed 3 --out " + path("lee.csv")).code == 0);
  for (const char* m : {"rf", "llf"}) {
    const auto r = run("estimate --data " + path("lee.csv") + " --method " + m + " --cutoff 0 --trees 100");
    CHECK(r.code == 0);
    CHECK(r.out.find("\"estimate\"") != std::string::npos);
    CHECK(r.out.find("\"buffer_floored\": false") != std::string::npos);
  }
  const auto llr = run("estimate --data " + path("lee.csv") + " --method llr --at 0");
  CHECK(llr.code == 0);
  CHECK(llr.out.find("\"bandwidth\"") != std::string::npos);
  const auto floored = run("estimate --data " + path("lee.csv") + " --cutoff 0 --trees 20 --buffer-epsilon 1e-30");
  CHECK(floored.code == 0);
  CHECK(floored.out.find("\"buffer_floored\": true") == std::string::npos);  // |x_c| = 0: 1e-30 representable

  REQUIRE(run("dgp sample --preset square2d --n 20000 --seed 3 --out " + path("sq.csv")).code == 0);
  const std::string rule = "'{\"type\":\"curve\",\"vertices\":[[-1,0],[1,0]],\"treated_side\":\"below\"}'";
  const auto est2 = run("estimate --data " + path("sq.csv") + " --at 0.2 0 --rule " + rule + " --trees 50 --mtry 2");
  CHECK(est2.code == 0);
  REQUIRE(run("collapse --data " + path("sq.csv") + " --center 0 0 --rule " + rule + " --out " + path("c.csv")).code == 0);
  const auto diag = run("diagnose-density --data " + path("c.csv"));
  CHECK(diag.code == 0);
  CHECK(diag.out.find("\"flagged\": true") != std::string::npos);
}

TEST_CASE("usage and data errors") {
  CHECK(run("estimate --nope").code == 1);
  CHECK(run("dgp sample --n 10 --seed 1").code == 1);
  CHECK(run("dgp sample --preset lee --spec x.json --n 10 --seed 1").code == 1);
  REQUIRE(run("dgp sample --preset lee --n 100 --seed 1 --out " + path("e.csv")).code == 0);
  CHECK(run("estimate --data " + path("e.csv") + " --cutoff 0 --at 0").code == 1);
  CHECK(run("estimate --data " + path("e.csv") + " --cutoff 0 --c-scale 3").code == 1);
  write(path("bad.csv"), "y,z\n1,2\n");
  const auto bad = run("estimate --data " + path("bad.csv") + " --cutoff 0");
  CHECK(bad.code == 2);
  CHECK(bad.err.rfind("error[ParseError]", 0) == 0);
  CHECK(run("").code == 1);
}

TEST_CASE("mc studies are reproducible") {
  write(path("study.json"), R"({"dgp":"lee","boundary_point":[0],
    "methods":[{"method":"rf","trees":20},"llr"],"sample_sizes":[300],"replications":4,"seed":5})");
  REQUIRE(run("mc --config " + path("study.json") + " --out " + path("r1.csv")).code == 0);
  REQUIRE(run("--threads 1 mc --config " + path("study.json") + " --out " + path("r2.csv")).code == 0);
  CHECK(slurp(path("r1.csv")) == slurp(path("r2.csv")));
  CHECK(slurp(path("r1.csv")).rfind("method,n,mean_bias,variance,coverage,mean_ci_length,failures,wall_time\n", 0) == 0);
  REQUIRE(run("mc --config " + path("study.json") + " --format json --out " + path("r.json")).code == 0);
  CHECK(slurp(path("r.json")).find("\"rows\"") != std::string::npos);

  write(path("typo.json"), R"({"dgp":"lee","boundary_point":[0],"methods":["rf"],"sample_sizes":[300],"replications":4,"seeds":5})");
  const auto typo = run("mc --config " + path("typo.json"));
  CHECK(typo.code == 2);
  CHECK(typo.err.find("seeds") != std::string::npos);
}

TEST_CASE("version") {
  const auto v = run("--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("defaults ") != std::string::npos);
}
