#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "temp_dir.hpp"

namespace {

const std::string kCli = COCREATE_CLI_PATH;
const std::string kData = COCREATE_DATA_DIR;

struct Run {
  int exit_code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  FILE* pipe = ::popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("metrics of the sample session match the hand-tabulated golden file") {
  const auto r = run("metrics --log " + kData + "/sample_session.jsonl");
  CHECK(r.exit_code == 0);
  CHECK(r.out == slurp(kData + "/sample_session_metrics.csv"));
}

TEST_CASE("import, export and metrics agree") {
  testkit::TempDir dir;
  const auto root = dir.path.string();
  const auto imported = run("import --root " + root + " --log " + kData + "/sample_session.jsonl");
  REQUIRE(imported.exit_code == 0);
  const auto id = imported.out.substr(0, imported.out.find('\n'));
  CHECK(id == "sc19a19795ebc");

  const auto exported = run("export --root " + root + " --session " + id);
  CHECK(exported.exit_code == 0);
  CHECK(exported.out == slurp(kData + "/sample_session.jsonl"));

  const auto piped = run("export --root " + root + " --session " + id + " | " + kCli + " metrics --log -");
  CHECK(piped.out == run("metrics --log " + kData + "/sample_session.jsonl").out);
  CHECK(run("metrics --root " + root + " --session " + id).out == piped.out);

  // A second import of the same id is a conflict.
  CHECK(run("import --root " + root + " --log " + kData + "/sample_session.jsonl").exit_code == 2);
}

TEST_CASE("exit codes") {
  testkit::TempDir dir;
  CHECK(run("").exit_code == 1);
  CHECK(run("metrics --bogus").exit_code == 1);
  CHECK(run("ablate").exit_code == 1);
  CHECK(run("metrics --log " + (dir.path / "missing.jsonl").string()).exit_code == 2);
  {
    std::ofstream bad(dir.path / "bad.jsonl");
    bad << "{\"seq\":1,\"kind\":\"Nope\"}\n{\"seq\":2}\n";
  }
  CHECK(run("metrics --log " + (dir.path / "bad.jsonl").string()).exit_code == 2);
  CHECK(run("export --root " + dir.path.string() + " --session nope").exit_code == 2);
  // Without credentials the real providers cannot be built.
  ::unsetenv("PROVIDER_KEY");
  CHECK(run("ablate --prompts " + kData + "/ablation_prompts.txt --runs 1 --count 3").exit_code == 3);
}

TEST_CASE("offline ablation is deterministic") {
  testkit::TempDir a, b;
  const std::string common = "ablate --mock --seed 5 --runs 3 --count 9 --prompts " + kData + "/ablation_prompts.txt --out ";
  const auto first = run(common + a.path.string());
  const auto second = run(common + b.path.string());
  REQUIRE(first.exit_code == 0);
  CHECK(first.out == second.out);
  CHECK(slurp((a.path / "summary.csv").string()) == slurp((b.path / "summary.csv").string()));
  CHECK(slurp((a.path / "cells.csv").string()) == slurp((b.path / "cells.csv").string()));
  // header plus 12 prompts x 2 modes x 3 runs
  const auto cells = slurp((a.path / "cells.csv").string());
  CHECK(std::count(cells.begin(), cells.end(), '\n') == 73);
}
