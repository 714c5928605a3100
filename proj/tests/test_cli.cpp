#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("gtex_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(GTEX_CLI) + " " + args + " >" + (work() / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream in(work() / "last.log");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string p(const fs::path& x) { return "'" + x.string() + "'"; }

const std::string kQuick = "--set steps_stage1=40 --set steps_stage2=40";

// Simulates one quad sample once; later cases reuse it as CLI input.
const fs::path& dataset() {
  static const fs::path d = [] {
    const fs::path spec = work() / "spec.txt";
    std::ofstream(spec) << "templates = quad\nsamples = 2\nseed = 3\ntexture_resolution = 128\n";
    const fs::path out = work() / "data";
    REQUIRE(run("simulate --spec " + p(spec) + " --workers 1 " + kQuick + " -o " + p(out)) == 0);
    return out;
  }();
  return d;
}

std::string view_args(const fs::path& s) {
  return "--template quad --front " + p(s / "front.png") + " --back " + p(s / "back.png") + " --mask-front " +
         p(s / "mask_front.png") + " --mask-back " + p(s / "mask_back.png") + " --landmarks " +
         p(s / "landmarks.json");
}

}  // namespace

TEST_CASE("simulate then eval writes a report") {
  const fs::path data = dataset();
  CHECK(fs::exists(data / "dataset.json"));
  CHECK(fs::exists(data / "sample_0000" / "coarse.png"));
  const fs::path rep = work() / "report";
  REQUIRE(run("eval --data " + p(data) + " --workers 1 -o " + p(rep)) == 0);
  CHECK(fs::exists(rep / "report.csv"));
  CHECK(fs::exists(rep / "report.json"));
  CHECK(last_log().find("phase1") != std::string::npos);
}

TEST_CASE("fit writes its four artifacts") {
  const fs::path out = work() / "fit";
  REQUIRE(run("fit " + view_args(dataset() / "sample_0000") + " --profile desk " + kQuick + " -o " + p(out)) == 0);
  for (const char* f : {"coarse.png", "coverage.png", "fitted.obj", "trace.csv"}) CHECK(fs::exists(out / f));
  CHECK(!fs::exists(out / ".partial-0"));

  SUBCASE("refine and warp-tps consume fit outputs") {
    const fs::path r = work() / "refined";
    CHECK(run("refine --template quad --coarse " + p(out / "coarse.png") + " --coverage " + p(out / "coverage.png") +
              " -o " + p(r)) == 0);
    CHECK(fs::exists(r / "fine.png"));
    CHECK(fs::exists(r / "mask.png"));
    const fs::path t = work() / "tps";
    CHECK(run("warp-tps " + view_args(dataset() / "sample_0000") + " --resolution 128 -o " + p(t)) == 0);
    CHECK(fs::exists(t / "tps.png"));
    CHECK(fs::exists(t / "tps_mask.png"));
  }
  SUBCASE("preview renders both views") {
    const fs::path v = work() / "preview";
    CHECK(run("preview --mesh " + p(out / "fitted.obj") + " --texture " + p(out / "coarse.png") +
              " --size 96 -o " + p(v)) == 0);
    CHECK(fs::exists(v / "front_render.png"));
    CHECK(fs::exists(v / "back_render.png"));
  }
}

TEST_CASE("error paths leave nothing behind") {
  const fs::path s = dataset() / "sample_0001";

  SUBCASE("missing back view") {
    const fs::path out = work() / "no_back";
    const std::string args = "fit --template quad --front " + p(s / "front.png") + " --mask-front " +
                             p(s / "mask_front.png") + " --mask-back " + p(s / "mask_back.png") + " --landmarks " +
                             p(s / "landmarks.json") + " -o " + p(out);
    CHECK(run(args) == 2);
    CHECK(!fs::exists(out));
    CHECK(last_log().find("gtex: error code=2") != std::string::npos);
  }
  SUBCASE("unreadable input") {
    const fs::path out = work() / "bad_file";
    std::string args = view_args(s);
    args.replace(args.find("back.png"), 8, "nope.png");
    CHECK(run("fit " + args + " --profile desk -o " + p(out)) == 3);
    CHECK(!fs::exists(out));
  }
  SUBCASE("unknown config key") {
    CHECK(run("fit " + view_args(s) + " --set bogus=1 -o " + p(work() / "bogus")) == 2);
    CHECK(!fs::exists(work() / "bogus"));
  }
  SUBCASE("unknown subcommand") { CHECK(run("frobnicate") == 2); }
}

TEST_CASE("cleanup") { fs::remove_all(work()); }
