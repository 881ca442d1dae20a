#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stream/cli/bench.hpp"
#include "stream/cli/cli.hpp"
#include "stream/cli/settings.hpp"
#include "stream/common/errors.hpp"
#include "stream/common/worker_pool.hpp"
#include "stream/geometry/formats.hpp"
#include "stream/layer/checkpoint.hpp"
#include "stream/train/trainer.hpp"

using namespace stream;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = STREAM_FIXTURE_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "stream");
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

// Fresh directory per test under the system temp dir.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stream_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

const char* kSmallIni =
    "[train]\nepochs=2\n[task]\ntrain=40\nval=10\nheight=3\nmin_events=32\nmax_events=48\n";

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({"verify", "--help"}).code == cli::kOk);
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({"verify", "--suite", "nope"}).code == cli::kUsageError);
  CHECK(run({"verify", "--suite", "scan", "--inject-fault", "nope"}).code == cli::kUsageError);
  CHECK(run({"--workers", "0", "verify", "--suite", "geometry"}).code == cli::kUsageError);
  CHECK(run({"train", "--variant", "stream-xx"}).code == cli::kUsageError);
  CHECK(run({"convert", "/nonexistent/a.csv", "/nonexistent/b.bin"}).code == cli::kDataError);
  CHECK(run({"infer", "--checkpoint", "/nonexistent/model.ckpt"}).code == cli::kDataError);

  const auto ok = run({"--seed", "3", "verify", "--suite", "geometry"});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.find("summary") != std::string::npos);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  const auto broken = run({"verify", "--suite", "scan", "--inject-fault", "flip-combine"});
  CHECK(broken.code == cli::kVerificationFailed);
  CHECK(broken.out.find("fault=flip_combine_sign") != std::string::npos);
  CHECK(broken.out.find("FAIL scan.associativity") != std::string::npos);
}

TEST_CASE("flags override the config file which overrides defaults") {
  const auto dir = scratch("precedence");
  write_text(dir / "run.ini", "[run]\nseed=5\n[verify]\nsuite=ssm\n");
  const auto from_file = run({"--config", (dir / "run.ini").string(), "verify", "--suite", "geometry"});
  CHECK(from_file.err.find("run.seed=5") != std::string::npos);
  CHECK(from_file.err.find("verify.suite=geometry") != std::string::npos);
  CHECK(from_file.out.find("verify suite=geometry seed=5") == 0);

  const auto flag = run({"--config", (dir / "run.ini").string(), "--seed", "6", "verify", "--suite", "geometry"});
  CHECK(flag.out.find("seed=6") != std::string::npos);
  CHECK(run({"verify", "--suite", "geometry"}).out.find("seed=0") != std::string::npos);

  write_text(dir / "typo.ini", "[run]\nsed=5\n");
  const auto typo = run({"--config", (dir / "typo.ini").string(), "verify"});
  CHECK(typo.code == cli::kUsageError);
  CHECK(typo.err.find("sed") != std::string::npos);

  cli::Settings s = cli::Settings::defaults();
  CHECK_THROWS_AS(s.set("train.nope", "1"), ConfigError);
  s.set("train.epochs", "4");
  CHECK(s.unsigned_value("train.epochs") == 4);
  CHECK_THROWS_AS(s.set("train.epochs", "four"), ConfigError);
}

TEST_CASE("verify and bench write their report to --out as well") {
  const auto dir = scratch("report");
  const auto r = run({"--out", (dir / "report.txt").string(), "verify", "--suite", "geometry", "--seed", "2"});
  CHECK(r.code == cli::kOk);
  CHECK(slurp(dir / "report.txt") == r.out);
  CHECK(run({"verify", "--suite", "geometry", "--seed", "2"}).out == r.out);

  const auto bench = run({"bench", "--n", "2048", "--channels", "2", "--m", "2", "--worker-counts", "1,2",
                          "--repeats", "1"});
  CHECK(bench.code == cli::kOk);
  std::istringstream lines(bench.out);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  REQUIRE(rows.size() == 7);
  CHECK(rows[0].find("bench channels=2 m=2") == 0);
  CHECK(rows[1].find("mode") == 0);
  CHECK(rows[2].find("sequential") == 0);
  CHECK(rows[3].find("parallel") == 0);
  CHECK(rows[4].find("parallel") == 0);
  CHECK(rows[5].find("4096") != std::string::npos);
  CHECK(rows[6].find("doubling_ratio=") == 0);
  CHECK(run({"bench", "--worker-counts", "1,x"}).code == cli::kUsageError);
}

TEST_CASE("train is deterministic and its checkpoint drives infer") {
  const auto dir = scratch("train");
  write_text(dir / "small.ini", kSmallIni);
  const auto a = run({"--config", (dir / "small.ini").string(), "--out", (dir / "a").string(), "train"});
  const auto b = run({"--config", (dir / "small.ini").string(), "--out", (dir / "b").string(), "train"});
  REQUIRE(a.code == cli::kOk);
  CHECK(a.out == b.out);
  CHECK(a.out.find("epoch=2 split=val") != std::string::npos);
  CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt"));
  std::ifstream ma(dir / "a" / "metrics.txt"), mb(dir / "b" / "metrics.txt");
  CHECK(train::same_metrics(train::read_metrics(ma), train::read_metrics(mb)));
  CHECK(run({"--config", (dir / "a" / "config.ini").string(), "--out", (dir / "c").string(), "train"}).out == a.out);
  const auto other = run({"--config", (dir / "small.ini").string(), "--seed", "1", "train"});
  CHECK(other.out != a.out);

  const auto model = layer::load_checkpoint(dir / "a" / "model.ckpt");
  const auto stream = geometry::load_events(kFixtures / "ten_events.csv");
  REQUIRE(stream.width == model.sensor_width);
  REQUIRE(stream.height == model.sensor_height);
  const auto csv = slurp(kFixtures / "ten_events.csv");
  const auto inferred = run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string()}, csv);
  REQUIRE(inferred.code == cli::kOk);
  std::istringstream lines(inferred.out);
  std::size_t emitted = 0;
  for (std::string line; std::getline(lines, line); ++emitted) {
    std::size_t index = 0;
    double p0 = 0, p1 = 0;
    unsigned long long t = 0;
    REQUIRE(std::sscanf(line.c_str(), "event=%zu t=%llu posterior=%lf,%lf", &index, &t, &p0, &p1) == 4);
    geometry::EventStream prefix{stream.width, stream.height,
                                 {stream.events.begin(), stream.events.begin() + index + 1}};
    const auto batch = train::softmax(layer::event_forward(model, geometry::tokenize_events(prefix)));
    CHECK(t == stream.events[index].t);
    CHECK(std::abs(p0 - batch[0]) <= 5e-9);
    CHECK(std::abs(p1 - batch[1]) <= 5e-9);
  }
  CHECK(emitted > 0);

  // the native file gives the same posteriors, and --every thins them
  const auto bin = dir / "ten.bin";
  REQUIRE(run({"convert", (kFixtures / "ten_events.csv").string(), bin.string()}).code == cli::kOk);
  CHECK(run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string(), bin.string()}).out == inferred.out);
  const auto sparse = run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string(), "--every", "3"}, csv);
  CHECK(sparse.out.size() < inferred.out.size());

  CHECK(run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string()}, "").out.empty());
  CHECK(run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string()}, "").code == cli::kOk);

  const auto bad = run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string()},
                       csv + "oops\n99999999,9,9,1\n");
  CHECK(bad.code == cli::kOk);
  CHECK(bad.out == inferred.out);
  CHECK(bad.err.find("skipped=2") != std::string::npos);
  CHECK(bad.err.find("outside") != std::string::npos);

  const auto wrong_sensor = run({"infer", "--checkpoint", (dir / "a" / "model.ckpt").string()},
                                "# width=9 height=9\nt,x,y,polarity\n1,0,0,1\n");
  CHECK(wrong_sensor.code == cli::kDataError);
}

TEST_CASE("convert round trips events and points") {
  const auto dir = scratch("convert");
  const auto csv = kFixtures / "ten_events.csv";
  REQUIRE(run({"convert", csv.string(), (dir / "ten.bin").string()}).code == cli::kOk);
  REQUIRE(run({"convert", (dir / "ten.bin").string(), (dir / "ten.csv").string()}).code == cli::kOk);
  CHECK(slurp(dir / "ten.csv") == slurp(csv));

  REQUIRE(run({"convert", (kFixtures / "one_event.bin").string(), (dir / "one.csv").string()}).code == cli::kOk);
  REQUIRE(run({"convert", (dir / "one.csv").string(), (dir / "one.bin").string()}).code == cli::kOk);
  CHECK(slurp(dir / "one.bin") == slurp(kFixtures / "one_event.bin"));

  write_text(dir / "cloud.txt", "0 0 0\n1.5 -2 0.25\n1e-3 4 5\n");
  REQUIRE(run({"convert", "--format", "points", (dir / "cloud.txt").string(), (dir / "cloud.bin").string()}).code ==
          cli::kOk);
  REQUIRE(run({"convert", "--format", "points", (dir / "cloud.bin").string(), (dir / "back.txt").string()}).code ==
          cli::kOk);
  REQUIRE(run({"convert", "--format", "points", (dir / "back.txt").string(), (dir / "again.bin").string()}).code ==
          cli::kOk);
  CHECK(slurp(dir / "again.bin") == slurp(dir / "cloud.bin"));
  CHECK(geometry::decode_points(geometry::read_file(dir / "cloud.bin")).size() == 3);

  write_text(dir / "oob.csv", "# width=4 height=4\nt,x,y,polarity\n1,0,0,1\n2,4,0,1\n");
  const auto oob = run({"convert", (dir / "oob.csv").string(), (dir / "oob.bin").string()});
  CHECK(oob.code == cli::kDataError);
  CHECK(oob.err.find("line 4") != std::string::npos);
  CHECK(run({"convert", "--format", "meshes", csv.string(), (dir / "x.bin").string()}).code == cli::kUsageError);
}

TEST_CASE("bench measurements") {
  cli::BenchConfig config;
  config.length = std::size_t{1} << 17;
  config.channels = 4;
  config.m = 4;
  config.repeats = 5;
  config.worker_counts = {1, 2, 4};
  const auto result = cli::run_bench(config);

  // sequential time is linear in the length
  CHECK(result.doubling_ratio >= 1.6);
  CHECK(result.doubling_ratio <= 2.6);

  const std::size_t cores = WorkerPool::hardware_workers();
  double previous = 0.0;
  for (const auto& row : result.rows) {
    if (row.mode != "parallel") continue;
    // one worker runs the sequential scan in a single chunk
    if (row.workers == 1) CHECK(row.speedup == doctest::Approx(1.0).epsilon(0.25));
    if (row.workers <= cores) {
      CHECK(row.speedup >= 0.9 * previous);
      previous = row.speedup;
    }
  }
  cli::BenchConfig empty = config;
  empty.worker_counts.clear();
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}
