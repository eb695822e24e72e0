#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dsfsum/cli.hpp"
#include "support/oracles.hpp"

namespace {

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = dsf::cli::run(args, out, err);
  if (err_text != nullptr) *err_text = err.str();
  return code;
}

// synth -> segments -> train -> embed -> summarize -> evaluate -> report -> plot
void run_pipeline(const std::filesystem::path& dir, const std::string& seed) {
  const std::string world = (dir / "world").string();
  REQUIRE(run({"--seed", seed, "synth", "--out", world, "--videos", "4", "--clusters", "2",
               "--duration", "20", "--fps", "2", "--video-dim", "8", "--text-dim", "6"}) == 0);
  REQUIRE(run({"segments", "--track", world + "/video_0000.track.jsonl", "--out",
               (dir / "seg.jsonl").string()}) == 0);
  REQUIRE(run({"--seed", seed, "train", "--track", world + "/video_0000.track.jsonl", "--track",
               world + "/video_0001.track.jsonl", "--track", world + "/video_0002.track.jsonl",
               "--track", world + "/video_0003.track.jsonl", "--descriptions",
               world + "/descriptions.jsonl", "--out", (dir / "model.bin").string(), "--log",
               (dir / "train.log").string(), "--hidden", "6", "--embed-dim", "3", "--epochs",
               "2", "--negatives", "4", "--lr", "0.01"}) == 0);
  REQUIRE(run({"embed", "--model", (dir / "model.bin").string(), "--manifest",
               (dir / "seg.jsonl").string(), "--track", world + "/video_0000.track.jsonl",
               "--out", (dir / "points.jsonl").string()}) == 0);
  REQUIRE(run({"summarize", "--points", (dir / "points.jsonl").string(), "--manifest",
               (dir / "seg.jsonl").string(), "--out", (dir / "summary.jsonl").string()}) == 0);
  REQUIRE(run({"evaluate", "--summary", (dir / "summary.jsonl").string(), "--references",
               world + "/video_0000.refs.jsonl", "--out", (dir / "score.jsonl").string()}) == 0);
  REQUIRE(run({"report", (dir / "score.jsonl").string(), "--out-prefix",
               (dir / "rep").string()}) == 0);
  REQUIRE(run({"--seed", seed, "plot", "--points", (dir / "points.jsonl").string(), "--out",
               (dir / "scatter.svg").string()}) == 0);
}

}  // namespace

TEST_CASE("pipeline runs end to end") {
  oracles::TempDir dir("cli_pipeline");
  run_pipeline(dir.path, "7");
  for (const char* f : {"seg.jsonl", "model.bin", "train.log", "points.jsonl", "summary.jsonl",
                        "score.jsonl", "rep.csv", "rep_chart.svg", "scatter.svg"})
    CHECK(std::filesystem::exists(dir.path / f));
}

TEST_CASE("unknown flag exits 1 with usage text") {
  std::string err;
  CHECK(run({"segments", "--no-such-flag", "x"}, &err) == 1);
  CHECK_FALSE(err.empty());
}

TEST_CASE("unknown subcommand exits 1") {
  CHECK(run({"frobnicate"}) == 1);
}

TEST_CASE("missing input file exits 2 and names the path") {
  std::string err;
  CHECK(run({"segments", "--track", "/no/such/track.jsonl", "--out", "/tmp/x.jsonl"}, &err) == 2);
  CHECK(err.find("/no/such/track.jsonl") != std::string::npos);
}

TEST_CASE("malformed input exits 1") {
  oracles::TempDir dir("cli_badinput");
  std::ofstream(dir.path / "bad.jsonl") << "this is not a track\n";
  std::string err;
  CHECK(run({"segments", "--track", (dir.path / "bad.jsonl").string(), "--out",
             (dir.path / "o.jsonl").string()},
            &err) == 1);
}

TEST_CASE("help exits 0") {
  CHECK(run({"--help"}) == 0);
  CHECK(run({"summarize", "--help"}) == 0);
}

TEST_CASE("gradcheck passes at default tolerance and fails at an absurd one") {
  CHECK(run({"gradcheck", "--seeds", "2"}) == 0);
  CHECK(run({"gradcheck", "--seeds", "1", "--tolerance", "1e-18"}) == 1);
}

TEST_CASE("config file supplies defaults, command line overrides, unknown keys rejected") {
  oracles::TempDir dir("cli_config");
  const auto config = dir.path / "run.conf";
  const auto world = dir.path / "world";
  {
    std::ofstream out(config);
    out << "seed=9\n";
    out << "[synth]\n";
    out << "videos=3\n";
    out << "duration=15\n";
  }
  std::string err;
  CHECK(run({"--config", config.string(), "synth", "--out", world.string()}, &err) == 0);
  CHECK(std::filesystem::exists(world / "video_0002.track.jsonl"));
  CHECK_FALSE(std::filesystem::exists(world / "video_0003.track.jsonl"));

  // command line wins over the file
  oracles::TempDir dir2("cli_config2");
  CHECK(run({"--config", config.string(), "synth", "--out", (dir2.path / "w").string(),
             "--videos", "2"}) == 0);
  CHECK(std::filesystem::exists(dir2.path / "w" / "video_0001.track.jsonl"));
  CHECK_FALSE(std::filesystem::exists(dir2.path / "w" / "video_0002.track.jsonl"));

  // unknown key
  {
    std::ofstream out(config);
    out << "definitely_not_a_flag=1\n";
  }
  CHECK(run({"--config", config.string(), "synth", "--out", (dir.path / "w2").string()}, &err) ==
        1);
}

TEST_CASE("numeric flags are range-checked") {
  CHECK(run({"synth", "--out", "/tmp/never", "--videos", "-3"}) == 1);
  CHECK(run({"--precision", "40", "report", "x", "--out-prefix", "y"}) == 1);
}

TEST_CASE("rerun with the same seed is byte-identical") {
  oracles::TempDir a("cli_det_a");
  oracles::TempDir b("cli_det_b");
  run_pipeline(a.path, "13");
  run_pipeline(b.path, "13");
  for (const char* f :
       {"world/video_0000.track.jsonl", "world/descriptions.jsonl",
        "world/video_0000.refs.jsonl", "seg.jsonl", "model.bin", "train.log", "points.jsonl",
        "summary.jsonl", "score.jsonl", "rep.csv", "rep_chart.svg", "scatter.svg"})
    CHECK(oracles::slurp(a.path / f) == oracles::slurp(b.path / f));
}

TEST_CASE("different seeds produce different models") {
  oracles::TempDir a("cli_seed_a");
  oracles::TempDir b("cli_seed_b");
  run_pipeline(a.path, "1");
  run_pipeline(b.path, "2");
  CHECK(oracles::slurp(a.path / "model.bin") != oracles::slurp(b.path / "model.bin"));
}
