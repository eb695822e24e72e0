#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "dsfsum/feature_io.hpp"
#include "support/oracles.hpp"

using namespace dsf;

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

FeatureTrack random_track(std::uint64_t seed, int dim, std::size_t frames) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureTrack t;
  t.video_id = "rt_" + std::to_string(seed);
  t.dim = dim;
  t.fps = 2.0;
  t.duration_s = static_cast<double>(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    t.times.push_back(static_cast<double>(i) + 0.25);
    Eigen::VectorXd v(dim);
    for (int d = 0; d < dim; ++d) v[d] = gauss(rng);
    t.frames.push_back(v);
  }
  return t;
}

ModelFile random_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  ModelFile m;
  m.metadata = {{"seed", seed}, {"note", "random"}};
  auto tensor = [&rng, &u](const std::string& name, std::vector<std::uint64_t> dims) {
    ModelFile::Tensor t;
    t.name = name;
    t.dims = dims;
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    for (std::uint64_t i = 0; i < n; ++i) t.data.push_back(u(rng));
    return t;
  };
  m.tensors.push_back(tensor("video.W1", {7, 5}));
  m.tensors.push_back(tensor("video.b1", {5}));
  m.tensors.push_back(tensor("text.W1", {4, 5}));
  return m;
}

}  // namespace

TEST_CASE("feature track: well formed input") {
  oracles::TempDir dir("track_ok");
  write_file(dir.path / "t.jsonl",
             R"({"video_id":"v1","dim":4,"fps":1.0,"duration_s":3.0})"
             "\n"
             R"({"t":0.5,"v":[1,2,3,4]})"
             "\n"
             R"({"t":1.5,"v":[5,6,7,8]})"
             "\n"
             R"({"t":2.5,"v":[9,10,11,12]})"
             "\n");
  const FeatureTrack t = read_feature_track(dir.path / "t.jsonl");
  CHECK(t.video_id == "v1");
  CHECK(t.dim == 4);
  CHECK(t.frame_count() == 3);
  CHECK(t.frames[1][2] == 7.0);
}

TEST_CASE("feature track: dimension mismatch names the line") {
  oracles::TempDir dir("track_dim");
  write_file(dir.path / "t.jsonl",
             R"({"video_id":"v1","dim":4,"fps":1.0,"duration_s":3.0})"
             "\n"
             R"({"t":0.5,"v":[1,2,3,4]})"
             "\n"
             R"({"t":1.5,"v":[5,6,7]})"
             "\n");
  try {
    read_feature_track(dir.path / "t.jsonl");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3") != std::string::npos);
    CHECK(msg.find("dim=4") != std::string::npos);
  }
}

TEST_CASE("feature track: non-monotonic timestamps rejected") {
  oracles::TempDir dir("track_mono");
  write_file(dir.path / "t.jsonl",
             R"({"video_id":"v1","dim":1,"fps":1.0,"duration_s":3.0})"
             "\n"
             R"({"t":0.0,"v":[1]})"
             "\n"
             R"({"t":1.0,"v":[2]})"
             "\n"
             R"({"t":0.5,"v":[3]})"
             "\n");
  CHECK_THROWS_AS(read_feature_track(dir.path / "t.jsonl"), ValidationError);
}

TEST_CASE("feature track: non-finite payloads rejected on read and write") {
  oracles::TempDir dir("track_nan");
  write_file(dir.path / "t.jsonl",
             R"({"video_id":"v1","dim":1,"fps":1.0,"duration_s":3.0})"
             "\n"
             R"({"t":0.5,"v":[1e999]})"
             "\n");
  CHECK_THROWS_AS(read_feature_track(dir.path / "t.jsonl"), ValidationError);

  FeatureTrack t = random_track(1, 3, 4);
  t.frames[2][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(write_feature_track(dir.path / "bad.jsonl", t), ValidationError);
}

TEST_CASE("feature track: malformed header") {
  oracles::TempDir dir("track_hdr");
  write_file(dir.path / "a.jsonl", "{\"video_id\":\"v\",\"dim\":0,\"fps\":1,\"duration_s\":3}\n");
  CHECK_THROWS_AS(read_feature_track(dir.path / "a.jsonl"), ValidationError);
  write_file(dir.path / "b.jsonl", "not json\n");
  CHECK_THROWS_AS(read_feature_track(dir.path / "b.jsonl"), ValidationError);
  write_file(dir.path / "c.jsonl", "");
  CHECK_THROWS_AS(read_feature_track(dir.path / "c.jsonl"), ValidationError);
}

TEST_CASE("feature track: missing file is an I/O error") {
  CHECK_THROWS_AS(read_feature_track("/nonexistent/path/track.jsonl"), IoError);
}

TEST_CASE("feature track round trip preserves everything") {
  oracles::TempDir dir("track_rt");
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const FeatureTrack t = random_track(seed, 6, 20);
    write_feature_track(dir.path / "t.jsonl", t);
    const FeatureTrack r = read_feature_track(dir.path / "t.jsonl");
    CHECK(r.video_id == t.video_id);
    CHECK(r.dim == t.dim);
    CHECK(r.fps == t.fps);
    CHECK(r.duration_s == t.duration_s);
    REQUIRE(r.frame_count() == t.frame_count());
    for (std::size_t i = 0; i < t.frame_count(); ++i) {
      CHECK(r.times[i] == t.times[i]);
      CHECK(r.frames[i] == t.frames[i]);
    }
  }
}

TEST_CASE("descriptions: round trip and validation") {
  oracles::TempDir dir("desc");
  std::vector<DescriptionVector> descs;
  DescriptionVector d;
  d.desc_id = "d1";
  d.video_id = "v1";
  d.start_s = 0.0;
  d.end_s = 5.0;
  d.y = Eigen::Vector3d(0.1, -0.2, 0.3);
  d.text = "a person rides a bike";
  descs.push_back(d);
  write_descriptions(dir.path / "d.jsonl", descs);
  const auto r = read_descriptions(dir.path / "d.jsonl");
  REQUIRE(r.size() == 1);
  CHECK(r[0].desc_id == "d1");
  CHECK(r[0].y == d.y);
  CHECK(r[0].text == d.text);

  write_file(dir.path / "bad.jsonl",
             R"({"desc_id":"d","video_id":"v","start_s":6.0,"end_s":4.0,"y":[1]})"
             "\n");
  CHECK_THROWS_AS(read_descriptions(dir.path / "bad.jsonl"), ValidationError);
}

TEST_CASE("references: two annotators on a 10s video") {
  oracles::TempDir dir("refs_ok");
  write_file(dir.path / "r.jsonl",
             R"({"video_id":"v1","fps":1.0,"duration_s":10.0})"
             "\n"
             R"({"annotator_id":"a1","intervals":[[0,5]]})"
             "\n"
             R"({"annotator_id":"a2","intervals":[[3,8]]})"
             "\n");
  const ReferenceSummarySet r = read_references(dir.path / "r.jsonl");
  CHECK(r.references.size() == 2);
  CHECK(r.references[0].intervals[0] == Interval{0.0, 5.0});
}

TEST_CASE("references: malformed interval rejected, clipping applied") {
  oracles::TempDir dir("refs_bad");
  write_file(dir.path / "bad.jsonl",
             R"({"video_id":"v1","fps":1.0,"duration_s":10.0})"
             "\n"
             R"({"annotator_id":"a1","intervals":[[6,4]]})"
             "\n");
  CHECK_THROWS_AS(read_references(dir.path / "bad.jsonl"), ValidationError);

  write_file(dir.path / "clip.jsonl",
             R"({"video_id":"v1","fps":1.0,"duration_s":10.0})"
             "\n"
             R"({"annotator_id":"a1","intervals":[[8,15]]})"
             "\n"
             R"({"annotator_id":"a2","intervals":[]})"
             "\n");
  const ReferenceSummarySet r = read_references(dir.path / "clip.jsonl");
  CHECK(r.references[0].intervals[0] == Interval{8.0, 10.0});
  CHECK(r.references[1].intervals.empty());  // empty lists permitted

  write_file(dir.path / "none.jsonl",
             R"({"video_id":"v1","fps":1.0,"duration_s":10.0})"
             "\n");
  CHECK_THROWS_AS(read_references(dir.path / "none.jsonl"), ValidationError);
}

TEST_CASE("references round trip") {
  oracles::TempDir dir("refs_rt");
  ReferenceSummarySet refs;
  refs.video_id = "v9";
  refs.fps = 2.0;
  refs.duration_s = 12.0;
  refs.references.push_back({"a1", {{0.0, 2.0}, {5.5, 7.25}}});
  refs.references.push_back({"a2", {}});
  write_references(dir.path / "r.jsonl", refs);
  const ReferenceSummarySet r = read_references(dir.path / "r.jsonl");
  CHECK(r.video_id == refs.video_id);
  REQUIRE(r.references.size() == 2);
  CHECK(r.references[0].intervals == refs.references[0].intervals);
  CHECK(r.references[1].intervals.empty());
}

TEST_CASE("model: write then read is bit-exact") {
  oracles::TempDir dir("model_rt");
  const ModelFile m = random_model(99);
  write_model(dir.path / "m.bin", m);
  const ModelFile r = read_model(dir.path / "m.bin");
  CHECK(r.version == m.version);
  CHECK(r.metadata == m.metadata);
  REQUIRE(r.tensors.size() == m.tensors.size());
  for (std::size_t i = 0; i < m.tensors.size(); ++i) {
    CHECK(r.tensors[i].name == m.tensors[i].name);
    CHECK(r.tensors[i].dims == m.tensors[i].dims);
    REQUIRE(r.tensors[i].data.size() == m.tensors[i].data.size());
    for (std::size_t j = 0; j < m.tensors[i].data.size(); ++j)
      CHECK(r.tensors[i].data[j] == m.tensors[i].data[j]);
  }
}

TEST_CASE("model: wrong magic") {
  oracles::TempDir dir("model_magic");
  write_file(dir.path / "m.bin", "NOPE0000000000000000");
  try {
    read_model(dir.path / "m.bin");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
}

TEST_CASE("model: truncated payload names the tensor") {
  oracles::TempDir dir("model_trunc");
  const ModelFile m = random_model(7);
  write_model(dir.path / "m.bin", m);
  const std::string full = oracles::slurp(dir.path / "m.bin");
  write_file(dir.path / "cut.bin", full.substr(0, full.size() - 9));
  try {
    read_model(dir.path / "cut.bin");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("text.W1") != std::string::npos);
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("model: version mismatch") {
  oracles::TempDir dir("model_ver");
  const ModelFile m = random_model(7);
  write_model(dir.path / "m.bin", m);
  std::string bytes = oracles::slurp(dir.path / "m.bin");
  bytes[4] = 9;  // version field follows the 4-byte magic
  write_file(dir.path / "v9.bin", bytes);
  CHECK_THROWS_AS(read_model(dir.path / "v9.bin"), ValidationError);
}

TEST_CASE("model: corrupted files never yield invalid objects") {
  oracles::TempDir dir("model_fuzz");
  const ModelFile m = random_model(1234);
  write_model(dir.path / "m.bin", m);
  const std::string full = oracles::slurp(dir.path / "m.bin");
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 60; ++iter) {
    std::string corrupted = full;
    const std::size_t pos = rng() % corrupted.size();
    switch (iter % 3) {
      case 0:
        corrupted = corrupted.substr(0, pos);  // truncate
        break;
      case 1:
        corrupted[pos] = static_cast<char>(rng());  // flip a byte
        break;
      default:
        corrupted += static_cast<char>(rng());  // trailing garbage
        break;
    }
    write_file(dir.path / "f.bin", corrupted);
    try {
      const ModelFile r = read_model(dir.path / "f.bin");
      validate(r);  // if it parses, it must be a valid object
    } catch (const ValidationError&) {
    } catch (const IoError&) {
    }
  }
}

TEST_CASE("reference files: corrupted lines never yield invalid objects") {
  oracles::TempDir dir("refs_fuzz");
  const std::string good =
      R"({"video_id":"v1","fps":1.0,"duration_s":10.0})"
      "\n"
      R"({"annotator_id":"a1","intervals":[[0,5],[6,9]]})"
      "\n";
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 60; ++iter) {
    std::string corrupted = good;
    corrupted[rng() % corrupted.size()] = static_cast<char>('0' + rng() % 75);
    write_file(dir.path / "f.jsonl", corrupted);
    try {
      const ReferenceSummarySet r = read_references(dir.path / "f.jsonl");
      validate(r);
    } catch (const ValidationError&) {
    }
  }
}
