#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "dsfsum/summarizer.hpp"
#include "support/oracles.hpp"

using namespace dsf;

namespace {

PointSet points_from(const std::vector<Eigen::VectorXd>& xs) {
  return PointSet::from_vectors(std::span<const Eigen::VectorXd>(xs));
}

PointSet random_set(std::uint64_t seed, std::size_t n, int dim) {
  return points_from(oracles::random_points(seed, n, dim));
}

std::vector<Eigen::VectorXd> scalar_points(std::initializer_list<double> values) {
  std::vector<Eigen::VectorXd> out;
  for (double v : values) out.push_back(Eigen::VectorXd::Constant(1, v));
  return out;
}

}  // namespace

TEST_CASE("objective: hand cases and brute-force oracle") {
  const PointSet two = points_from(scalar_points({0.0, 2.0}));
  const std::vector<int> s0 = {0};
  CHECK(objective(two, s0) == doctest::Approx(4.0));

  const PointSet all = random_set(3, 8, 3);
  std::vector<int> everyone(8);
  std::iota(everyone.begin(), everyone.end(), 0);
  CHECK(objective(all, everyone) == 0.0);  // exact

  const auto pts = oracles::random_points(9, 20, 3);
  const PointSet ps = points_from(pts);
  const std::vector<int> medoids = {2, 11, 17};
  const double want = oracles::brute_objective(pts, {2, 11, 17});
  CHECK(objective(ps, medoids) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(objective(ps, std::span<const int>()), ValidationError);
  const std::vector<int> missing = {99};
  CHECK_THROWS_AS(objective(ps, missing), ValidationError);
}

TEST_CASE("budget_k: floor rule with a minimum of one") {
  CHECK(budget_k(200.0, 5.0) == 6);
  CHECK(budget_k(10.0, 5.0) == 1);
  CHECK(budget_k(100.0, 5.0) == 3);
  CHECK_THROWS_AS(budget_k(0.0, 5.0), ValidationError);
}

TEST_CASE("lazy greedy: K equals L selects everything with zero objective") {
  const PointSet ps = random_set(4, 12, 4);
  const Summary s = lazy_greedy_select(ps, 12);
  CHECK(s.selected.size() == 12);
  CHECK(s.objective_value == 0.0);
}

TEST_CASE("three collinear points, K = 1: the middle point wins") {
  const PointSet ps = points_from(scalar_points({0.0, 1.0, 10.0}));
  // single-medoid objectives, by hand: F({0}) = 1 + 100, F({1}) = 1 + 81,
  // F({10}) = 100 + 81
  CHECK(objective(ps, std::vector<int>{0}) == doctest::Approx(101.0));
  CHECK(objective(ps, std::vector<int>{1}) == doctest::Approx(82.0));
  CHECK(objective(ps, std::vector<int>{2}) == doctest::Approx(181.0));

  const Summary s = lazy_greedy_select(ps, 1);
  REQUIRE(s.selected.size() == 1);
  CHECK(s.selected[0] == 1);
  CHECK(s.objective_value == doctest::Approx(82.0));
}

TEST_CASE("lazy equals naive on random instances") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointSet ps = random_set(seed, 100, 6);
    const Summary lazy = lazy_greedy_select(ps, 8);
    const Summary naive = naive_greedy_select(ps, 8);
    CHECK(lazy.selected == naive.selected);
    CHECK(std::abs(lazy.objective_value - naive.objective_value) <= 1e-9);
  }
}

TEST_CASE("greedy is near-optimal against the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 5 + rng() % 8;  // 5..12
    const PointSet ps = random_set(seed + 500, n, 3);
    const int k = 3;

    const Summary greedy = lazy_greedy_select(ps, k);
    const Summary best = exhaustive_select(ps, k);

    // compare coverage gains: G(S) = L * D0 - F(S)
    double d0 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        d0 = std::max(d0, (ps.points[i].x - ps.points[j].x).squaredNorm());
    const double g_greedy = static_cast<double>(n) * d0 - greedy.objective_value;
    const double g_best = static_cast<double>(n) * d0 - best.objective_value;
    CHECK(g_greedy >= (1.0 - 1.0 / std::exp(1.0)) * g_best - 1e-9);
    CHECK(best.objective_value <= greedy.objective_value + 1e-12);
  }
}

TEST_CASE("exhaustive ties resolve to the lexicographically first subset") {
  // two identical points: {0} and {1} tie; lexicographic order keeps {0}
  const PointSet ps = points_from(scalar_points({5.0, 5.0, 9.0}));
  const Summary s = exhaustive_select(ps, 1);
  CHECK(s.selected == std::vector<int>{0});
}

TEST_CASE("greedy tie-breaking prefers the earliest start time") {
  PointSet ps = points_from(scalar_points({1.0, 1.0, 1.0}));
  // all gains equal; earliest start (index 0) must win in both variants
  CHECK(lazy_greedy_select(ps, 1).selected == std::vector<int>{0});
  CHECK(naive_greedy_select(ps, 1).selected == std::vector<int>{0});

  // reverse the start times: now the last index has the earliest start
  ps.points[0].start_s = 2.0;
  ps.points[1].start_s = 1.0;
  ps.points[2].start_s = 0.0;
  CHECK(lazy_greedy_select(ps, 1).selected == std::vector<int>{2});
  CHECK(naive_greedy_select(ps, 1).selected == std::vector<int>{2});
}

TEST_CASE("uniform baseline: spacing rules") {
  CHECK(uniform_baseline(random_set(1, 6, 2), 6).selected ==
        std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(uniform_baseline(random_set(2, 11, 2), 3).selected == std::vector<int>{0, 5, 10});
  CHECK(uniform_baseline(random_set(3, 56, 2), 6).selected ==
        std::vector<int>{0, 11, 22, 33, 44, 55});
  CHECK(uniform_baseline(random_set(4, 11, 2), 1).selected == std::vector<int>{5});
}

TEST_CASE("property: uniform baseline indices strictly increase and stay in range") {
  std::mt19937_64 rng(12);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 2 + rng() % 40;
    const int k = 1 + static_cast<int>(rng() % n);
    const Summary s = uniform_baseline(random_set(static_cast<std::uint64_t>(iter), n, 2), k);
    REQUIRE(s.selected.size() == static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < s.selected.size(); ++i) {
      CHECK(s.selected[i] >= 0);
      CHECK(s.selected[i] < static_cast<int>(n));
      if (i > 0) CHECK(s.selected[i] > s.selected[i - 1]);
    }
  }
}

TEST_CASE("property: adding a medoid never increases the objective") {
  std::mt19937_64 rng(77);
  for (int iter = 0; iter < 40; ++iter) {
    const std::size_t n = 5 + rng() % 20;
    const PointSet ps = random_set(static_cast<std::uint64_t>(iter + 100), n, 4);
    std::vector<int> subset;
    for (std::size_t i = 0; i < n; ++i)
      if (rng() % 3 == 0) subset.push_back(static_cast<int>(i));
    if (subset.empty()) subset.push_back(0);
    const int extra = static_cast<int>(rng() % n);
    std::vector<int> bigger = subset;
    if (std::find(bigger.begin(), bigger.end(), extra) == bigger.end()) bigger.push_back(extra);
    CHECK(objective(ps, bigger) <= objective(ps, subset) + 1e-12);
  }
}

TEST_CASE("property: greedy gain sequence is non-increasing") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointSet ps = random_set(seed + 40, 30, 4);
    const int k = 8;
    // reconstruct the gains from the objective trajectory of naive greedy
    std::vector<double> objectives;
    for (int kk = 1; kk <= k; ++kk)
      objectives.push_back(naive_greedy_select(ps, kk).objective_value);
    double d0 = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        d0 = std::max(d0, (ps.points[i].x - ps.points[j].x).squaredNorm());
    double prev_gain = static_cast<double>(ps.size()) * d0 - objectives[0];
    for (std::size_t i = 1; i < objectives.size(); ++i) {
      const double gain = objectives[i - 1] - objectives[i];
      CHECK(gain <= prev_gain + 1e-9);
      prev_gain = gain;
    }
  }
}

TEST_CASE("cost-aware ranking with uniform costs matches plain ranking") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointSet ps = random_set(seed + 900, 40, 5);
    const Summary plain = lazy_greedy_select(ps, 6, {});
    const Summary costed = lazy_greedy_select(ps, 6, {.cost_aware = true});
    CHECK(plain.selected == costed.selected);
  }
}

TEST_CASE("no-overlap rejects candidates overlapping prior picks") {
  // identical features so gains tie; intervals [i, i+2) overlap neighbours
  std::vector<Eigen::VectorXd> xs = scalar_points({0.0, 0.0, 0.0, 0.0});
  PointSet ps = points_from(xs);
  for (std::size_t i = 0; i < ps.points.size(); ++i) {
    ps.points[i].start_s = static_cast<double>(i);
    ps.points[i].end_s = static_cast<double>(i) + 2.0;
  }
  const Summary s = lazy_greedy_select(ps, 3, {.no_overlap = true});
  REQUIRE(s.selected.size() == 2);  // only {0, 2} fit without overlap
  CHECK(s.selected == std::vector<int>{0, 2});
  const Summary n = naive_greedy_select(ps, 3, {.no_overlap = true});
  CHECK(n.selected == s.selected);
}

TEST_CASE("render_timeline merges overlapping picks") {
  PointSet ps = random_set(5, 4, 2);
  ps.points[0].start_s = 0.0;
  ps.points[0].end_s = 5.0;
  ps.points[1].start_s = 4.0;
  ps.points[1].end_s = 9.0;
  ps.points[2].start_s = 12.0;
  ps.points[2].end_s = 17.0;
  ps.points[3].start_s = 17.0;
  ps.points[3].end_s = 20.0;
  const std::vector<int> selected = {3, 0, 1, 2};
  const auto timeline = render_timeline(ps, selected);
  REQUIRE(timeline.size() == 2);
  CHECK(timeline[0] == Interval{0.0, 9.0});
  CHECK(timeline[1] == Interval{12.0, 20.0});
}

TEST_CASE("summary invariants: F(S) equals an independent recomputation") {
  const auto xs = oracles::random_points(123, 30, 4);
  const PointSet ps = points_from(xs);
  const Summary s = lazy_greedy_select(ps, 5);
  std::vector<std::size_t> medoids;
  for (int idx : s.selected) medoids.push_back(static_cast<std::size_t>(idx));
  CHECK(s.objective_value ==
        doctest::Approx(oracles::brute_objective(xs, medoids)).epsilon(1e-12));
  // temporal order
  for (std::size_t i = 1; i < s.selected.size(); ++i)
    CHECK(ps.at_index(s.selected[i]).start_s >= ps.at_index(s.selected[i - 1]).start_s);
}

TEST_CASE("summary file round trip") {
  oracles::TempDir dir("summary");
  const PointSet ps = random_set(6, 10, 3);
  const Summary s = lazy_greedy_select(ps, 3);
  write_summary(dir.path / "s.jsonl", {"v1", "lazy", s});
  const SummaryFile r = read_summary(dir.path / "s.jsonl");
  CHECK(r.video_id == "v1");
  CHECK(r.algorithm == "lazy");
  CHECK(r.summary.selected == s.selected);
  CHECK(r.summary.k == s.k);
  CHECK(r.summary.objective_value == s.objective_value);
  CHECK(r.summary.merged_timeline == s.merged_timeline);
}

TEST_CASE("selection errors") {
  const PointSet ps = random_set(8, 5, 2);
  CHECK_THROWS_AS(lazy_greedy_select(ps, 0), ValidationError);
  PointSet empty;
  CHECK_THROWS_AS(lazy_greedy_select(empty, 1), ValidationError);
  // K > L clamps to L
  CHECK(lazy_greedy_select(ps, 50).selected.size() == 5);
}
