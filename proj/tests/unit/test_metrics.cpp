// Metric suite: ranking metrics against brute-force oracles, interval
// overlap by hand-enumerated cases, scene grouping round-trips, clustering
// agreement, and the Meta-Sum identity.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "bassl/errors.hpp"
#include "bassl/mat.hpp"
#include "bassl/metrics.hpp"
#include "bassl/rng.hpp"

using namespace bassl;

namespace {

// PR step-curve integration with per-prefix recounting (quadratic, no shared
// code with the implementation).
double oracle_ap(std::vector<double> scores, std::vector<uint8_t> labels) {
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  size_t total_pos = 0;
  for (uint8_t y : labels) total_pos += y;
  double ap = 0.0, prev_recall = 0.0;
  for (size_t k = 1; k <= n; ++k) {
    size_t tp = 0;
    for (size_t i = 0; i < k; ++i) tp += labels[order[i]];
    const double precision = static_cast<double>(tp) / static_cast<double>(k);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Mann-Whitney by exhaustive pairwise comparison.
double oracle_auc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  double wins = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// IoU via explicit shot sets; mean-of-best in both directions.
double oracle_miou(const Segmentation& pred, const Segmentation& gt) {
  auto iou = [](std::pair<size_t, size_t> a, std::pair<size_t, size_t> b) {
    std::set<size_t> sa, sb, uni, inter;
    for (size_t i = a.first; i <= a.second; ++i) sa.insert(i);
    for (size_t i = b.first; i <= b.second; ++i) sb.insert(i);
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(),
                   std::inserter(uni, uni.begin()));
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::inserter(inter, inter.begin()));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  };
  auto side = [&](const Segmentation& from, const Segmentation& to) {
    double sum = 0.0;
    for (auto fs : from.segments) {
      double best = 0.0;
      for (auto ts : to.segments) best = std::max(best, iou(fs, ts));
      sum += best;
    }
    return sum / static_cast<double>(from.segments.size());
  };
  return 0.5 * side(pred, gt) + 0.5 * side(gt, pred);
}

Segmentation random_segmentation(size_t n, Rng& rng) {
  Segmentation s;
  size_t start = 0;
  while (start < n) {
    size_t len = 1 + rng.index(4);
    if (start + len > n) len = n - start;
    s.segments.push_back({start, start + len - 1});
    start += len;
  }
  return s;
}

}  // namespace

TEST_CASE("average precision: hand cases and the tie rule") {
  CHECK(average_precision({0.9, 0.1}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(average_precision({0.1, 0.9}, {1, 0}) == doctest::Approx(0.5).epsilon(1e-15));

  // Ties are ranked by ascending original index, so the positive at index 1
  // is seen second: precision at its recall point is 1/2.
  CHECK(average_precision({0.5, 0.5}, {0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(average_precision({0.5, 0.5}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(average_precision({0.1, 0.2}, {0, 0}), NumericError);
  CHECK_THROWS_AS(average_precision({0.1}, {1, 0}), ShapeError);
  CHECK_THROWS_AS(average_precision({}, {}), ShapeError);
}

TEST_CASE("average precision matches a brute-force PR-curve oracle") {
  Rng rng(101);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 2 + rng.index(19);
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    bool has_pos = false;
    for (size_t i = 0; i < n; ++i) {
      // Coarse grid so ties actually occur.
      scores[i] = std::round(rng.uniform() * 4.0) / 4.0;
      labels[i] = rng.uniform() < 0.4 ? 1 : 0;
      has_pos = has_pos || labels[i];
    }
    if (!has_pos) labels[rng.index(n)] = 1;
    CHECK(average_precision(scores, labels) ==
          doctest::Approx(oracle_ap(scores, labels)).epsilon(1e-9));
  }
}

TEST_CASE("AUC-ROC: separable, degenerate, and oracle-checked inputs") {
  CHECK(auc_roc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(auc_roc({0.4, 0.4, 0.4}, {1, 0, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(auc_roc({0.1, 0.9}, {1, 0}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {1, 1}), NumericError);
  CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {0, 0}), NumericError);

  Rng rng(103);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 2 + rng.index(19);
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 4.0) / 4.0;
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[n - 1] = 0;
    CHECK(auc_roc(scores, labels) == doctest::Approx(oracle_auc(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("ranking metrics are invariant under strictly monotone score transforms") {
  Rng rng(107);
  std::vector<double> scores(30);
  std::vector<uint8_t> labels(30);
  for (size_t i = 0; i < 30; ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.uniform() < 0.3 ? 1 : 0;
  }
  labels[3] = 1;
  labels[4] = 0;
  const double ap0 = average_precision(scores, labels);
  const double auc0 = auc_roc(scores, labels);
  auto warped = scores;
  for (auto& s : warped) s = std::exp(3.0 * s) - 0.7;
  CHECK(average_precision(warped, labels) == doctest::Approx(ap0).epsilon(1e-12));
  CHECK(auc_roc(warped, labels) == doctest::Approx(auc0).epsilon(1e-12));
}

TEST_CASE("confusion counts and F1") {
  auto c = confusion({1, 1, 0, 0, 1}, {1, 0, 1, 0, 1});
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);

  CHECK(f1_score({1, 0, 1}, {1, 0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  // tp=1, fp=1, fn=1 -> P = R = 0.5.
  CHECK(f1_score({1, 1, 0, 0}, {1, 0, 1, 0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f1_score({0, 0}, {1, 1}) == 0.0);
  CHECK(f1_score({0, 0}, {0, 0}) == 0.0);
}

TEST_CASE("segmentation validation catches structural defects") {
  Segmentation good;
  good.segments = {{0, 2}, {3, 3}, {4, 9}};
  CHECK_NOTHROW(validate_segmentation(good));
  CHECK(good.num_shots() == 10);

  Segmentation empty;
  CHECK_THROWS_AS(validate_segmentation(empty), DataError);

  Segmentation late_start;
  late_start.segments = {{1, 4}};
  CHECK_THROWS_AS(validate_segmentation(late_start), DataError);

  Segmentation gap;
  gap.segments = {{0, 2}, {4, 5}};
  CHECK_THROWS_AS(validate_segmentation(gap), DataError);

  Segmentation overlap;
  overlap.segments = {{0, 2}, {2, 5}};
  CHECK_THROWS_AS(validate_segmentation(overlap), DataError);

  Segmentation reversed;
  reversed.segments = {{0, 2}, {5, 3}};
  CHECK_THROWS_AS(validate_segmentation(reversed), DataError);
}

TEST_CASE("interval overlap: identity, hand-enumerated case, one-vs-many") {
  Segmentation gt;
  gt.segments = {{0, 3}, {4, 9}};
  CHECK(miou(gt, gt) == doctest::Approx(1.0).epsilon(1e-15));

  Segmentation pred;
  pred.segments = {{0, 5}, {6, 9}};
  CHECK(miou(pred, gt) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(miou(pred, gt) == doctest::Approx(oracle_miou(pred, gt)).epsilon(1e-12));

  // One whole-movie segment against m equal segments scores 1/m.
  const size_t m = 4, N = 12;
  Segmentation whole, equal;
  whole.segments = {{0, N - 1}};
  for (size_t i = 0; i < m; ++i) equal.segments.push_back({i * (N / m), (i + 1) * (N / m) - 1});
  CHECK(miou(whole, equal) == doctest::Approx(1.0 / m).epsilon(1e-12));
  CHECK(miou(whole, equal, MiouMode::pred_to_gt) == doctest::Approx(1.0 / m).epsilon(1e-12));

  Segmentation shorter;
  shorter.segments = {{0, 7}};
  CHECK_THROWS_AS(miou(shorter, gt), DataError);
}

TEST_CASE("interval overlap is symmetric and matches the oracle on random pairs") {
  Rng rng(109);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 4 + rng.index(17);
    auto a = random_segmentation(n, rng);
    auto b = random_segmentation(n, rng);
    const double ab = miou(a, b);
    CHECK(ab == doctest::Approx(miou(b, a)).epsilon(1e-12));
    CHECK(ab == doctest::Approx(oracle_miou(a, b)).epsilon(1e-9));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("meta-sum identity") {
  CHECK(meta_sum(0.5626, 0.4950, 0.9027, 0.4570) == doctest::Approx(241.73).epsilon(1e-9));
  CHECK(meta_sum(0, 0, 0, 0) == 0.0);
  CHECK(meta_sum(1, 1, 1, 1) == doctest::Approx(400.0).epsilon(1e-12));
}

TEST_CASE("thresholding uses a strict comparison and rejects silly thresholds") {
  auto d = threshold_boundaries({0.2, 0.5, 0.7}, 0.5);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == 0);
  CHECK(d[1] == 0);  // exactly at theta is not a boundary
  CHECK(d[2] == 1);
  CHECK_THROWS_AS(threshold_boundaries({0.1}, 0.0), ConfigError);
  CHECK_THROWS_AS(threshold_boundaries({0.1}, 1.0), ConfigError);
}

TEST_CASE("scene grouping closes segments at boundary shots") {
  auto none = group_scenes({0, 0, 0, 0, 0, 0, 0});
  REQUIRE(none.segments.size() == 1);
  CHECK(none.segments[0] == std::pair<size_t, size_t>{0, 6});

  auto two = group_scenes({0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
  REQUIRE(two.segments.size() == 3);
  CHECK(two.segments[0] == std::pair<size_t, size_t>{0, 3});
  CHECK(two.segments[1] == std::pair<size_t, size_t>{4, 8});
  CHECK(two.segments[2] == std::pair<size_t, size_t>{9, 9});

  // Flagging the final shot changes nothing: it closes its segment anyway.
  auto flagged = group_scenes({0, 0, 0, 1, 0, 0, 0, 0, 1, 1});
  CHECK(flagged.segments == two.segments);

  CHECK_THROWS_AS(group_scenes({}), DataError);
}

TEST_CASE("re-deriving decisions from grouped scenes recovers the thresholded vector") {
  Rng rng(113);
  for (int t = 0; t < 100; ++t) {
    const size_t n = 1 + rng.index(20);
    std::vector<double> scores(n);
    for (auto& s : scores) s = rng.uniform();
    auto decisions = threshold_boundaries(scores, 0.5);
    auto seg = group_scenes(decisions);
    CHECK_NOTHROW(validate_segmentation(seg));
    CHECK(seg.num_shots() == n);

    std::vector<uint8_t> rederived(n, 0);
    for (const auto& [lo, hi] : seg.segments) {
      (void)lo;
      rederived[hi] = 1;
    }
    rederived[n - 1] = decisions[n - 1];  // the final shot's flag is not recoverable
    CHECK(rederived == decisions);
  }
}

TEST_CASE("k-means recovers well-separated clusters and is deterministic") {
  // Three tight clusters, far apart.
  Rng rng(127);
  Mat pts(30, 2);
  std::vector<size_t> truth(30);
  for (size_t i = 0; i < 30; ++i) {
    const size_t c = i % 3;
    truth[i] = c;
    pts.at(i, 0) = static_cast<double>(c) * 50.0 + 0.01 * rng.gaussian();
    pts.at(i, 1) = -static_cast<double>(c) * 30.0 + 0.01 * rng.gaussian();
  }
  auto a1 = kmeans(pts, 3, 3, 42);
  CHECK(nmi(a1, truth) == doctest::Approx(1.0).epsilon(1e-12));

  auto a2 = kmeans(pts, 3, 3, 42);
  CHECK(a1 == a2);

  CHECK_THROWS_AS(kmeans(pts, 31, 1, 0), ConfigError);
  CHECK_THROWS_AS(kmeans(pts, 0, 1, 0), ConfigError);
  CHECK_THROWS_AS(kmeans(pts, 3, 0, 0), ConfigError);
  CHECK_THROWS_AS(kmeans(Mat(0, 2), 2, 1, 0), ConfigError);
}

TEST_CASE("normalized mutual information: agreement, permutation, independence") {
  const std::vector<size_t> x = {0, 0, 1, 1, 2, 2, 0, 1};
  CHECK(nmi(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  // Relabeling clusters (0->2, 1->0, 2->1) changes nothing.
  std::vector<size_t> relabeled;
  for (size_t v : x) relabeled.push_back((v + 2) % 3);
  CHECK(nmi(x, relabeled) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<size_t> ones(10, 0);
  CHECK(nmi(ones, ones) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(131);
  std::vector<size_t> a(10000), b(10000);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.index(10);
    b[i] = rng.index(10);
  }
  const double independent = nmi(a, b);
  CHECK(independent >= 0.0);
  CHECK(independent < 0.01);

  // Geometric normalization agrees at the extremes and stays in range.
  CHECK(nmi(x, x, NmiNorm::geometric) == doctest::Approx(1.0).epsilon(1e-12));
  const double g = nmi(a, b, NmiNorm::geometric);
  CHECK(g >= 0.0);
  CHECK(g <= 1.0);

  CHECK_THROWS_AS(nmi({0, 1}, {0, 1, 2}), ShapeError);
  CHECK_THROWS_AS(nmi({}, {}), ShapeError);
}
