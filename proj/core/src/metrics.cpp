#include "bassl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "bassl/errors.hpp"
#include "bassl/rng.hpp"
#include "json.hpp"

namespace bassl {

namespace {

void check_paired(size_t a, size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a) + " scores vs " +
                     std::to_string(b) + " labels");
  }
  if (a == 0) throw ShapeError(std::string(op) + ": empty input");
}

}  // namespace

double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  check_paired(scores.size(), labels.size(), "average_precision");
  const size_t npos = static_cast<size_t>(std::count(labels.begin(), labels.end(), uint8_t(1)));
  if (npos == 0) throw NumericError("average_precision: no positive labels");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double ap = 0.0;
  size_t tp = 0;
  for (size_t rank = 1; rank <= order.size(); ++rank) {
    if (labels[order[rank - 1]]) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank) / static_cast<double>(npos);
    }
  }
  return ap;
}

double auc_roc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
  check_paired(scores.size(), labels.size(), "auc_roc");
  const size_t n = scores.size();
  const size_t npos = static_cast<size_t>(std::count(labels.begin(), labels.end(), uint8_t(1)));
  const size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) throw NumericError("auc_roc: labels contain a single class");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Midranks: every member of a tie group gets the group's average rank.
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  for (size_t t = 0; t < n; ++t) {
    if (labels[t]) pos_rank_sum += rank[t];
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(npos) * static_cast<double>(npos + 1);
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

Confusion confusion(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels) {
  check_paired(decisions.size(), labels.size(), "confusion");
  Confusion c;
  for (size_t t = 0; t < decisions.size(); ++t) {
    if (decisions[t] && labels[t]) ++c.tp;
    else if (decisions[t] && !labels[t]) ++c.fp;
    else if (!decisions[t] && labels[t]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels) {
  const Confusion c = confusion(decisions, labels);
  if (c.tp == 0) return 0.0;
  const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double r = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * p * r / (p + r);
}

void validate_segmentation(const Segmentation& seg) {
  if (seg.segments.empty()) throw DataError("segmentation: no segments");
  if (seg.segments.front().first != 0) throw DataError("segmentation: first segment must start at 0");
  for (size_t s = 0; s < seg.segments.size(); ++s) {
    const auto& [lo, hi] = seg.segments[s];
    if (lo > hi) throw DataError("segmentation: segment " + std::to_string(s) + " has start > end");
    if (s > 0 && lo != seg.segments[s - 1].second + 1) {
      throw DataError("segmentation: gap or overlap before segment " + std::to_string(s));
    }
  }
}

namespace {

double interval_iou(std::pair<size_t, size_t> a, std::pair<size_t, size_t> b) {
  const double lo = static_cast<double>(std::max(a.first, b.first));
  const double hi = static_cast<double>(std::min(a.second, b.second));
  const double overlap = hi >= lo ? hi - lo + 1.0 : 0.0;
  const double len_a = static_cast<double>(a.second - a.first + 1);
  const double len_b = static_cast<double>(b.second - b.first + 1);
  return overlap / (len_a + len_b - overlap);
}

double directed_miou(const Segmentation& from, const Segmentation& to) {
  double total = 0.0;
  for (const auto& seg : from.segments) {
    double best = 0.0;
    for (const auto& other : to.segments) best = std::max(best, interval_iou(seg, other));
    total += best;
  }
  return total / static_cast<double>(from.segments.size());
}

}  // namespace

double miou(const Segmentation& pred, const Segmentation& gt, MiouMode mode) {
  validate_segmentation(pred);
  validate_segmentation(gt);
  if (pred.num_shots() != gt.num_shots()) {
    throw DataError("miou: coverage mismatch: prediction covers " +
                    std::to_string(pred.num_shots()) + " shots, ground truth " +
                    std::to_string(gt.num_shots()));
  }
  if (mode == MiouMode::pred_to_gt) return directed_miou(pred, gt);
  return 0.5 * (directed_miou(pred, gt) + directed_miou(gt, pred));
}

double meta_sum(double ap, double miou, double auc, double f1) {
  return 100.0 * (ap + miou + auc + f1);
}

std::vector<uint8_t> threshold_boundaries(const std::vector<double>& scores, double theta) {
  if (theta <= 0 || theta >= 1) throw ConfigError("threshold must be in (0,1)");
  std::vector<uint8_t> out(scores.size());
  for (size_t t = 0; t < scores.size(); ++t) out[t] = scores[t] > theta ? 1 : 0;
  return out;
}

Segmentation group_scenes(const std::vector<uint8_t>& decisions) {
  if (decisions.empty()) throw DataError("group_scenes: empty decision vector");
  Segmentation seg;
  size_t start = 0;
  for (size_t t = 0; t < decisions.size(); ++t) {
    if (decisions[t] || t + 1 == decisions.size()) {
      seg.segments.emplace_back(start, t);
      start = t + 1;
    }
  }
  return seg;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<size_t> kmeans(const Mat& points, size_t k, size_t restarts, uint64_t seed) {
  const size_t n = points.rows;
  if (n == 0) throw ConfigError("kmeans: no points");
  if (k == 0 || k > n) {
    throw ConfigError("kmeans: k " + std::to_string(k) + " invalid for " + std::to_string(n) +
                      " points");
  }
  if (restarts == 0) throw ConfigError("kmeans: restarts must be >= 1");
  const size_t d = points.cols;

  std::vector<size_t> best_assign;
  double best_inertia = std::numeric_limits<double>::infinity();
  Rng root(seed);
  for (size_t restart = 0; restart < restarts; ++restart) {
    Rng rng = root.split(restart);

    // k-means++ seeding.
    Mat centroids(k, d);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    size_t first = rng.index(n);
    std::copy_n(points.row(first).data(), d, centroids.row(0).data());
    for (size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (size_t p = 0; p < n; ++p) {
        min_d2[p] = std::min(min_d2[p], sq_dist(points.row(p), centroids.row(c - 1)));
        total += min_d2[p];
      }
      size_t pick;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double cum = 0.0;
        pick = n - 1;
        for (size_t p = 0; p < n; ++p) {
          cum += min_d2[p];
          if (cum > target) {
            pick = p;
            break;
          }
        }
      } else {
        pick = rng.index(n);
      }
      std::copy_n(points.row(pick).data(), d, centroids.row(c).data());
    }

    std::vector<size_t> assign(n, 0);
    Mat next(k, d);
    std::vector<size_t> count(k, 0);
    for (int iter = 0; iter < 300; ++iter) {
      for (size_t p = 0; p < n; ++p) {
        double best = std::numeric_limits<double>::infinity();
        size_t arg = 0;
        for (size_t c = 0; c < k; ++c) {
          const double dist = sq_dist(points.row(p), centroids.row(c));
          if (dist < best) {
            best = dist;
            arg = c;
          }
        }
        assign[p] = arg;
      }
      std::fill(next.data.begin(), next.data.end(), 0.0);
      std::fill(count.begin(), count.end(), size_t(0));
      for (size_t p = 0; p < n; ++p) {
        ++count[assign[p]];
        auto src = points.row(p);
        auto dst = next.row(assign[p]);
        for (size_t i = 0; i < d; ++i) dst[i] += src[i];
      }
      double shift = 0.0;
      for (size_t c = 0; c < k; ++c) {
        if (count[c] == 0) {
          std::copy_n(centroids.row(c).data(), d, next.row(c).data());
          continue;
        }
        auto dst = next.row(c);
        for (size_t i = 0; i < d; ++i) dst[i] /= static_cast<double>(count[c]);
        shift = std::max(shift, std::sqrt(sq_dist(dst, centroids.row(c))));
      }
      centroids.data.swap(next.data);
      if (shift < 1e-8) break;
    }

    double inertia = 0.0;
    for (size_t p = 0; p < n; ++p) inertia += sq_dist(points.row(p), centroids.row(assign[p]));
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = std::move(assign);
    }
  }
  return best_assign;
}

double nmi(const std::vector<size_t>& a, const std::vector<size_t>& b, NmiNorm norm) {
  if (a.size() != b.size()) {
    throw ShapeError("nmi: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                     " assignments");
  }
  if (a.empty()) throw ShapeError("nmi: empty assignments");
  const double n = static_cast<double>(a.size());

  auto compact = [](const std::vector<size_t>& v) {
    std::unordered_map<size_t, size_t> ids;
    std::vector<size_t> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
      auto [it, _] = ids.try_emplace(v[i], ids.size());
      out[i] = it->second;
    }
    return std::pair{out, ids.size()};
  };
  auto [ca, ka] = compact(a);
  auto [cb, kb] = compact(b);

  std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
  std::vector<std::vector<double>> joint(ka, std::vector<double>(kb, 0.0));
  for (size_t i = 0; i < ca.size(); ++i) {
    pa[ca[i]] += 1.0 / n;
    pb[cb[i]] += 1.0 / n;
    joint[ca[i]][cb[i]] += 1.0 / n;
  }
  auto entropy = [](const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) {
      if (v > 0) h -= v * std::log(v);
    }
    return h;
  };
  const double ha = entropy(pa);
  const double hb = entropy(pb);
  if (ka == 1 && kb == 1) return 1.0;  // both trivial partitions agree completely
  double mi = 0.0;
  for (size_t i = 0; i < ka; ++i) {
    for (size_t j = 0; j < kb; ++j) {
      if (joint[i][j] > 0) mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
    }
  }
  const double denom = norm == NmiNorm::arithmetic ? 0.5 * (ha + hb) : std::sqrt(ha * hb);
  if (denom == 0.0) return 0.0;  // exactly one side is a single cluster
  return std::clamp(mi / denom, 0.0, 1.0);
}

std::string metrics_report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["ap"] = report.ap;
  j["miou"] = report.miou;
  j["auc_roc"] = report.auc_roc;
  j["f1"] = report.f1;
  j["meta_sum"] = report.meta_sum;
  j["counts"] = {{"tp", report.counts.tp},
                 {"fp", report.counts.fp},
                 {"fn", report.counts.fn},
                 {"tn", report.counts.tn}};
  j["per_movie"] = nlohmann::json::array();
  for (const auto& m : report.per_movie) {
    j["per_movie"].push_back({{"id", m.movie_id},
                              {"miou", m.miou},
                              {"num_shots", m.num_shots},
                              {"num_boundaries", m.num_boundaries}});
  }
  return j.dump(2);
}

}  // namespace bassl
