#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bassl/mat.hpp"

namespace bassl {

/// A partition of shots [0, N-1] into contiguous inclusive [start, end]
/// scene segments.
struct Segmentation {
  std::vector<std::pair<size_t, size_t>> segments;

  size_t num_shots() const { return segments.empty() ? 0 : segments.back().second + 1; }
};

void validate_segmentation(const Segmentation& seg);  // throws DataError

struct Confusion {
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct MovieEval {
  std::string movie_id;
  double miou = 0.0;
  size_t num_shots = 0;
  size_t num_boundaries = 0;
};

struct MetricsReport {
  double ap = 0.0;
  double miou = 0.0;
  double auc_roc = 0.0;
  double f1 = 0.0;
  double meta_sum = 0.0;
  Confusion counts;
  std::vector<MovieEval> per_movie;
};

enum class MiouMode { symmetric, pred_to_gt };
enum class NmiNorm { arithmetic, geometric };

/// Area under the precision-recall step curve; prediction order is by
/// descending score with ties broken by ascending original index.
double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

/// Mann-Whitney formulation with midranks for ties.
double auc_roc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

Confusion confusion(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels);

/// 2PR/(P+R); 0 when there are no true positives.
double f1_score(const std::vector<uint8_t>& decisions, const std::vector<uint8_t>& labels);

/// Mean best-match IoU between segments; symmetric mode averages both
/// matching directions.
double miou(const Segmentation& pred, const Segmentation& gt,
            MiouMode mode = MiouMode::symmetric);

double meta_sum(double ap, double miou, double auc, double f1);

std::vector<uint8_t> threshold_boundaries(const std::vector<double>& scores, double theta = 0.5);

/// Boundary decisions to scene segments: a flagged shot ends its segment,
/// and the final shot always ends the last one.
Segmentation group_scenes(const std::vector<uint8_t>& decisions);

/// k-means++ seeding plus Lloyd iterations (shift < 1e-8 or 300 rounds),
/// best restart by inertia. Returns the cluster id of every row.
std::vector<size_t> kmeans(const Mat& points, size_t k, size_t restarts, uint64_t seed);

/// Mutual information over the mean entropy of the two labelings; 1.0 when
/// both are the trivial single-cluster partition.
double nmi(const std::vector<size_t>& a, const std::vector<size_t>& b,
           NmiNorm norm = NmiNorm::arithmetic);

std::string metrics_report_json(const MetricsReport& report);

}  // namespace bassl
