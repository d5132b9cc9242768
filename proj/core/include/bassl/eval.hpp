#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bassl/corpus.hpp"
#include "bassl/crn.hpp"
#include "bassl/metrics.hpp"

namespace bassl {

/// Boundary probability for every shot of a movie via a sliding window
/// centered on each shot. Deterministic: dropout is inactive.
template <typename T>
std::vector<double> predict_scores(const CrnConfig& cfg, const ParameterStore<T>& ps,
                                   const MovieRecord& movie) {
  if (movie.dim != static_cast<size_t>(cfg.D_e)) {
    throw ShapeError("predict: movie " + movie.movie_id + " has dim " +
                     std::to_string(movie.dim) + ", checkpoint expects " +
                     std::to_string(cfg.D_e));
  }
  Rng unused(0);
  std::vector<double> scores;
  scores.reserve(movie.num_shots);
  for (size_t n = 0; n < movie.num_shots; ++n) {
    Window w = make_window(movie, static_cast<long>(n), cfg.K);
    std::vector<T> data(w.embeddings.data.size());
    for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(w.embeddings.data[i]);
    auto input = Tensor<T>::from({w.embeddings.rows, w.embeddings.cols}, std::move(data));
    auto ctx = crn_forward(cfg, ps, input, {}, /*train=*/false, unused);
    auto prob = sigmoid(sbd_logit(ps, row_vec(ctx, static_cast<size_t>(cfg.K))));
    scores.push_back(static_cast<double>(reshape(prob, std::vector<size_t>{}).item()));
  }
  return scores;
}

/// Ground-truth segmentation implied by per-shot boundary labels.
inline Segmentation labels_to_segmentation(const std::vector<uint8_t>& labels) {
  return group_scenes(labels);
}

/// Full metric suite over a labeled corpus: micro-averaged AP / AUC-ROC / F1
/// over all shots, macro-averaged mIoU over movies.
template <typename T>
MetricsReport evaluate(const CrnConfig& cfg, const ParameterStore<T>& ps, const Corpus& corpus,
                       double theta = 0.5, MiouMode mode = MiouMode::symmetric) {
  if (corpus.movies.empty()) throw DataError("evaluate: corpus has no movies");
  MetricsReport report;
  std::vector<double> all_scores;
  std::vector<uint8_t> all_labels, all_decisions;
  double miou_sum = 0.0;
  for (const auto& movie : corpus.movies) {
    if (!movie.labels) throw DataError("evaluate needs labels: movie " + movie.movie_id);
    const auto scores = predict_scores(cfg, ps, movie);
    const auto decisions = threshold_boundaries(scores, theta);
    const double movie_miou =
        miou(group_scenes(decisions), labels_to_segmentation(*movie.labels), mode);
    miou_sum += movie_miou;

    MovieEval me;
    me.movie_id = movie.movie_id;
    me.miou = movie_miou;
    me.num_shots = movie.num_shots;
    for (uint8_t y : *movie.labels) me.num_boundaries += y;
    report.per_movie.push_back(std::move(me));

    all_scores.insert(all_scores.end(), scores.begin(), scores.end());
    all_decisions.insert(all_decisions.end(), decisions.begin(), decisions.end());
    all_labels.insert(all_labels.end(), movie.labels->begin(), movie.labels->end());
  }
  report.ap = average_precision(all_scores, all_labels);
  report.auc_roc = auc_roc(all_scores, all_labels);
  report.f1 = f1_score(all_decisions, all_labels);
  report.counts = confusion(all_decisions, all_labels);
  report.miou = miou_sum / static_cast<double>(corpus.movies.size());
  report.meta_sum = meta_sum(report.ap, report.miou, report.auc_roc, report.f1);
  return report;
}

// --- representation probe ---------------------------------------------------

struct ClusterProbeConfig {
  size_t num_scenes_sampled = 20;
  size_t scene_length = 4;  // shots taken per sampled scene
  size_t k = 20;            // k-means clusters
  size_t restarts = 3;
  uint64_t seed = 0;
};

struct ProbeSample {
  std::vector<std::pair<size_t, size_t>> shots;  // (movie index, shot index)
  std::vector<size_t> scene_ids;                 // one id per selected shot
};

/// Pick scenes across the corpus and a contiguous run of shots inside each.
inline ProbeSample sample_probe_shots(const Corpus& corpus, const ClusterProbeConfig& pc) {
  if (pc.k < 2) throw ConfigError("probe: k must be >= 2");
  if (pc.restarts < 1) throw ConfigError("probe: restarts must be >= 1");
  if (pc.scene_length < 1) throw ConfigError("probe: scene_length must be >= 1");
  struct SceneRef {
    size_t movie, first, len;
  };
  std::vector<SceneRef> scenes;
  for (size_t m = 0; m < corpus.movies.size(); ++m) {
    const auto& movie = corpus.movies[m];
    if (!movie.labels) throw DataError("probe needs labels: movie " + movie.movie_id);
    size_t start = 0;
    for (size_t n = 0; n < movie.num_shots; ++n) {
      if ((*movie.labels)[n] || n + 1 == movie.num_shots) {
        const size_t len = n - start + 1;
        if (len >= pc.scene_length) scenes.push_back({m, start, len});
        start = n + 1;
      }
    }
  }
  if (scenes.size() < pc.num_scenes_sampled) {
    throw DataError("probe: only " + std::to_string(scenes.size()) + " scenes of length >= " +
                    std::to_string(pc.scene_length) + " available, need " +
                    std::to_string(pc.num_scenes_sampled));
  }
  Rng rng(pc.seed);
  for (size_t i = 0; i < pc.num_scenes_sampled; ++i) {  // partial Fisher-Yates
    const size_t j = i + rng.index(scenes.size() - i);
    std::swap(scenes[i], scenes[j]);
  }
  ProbeSample sample;
  for (size_t s = 0; s < pc.num_scenes_sampled; ++s) {
    const auto& sc = scenes[s];
    const size_t start = sc.first + rng.index(sc.len - pc.scene_length + 1);
    for (size_t t = 0; t < pc.scene_length; ++t) {
      sample.shots.emplace_back(sc.movie, start + t);
      sample.scene_ids.push_back(s);
    }
  }
  return sample;
}

/// The selected shots' raw embedding rows.
inline Mat raw_probe_points(const Corpus& corpus, const ProbeSample& sample) {
  Mat out(sample.shots.size(), corpus.dim);
  for (size_t i = 0; i < sample.shots.size(); ++i) {
    auto [m, n] = sample.shots[i];
    auto src = corpus.movies[m].row(n);
    auto dst = out.row(i);
    for (size_t d = 0; d < corpus.dim; ++d) dst[d] = static_cast<double>(src[d]);
  }
  return out;
}

/// The selected shots' contextualized representations (window center rows).
template <typename T>
Mat ctx_probe_points(const CrnConfig& cfg, const ParameterStore<T>& ps, const Corpus& corpus,
                     const ProbeSample& sample) {
  Rng unused(0);
  Mat out(sample.shots.size(), static_cast<size_t>(cfg.H));
  for (size_t i = 0; i < sample.shots.size(); ++i) {
    auto [m, n] = sample.shots[i];
    Window w = make_window(corpus.movies[m], static_cast<long>(n), cfg.K);
    std::vector<T> data(w.embeddings.data.size());
    for (size_t j = 0; j < data.size(); ++j) data[j] = static_cast<T>(w.embeddings.data[j]);
    auto input = Tensor<T>::from({w.embeddings.rows, w.embeddings.cols}, std::move(data));
    auto ctx = crn_forward(cfg, ps, input, {}, /*train=*/false, unused);
    auto center = row_vec(ctx, static_cast<size_t>(cfg.K));
    auto dst = out.row(i);
    for (size_t d = 0; d < center.size(); ++d) dst[d] = static_cast<double>(center.values()[d]);
  }
  return out;
}

/// Cluster the points and score agreement with the true scene ids.
inline double probe_nmi(const Mat& points, const std::vector<size_t>& scene_ids,
                        const ClusterProbeConfig& pc) {
  const auto assign = kmeans(points, pc.k, pc.restarts, pc.seed);
  return nmi(assign, scene_ids);
}

}  // namespace bassl
