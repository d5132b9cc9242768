#pragma once

#include <string>
#include <vector>

#include "bassl/boundary.hpp"
#include "bassl/crn.hpp"
#include "bassl/logging.hpp"
#include "bassl/ops.hpp"

// Pretext-task sample construction and the four self-supervised losses
// (shot-scene matching, contextual group matching, pseudo-boundary
// prediction, masked shot modeling).

namespace bassl {

template <typename T>
struct NceBatch {
  std::vector<Tensor<T>> queries;     // shot vectors, paired with positives
  std::vector<Tensor<T>> positives;   // scene vectors
  std::vector<Tensor<T>> neg_shots;   // compared against each pair's positive
  std::vector<Tensor<T>> neg_scenes;  // compared against each pair's query
  double tau = 0.1;
};

struct CgmTriplet {
  size_t anchor_idx = 0;  // always the window center
  size_t pos_idx = 0;     // same sub-sequence as the center
  size_t neg_idx = 0;     // other sub-sequence
};

struct PpSample {
  size_t boundary_idx = 0;
  size_t nonboundary_idx = 0;
};

struct MsmMask {
  std::vector<size_t> masked;  // never empty
};

struct PretextWeights {
  double alpha_ssm = 1.0;
  double alpha_cgm = 1.0;
  double alpha_pp = 1.0;
  double alpha_msm = 1.0;
};

/// Inputs one window contributes to the shot-scene matching loss: the main
/// augmented view (scene pools) and the slow view's first/last rows (anchors).
template <typename T>
struct SsmItem {
  Tensor<T> main;     // (2K+1) x D_e
  Tensor<T> anchors;  // 2 x D_e
  PseudoSplit split;
};

namespace detail {

template <typename T>
Tensor<T> as_scalar(const Tensor<T>& t) {
  return reshape(t, {});
}

}  // namespace detail

/// Mean of the window rows [first_row, first_row + len): the pooled
/// representation of a pseudo-scene.
template <typename T>
Tensor<T> scene_rep(const Tensor<T>& window, size_t first_row, size_t len) {
  if (len == 0) throw ShapeError("scene_rep: empty range");
  return mean_axis(slice_rows(window, first_row, len), 0);
}

/// One InfoNCE term: -log of the positive's share of the softmax mass at
/// temperature tau. Shot negatives score against the positive scene; scene
/// negatives score against the query shot.
template <typename T>
Tensor<T> nce_pair_loss(const Tensor<T>& query, const Tensor<T>& positive,
                        const std::vector<Tensor<T>>& neg_shots,
                        const std::vector<Tensor<T>>& neg_scenes, double tau) {
  if (tau <= 0) throw ConfigError("nce: tau must be > 0");
  auto pos = scale(cosine_similarity(query, positive), 1.0 / tau);
  std::vector<Tensor<T>> sims;
  sims.reserve(1 + neg_shots.size() + neg_scenes.size());
  sims.push_back(pos);
  for (const auto& e : neg_shots) sims.push_back(scale(cosine_similarity(e, positive), 1.0 / tau));
  for (const auto& r : neg_scenes) sims.push_back(scale(cosine_similarity(query, r), 1.0 / tau));
  return sub(logsumexp(stack_scalars(sims)), pos);
}

template <typename T>
Tensor<T> loss_nce(const NceBatch<T>& batch) {
  if (batch.queries.empty() || batch.queries.size() != batch.positives.size()) {
    throw ShapeError("nce: need equally many queries and positives, got " +
                     std::to_string(batch.queries.size()) + " and " +
                     std::to_string(batch.positives.size()));
  }
  std::vector<Tensor<T>> losses;
  losses.reserve(batch.queries.size());
  for (size_t i = 0; i < batch.queries.size(); ++i) {
    losses.push_back(nce_pair_loss(batch.queries[i], batch.positives[i], batch.neg_shots,
                                   batch.neg_scenes, batch.tau));
  }
  return mean_all(stack_scalars(losses));
}

/// Shot-scene matching: for every window, match the slow first shot to the
/// left pseudo-scene and the slow last shot to the right pseudo-scene, with
/// negatives pooled from the other windows in the batch. Returns the mean
/// over windows of the per-window two-term sum.
template <typename T>
Tensor<T> loss_ssm(const ParameterStore<T>& ps, const std::vector<SsmItem<T>>& items,
                   double tau = 0.1) {
  if (items.empty()) throw ShapeError("ssm: empty batch");
  if (items.size() == 1) {
    logging::warn("ssm: batch of 1 has no in-batch negatives; proceeding with empty negative sets");
  }
  const size_t B = items.size();
  std::vector<Tensor<T>> q_first(B), q_last(B), p_left(B), p_right(B);
  for (size_t w = 0; w < B; ++w) {
    const auto& it = items[w];
    const int K = it.split.K;
    const size_t left_len = static_cast<size_t>(K + it.split.b_star + 1);
    const size_t right_len = static_cast<size_t>(K - it.split.b_star);
    q_first[w] = ssm_head(ps, project_input(ps, row_vec(it.anchors, 0)));
    q_last[w] = ssm_head(ps, project_input(ps, row_vec(it.anchors, 1)));
    p_left[w] = ssm_head(ps, project_input(ps, scene_rep(it.main, 0, left_len)));
    p_right[w] = ssm_head(ps, project_input(ps, scene_rep(it.main, left_len, right_len)));
  }
  std::vector<Tensor<T>> pair_losses;
  pair_losses.reserve(2 * B);
  for (size_t w = 0; w < B; ++w) {
    std::vector<Tensor<T>> neg_shots, neg_scenes;
    neg_shots.reserve(2 * (B - 1));
    neg_scenes.reserve(2 * (B - 1));
    for (size_t o = 0; o < B; ++o) {
      if (o == w) continue;
      neg_shots.push_back(q_first[o]);
      neg_shots.push_back(q_last[o]);
      neg_scenes.push_back(p_left[o]);
      neg_scenes.push_back(p_right[o]);
    }
    pair_losses.push_back(nce_pair_loss(q_first[w], p_left[w], neg_shots, neg_scenes, tau));
    pair_losses.push_back(nce_pair_loss(q_last[w], p_right[w], neg_shots, neg_scenes, tau));
  }
  return scale(sum_all(stack_scalars(pair_losses)), 1.0 / static_cast<double>(B));
}

/// Positive uniform over the center's own sub-sequence (excluding the center
/// itself), negative uniform over the other sub-sequence.
inline CgmTriplet sample_cgm(const PseudoSplit& split, Rng& rng) {
  const int K = split.K;
  const int b = split.b_star;
  CgmTriplet t;
  t.anchor_idx = static_cast<size_t>(K);
  const size_t left_len = static_cast<size_t>(K + b + 1);   // rows [0, K+b]
  const size_t right_len = static_cast<size_t>(K - b);      // rows [K+b+1, 2K]
  if (b >= 0) {                                             // center lies in the left part
    const size_t r = rng.index(left_len - 1);
    t.pos_idx = r < static_cast<size_t>(K) ? r : r + 1;
    t.neg_idx = left_len + rng.index(right_len);
  } else {
    const size_t r = rng.index(right_len - 1);
    const size_t row = left_len + r;
    t.pos_idx = row < static_cast<size_t>(K) ? row : row + 1;
    t.neg_idx = rng.index(left_len);
  }
  return t;
}

template <typename T>
Tensor<T> loss_cgm(const ParameterStore<T>& ps, const std::vector<Tensor<T>>& ctx,
                   const std::vector<CgmTriplet>& triplets) {
  if (ctx.empty() || ctx.size() != triplets.size()) {
    throw ShapeError("cgm: need one triplet per contextualized window, got " +
                     std::to_string(ctx.size()) + " windows and " +
                     std::to_string(triplets.size()) + " triplets");
  }
  std::vector<Tensor<T>> losses;
  losses.reserve(ctx.size());
  for (size_t i = 0; i < ctx.size(); ++i) {
    const auto& tr = triplets[i];
    auto anchor = row_vec(ctx[i], tr.anchor_idx);
    auto z_pos = detail::as_scalar(cgm_logit(ps, anchor, row_vec(ctx[i], tr.pos_idx)));
    auto z_neg = detail::as_scalar(cgm_logit(ps, anchor, row_vec(ctx[i], tr.neg_idx)));
    losses.push_back(add(softplus(scale(z_pos, -1.0)), softplus(z_neg)));
  }
  return mean_all(stack_scalars(losses));
}

/// The pseudo-boundary shot plus one uniformly drawn non-boundary shot.
inline PpSample sample_pp(const PseudoSplit& split, Rng& rng) {
  PpSample s;
  s.boundary_idx = split.boundary_row();
  const size_t len = 2 * static_cast<size_t>(split.K) + 1;
  const size_t r = rng.index(len - 1);
  s.nonboundary_idx = r < s.boundary_idx ? r : r + 1;
  return s;
}

template <typename T>
Tensor<T> loss_pp(const ParameterStore<T>& ps, const std::vector<Tensor<T>>& ctx,
                  const std::vector<PpSample>& samples) {
  if (ctx.empty() || ctx.size() != samples.size()) {
    throw ShapeError("pp: need one sample per contextualized window, got " +
                     std::to_string(ctx.size()) + " windows and " +
                     std::to_string(samples.size()) + " samples");
  }
  std::vector<Tensor<T>> losses;
  losses.reserve(ctx.size());
  for (size_t i = 0; i < ctx.size(); ++i) {
    auto z_b = detail::as_scalar(pp_logit(ps, row_vec(ctx[i], samples[i].boundary_idx)));
    auto z_n = detail::as_scalar(pp_logit(ps, row_vec(ctx[i], samples[i].nonboundary_idx)));
    losses.push_back(add(softplus(scale(z_b, -1.0)), softplus(z_n)));
  }
  return mean_all(stack_scalars(losses));
}

/// Independent masking at rate p; an empty draw is repaired by force-masking
/// one uniform index so the reconstruction loss is always defined.
inline MsmMask sample_msm(size_t len, double p, Rng& rng) {
  if (p <= 0 || p >= 1) throw ConfigError("msm: mask probability must be in (0,1)");
  if (len == 0) throw ConfigError("msm: empty window");
  MsmMask m;
  for (size_t i = 0; i < len; ++i) {
    if (rng.uniform() < p) m.masked.push_back(i);
  }
  if (m.masked.empty()) m.masked.push_back(rng.index(len));
  return m;
}

/// Squared-L2 reconstruction of the raw embeddings at the masked rows,
/// summed per window, averaged over the batch. Targets are constants.
template <typename T>
Tensor<T> loss_msm(const ParameterStore<T>& ps, const std::vector<Tensor<T>>& inputs,
                   const std::vector<Tensor<T>>& ctx, const std::vector<MsmMask>& masks) {
  if (ctx.empty() || ctx.size() != masks.size() || ctx.size() != inputs.size()) {
    throw ShapeError("msm: need one input window and mask per contextualized window");
  }
  std::vector<Tensor<T>> losses;
  losses.reserve(ctx.size());
  for (size_t i = 0; i < ctx.size(); ++i) {
    if (masks[i].masked.empty()) throw ConfigError("msm: empty mask set");
    auto rec = msm_reconstruct(ps, gather_rows(ctx[i], masks[i].masked));
    auto target = Tensor<T>::from(
        {masks[i].masked.size(), inputs[i].dim(1)},
        gather_rows(inputs[i], masks[i].masked).values());  // detached copy
    auto diff = sub(rec, target);
    losses.push_back(sum_all(mul(diff, diff)));
  }
  return mean_all(stack_scalars(losses));
}

/// alpha-weighted sum of the four pretext components.
template <typename T>
Tensor<T> loss_pretrain(const Tensor<T>& ssm, const Tensor<T>& cgm, const Tensor<T>& pp,
                        const Tensor<T>& msm, const PretextWeights& w) {
  return add(add(scale(ssm, w.alpha_ssm), scale(cgm, w.alpha_cgm)),
             add(scale(pp, w.alpha_pp), scale(msm, w.alpha_msm)));
}

}  // namespace bassl
