#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bassl/boundary.hpp"
#include "bassl/corpus.hpp"
#include "bassl/crn.hpp"
#include "bassl/logging.hpp"
#include "bassl/pretext.hpp"

namespace bassl {

struct TrainConfig {
  double base_lr = 1e-3;
  size_t batch_size = 32;
  size_t epochs = 5;
  double warmup_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // global gradient-norm cap; <= 0 disables clipping
  uint64_t seed = 0;
  int K = 8;
  double theta = 0.5;
  double aug_sigma = 0.01;
  double aug_drop = 0.1;
  double tau = 0.1;
  double msm_p = 0.15;
  PretextWeights weights;
  BoundaryStrategy strategy = BoundaryStrategy::dtw;
  bool finetune_balance = false;  // weight positive windows by the neg/pos ratio
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (cfg.base_lr <= 0) throw ConfigError("train: base_lr must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.warmup_fraction < 0 || cfg.warmup_fraction >= 1) {
    throw ConfigError("train: warmup_fraction must be in [0,1)");
  }
  if (cfg.K < 2) throw ConfigError("train: K must be >= 2");
  if (cfg.theta <= 0 || cfg.theta >= 1) throw ConfigError("train: theta must be in (0,1)");
}

/// Linear warmup to base_lr, then cosine decay to 0 at total_steps.
inline double lr_schedule(int64_t step, int64_t total_steps, int64_t warmup_steps,
                          double base_lr) {
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return base_lr;
  const double t = static_cast<double>(step - warmup_steps) /
                   static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
}

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  int64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<std::pair<std::string, Tensor<T>>>& params) {
  AdamState<T> st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& [name, t] : params) {
    (void)name;
    st.m.emplace_back(t.size(), T(0));
    st.v.emplace_back(t.size(), T(0));
  }
  return st;
}

/// Scales gradients of the listed parameters so their global L2 norm does not
/// exceed max_norm; returns the pre-clip norm. No-op when max_norm <= 0.
template <typename T>
double clip_grad_norm(std::vector<std::pair<std::string, Tensor<T>>>& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, t] : params) {
    (void)name;
    for (const T g : t.node()->grad) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& [name, t] : params) {
      (void)name;
      for (T& g : t.node()->grad) g *= scale;
    }
  }
  return norm;
}

/// Bias-corrected Adam over the listed parameters; decoupled weight decay is
/// applied before the moment update. Parameters with no gradient this step
/// see a zero gradient.
template <typename T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& st,
               double lr, const TrainConfig& cfg) {
  if (st.m.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(st.m.size()) +
                     " tensors, step got " + std::to_string(params.size()));
  }
  ++st.step;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(st.step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(st.step)));
  const T lrt = static_cast<T>(lr);
  const T eps = static_cast<T>(cfg.adam_eps);
  const T wd = static_cast<T>(cfg.weight_decay);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& t = params[pi].second;
    if (st.m[pi].size() != t.size()) {
      throw ShapeError("adam: moment size mismatch for " + params[pi].first);
    }
    auto& vals = t.mutable_values();
    const auto& grad = t.node()->grad;
    for (size_t i = 0; i < vals.size(); ++i) {
      const T g = grad.empty() ? T(0) : grad[i];
      if (cfg.weight_decay > 0) vals[i] -= lrt * wd * vals[i];
      st.m[pi][i] = b1 * st.m[pi][i] + (T(1) - b1) * g;
      st.v[pi][i] = b2 * st.v[pi][i] + (T(1) - b2) * g * g;
      const T mhat = st.m[pi][i] / bc1;
      const T vhat = st.v[pi][i] / bc2;
      vals[i] -= lrt * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace detail {

inline std::string json_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct StepTimer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

/// Shuffled (movie, center) pairs for one epoch.
inline std::vector<std::pair<size_t, size_t>> epoch_order(const Corpus& corpus, Rng rng) {
  std::vector<std::pair<size_t, size_t>> items;
  for (size_t m = 0; m < corpus.movies.size(); ++m) {
    for (size_t n = 0; n < corpus.movies[m].num_shots; ++n) items.emplace_back(m, n);
  }
  for (size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.index(i)]);
  }
  return items;
}

/// Run fn(j) for j in [0, n) across the requested number of threads. The
/// work is index-keyed, so the result does not depend on the thread count.
template <typename Fn>
void parallel_for(size_t n, int threads, Fn fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t j = 0; j < n; ++j) fn(j);
    return;
  }
  const size_t nt = std::min<size_t>(static_cast<size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nt);
  for (size_t w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t j = w; j < n; j += nt) fn(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename T>
struct PreparedItem {
  Tensor<T> main;     // augmented view 1, (2K+1) x D_e
  Tensor<T> anchors;  // augmented view 2 first/last rows, 2 x D_e
  PseudoSplit split;
  CgmTriplet cgm;
  PpSample pp;
  MsmMask msm;
};

template <typename T>
Tensor<T> mat_tensor(const Mat& m) {
  std::vector<T> data(m.data.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(m.data[i]);
  return Tensor<T>::from({m.rows, m.cols}, std::move(data));
}

template <typename T>
PreparedItem<T> prepare_item(const Corpus& corpus, size_t movie_idx, size_t center,
                             const TrainConfig& cfg, Rng irng) {
  const int K = cfg.K;
  const size_t S = 2 * static_cast<size_t>(K) + 1;
  PreparedItem<T> out;

  Mat base;
  if (cfg.strategy == BoundaryStrategy::synthesized) {
    Rng srng = irng.split("synth");
    if (corpus.movies.size() < 2) {
      throw DataError("synthesized strategy needs at least two movies");
    }
    size_t other = srng.index(corpus.movies.size() - 1);
    if (other >= movie_idx) ++other;
    auto [w, split] = synthesize_window(corpus.movies[movie_idx], corpus.movies[other], K, srng);
    base = std::move(w.embeddings);
    out.split = split;
  } else {
    base = make_window(corpus.movies[movie_idx], static_cast<long>(center), K).embeddings;
  }

  Rng v1_rng = irng.split("v1");
  Rng v2_rng = irng.split("v2");
  Mat v1 = augment_view(base, cfg.aug_sigma, cfg.aug_drop, v1_rng);
  Mat v2 = augment_view(base, cfg.aug_sigma, cfg.aug_drop, v2_rng);
  Mat anchors(2, v2.cols);
  for (size_t d = 0; d < v2.cols; ++d) {
    anchors.at(0, d) = v2.at(0, d);
    anchors.at(1, d) = v2.at(S - 1, d);
  }

  switch (cfg.strategy) {
    case BoundaryStrategy::dtw:
      out.split = dtw_boundary(v1, anchors);
      break;
    case BoundaryStrategy::random: {
      Rng brng = irng.split("b");
      out.split = random_boundary(K, brng);
      break;
    }
    case BoundaryStrategy::fixed:
      out.split = fixed_boundary(K);
      break;
    case BoundaryStrategy::synthesized:
      break;  // split already set
  }

  Rng cgm_rng = irng.split("cgm");
  Rng pp_rng = irng.split("pp");
  Rng msm_rng = irng.split("msm");
  out.cgm = sample_cgm(out.split, cgm_rng);
  out.pp = sample_pp(out.split, pp_rng);
  out.msm = sample_msm(S, cfg.msm_p, msm_rng);

  out.main = mat_tensor<T>(v1);
  out.anchors = mat_tensor<T>(anchors);
  return out;
}

}  // namespace detail

/// Self-supervised pre-training. Writes a JSONL train log plus a checkpoint
/// per epoch and a final `checkpoint.bsck` under out_dir; returns the trained
/// parameters.
template <typename T>
ParameterStore<T> pretrain(const Corpus& corpus, const CrnConfig& ccfg, const TrainConfig& tcfg,
                           const std::filesystem::path& out_dir, int threads = 1) {
  validate_config(ccfg);
  validate_train_config(tcfg);
  if (corpus.movies.empty()) throw DataError("pretrain: corpus has no movies");
  if (corpus.dim != static_cast<size_t>(ccfg.D_e)) {
    throw ConfigError("pretrain: corpus dim " + std::to_string(corpus.dim) +
                      " does not match configured D_e " + std::to_string(ccfg.D_e));
  }
  if (tcfg.K != ccfg.K) {
    throw ConfigError("pretrain: train K " + std::to_string(tcfg.K) +
                      " does not match network K " + std::to_string(ccfg.K));
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream log_out(out_dir / "train_log.jsonl");
  if (!log_out) throw DataError("cannot open for write: " + (out_dir / "train_log.jsonl").string());

  auto ps = init_crn_params<T>(ccfg, tcfg.seed);
  auto adam = make_adam_state(ps.items());

  size_t total_items = 0;
  for (const auto& m : corpus.movies) total_items += m.num_shots;
  const size_t steps_per_epoch = (total_items + tcfg.batch_size - 1) / tcfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(tcfg.epochs * steps_per_epoch);
  const int64_t warmup_steps =
      std::min<int64_t>(total_steps > 0 ? total_steps - 1 : 0,
                        std::llround(tcfg.warmup_fraction * static_cast<double>(total_steps)));

  Rng root(tcfg.seed);
  Rng shuffle_root = root.split("shuffle");
  Rng item_root = root.split("item");
  Rng drop_root = root.split("dropout");

  int64_t step = 0;
  for (size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    auto order = detail::epoch_order(corpus, shuffle_root.split(epoch));
    Rng epoch_items = item_root.split(epoch);
    for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      detail::StepTimer timer;
      const size_t bsz = std::min(tcfg.batch_size, order.size() - start);
      std::vector<detail::PreparedItem<T>> batch(bsz);
      detail::parallel_for(bsz, threads, [&](size_t j) {
        const auto [mi, center] = order[start + j];
        batch[j] = detail::prepare_item<T>(corpus, mi, center, tcfg, epoch_items.split(start + j));
      });

      Rng drng = drop_root.split(static_cast<uint64_t>(step));
      std::vector<Tensor<T>> ctx;
      ctx.reserve(bsz);
      const bool need_ctx =
          tcfg.weights.alpha_cgm > 0 || tcfg.weights.alpha_pp > 0 || tcfg.weights.alpha_msm > 0;
      if (need_ctx) {
        for (auto& item : batch) {
          ctx.push_back(crn_forward(ccfg, ps, item.main, item.msm.masked, true, drng));
        }
      }

      auto zero = Tensor<T>::scalar(T(0));
      Tensor<T> l_ssm = zero, l_cgm = zero, l_pp = zero, l_msm = zero;
      if (tcfg.weights.alpha_ssm > 0) {
        std::vector<SsmItem<T>> items;
        items.reserve(bsz);
        for (auto& b : batch) items.push_back({b.main, b.anchors, b.split});
        l_ssm = loss_ssm(ps, items, tcfg.tau);
      }
      if (tcfg.weights.alpha_cgm > 0) {
        std::vector<CgmTriplet> triplets;
        for (auto& b : batch) triplets.push_back(b.cgm);
        l_cgm = loss_cgm(ps, ctx, triplets);
      }
      if (tcfg.weights.alpha_pp > 0) {
        std::vector<PpSample> samples;
        for (auto& b : batch) samples.push_back(b.pp);
        l_pp = loss_pp(ps, ctx, samples);
      }
      if (tcfg.weights.alpha_msm > 0) {
        std::vector<Tensor<T>> inputs;
        std::vector<MsmMask> masks;
        for (auto& b : batch) {
          inputs.push_back(b.main);
          masks.push_back(b.msm);
        }
        l_msm = loss_msm(ps, inputs, ctx, masks);
      }
      auto total = loss_pretrain(l_ssm, l_cgm, l_pp, l_msm, tcfg.weights);

      const double v_ssm = static_cast<double>(l_ssm.item());
      const double v_cgm = static_cast<double>(l_cgm.item());
      const double v_pp = static_cast<double>(l_pp.item());
      const double v_msm = static_cast<double>(l_msm.item());
      const double v_total = static_cast<double>(total.item());
      if (!std::isfinite(v_total) || !std::isfinite(v_ssm) || !std::isfinite(v_cgm) ||
          !std::isfinite(v_pp) || !std::isfinite(v_msm)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (ssm=" +
                           std::to_string(v_ssm) + ", cgm=" + std::to_string(v_cgm) + ", pp=" +
                           std::to_string(v_pp) + ", msm=" + std::to_string(v_msm) + ")");
      }

      const double lr = lr_schedule(step, total_steps, warmup_steps, tcfg.base_lr);
      ps.zero_grads();
      backward(total);
      auto all_params = ps.items();
      clip_grad_norm(all_params, tcfg.clip_norm);
      adam_step(all_params, adam, lr, tcfg);

      log_out << "{\"step\":" << step << ",\"epoch\":" << epoch
              << ",\"lr\":" << detail::json_num(lr)
              << ",\"loss_total\":" << detail::json_num(v_total)
              << ",\"loss_ssm\":" << detail::json_num(v_ssm)
              << ",\"loss_cgm\":" << detail::json_num(v_cgm)
              << ",\"loss_pp\":" << detail::json_num(v_pp)
              << ",\"loss_msm\":" << detail::json_num(v_msm)
              << ",\"wall_ms\":" << detail::json_num(timer.elapsed_ms()) << "}\n";
      ++step;
    }
    save_checkpoint(out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".bsck"), ccfg, ps);
    logging::info("pretrain epoch " + std::to_string(epoch) + " done");
  }
  save_checkpoint(out_dir / "checkpoint.bsck", ccfg, ps);
  return ps;
}

/// Supervised fine-tuning of the transformer plus the boundary head on
/// labeled windows. Pretext heads are left untouched.
template <typename T>
void finetune(const Corpus& corpus, const CrnConfig& ccfg, ParameterStore<T>& ps,
              const TrainConfig& tcfg, const std::filesystem::path& out_dir, int threads = 1) {
  validate_config(ccfg);
  validate_train_config(tcfg);
  if (corpus.movies.empty()) throw DataError("finetune: corpus has no movies");
  if (corpus.dim != static_cast<size_t>(ccfg.D_e)) {
    throw ConfigError("finetune: corpus dim " + std::to_string(corpus.dim) +
                      " does not match configured D_e " + std::to_string(ccfg.D_e));
  }
  if (tcfg.K != ccfg.K) {
    throw ConfigError("finetune: train K " + std::to_string(tcfg.K) +
                      " does not match network K " + std::to_string(ccfg.K));
  }
  size_t positives = 0, negatives = 0;
  for (const auto& m : corpus.movies) {
    if (!m.labels) throw DataError("finetune needs labels: movie " + m.movie_id + " has none");
    for (uint8_t y : *m.labels) (y ? positives : negatives) += 1;
  }
  const double pos_weight =
      tcfg.finetune_balance && positives > 0
          ? static_cast<double>(negatives) / static_cast<double>(positives)
          : 1.0;

  std::filesystem::create_directories(out_dir);
  std::ofstream log_out(out_dir / "train_log.jsonl");
  if (!log_out) throw DataError("cannot open for write: " + (out_dir / "train_log.jsonl").string());

  // Only the transformer trunk and the boundary head receive updates.
  std::vector<std::pair<std::string, Tensor<T>>> trainable;
  for (auto& [name, t] : ps.items()) {
    if (!name.starts_with("head.") || name.starts_with("head.sbd.")) trainable.emplace_back(name, t);
  }
  auto adam = make_adam_state(trainable);

  size_t total_items = 0;
  for (const auto& m : corpus.movies) total_items += m.num_shots;
  const size_t steps_per_epoch = (total_items + tcfg.batch_size - 1) / tcfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(tcfg.epochs * steps_per_epoch);
  const int64_t warmup_steps =
      std::min<int64_t>(total_steps > 0 ? total_steps - 1 : 0,
                        std::llround(tcfg.warmup_fraction * static_cast<double>(total_steps)));

  Rng root(tcfg.seed);
  Rng shuffle_root = root.split("shuffle");
  Rng drop_root = root.split("dropout");
  const size_t K = static_cast<size_t>(tcfg.K);

  int64_t step = 0;
  for (size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    auto order = detail::epoch_order(corpus, shuffle_root.split(epoch));
    for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      detail::StepTimer timer;
      const size_t bsz = std::min(tcfg.batch_size, order.size() - start);
      std::vector<Tensor<T>> windows(bsz);
      std::vector<int> labels(bsz);
      detail::parallel_for(bsz, threads, [&](size_t j) {
        const auto [mi, center] = order[start + j];
        Window w = make_window(corpus.movies[mi], static_cast<long>(center), tcfg.K);
        labels[j] = w.label.value();
        windows[j] = detail::mat_tensor<T>(w.embeddings);
      });

      Rng drng = drop_root.split(static_cast<uint64_t>(step));
      std::vector<Tensor<T>> losses;
      losses.reserve(bsz);
      for (size_t j = 0; j < bsz; ++j) {
        auto c = crn_forward(ccfg, ps, windows[j], {}, true, drng);
        auto z = detail::as_scalar(sbd_logit(ps, row_vec(c, K)));
        auto l = labels[j] ? softplus(scale(z, -1.0)) : softplus(z);
        if (labels[j] && pos_weight != 1.0) l = scale(l, pos_weight);
        losses.push_back(l);
      }
      auto total = mean_all(stack_scalars(losses));
      const double v_total = static_cast<double>(total.item());
      if (!std::isfinite(v_total)) {
        throw NumericError("non-finite loss at step " + std::to_string(step));
      }

      const double lr = lr_schedule(step, total_steps, warmup_steps, tcfg.base_lr);
      ps.zero_grads();
      backward(total);
      clip_grad_norm(trainable, tcfg.clip_norm);
      adam_step(trainable, adam, lr, tcfg);

      log_out << "{\"step\":" << step << ",\"epoch\":" << epoch
              << ",\"lr\":" << detail::json_num(lr)
              << ",\"loss_total\":" << detail::json_num(v_total)
              << ",\"wall_ms\":" << detail::json_num(timer.elapsed_ms()) << "}\n";
      ++step;
    }
    save_checkpoint(out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".bsck"), ccfg, ps);
    logging::info("finetune epoch " + std::to_string(epoch) + " done");
  }
  save_checkpoint(out_dir / "checkpoint.bsck", ccfg, ps);
}

}  // namespace bassl
