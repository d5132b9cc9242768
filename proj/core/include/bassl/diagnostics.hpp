#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bassl/boundary.hpp"
#include "bassl/grad_check.hpp"
#include "bassl/pretext.hpp"

namespace bassl {

struct LossGradEntry {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference audit of every training loss composed through the whole
/// network, on a small fixed problem (K=4, D_e=8, batch of 2, dropout off so
/// the loss is a deterministic function of the parameters). Returns one
/// report per loss; every parameter tensor is perturbed coordinate-wise.
template <typename T>
std::vector<LossGradEntry> pipeline_grad_reports(uint64_t seed = 7, double eps = 1e-5) {
  CrnConfig cfg;
  cfg.L = 2;
  cfg.H = 8;
  cfg.A = 2;
  cfg.dropout_p = 0.0;
  cfg.K = 4;
  cfg.D_e = 8;
  auto ps = init_crn_params<T>(cfg, seed);
  auto& params = ps.items();

  const size_t S = static_cast<size_t>(cfg.seq_len());
  const size_t D = static_cast<size_t>(cfg.D_e);
  Rng root(seed);
  Rng data = root.split("data");
  auto draw = [&](size_t rows) {
    std::vector<T> v(rows * D);
    for (auto& x : v) x = static_cast<T>(data.gaussian());
    return Tensor<T>::from({rows, D}, std::move(v));
  };

  const size_t B = 2;
  std::vector<Tensor<T>> windows, anchors;
  std::vector<SsmItem<T>> ssm_items;
  std::vector<CgmTriplet> cgm_triplets;
  std::vector<PpSample> pp_samples;
  std::vector<MsmMask> msm_masks;
  std::vector<std::vector<size_t>> mask_sets;
  Rng sample = root.split("sample");
  const int planted_b[B] = {1, -2};
  for (size_t w = 0; w < B; ++w) {
    windows.push_back(draw(S));
    anchors.push_back(draw(2));
    PseudoSplit split{planted_b[w], cfg.K, 0.0};
    ssm_items.push_back({windows[w], anchors[w], split});
    cgm_triplets.push_back(sample_cgm(split, sample));
    pp_samples.push_back(sample_pp(split, sample));
    msm_masks.push_back(sample_msm(S, 0.15, sample));
    mask_sets.push_back(msm_masks[w].masked);
  }

  Rng unused(0);  // dropout_p = 0: never consulted
  auto forward_plain = [&]() {
    return crn_forward_batch(cfg, ps, windows, {}, /*train=*/false, unused);
  };
  auto forward_masked = [&]() {
    return crn_forward_batch(cfg, ps, windows, mask_sets, /*train=*/false, unused);
  };

  std::vector<LossGradEntry> out;
  out.push_back({"ssm", grad_check<T>([&] { return loss_ssm(ps, ssm_items, 0.1); }, params, eps)});
  out.push_back({"cgm", grad_check<T>([&] { return loss_cgm(ps, forward_plain(), cgm_triplets); },
                                      params, eps)});
  out.push_back({"pp", grad_check<T>([&] { return loss_pp(ps, forward_plain(), pp_samples); },
                                     params, eps)});
  out.push_back({"msm", grad_check<T>(
                            [&] { return loss_msm(ps, windows, forward_masked(), msm_masks); },
                            params, eps)});
  // Fine-tune objective: binary cross-entropy of the center shot's boundary
  // logit, window 0 labeled positive, window 1 negative.
  out.push_back({"finetune", grad_check<T>(
                                 [&] {
                                   auto ctx = forward_plain();
                                   auto z0 = reshape(
                                       sbd_logit(ps, row_vec(ctx[0], static_cast<size_t>(cfg.K))),
                                       std::vector<size_t>{});
                                   auto z1 = reshape(
                                       sbd_logit(ps, row_vec(ctx[1], static_cast<size_t>(cfg.K))),
                                       std::vector<size_t>{});
                                   return scale(add(softplus(scale(z0, -1.0)), softplus(z1)), 0.5);
                                 },
                                 params, eps)});
  return out;
}

}  // namespace bassl
