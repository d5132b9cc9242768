#pragma once

#include <filesystem>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bassl/checkpoint.hpp"
#include "bassl/ops.hpp"
#include "bassl/param_store.hpp"
#include "bassl/rng.hpp"

namespace bassl {

/// Transformer hyperparameters for the contextual relation network.
struct CrnConfig {
  int L = 2;          // transformer blocks
  int H = 64;         // hidden width
  int A = 4;          // attention heads
  double dropout_p = 0.1;
  int K = 8;          // window half-width; sequence length is 2K+1
  int D_e = 32;       // input embedding width

  int seq_len() const { return 2 * K + 1; }
  bool operator==(const CrnConfig&) const = default;
};

void validate_config(const CrnConfig& cfg);  // throws ConfigError
std::string crn_config_to_json(const CrnConfig& cfg);
CrnConfig crn_config_from_json(const std::string& json);

/// Register every parameter tensor, zero-valued, in canonical order.
template <typename T>
ParameterStore<T> make_crn_store(const CrnConfig& cfg) {
  validate_config(cfg);
  const size_t H = static_cast<size_t>(cfg.H);
  const size_t De = static_cast<size_t>(cfg.D_e);
  const size_t S = static_cast<size_t>(cfg.seq_len());
  ParameterStore<T> ps;
  ps.add("input_proj.weight", {De, H});
  ps.add("input_proj.bias", {H});
  ps.add("pos_embed", {S, H});
  ps.add("mask_token", {H});
  for (int l = 0; l < cfg.L; ++l) {
    const std::string b = "block" + std::to_string(l) + ".";
    for (const char* part : {"attn.q", "attn.k", "attn.v", "attn.out"}) {
      ps.add(b + part + ".weight", {H, H});
      ps.add(b + part + ".bias", {H});
    }
    ps.add(b + "ln1.gain", {H});
    ps.add(b + "ln1.bias", {H});
    ps.add(b + "ffn.fc1.weight", {H, 4 * H});
    ps.add(b + "ffn.fc1.bias", {4 * H});
    ps.add(b + "ffn.fc2.weight", {4 * H, H});
    ps.add(b + "ffn.fc2.bias", {H});
    ps.add(b + "ln2.gain", {H});
    ps.add(b + "ln2.bias", {H});
  }
  ps.add("head.ssm.weight", {H, H});
  ps.add("head.ssm.bias", {H});
  ps.add("head.cgm.fc1.weight", {2 * H, H});
  ps.add("head.cgm.fc1.bias", {H});
  ps.add("head.cgm.fc2.weight", {H, 1});
  ps.add("head.cgm.fc2.bias", {1});
  ps.add("head.pp.weight", {H, 1});
  ps.add("head.pp.bias", {1});
  ps.add("head.msm.weight", {H, De});
  ps.add("head.msm.bias", {De});
  ps.add("head.sbd.weight", {H, 1});
  ps.add("head.sbd.bias", {1});
  return ps;
}

/// Truncated-normal weights (std 0.02), zero biases, unit layer-norm gains.
/// Each tensor draws from a stream keyed by its own name, so the result is a
/// pure function of (cfg, seed).
template <typename T>
ParameterStore<T> init_crn_params(const CrnConfig& cfg, uint64_t seed) {
  auto ps = make_crn_store<T>(cfg);
  Rng root(seed);
  for (auto& [name, t] : ps.items()) {
    const bool is_weight = name.ends_with(".weight") || name == "pos_embed" ||
                           name == "mask_token";
    if (is_weight) {
      Rng r = root.split(name);
      ParameterStore<T>::init_trunc_normal(t, r, 0.02);
    } else if (name.ends_with(".gain")) {
      ParameterStore<T>::init_const(t, 1.0);
    }  // biases stay zero
  }
  return ps;
}

/// One transformer pass over a (2K+1) x D_e window. Rows listed in
/// mask_indices have their projected inputs swapped for the learned mask
/// token before positions are added. Returns the (2K+1) x H contextualized
/// window.
template <typename T>
Tensor<T> crn_forward(const CrnConfig& cfg, const ParameterStore<T>& ps,
                      const Tensor<T>& window, const std::vector<size_t>& mask_indices,
                      bool train, Rng& rng) {
  const size_t S = static_cast<size_t>(cfg.seq_len());
  if (window.rank() != 2 || window.dim(0) != S || window.dim(1) != static_cast<size_t>(cfg.D_e)) {
    throw ShapeError("crn_forward: window must be (" + std::to_string(S) + "," +
                     std::to_string(cfg.D_e) + "), got " + Tensor<T>::shape_str(window.shape()));
  }
  for (size_t i : mask_indices) {
    if (i >= S) {
      throw ShapeError("crn_forward: mask index " + std::to_string(i) +
                       " out of range for sequence length " + std::to_string(S));
    }
  }
  const double p = cfg.dropout_p;
  const size_t H = static_cast<size_t>(cfg.H);
  const size_t dh = H / static_cast<size_t>(cfg.A);

  auto x = linear(window, ps.get("input_proj.weight"), ps.get("input_proj.bias"));
  if (!mask_indices.empty()) x = replace_rows(x, ps.get("mask_token"), mask_indices);
  x = add(x, ps.get("pos_embed"));
  x = dropout(x, p, rng, train);

  for (int l = 0; l < cfg.L; ++l) {
    const std::string b = "block" + std::to_string(l) + ".";
    auto q = linear(x, ps.get(b + "attn.q.weight"), ps.get(b + "attn.q.bias"));
    auto k = linear(x, ps.get(b + "attn.k.weight"), ps.get(b + "attn.k.bias"));
    auto v = linear(x, ps.get(b + "attn.v.weight"), ps.get(b + "attn.v.bias"));
    std::vector<Tensor<T>> head_outs;
    head_outs.reserve(static_cast<size_t>(cfg.A));
    for (int a = 0; a < cfg.A; ++a) {
      auto qa = slice_cols(q, static_cast<size_t>(a) * dh, dh);
      auto ka = slice_cols(k, static_cast<size_t>(a) * dh, dh);
      auto va = slice_cols(v, static_cast<size_t>(a) * dh, dh);
      auto scores = scale(matmul(qa, transpose(ka)), 1.0 / std::sqrt(static_cast<double>(dh)));
      auto probs = dropout(softmax(scores), p, rng, train);
      head_outs.push_back(attn_mix(probs, va));
    }
    auto attn = concat_cols(head_outs);
    attn = linear(attn, ps.get(b + "attn.out.weight"), ps.get(b + "attn.out.bias"));
    attn = dropout(attn, p, rng, train);
    x = layer_norm(add(x, attn), ps.get(b + "ln1.gain"), ps.get(b + "ln1.bias"));

    auto f = gelu(linear(x, ps.get(b + "ffn.fc1.weight"), ps.get(b + "ffn.fc1.bias")));
    f = linear(f, ps.get(b + "ffn.fc2.weight"), ps.get(b + "ffn.fc2.bias"));
    f = dropout(f, p, rng, train);
    x = layer_norm(add(x, f), ps.get(b + "ln2.gain"), ps.get(b + "ln2.bias"));
  }
  return x;
}

template <typename T>
std::vector<Tensor<T>> crn_forward_batch(const CrnConfig& cfg, const ParameterStore<T>& ps,
                                         const std::vector<Tensor<T>>& windows,
                                         const std::vector<std::vector<size_t>>& mask_sets,
                                         bool train, Rng& rng) {
  if (!mask_sets.empty() && mask_sets.size() != windows.size()) {
    throw ShapeError("crn_forward_batch: " + std::to_string(windows.size()) + " windows but " +
                     std::to_string(mask_sets.size()) + " mask sets");
  }
  static const std::vector<size_t> kNoMask;
  std::vector<Tensor<T>> out;
  out.reserve(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) {
    out.push_back(crn_forward(cfg, ps, windows[i], mask_sets.empty() ? kNoMask : mask_sets[i],
                              train, rng));
  }
  return out;
}

// --- task heads -----------------------------------------------------------
// All heads accept a rank-1 vector or a rank-2 row batch.

/// Shared D_e -> H map (the network's input projection).
template <typename T>
Tensor<T> project_input(const ParameterStore<T>& ps, const Tensor<T>& x) {
  return linear(x, ps.get("input_proj.weight"), ps.get("input_proj.bias"));
}

/// H -> H projection into the shot/scene matching space.
template <typename T>
Tensor<T> ssm_head(const ParameterStore<T>& ps, const Tensor<T>& h) {
  return linear(h, ps.get("head.ssm.weight"), ps.get("head.ssm.bias"));
}

/// Ordered-pair logit: does `other` belong to the same group as `anchor`?
template <typename T>
Tensor<T> cgm_logit(const ParameterStore<T>& ps, const Tensor<T>& anchor,
                    const Tensor<T>& other) {
  auto h = gelu(linear(concat_cols(anchor, other), ps.get("head.cgm.fc1.weight"),
                       ps.get("head.cgm.fc1.bias")));
  return linear(h, ps.get("head.cgm.fc2.weight"), ps.get("head.cgm.fc2.bias"));
}

template <typename T>
Tensor<T> cgm_score(const ParameterStore<T>& ps, const Tensor<T>& anchor,
                    const Tensor<T>& other) {
  return sigmoid(cgm_logit(ps, anchor, other));
}

template <typename T>
Tensor<T> pp_logit(const ParameterStore<T>& ps, const Tensor<T>& c) {
  return linear(c, ps.get("head.pp.weight"), ps.get("head.pp.bias"));
}

template <typename T>
Tensor<T> pp_score(const ParameterStore<T>& ps, const Tensor<T>& c) {
  return sigmoid(pp_logit(ps, c));
}

template <typename T>
Tensor<T> msm_reconstruct(const ParameterStore<T>& ps, const Tensor<T>& c) {
  return linear(c, ps.get("head.msm.weight"), ps.get("head.msm.bias"));
}

template <typename T>
Tensor<T> sbd_logit(const ParameterStore<T>& ps, const Tensor<T>& c) {
  return linear(c, ps.get("head.sbd.weight"), ps.get("head.sbd.bias"));
}

template <typename T>
Tensor<T> sbd_score(const ParameterStore<T>& ps, const Tensor<T>& c) {
  return sigmoid(sbd_logit(ps, c));
}

// --- checkpoints -----------------------------------------------------------

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CrnConfig& cfg,
                     const ParameterStore<T>& ps) {
  RawCheckpoint raw;
  raw.version = 1;
  raw.config_json = crn_config_to_json(cfg);
  for (const auto& [name, t] : ps.items()) {
    RawTensor rt;
    rt.name = name;
    rt.shape = t.shape();
    rt.data.reserve(t.size());
    for (T v : t.values()) rt.data.push_back(static_cast<float>(v));
    raw.tensors.push_back(std::move(rt));
  }
  write_checkpoint_file(path, raw);
}

namespace detail {

template <typename T>
void fill_store_from_raw(ParameterStore<T>& ps, const RawCheckpoint& raw,
                         const std::filesystem::path& path) {
  std::unordered_set<std::string> filled;
  for (const auto& rt : raw.tensors) {
    if (!ps.has(rt.name)) {
      throw DataError("checkpoint contains unknown tensor " + rt.name + ": " + path.string());
    }
    auto& t = ps.get(rt.name);
    if (rt.shape != t.shape()) {
      throw ShapeError("checkpoint tensor " + rt.name + " has shape " +
                       Tensor<T>::shape_str(rt.shape) + ", expected " +
                       Tensor<T>::shape_str(t.shape()));
    }
    for (size_t i = 0; i < rt.data.size(); ++i) {
      t.mutable_values()[i] = static_cast<T>(rt.data[i]);
    }
    filled.insert(rt.name);
  }
  for (const auto& [name, t] : ps.items()) {
    (void)t;
    if (!filled.count(name)) {
      throw DataError("checkpoint missing tensor " + name + ": " + path.string());
    }
  }
}

}  // namespace detail

/// Load with the architecture recorded in the file.
template <typename T>
std::pair<CrnConfig, ParameterStore<T>> load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_checkpoint_file(path);
  if (raw.version != 1) {
    throw DataError("unsupported checkpoint version " + std::to_string(raw.version) + ": " +
                    path.string());
  }
  CrnConfig cfg = crn_config_from_json(raw.config_json);
  auto ps = make_crn_store<T>(cfg);
  detail::fill_store_from_raw(ps, raw, path);
  return {cfg, std::move(ps)};
}

/// Load into shapes derived from `expected`; a checkpoint trained with a
/// different architecture fails with the first mismatching tensor named.
template <typename T>
std::pair<CrnConfig, ParameterStore<T>> load_checkpoint(const std::filesystem::path& path,
                                                        const CrnConfig& expected) {
  RawCheckpoint raw = read_checkpoint_file(path);
  if (raw.version != 1) {
    throw DataError("unsupported checkpoint version " + std::to_string(raw.version) + ": " +
                    path.string());
  }
  CrnConfig cfg = crn_config_from_json(raw.config_json);
  auto ps = make_crn_store<T>(expected);
  detail::fill_store_from_raw(ps, raw, path);
  return {cfg, std::move(ps)};
}

}  // namespace bassl
