// Contextual relation network: parameter initialization statistics, forward
// shape/masking contracts, permutation equivariance, head plumbing, and
// checkpoint round-trips with corruption/architecture-mismatch failures.
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bassl/crn.hpp"
#include "bassl/errors.hpp"
#include "bassl/rng.hpp"
#include "bassl/tensor.hpp"

using namespace bassl;
namespace fs = std::filesystem;

namespace {

CrnConfig tiny_cfg() {
  CrnConfig c;
  c.L = 2;
  c.H = 16;
  c.A = 2;
  c.dropout_p = 0.0;
  c.K = 2;
  c.D_e = 8;
  return c;
}

template <typename T>
Tensor<T> random_window(const CrnConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  auto w = Tensor<T>::zeros({static_cast<size_t>(cfg.seq_len()), static_cast<size_t>(cfg.D_e)},
                            false);
  for (auto& v : w.mutable_values()) v = static_cast<T>(rng.gaussian());
  return w;
}

fs::path temp_file(const std::string& tag) {
  return fs::temp_directory_path() / ("bassl_crn_test_" + tag + ".bsck");
}

}  // namespace

TEST_CASE("initialization draws truncated normal weights, unit gains, zero biases") {
  CrnConfig cfg;  // defaults: L=2 H=64 A=4 K=8 D_e=32 -> plenty of entries
  auto ps = init_crn_params<double>(cfg, 17);

  std::vector<double> weights;
  size_t gain_entries = 0, bias_entries = 0;
  for (const auto& [name, t] : ps.items()) {
    const bool is_weight = name.size() >= 7 && name.substr(name.size() - 7) == ".weight";
    if (is_weight || name == "pos_embed" || name == "mask_token") {
      for (double v : t.values()) weights.push_back(v);
    } else if (name.size() >= 5 && name.substr(name.size() - 5) == ".gain") {
      for (double v : t.values()) {
        CHECK(v == 1.0);
        ++gain_entries;
      }
    } else {
      for (double v : t.values()) {
        CHECK(v == 0.0);
        ++bias_entries;
      }
    }
  }
  REQUIRE(weights.size() >= 10000);
  CHECK(gain_entries > 0);
  CHECK(bias_entries > 0);

  double mean = 0.0;
  for (double v : weights) mean += v;
  mean /= static_cast<double>(weights.size());
  double var = 0.0;
  for (double v : weights) var += (v - mean) * (v - mean);
  var /= static_cast<double>(weights.size());
  const double sd = std::sqrt(var);

  CHECK(std::abs(mean) < 2e-3);
  // std 0.02 with +/- 2 sigma truncation: population sd is slightly below 0.02
  CHECK(sd > 0.015);
  CHECK(sd < 0.025);
  for (double v : weights) CHECK(std::abs(v) <= 0.04 + 1e-12);
}

TEST_CASE("initialization is a pure function of config and seed") {
  const auto cfg = tiny_cfg();
  auto a = init_crn_params<double>(cfg, 5);
  auto b = init_crn_params<double>(cfg, 5);
  auto c = init_crn_params<double>(cfg, 6);
  REQUIRE(a.size() == b.size());
  bool any_diff_from_c = false;
  for (size_t i = 0; i < a.items().size(); ++i) {
    CHECK(a.items()[i].first == b.items()[i].first);
    CHECK(a.items()[i].second.values() == b.items()[i].second.values());
    if (a.items()[i].second.values() != c.items()[i].second.values()) any_diff_from_c = true;
  }
  CHECK(any_diff_from_c);
}

TEST_CASE("forward pass enforces the window and mask-index contracts") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 1);
  Rng rng(2);

  auto w = random_window<double>(cfg, 3);
  auto out = crn_forward(cfg, ps, w, {}, false, rng);
  REQUIRE(out.rank() == 2);
  CHECK(out.dim(0) == static_cast<size_t>(cfg.seq_len()));
  CHECK(out.dim(1) == static_cast<size_t>(cfg.H));
  for (double v : out.values()) CHECK(std::isfinite(v));

  auto short_w = Tensor<double>::zeros({static_cast<size_t>(cfg.seq_len() - 1),
                                        static_cast<size_t>(cfg.D_e)},
                                       false);
  CHECK_THROWS_AS(crn_forward(cfg, ps, short_w, {}, false, rng), ShapeError);

  auto wrong_dim = Tensor<double>::zeros({static_cast<size_t>(cfg.seq_len()),
                                          static_cast<size_t>(cfg.D_e + 1)},
                                         false);
  CHECK_THROWS_AS(crn_forward(cfg, ps, wrong_dim, {}, false, rng), ShapeError);

  CHECK_THROWS_AS(crn_forward(cfg, ps, w, {static_cast<size_t>(cfg.seq_len())}, false, rng),
                  ShapeError);
}

TEST_CASE("evaluation mode is deterministic; training dropout is not a no-op") {
  auto cfg = tiny_cfg();
  cfg.dropout_p = 0.4;
  auto ps = init_crn_params<double>(cfg, 11);
  auto w = random_window<double>(cfg, 12);

  Rng r1(100), r2(999);
  auto a = crn_forward(cfg, ps, w, {}, false, r1);
  auto b = crn_forward(cfg, ps, w, {}, false, r2);
  CHECK(a.values() == b.values());  // rng must be unused when not training

  Rng r3(100);
  auto c = crn_forward(cfg, ps, w, {}, true, r3);
  CHECK(a.values() != c.values());
}

TEST_CASE("masking a row swaps in the learned token and changes the output") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 21);
  auto w = random_window<double>(cfg, 22);
  Rng rng(0);
  auto plain = crn_forward(cfg, ps, w, {}, false, rng);
  auto masked = crn_forward(cfg, ps, w, {2}, false, rng);
  CHECK(plain.values() != masked.values());

  // Masking every row makes the output independent of the window content.
  std::vector<size_t> all;
  for (size_t i = 0; i < static_cast<size_t>(cfg.seq_len()); ++i) all.push_back(i);
  auto m1 = crn_forward(cfg, ps, w, all, false, rng);
  auto m2 = crn_forward(cfg, ps, random_window<double>(cfg, 23), all, false, rng);
  for (size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1.values()[i] == doctest::Approx(m2.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("with zero positional embeddings the forward pass is permutation equivariant") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 31);
  for (auto& v : ps.get("pos_embed").mutable_values()) v = 0.0;

  const size_t S = static_cast<size_t>(cfg.seq_len());
  const size_t D = static_cast<size_t>(cfg.D_e);
  auto w = random_window<double>(cfg, 32);
  const std::vector<size_t> perm = {4, 0, 3, 1, 2};  // S = 5 for K = 2
  REQUIRE(perm.size() == S);

  auto pw = Tensor<double>::zeros({S, D}, false);
  for (size_t i = 0; i < S; ++i) {
    for (size_t j = 0; j < D; ++j) {
      pw.mutable_values()[perm[i] * D + j] = w.values()[i * D + j];
    }
  }

  Rng rng(0);
  auto out = crn_forward(cfg, ps, w, {}, false, rng);
  auto pout = crn_forward(cfg, ps, pw, {}, false, rng);
  const size_t H = static_cast<size_t>(cfg.H);
  for (size_t i = 0; i < S; ++i) {
    for (size_t j = 0; j < H; ++j) {
      CHECK(pout.values()[perm[i] * H + j] ==
            doctest::Approx(out.values()[i * H + j]).epsilon(1e-9));
    }
  }
}

TEST_CASE("positional embeddings break translation symmetry") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 41);
  const size_t S = static_cast<size_t>(cfg.seq_len());
  const size_t D = static_cast<size_t>(cfg.D_e);
  auto w = random_window<double>(cfg, 42);

  // Same content rotated by one position: with live pos_embed the outputs
  // at matching content rows must differ.
  auto rot = Tensor<double>::zeros({S, D}, false);
  for (size_t i = 0; i < S; ++i) {
    for (size_t j = 0; j < D; ++j) {
      rot.mutable_values()[((i + 1) % S) * D + j] = w.values()[i * D + j];
    }
  }
  Rng rng(0);
  auto out = crn_forward(cfg, ps, w, {}, false, rng);
  auto rout = crn_forward(cfg, ps, rot, {}, false, rng);
  bool differs = false;
  const size_t H = static_cast<size_t>(cfg.H);
  for (size_t j = 0; j < H && !differs; ++j) {
    if (std::abs(rout.values()[1 * H + j] - out.values()[0 * H + j]) > 1e-9) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("task heads produce the advertised shapes and ranges") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 51);
  auto w = random_window<double>(cfg, 52);
  Rng rng(0);
  auto ctx = crn_forward(cfg, ps, w, {}, false, rng);
  auto c0 = slice_rows(ctx, 0, 1);
  auto c1 = slice_rows(ctx, 1, 1);

  auto proj = ssm_head(ps, c0);
  CHECK(proj.dim(1) == static_cast<size_t>(cfg.H));

  auto rec = msm_reconstruct(ps, c0);
  CHECK(rec.dim(1) == static_cast<size_t>(cfg.D_e));

  auto cg = cgm_score(ps, c0, c1);
  REQUIRE(cg.size() == 1);
  CHECK(cg.values()[0] > 0.0);
  CHECK(cg.values()[0] < 1.0);

  auto pp = pp_score(ps, c0);
  REQUIRE(pp.size() == 1);
  CHECK(pp.values()[0] > 0.0);
  CHECK(pp.values()[0] < 1.0);

  auto sb = sbd_score(ps, c0);
  REQUIRE(sb.size() == 1);
  CHECK(sb.values()[0] > 0.0);
  CHECK(sb.values()[0] < 1.0);

  // Freshly initialized scoring heads have zero biases and small weights, so
  // the sigmoid outputs sit near 0.5.
  CHECK(std::abs(sb.values()[0] - 0.5) < 0.2);
}

TEST_CASE("checkpoints round-trip bitwise at single precision") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<float>(cfg, 61);
  const auto path = temp_file("roundtrip");
  save_checkpoint(path, cfg, ps);

  auto [loaded_cfg, loaded] = load_checkpoint<float>(path);
  CHECK(loaded_cfg == cfg);
  REQUIRE(loaded.size() == ps.size());
  for (size_t i = 0; i < ps.items().size(); ++i) {
    CHECK(loaded.items()[i].first == ps.items()[i].first);
    CHECK(loaded.items()[i].second.shape() == ps.items()[i].second.shape());
    CHECK(loaded.items()[i].second.values() == ps.items()[i].second.values());
  }

  auto [cfg2, loaded2] = load_checkpoint<float>(path, cfg);
  CHECK(cfg2 == cfg);
  for (size_t i = 0; i < ps.items().size(); ++i) {
    CHECK(loaded2.items()[i].second.values() == ps.items()[i].second.values());
  }
  fs::remove(path);
}

TEST_CASE("checkpoint values are stored at single precision") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<double>(cfg, 62);
  const auto path = temp_file("f32");
  save_checkpoint(path, cfg, ps);
  auto [lc, loaded] = load_checkpoint<double>(path);
  (void)lc;
  for (size_t i = 0; i < ps.items().size(); ++i) {
    const auto& orig = ps.items()[i].second.values();
    const auto& got = loaded.items()[i].second.values();
    REQUIRE(orig.size() == got.size());
    for (size_t j = 0; j < orig.size(); ++j) {
      CHECK(got[j] == static_cast<double>(static_cast<float>(orig[j])));
    }
  }
  fs::remove(path);
}

TEST_CASE("corrupted checkpoint files are rejected") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<float>(cfg, 63);
  const auto path = temp_file("corrupt");
  save_checkpoint(path, cfg, ps);

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    REQUIRE(f.good());
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), DataError);
  fs::remove(path);

  CHECK_THROWS_AS(load_checkpoint<float>(temp_file("missing_no_such_file")), DataError);
}

TEST_CASE("loading into a different architecture names the offending tensor") {
  const auto cfg = tiny_cfg();
  auto ps = init_crn_params<float>(cfg, 64);
  const auto path = temp_file("mismatch");
  save_checkpoint(path, cfg, ps);

  auto other = cfg;
  other.K = cfg.K + 1;  // changes the sequence length, hence pos_embed's shape
  bool threw = false;
  try {
    load_checkpoint<float>(path, other);
  } catch (const Error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("pos_embed") != std::string::npos);
  }
  CHECK(threw);
  fs::remove(path);
}
