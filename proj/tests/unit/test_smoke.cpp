// End-to-end smoke: tiny corpus, pretrain a step, finetune a step, evaluate.
// Exercises every public header at both float widths.
#include <doctest.h>

#include <filesystem>

#include "bassl/boundary.hpp"
#include "bassl/checkpoint.hpp"
#include "bassl/corpus.hpp"
#include "bassl/crn.hpp"
#include "bassl/diagnostics.hpp"
#include "bassl/eval.hpp"
#include "bassl/grad_check.hpp"
#include "bassl/metrics.hpp"
#include "bassl/ops.hpp"
#include "bassl/param_store.hpp"
#include "bassl/pretext.hpp"
#include "bassl/train.hpp"

namespace fs = std::filesystem;
using namespace bassl;

namespace {

SynthConfig tiny_synth(uint64_t seed) {
  SynthConfig s;
  s.num_movies = 3;
  s.scenes_per_movie = {2, 3};
  s.shots_per_scene = {3, 5};
  s.dim = 8;
  s.seed = seed;
  return s;
}

CrnConfig tiny_crn() {
  CrnConfig c;
  c.L = 1;
  c.H = 8;
  c.A = 2;
  c.K = 3;
  c.D_e = 8;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 4;
  t.epochs = 1;
  t.K = 3;
  return t;
}

template <typename T>
void run_pipeline(const fs::path& dir) {
  auto corpus = generate_synthetic(tiny_synth(11));
  const auto ccfg = tiny_crn();
  const auto tcfg = tiny_train();

  auto ps = pretrain<T>(corpus, ccfg, tcfg, dir / "pre", 2);
  CHECK(fs::exists(dir / "pre" / "checkpoint.bsck"));
  CHECK(fs::exists(dir / "pre" / "train_log.jsonl"));

  auto [loaded_cfg, loaded] = load_checkpoint<T>(dir / "pre" / "checkpoint.bsck");
  CHECK(loaded_cfg == ccfg);
  finetune<T>(corpus, loaded_cfg, loaded, tcfg, dir / "ft", 1);

  auto report = evaluate<T>(loaded_cfg, loaded, corpus);
  CHECK(report.ap >= 0.0);
  CHECK(report.ap <= 1.0);
  CHECK(report.meta_sum ==
        doctest::Approx(100 * (report.ap + report.miou + report.auc_roc + report.f1)));

  ClusterProbeConfig pc;
  pc.num_scenes_sampled = 4;
  pc.scene_length = 3;
  pc.k = 4;
  auto sample = sample_probe_shots(corpus, pc);
  CHECK(sample.shots.size() == pc.num_scenes_sampled * pc.scene_length);
  const double raw = probe_nmi(raw_probe_points(corpus, sample), sample.scene_ids, pc);
  const double ctx =
      probe_nmi(ctx_probe_points<T>(loaded_cfg, loaded, corpus, sample), sample.scene_ids, pc);
  CHECK(raw >= 0.0);
  CHECK(raw <= 1.0);
  CHECK(ctx >= 0.0);
  CHECK(ctx <= 1.0);
}

}  // namespace

TEST_CASE("tiny pipeline runs at both precisions") {
  const fs::path dir = fs::temp_directory_path() / "bassl_smoke";
  fs::remove_all(dir);
  run_pipeline<double>(dir / "f64");
  run_pipeline<float>(dir / "f32");
  fs::remove_all(dir);
}
