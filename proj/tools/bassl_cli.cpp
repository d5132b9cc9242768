// Command-line front end: corpus generation, pre-training, fine-tuning,
// inference, evaluation, pseudo-boundary dumps and a gradient self-check.
//
// Config precedence: built-in defaults < --config JSON file < explicit flags.
// The fully resolved configuration is written to <out>/config.resolved.json
// so every run directory is self-describing and replayable.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bassl/boundary.hpp"
#include "bassl/corpus.hpp"
#include "bassl/crn.hpp"
#include "bassl/diagnostics.hpp"
#include "bassl/eval.hpp"
#include "bassl/logging.hpp"
#include "bassl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- configuration ----------------------------------------------------------

json default_config() {
  json j;
  j["seed"] = 0;
  j["threads"] = 1;
  j["precision"] = 64;
  // network
  j["L"] = 2;
  j["H"] = 64;
  j["A"] = 4;
  j["dropout"] = 0.1;
  j["K"] = 8;
  j["D_e"] = 32;
  // training
  j["lr"] = 1e-3;
  j["batch"] = 32;
  j["epochs"] = 5;
  j["warmup_frac"] = 0.1;
  j["beta1"] = 0.9;
  j["beta2"] = 0.999;
  j["adam_eps"] = 1e-8;
  j["weight_decay"] = 0.0;
  j["clip_norm"] = 1.0;
  j["theta"] = 0.5;
  j["aug_sigma"] = 0.01;
  j["aug_drop"] = 0.1;
  j["tau"] = 0.1;
  j["msm_p"] = 0.15;
  j["strategy"] = "dtw";
  j["finetune_balance"] = false;
  j["alpha_ssm"] = 1.0;
  j["alpha_cgm"] = 1.0;
  j["alpha_pp"] = 1.0;
  j["alpha_msm"] = 1.0;
  // synthetic corpus
  j["movies"] = 10;
  j["scenes_min"] = 3;
  j["scenes_max"] = 8;
  j["shots_min"] = 4;
  j["shots_max"] = 12;
  j["dim"] = 32;
  j["proto_sep"] = 0.5;
  j["noise_sigma"] = 0.05;
  j["alternation"] = false;
  j["split"] = "train";
  // evaluation
  j["miou_mode"] = "symmetric";
  return j;
}

void merge_config_file(json& resolved, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw bassl::ConfigError("cannot open config file: " + path.string());
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    throw bassl::ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!user.is_object()) {
    throw bassl::ConfigError("config file " + path.string() + " must hold a JSON object");
  }
  for (const auto& [key, value] : user.items()) {
    if (!resolved.contains(key)) {
      throw bassl::ConfigError("config file " + path.string() + ": unknown key \"" + key + "\"");
    }
    resolved[key] = value;
  }
}

bassl::SynthConfig synth_from(const json& j) {
  bassl::SynthConfig s;
  s.num_movies = j.at("movies").get<size_t>();
  s.scenes_per_movie = {j.at("scenes_min").get<size_t>(), j.at("scenes_max").get<size_t>()};
  s.shots_per_scene = {j.at("shots_min").get<size_t>(), j.at("shots_max").get<size_t>()};
  s.dim = j.at("dim").get<size_t>();
  s.prototype_separation = j.at("proto_sep").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.alternation = j.at("alternation").get<bool>();
  s.seed = j.at("seed").get<uint64_t>();
  return s;
}

bassl::CrnConfig crn_from(const json& j) {
  bassl::CrnConfig c;
  c.L = j.at("L").get<int>();
  c.H = j.at("H").get<int>();
  c.A = j.at("A").get<int>();
  c.dropout_p = j.at("dropout").get<double>();
  c.K = j.at("K").get<int>();
  c.D_e = j.at("D_e").get<int>();
  return c;
}

bassl::TrainConfig train_from(const json& j) {
  bassl::TrainConfig t;
  t.base_lr = j.at("lr").get<double>();
  t.batch_size = j.at("batch").get<size_t>();
  t.epochs = j.at("epochs").get<size_t>();
  t.warmup_fraction = j.at("warmup_frac").get<double>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.adam_eps = j.at("adam_eps").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.clip_norm = j.at("clip_norm").get<double>();
  t.seed = j.at("seed").get<uint64_t>();
  t.K = j.at("K").get<int>();
  t.theta = j.at("theta").get<double>();
  t.aug_sigma = j.at("aug_sigma").get<double>();
  t.aug_drop = j.at("aug_drop").get<double>();
  t.tau = j.at("tau").get<double>();
  t.msm_p = j.at("msm_p").get<double>();
  t.weights.alpha_ssm = j.at("alpha_ssm").get<double>();
  t.weights.alpha_cgm = j.at("alpha_cgm").get<double>();
  t.weights.alpha_pp = j.at("alpha_pp").get<double>();
  t.weights.alpha_msm = j.at("alpha_msm").get<double>();
  t.strategy = bassl::parse_strategy(j.at("strategy").get<std::string>());
  t.finetune_balance = j.at("finetune_balance").get<bool>();
  return t;
}

bassl::MiouMode miou_mode_from(const json& j) {
  const auto name = j.at("miou_mode").get<std::string>();
  if (name == "symmetric") return bassl::MiouMode::symmetric;
  if (name == "pred_to_gt") return bassl::MiouMode::pred_to_gt;
  throw bassl::ConfigError("miou_mode must be symmetric or pred_to_gt, got " + name);
}

int resolved_precision(const json& j) {
  const int p = j.at("precision").get<int>();
  if (p != 32 && p != 64) throw bassl::ConfigError("precision must be 32 or 64");
  return p;
}

int resolved_threads(const json& j) {
  const int t = j.at("threads").get<int>();
  if (t < 1) throw bassl::ConfigError("threads must be >= 1");
  return t;
}

void write_resolved(const json& j, const std::string& subcommand, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  json full = j;
  full["subcommand"] = subcommand;
  std::ofstream out(out_dir / "config.resolved.json");
  if (!out) {
    throw bassl::DataError("cannot write " + (out_dir / "config.resolved.json").string());
  }
  out << full.dump(2) << "\n";
}

std::string num17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- subcommand bodies -------------------------------------------------------

int cmd_gen(const json& j, const fs::path& out_dir) {
  auto corpus = bassl::generate_synthetic(synth_from(j));
  corpus.split_tag = j.at("split").get<std::string>();
  write_resolved(j, "gen", out_dir);
  bassl::save_corpus(corpus, out_dir);
  size_t shots = 0;
  for (const auto& m : corpus.movies) shots += m.num_shots;
  std::cout << "gen: wrote " << corpus.movies.size() << " movies (" << shots << " shots, dim "
            << corpus.dim << ") to " << out_dir.string() << "\n";
  return 0;
}

template <typename T>
int cmd_pretrain(const json& j, const fs::path& corpus_dir, const fs::path& out_dir) {
  auto corpus = bassl::load_corpus(corpus_dir);
  const auto ccfg = crn_from(j);
  const auto tcfg = train_from(j);
  write_resolved(j, "pretrain", out_dir);
  auto ps = bassl::pretrain<T>(corpus, ccfg, tcfg, out_dir, resolved_threads(j));
  std::cout << "pretrain: wrote " << (out_dir / "checkpoint.bsck").string() << "\n";
  return 0;
}

template <typename T>
int cmd_finetune(const json& j, const fs::path& corpus_dir, const fs::path& ckpt,
                 const fs::path& out_dir) {
  auto corpus = bassl::load_corpus(corpus_dir);
  auto [ccfg, ps] = bassl::load_checkpoint<T>(ckpt);
  auto tcfg = train_from(j);
  tcfg.K = ccfg.K;  // the window radius is fixed by the checkpoint's architecture
  write_resolved(j, "finetune", out_dir);
  bassl::finetune<T>(corpus, ccfg, ps, tcfg, out_dir, resolved_threads(j));
  std::cout << "finetune: wrote " << (out_dir / "checkpoint.bsck").string() << "\n";
  return 0;
}

template <typename T>
int cmd_infer(const json& j, const fs::path& corpus_dir, const fs::path& ckpt,
              const fs::path& out_dir) {
  auto corpus = bassl::load_corpus(corpus_dir);
  auto [ccfg, ps] = bassl::load_checkpoint<T>(ckpt);
  write_resolved(j, "infer", out_dir);
  std::ofstream out(out_dir / "scores.csv");
  if (!out) throw bassl::DataError("cannot write " + (out_dir / "scores.csv").string());
  out << "movie,shot,score,label\n";
  for (const auto& movie : corpus.movies) {
    const auto scores = bassl::predict_scores<T>(ccfg, ps, movie);
    for (size_t n = 0; n < scores.size(); ++n) {
      out << movie.movie_id << "," << n << "," << num17(scores[n]) << ",";
      if (movie.labels) out << int((*movie.labels)[n]);
      out << "\n";
    }
  }
  std::cout << "infer: wrote " << (out_dir / "scores.csv").string() << "\n";
  return 0;
}

template <typename T>
int cmd_eval(const json& j, const fs::path& corpus_dir, const fs::path& ckpt,
             const fs::path& out_dir) {
  auto corpus = bassl::load_corpus(corpus_dir);
  auto [ccfg, ps] = bassl::load_checkpoint<T>(ckpt);
  const auto report =
      bassl::evaluate<T>(ccfg, ps, corpus, j.at("theta").get<double>(), miou_mode_from(j));
  write_resolved(j, "eval", out_dir);
  std::ofstream out(out_dir / "metrics.json");
  if (!out) throw bassl::DataError("cannot write " + (out_dir / "metrics.json").string());
  out << bassl::metrics_report_json(report) << "\n";
  std::cout << "eval: ap=" << num17(report.ap) << " miou=" << num17(report.miou)
            << " auc_roc=" << num17(report.auc_roc) << " f1=" << num17(report.f1)
            << " meta_sum=" << num17(report.meta_sum) << "\n";
  return 0;
}

int cmd_boundary(const json& j, const fs::path& corpus_dir, const fs::path& out_dir) {
  auto corpus = bassl::load_corpus(corpus_dir);
  const int K = j.at("K").get<int>();
  const auto strategy = bassl::parse_strategy(j.at("strategy").get<std::string>());
  if (strategy == bassl::BoundaryStrategy::synthesized) {
    throw bassl::ConfigError("boundary: the synthesized strategy has no per-center output");
  }
  write_resolved(j, "boundary", out_dir);
  std::ofstream out(out_dir / "boundaries.jsonl");
  if (!out) throw bassl::DataError("cannot write " + (out_dir / "boundaries.jsonl").string());
  bassl::Rng root(j.at("seed").get<uint64_t>());
  for (size_t mi = 0; mi < corpus.movies.size(); ++mi) {
    const auto& movie = corpus.movies[mi];
    bassl::Rng movie_rng = root.split(mi);
    for (size_t n = 0; n < movie.num_shots; ++n) {
      bassl::PseudoSplit split;
      if (strategy == bassl::BoundaryStrategy::dtw) {
        const auto w = bassl::make_window(movie, static_cast<long>(n), K);
        bassl::Mat anchors(2, w.embeddings.cols);
        for (size_t d = 0; d < w.embeddings.cols; ++d) {
          anchors.at(0, d) = w.embeddings.at(0, d);
          anchors.at(1, d) = w.embeddings.at(w.embeddings.rows - 1, d);
        }
        split = bassl::dtw_boundary(w.embeddings, anchors);
      } else if (strategy == bassl::BoundaryStrategy::random) {
        bassl::Rng r = movie_rng.split(n);
        split = bassl::random_boundary(K, r);
      } else {
        split = bassl::fixed_boundary(K);
      }
      out << "{\"movie\":" << json(movie.movie_id).dump() << ",\"center\":" << n
          << ",\"b_star\":" << split.b_star << ",\"score\":" << num17(split.score) << "}\n";
    }
  }
  std::cout << "boundary: wrote " << (out_dir / "boundaries.jsonl").string() << "\n";
  return 0;
}

template <typename T>
int cmd_gradcheck(const json& j) {
  const auto reports = bassl::pipeline_grad_reports<T>(j.at("seed").get<uint64_t>());
  bool ok = true;
  for (const auto& [name, r] : reports) {
    std::cout << "gradcheck loss=" << name << " max_rel_err=" << num17(r.max_rel_err)
              << " worst=" << r.worst_param << "[" << r.worst_index << "]\n";
    ok = ok && r.max_rel_err < 1e-4;
  }
  if (!ok) throw bassl::NumericError("gradcheck: a loss gradient differs from finite differences");
  std::cout << "gradcheck: all losses within 1e-4\n";
  return 0;
}

void err_line(const char* kind, const std::string& msg) {
  std::cerr << "{\"error\":\"" << kind << "\",\"message\":" << json(msg).dump() << "}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-aware self-supervised scene segmentation toolkit"};
  app.require_subcommand(1);

  json resolved = default_config();
  std::string config_path, corpus_dir, ckpt_path, out_dir;

  // Flags write straight into the resolved JSON, but only when given on the
  // command line, preserving defaults < config file < flags precedence.
  std::vector<std::pair<CLI::Option*, std::function<void()>>> overrides;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "JSON config file merged over built-in defaults")
        ->check(CLI::ExistingFile);
    if (needs_out) {
      sub->add_option("--out", out_dir, "output directory")->required();
    }
    auto opt = [sub, &resolved, &overrides](const char* flag, const char* key,
                                            const char* help) {
      auto holder = std::make_shared<std::string>();
      CLI::Option* o = sub->add_option(flag, *holder, help);
      overrides.emplace_back(o, [&resolved, key, holder] {
        try {
          resolved[key] = json::parse(*holder);
        } catch (const json::exception&) {
          resolved[key] = *holder;  // bare strings (e.g. --strategy dtw)
        }
      });
      return o;
    };
    opt("--seed", "seed", "root random seed");
    opt("--threads", "threads", "worker threads (1 = bitwise deterministic)");
    opt("--precision", "precision", "floating point width: 32 or 64")
        ->check(CLI::IsMember({"32", "64"}));
    return opt;
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
  {
    auto opt = add_common(gen, true);
    opt("--movies", "movies", "number of movies");
    opt("--dim", "dim", "embedding dimension");
    opt("--split", "split", "split tag: pretrain|train|val|test");
    opt("--scenes-min", "scenes_min", "min scenes per movie");
    opt("--scenes-max", "scenes_max", "max scenes per movie");
    opt("--shots-min", "shots_min", "min shots per scene");
    opt("--shots-max", "shots_max", "max shots per scene");
    opt("--proto-sep", "proto_sep", "min pairwise cosine distance between scene prototypes");
    opt("--noise-sigma", "noise_sigma", "per-shot gaussian noise");
    opt("--alternation", "alternation", "alternate sub-prototypes within scenes (true/false)");
  }

  auto add_train_flags = [&](CLI::App* sub, auto opt) {
    sub->add_option("--corpus", corpus_dir, "corpus directory")->required();
    opt("--K", "K", "window half-width");
    opt("--epochs", "epochs", "training epochs");
    opt("--batch", "batch", "batch size");
    opt("--lr", "lr", "peak learning rate");
    opt("--warmup-frac", "warmup_frac", "fraction of steps spent in linear warmup");
    opt("--weight-decay", "weight_decay", "decoupled weight decay");
    opt("--clip-norm", "clip_norm", "global gradient-norm cap (<= 0 disables)");
    opt("--beta1", "beta1", "Adam first-moment decay");
    opt("--beta2", "beta2", "Adam second-moment decay");
    opt("--dropout", "dropout", "dropout probability");
  };

  auto* pretrain = app.add_subcommand("pretrain", "self-supervised pre-training");
  {
    auto opt = add_common(pretrain, true);
    add_train_flags(pretrain, opt);
    opt("--strategy", "strategy", "pseudo-boundary strategy: dtw|random|fixed|synthesized")
        ->check(CLI::IsMember({"dtw", "random", "fixed", "synthesized"}));
    opt("--L", "L", "transformer blocks");
    opt("--H", "H", "hidden width");
    opt("--A", "A", "attention heads");
    opt("--D-e", "D_e", "input embedding dimension");
    opt("--tau", "tau", "contrastive temperature");
    opt("--msm-p", "msm_p", "mask probability");
    opt("--aug-sigma", "aug_sigma", "augmentation noise");
    opt("--aug-drop", "aug_drop", "augmentation feature-drop rate");
    opt("--alpha-ssm", "alpha_ssm", "shot-scene matching weight");
    opt("--alpha-cgm", "alpha_cgm", "contextual group matching weight");
    opt("--alpha-pp", "alpha_pp", "pseudo-boundary prediction weight");
    opt("--alpha-msm", "alpha_msm", "masked shot modeling weight");
  }

  auto* finetune = app.add_subcommand("finetune", "train the boundary head on labels");
  {
    auto opt = add_common(finetune, true);
    add_train_flags(finetune, opt);
    finetune->add_option("--ckpt", ckpt_path, "pre-trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    opt("--balance", "finetune_balance", "re-weight positive windows by neg/pos (true/false)");
  }

  auto* infer = app.add_subcommand("infer", "per-shot boundary scores to CSV");
  {
    add_common(infer, true);
    infer->add_option("--corpus", corpus_dir, "corpus directory")->required();
    infer->add_option("--ckpt", ckpt_path, "checkpoint")->required()->check(CLI::ExistingFile);
  }

  auto* eval = app.add_subcommand("eval", "full metric report on a labeled corpus");
  {
    auto opt = add_common(eval, true);
    eval->add_option("--corpus", corpus_dir, "corpus directory")->required();
    eval->add_option("--ckpt", ckpt_path, "checkpoint")->required()->check(CLI::ExistingFile);
    opt("--theta", "theta", "boundary decision threshold");
    opt("--miou-mode", "miou_mode", "mIoU direction: symmetric|pred_to_gt")
        ->check(CLI::IsMember({"symmetric", "pred_to_gt"}));
  }

  auto* boundary = app.add_subcommand("boundary", "pseudo-boundary offsets per window");
  {
    auto opt = add_common(boundary, true);
    boundary->add_option("--corpus", corpus_dir, "corpus directory")->required();
    opt("--K", "K", "window half-width");
    opt("--strategy", "strategy", "dtw|random|fixed")
        ->check(CLI::IsMember({"dtw", "random", "fixed"}));
  }

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of every loss");
  add_common(gradcheck, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err_line("usage", e.what());
    std::cerr << app.help();
    return 2;
  }

  try {
    if (!config_path.empty()) merge_config_file(resolved, config_path);
    for (auto& [option, apply] : overrides) {
      if (option->count() > 0) apply();
    }
    const int precision = resolved_precision(resolved);
    resolved_threads(resolved);  // validate early

    if (gen->parsed()) return cmd_gen(resolved, out_dir);
    if (pretrain->parsed()) {
      return precision == 32 ? cmd_pretrain<float>(resolved, corpus_dir, out_dir)
                             : cmd_pretrain<double>(resolved, corpus_dir, out_dir);
    }
    if (finetune->parsed()) {
      return precision == 32 ? cmd_finetune<float>(resolved, corpus_dir, ckpt_path, out_dir)
                             : cmd_finetune<double>(resolved, corpus_dir, ckpt_path, out_dir);
    }
    if (infer->parsed()) {
      return precision == 32 ? cmd_infer<float>(resolved, corpus_dir, ckpt_path, out_dir)
                             : cmd_infer<double>(resolved, corpus_dir, ckpt_path, out_dir);
    }
    if (eval->parsed()) {
      return precision == 32 ? cmd_eval<float>(resolved, corpus_dir, ckpt_path, out_dir)
                             : cmd_eval<double>(resolved, corpus_dir, ckpt_path, out_dir);
    }
    if (boundary->parsed()) return cmd_boundary(resolved, corpus_dir, out_dir);
    if (gradcheck->parsed()) {
      return precision == 32 ? cmd_gradcheck<float>(resolved) : cmd_gradcheck<double>(resolved);
    }
    err_line("usage", "no subcommand given");
    return 2;
  } catch (const json::exception& e) {
    err_line("usage", std::string("config: ") + e.what());
    return 2;
  } catch (const bassl::ConfigError& e) {
    err_line("usage", e.what());
    return 2;
  } catch (const bassl::DataError& e) {
    err_line("data", e.what());
    return 3;
  } catch (const bassl::ShapeError& e) {
    err_line("data", e.what());
    return 3;
  } catch (const bassl::NumericError& e) {
    err_line("numeric", e.what());
    return 4;
  } catch (const std::exception& e) {
    err_line("internal", e.what());
    return 1;
  }
}
