#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bassl/mat.hpp"
#include "bassl/rng.hpp"

namespace bassl {

/// One movie's shot embeddings (stored as the 32-bit floats that live on
/// disk) and optional per-shot boundary labels (1 = last shot of a scene).
struct MovieRecord {
  std::string movie_id;
  size_t num_shots = 0;
  size_t dim = 0;
  std::vector<float> embeddings;               // row-major num_shots x dim
  std::optional<std::vector<uint8_t>> labels;  // length num_shots when present

  std::span<const float> row(size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }
};

struct Corpus {
  size_t dim = 0;
  std::string split_tag = "train";  // pretrain | train | val | test
  std::vector<MovieRecord> movies;
};

/// A (2K+1)-shot slice centered on one shot, replicate-padded at movie edges.
struct Window {
  std::string movie_id;
  long center = 0;  // shot index; -1 for synthesized cross-movie windows
  int K = 0;
  Mat embeddings;  // (2K+1) x D_e
  std::optional<int> label;
  int pad_left = 0;
  int pad_right = 0;
};

struct SynthConfig {
  size_t num_movies = 10;
  std::pair<size_t, size_t> scenes_per_movie = {3, 8};  // inclusive
  std::pair<size_t, size_t> shots_per_scene = {4, 12};  // inclusive
  size_t dim = 32;
  double prototype_separation = 0.5;  // min pairwise cosine distance
  double noise_sigma = 0.05;
  bool alternation = false;
  uint64_t seed = 0;
};

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

Window make_window(const MovieRecord& movie, long center, int K);
std::vector<Window> make_windows(const MovieRecord& movie, int K);

Corpus generate_synthetic(const SynthConfig& cfg);

/// Additive Gaussian noise then independent coordinate dropout; the embedding
/// level stand-in for the paired augmentation views.
Mat augment_view(const Mat& embeddings, double sigma, double drop_rate, Rng& rng);

/// All shots of a movie widened to doubles.
Mat movie_matrix(const MovieRecord& movie);

}  // namespace bassl
