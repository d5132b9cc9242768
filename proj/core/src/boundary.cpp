#include "bassl/boundary.hpp"

#include <cmath>
#include <cstdlib>

#include "bassl/errors.hpp"

namespace bassl {

BoundaryStrategy parse_strategy(const std::string& name) {
  if (name == "dtw") return BoundaryStrategy::dtw;
  if (name == "random") return BoundaryStrategy::random;
  if (name == "fixed") return BoundaryStrategy::fixed;
  if (name == "synthesized") return BoundaryStrategy::synthesized;
  throw ConfigError("unknown boundary strategy: " + name);
}

std::string strategy_name(BoundaryStrategy s) {
  switch (s) {
    case BoundaryStrategy::dtw: return "dtw";
    case BoundaryStrategy::random: return "random";
    case BoundaryStrategy::fixed: return "fixed";
    case BoundaryStrategy::synthesized: return "synthesized";
  }
  std::abort();
}

PseudoSplit dtw_boundary(const Mat& e_main, const Mat& e_slow) {
  if (e_main.rows < 5 || e_main.rows % 2 == 0) {
    throw ShapeError("dtw_boundary: window must have 2K+1 rows with K >= 2, got " +
                     std::to_string(e_main.rows));
  }
  if (e_slow.rows != 2 || e_slow.cols != e_main.cols) {
    throw ShapeError("dtw_boundary: anchor matrix must be 2 x " + std::to_string(e_main.cols) +
                     ", got " + std::to_string(e_slow.rows) + " x " + std::to_string(e_slow.cols));
  }
  const int K = static_cast<int>((e_main.rows - 1) / 2);

  // Cosines of every interior row (offsets -K+1 .. K-1) against each anchor.
  const size_t n_interior = 2 * static_cast<size_t>(K) - 1;
  std::vector<double> cos_first(n_interior), cos_last(n_interior);
  for (int off = -K + 1; off <= K - 1; ++off) {
    const size_t row = static_cast<size_t>(off + K);
    const size_t t = static_cast<size_t>(off + K - 1);
    const std::string row_label = "window row " + std::to_string(row);
    cos_first[t] = cosine(e_slow.row(0), e_main.row(row), "anchor row 0", row_label);
    cos_last[t] = cosine(e_slow.row(1), e_main.row(row), "anchor row 1", row_label);
  }

  PseudoSplit best;
  best.K = K;
  bool have_best = false;
  for (int b = -K + 1; b <= K - 1; ++b) {
    double left = 0.0;
    for (int i = -K + 1; i <= b; ++i) left += cos_first[static_cast<size_t>(i + K - 1)];
    left /= static_cast<double>(b + K);
    double right = 0.0;
    if (b < K - 1) {
      for (int j = b + 1; j <= K - 1; ++j) right += cos_last[static_cast<size_t>(j + K - 1)];
      right /= static_cast<double>(K - 1 - b);
    }
    const double score = left + right;
    const bool better =
        !have_best || score > best.score ||
        (score == best.score &&
         (std::abs(b) < std::abs(best.b_star) ||
          (std::abs(b) == std::abs(best.b_star) && b < best.b_star)));
    if (better) {
      best.b_star = b;
      best.score = score;
      have_best = true;
    }
  }
  return best;
}

PseudoSplit random_boundary(int K, Rng& rng) {
  if (K < 2) throw ConfigError("boundary strategies need K >= 2");
  PseudoSplit s;
  s.K = K;
  s.b_star = static_cast<int>(rng.range(-K + 1, K - 1));
  return s;
}

PseudoSplit fixed_boundary(int K) {
  if (K < 2) throw ConfigError("boundary strategies need K >= 2");
  PseudoSplit s;
  s.K = K;
  s.b_star = 0;
  return s;
}

std::pair<Window, PseudoSplit> synthesize_window(const MovieRecord& movie_a,
                                                 const MovieRecord& movie_b, int K, Rng& rng) {
  if (K < 2) throw ConfigError("boundary strategies need K >= 2");
  if (movie_a.movie_id == movie_b.movie_id) {
    throw ConfigError("synthesize_window needs two distinct movies");
  }
  const size_t need = 2 * static_cast<size_t>(K) + 1;
  for (const auto* m : {&movie_a, &movie_b}) {
    if (m->num_shots < need) {
      throw DataError("movie too short for synthesized window: " + m->movie_id + " has " +
                      std::to_string(m->num_shots) + " shots, need " + std::to_string(need));
    }
  }

  PseudoSplit split;
  split.K = K;
  split.b_star = static_cast<int>(rng.range(-K + 1, K - 1));
  const size_t take_a = static_cast<size_t>(split.b_star + K + 1);
  const size_t take_b = static_cast<size_t>(K - split.b_star);
  const size_t start_a =
      static_cast<size_t>(rng.range(0, static_cast<int64_t>(movie_a.num_shots - take_a)));
  const size_t start_b =
      static_cast<size_t>(rng.range(0, static_cast<int64_t>(movie_b.num_shots - take_b)));

  Window w;
  w.movie_id = movie_a.movie_id + "+" + movie_b.movie_id;
  w.center = -1;
  w.K = K;
  w.embeddings = Mat(need, movie_a.dim);
  size_t out_row = 0;
  for (size_t i = 0; i < take_a; ++i, ++out_row) {
    auto src = movie_a.row(start_a + i);
    auto dst = w.embeddings.row(out_row);
    for (size_t d = 0; d < movie_a.dim; ++d) dst[d] = static_cast<double>(src[d]);
  }
  for (size_t i = 0; i < take_b; ++i, ++out_row) {
    auto src = movie_b.row(start_b + i);
    auto dst = w.embeddings.row(out_row);
    for (size_t d = 0; d < movie_b.dim; ++d) dst[d] = static_cast<double>(src[d]);
  }
  return {std::move(w), split};
}

}  // namespace bassl
