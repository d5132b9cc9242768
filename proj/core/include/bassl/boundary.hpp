#pragma once

#include <string>
#include <utility>

#include "bassl/corpus.hpp"
#include "bassl/mat.hpp"
#include "bassl/rng.hpp"

namespace bassl {

/// A pseudo-boundary offset b* splitting a (2K+1)-shot window into a left
/// part (offsets -K..b*) and a right part (offsets b*+1..K). The boundary
/// shot is the last shot of the left part, i.e. window row K + b*.
struct PseudoSplit {
  int b_star = 0;  // in [-K+1, K-1]
  int K = 0;
  double score = 0.0;  // alignment objective value; 0 for non-aligned strategies

  std::pair<int, int> left_range() const { return {-K, b_star}; }
  std::pair<int, int> right_range() const { return {b_star + 1, K}; }
  size_t boundary_row() const { return static_cast<size_t>(K + b_star); }
};

enum class BoundaryStrategy { dtw, random, fixed, synthesized };

BoundaryStrategy parse_strategy(const std::string& name);
std::string strategy_name(BoundaryStrategy s);

/// Best split of the window by the two-anchor alignment objective: maximize
/// mean cosine of the left interior shots to the first-shot anchor plus mean
/// cosine of the right interior shots to the last-shot anchor. An empty right
/// interior (b = K-1) contributes 0. Ties go to the smallest |b|, negative
/// preferred on a magnitude tie.
PseudoSplit dtw_boundary(const Mat& e_main, const Mat& e_slow);

PseudoSplit random_boundary(int K, Rng& rng);
PseudoSplit fixed_boundary(int K);

/// Cross-movie window: b+K+1 contiguous shots from movie_a followed by K-b
/// from movie_b, with the concatenation point as the pseudo-boundary.
std::pair<Window, PseudoSplit> synthesize_window(const MovieRecord& movie_a,
                                                 const MovieRecord& movie_b, int K, Rng& rng);

}  // namespace bassl
