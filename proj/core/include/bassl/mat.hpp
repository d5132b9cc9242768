#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace bassl {

/// Dense row-major matrix of doubles. Plain storage for corpus windows,
/// augmentation views and boundary scoring; carries no gradient machinery.
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }

  std::span<double> row(size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Cosine similarity of two equal-length vectors. Throws NumericError on a
/// zero-norm input; `a_label`/`b_label` name the offending row in the message.
double cosine(std::span<const double> a, std::span<const double> b,
              std::string_view a_label = "lhs", std::string_view b_label = "rhs");

bool all_finite(const Mat& m);

}  // namespace bassl
