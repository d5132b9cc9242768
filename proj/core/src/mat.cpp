#include "bassl/mat.hpp"

#include <cmath>
#include <string>

#include "bassl/errors.hpp"

namespace bassl {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b, std::string_view a_label,
              std::string_view b_label) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine: zero-norm embedding row (" +
                       std::string(na == 0.0 ? a_label : b_label) + ")");
  }
  return dot(a, b) / (na * nb);
}

bool all_finite(const Mat& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace bassl
