#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bassl/tensor.hpp"

namespace bassl {

struct GradCheckReport {
  double max_rel_err = 0.0;   // max over coordinates of |analytic - numeric| / max(1, |numeric|)
  std::string worst_param;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compare reverse-mode gradients against central differences.
///
/// `f` must rebuild its graph from the given leaves on every call and return a
/// scalar loss tensor. Each listed leaf is perturbed coordinate by coordinate.
template <typename T, typename LossFn>
GradCheckReport grad_check(LossFn f, const std::vector<std::pair<std::string, Tensor<T>>>& params,
                           double eps = 1e-5) {
  for (const auto& [name, t] : params) {
    (void)name;
    const_cast<Tensor<T>&>(t).zero_grad();
  }
  auto loss = f();
  if (!std::isfinite(static_cast<double>(loss.item()))) {
    throw NumericError("grad_check: loss is not finite");
  }
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, t] : params) {
    (void)name;
    std::vector<double> g(t.size(), 0.0);
    if (!t.node()->grad.empty()) {
      for (size_t i = 0; i < t.size(); ++i) g[i] = static_cast<double>(t.node()->grad[i]);
    }
    analytic.push_back(std::move(g));
  }

  GradCheckReport report;
  for (size_t p = 0; p < params.size(); ++p) {
    auto& t = const_cast<Tensor<T>&>(params[p].second);
    for (size_t i = 0; i < t.size(); ++i) {
      const T orig = t.values()[i];
      t.mutable_values()[i] = orig + static_cast<T>(eps);
      const double up = static_cast<double>(f().item());
      t.mutable_values()[i] = orig - static_cast<T>(eps);
      const double down = static_cast<double>(f().item());
      t.mutable_values()[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: perturbed loss is not finite at " + params[p].first +
                           "[" + std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double rel = std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = params[p].first;
        report.worst_index = i;
        report.worst_analytic = analytic[p][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace bassl
