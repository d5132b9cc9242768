#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bassl/rng.hpp"
#include "bassl/tensor.hpp"

namespace bassl {

/// Named leaf tensors in a stable (insertion) order. The order is what makes
/// optimizer sweeps and checkpoint files reproducible run to run.
template <typename T>
class ParameterStore {
 public:
  Tensor<T>& add(const std::string& name, std::vector<size_t> shape) {
    if (index_.count(name)) throw ConfigError("parameter already registered: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, Tensor<T>::zeros(std::move(shape), /*requires_grad=*/true));
    return items_.back().second;
  }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return items_[it->second].second;
  }

  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return items_[it->second].second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }

  size_t size() const { return items_.size(); }

  size_t num_values() const {
    size_t n = 0;
    for (const auto& [_, t] : items_) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& [_, t] : items_) t.zero_grad();
  }

  /// Gaussian fill truncated at +/- 2 sigma by rejection.
  static void init_trunc_normal(Tensor<T>& t, Rng& rng, double stddev) {
    for (auto& v : t.mutable_values()) {
      double g = rng.gaussian();
      while (std::abs(g) > 2.0) g = rng.gaussian();
      v = static_cast<T>(g * stddev);
    }
  }

  static void init_const(Tensor<T>& t, double value) {
    for (auto& v : t.mutable_values()) v = static_cast<T>(value);
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace bassl
