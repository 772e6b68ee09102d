#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "ota/tensor.hpp"

namespace ota {

// Named collection of trainable tensors. Iteration order is insertion order
// so optimizer sweeps and serialization are deterministic.
class ParamStore {
 public:
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init
  Tensor& add(const std::string& name, std::vector<int> shape, int fan_in,
              RngStream& rng, bool weight_decay = true) {
    Tensor t(std::move(shape), true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return insert(name, std::move(t), weight_decay);
  }

  Tensor& add_zeros(const std::string& name, std::vector<int> shape) {
    return insert(name, Tensor(std::move(shape), true), false);
  }

  Tensor& add_const(const std::string& name, std::vector<int> shape, double value) {
    Tensor t(std::move(shape), true);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = value;
    return insert(name, std::move(t), false);
  }

  Tensor& insert(const std::string& name, Tensor t, bool weight_decay) {
    if (index_.count(name)) throw ValueError("ParamStore: duplicate name " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    decay_.push_back(weight_decay);
    return tensors_.back();
  }

  Tensor& operator[](const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("ParamStore: unknown name " + name);
    return tensors_[it->second];
  }
  const Tensor& operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("ParamStore: unknown name " + name);
    return tensors_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  size_t count() const { return tensors_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Tensor& tensor(size_t i) { return tensors_[i]; }
  const Tensor& tensor(size_t i) const { return tensors_[i]; }
  bool decays(size_t i) const { return decay_[i]; }

  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& t : tensors_) t.zero_grad();
  }

  ParamStore clone() const {
    ParamStore p;
    p.names_ = names_;
    p.index_ = index_;
    p.decay_ = decay_;
    p.tensors_.reserve(tensors_.size());
    for (const auto& t : tensors_) {
      Tensor c = t.clone();
      c.set_requires_grad(true);
      p.tensors_.push_back(std::move(c));
    }
    return p;
  }

  // Copy values from another store with identical structure.
  void copy_values_from(const ParamStore& other) {
    if (other.count() != count()) throw ValueError("ParamStore: structure mismatch");
    for (size_t i = 0; i < tensors_.size(); ++i)
      tensors_[i].values() = other.tensors_[i].values();
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::vector<bool> decay_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace ota
