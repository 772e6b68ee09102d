#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ota/errors.hpp"
#include "ota/rng.hpp"

namespace ota {

// Dense row-major double tensor. Data and grad buffers are shared
// (shared_ptr) so a Tensor handle is cheap to copy; an operation never
// mutates its inputs' values.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<double>>(count(shape_), 0.0)) {
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<int64_t>(values.size()) != t.size())
      throw ShapeError("Tensor::from: value count does not match shape");
    *t.data_ = std::move(values);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_ ? data_->size() : 0); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int rows() const { return shape_[0]; }
  int cols() const { return shape_.back(); }

  std::vector<double>& values() { return *data_; }
  const std::vector<double>& values() const { return *data_; }
  double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
  double& at(int r, int c) { return (*data_)[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return (*data_)[static_cast<size_t>(r) * cols() + c]; }

  bool requires_grad() const { return grad_ != nullptr; }
  void set_requires_grad(bool on) {
    if (on && !grad_) grad_ = std::make_shared<std::vector<double>>(data_->size(), 0.0);
    if (!on) grad_.reset();
  }
  std::vector<double>& grad() {
    if (!grad_) throw ValueError("Tensor::grad: tensor does not require grad");
    return *grad_;
  }
  const std::vector<double>& grad() const {
    if (!grad_) throw ValueError("Tensor::grad: tensor does not require grad");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

  // View with a new shape sharing data and grad buffers.
  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != size()) throw ShapeError("reshaped: element count mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    t.grad_ = grad_;
    return t;
  }

  // Deep copy with fresh buffers.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<double>>(*data_);
    if (grad_) t.grad_ = std::make_shared<std::vector<double>>(grad_->size(), 0.0);
    return t;
  }

  bool all_finite() const;

  bool same_buffer(const Tensor& o) const { return data_ == o.data_; }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("Tensor: nonpositive dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
};

std::string shape_str(const std::vector<int>& s);

// Reverse-mode tape. Operations append their adjoint closures in execution
// order; backward() replays them once, in reverse.
class GradTape {
 public:
  void record(std::function<void()> fn) { entries_.push_back(std::move(fn)); }

  void backward(Tensor& loss) {
    if (loss.size() != 1) throw ShapeError("backward: loss must be scalar");
    if (!loss.requires_grad()) throw ValueError("backward: loss does not require grad");
    loss.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  }

  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<std::function<void()>> entries_;
};

enum class Mode { Train, Eval };

// Running statistics for one batch-norm layer.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  bool initialized = false;
};

// ---- primitives (all record adjoints on `tape` when inputs require grad) --

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);
Tensor add(const Tensor& a, const Tensor& b, GradTape* tape = nullptr);
// x: [N, d] + row vector b: [d]
Tensor add_rowvec(const Tensor& x, const Tensor& b, GradTape* tape = nullptr);
Tensor scale(const Tensor& x, double c, GradTape* tape = nullptr);
Tensor relu(const Tensor& x, GradTape* tape = nullptr);
Tensor softmax_rows(const Tensor& x, GradTape* tape = nullptr);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5, GradTape* tape = nullptr);
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, double eps = 1e-5,
                  double momentum = 0.1, GradTape* tape = nullptr);
Tensor dropout(const Tensor& x, double rate, RngStream& rng, Mode mode,
               GradTape* tape = nullptr);
// table: [V, d]; ids: batch*len entries in [0, V)
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids,
                        int batch, int len, GradTape* tape = nullptr);
// q,k,v: [batch*len, d]; mask: batch*len of {0,1}; returns [batch*len, d].
// Scores scaled by 1/sqrt(d/heads); padding key positions masked out before
// softmax; a row whose sample has no unmasked keys yields zeros.
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        const std::vector<uint8_t>& mask, int batch, int len,
                        int heads = 1, GradTape* tape = nullptr);
// h: [batch*len, d] -> [batch, d], mean over unmasked positions
Tensor masked_mean_pool(const Tensor& h, const std::vector<uint8_t>& mask,
                        int batch, int len, GradTape* tape = nullptr);
// x: [n, d] -> [d]
Tensor col_mean(const Tensor& x, GradTape* tape = nullptr);
// rows: [B, d1], vec: [d2] -> [B, d1+d2] (vec broadcast to every row)
Tensor concat_broadcast(const Tensor& rows, const Tensor& vec, GradTape* tape = nullptr);
// logits: [B, C]; labels in [0, C); returns scalar [1]
Tensor smoothed_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                              double alpha, GradTape* tape = nullptr);

}  // namespace ota
