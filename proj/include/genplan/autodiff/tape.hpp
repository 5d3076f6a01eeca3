#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "genplan/errors.hpp"

namespace genplan::ad {

// Dense row-major matrix. Every value in the library is rank 2; scalars are
// 1x1 and column vectors are m x 1.
template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != r * c) throw ShapeMismatch("tensor data does not match its shape");
  }

  std::size_t size() const { return data.size(); }
  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::vector<std::size_t> shape() const { return {rows, cols}; }
};

// Row indices shared between forward values and backward closures.
using Index = std::shared_ptr<const std::vector<std::uint32_t>>;

inline Index make_index(std::vector<std::uint32_t> v) {
  return std::make_shared<const std::vector<std::uint32_t>>(std::move(v));
}

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  std::size_t rows() const { return tape->rows(id); }
  std::size_t cols() const { return tape->cols(id); }
  const T* data() const { return tape->value(id); }
  T item(std::size_t i = 0) const { return tape->value(id)[i]; }
  Tensor<T> tensor() const {
    return Tensor<T>(rows(), cols(), std::vector<T>(data(), data() + rows() * cols()));
  }
};

// Records operations in creation order; backward() walks them in reverse.
// A tape constructed with record = false computes values only.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::uint32_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<T> constant(Tensor<T> t) { return push(t.rows, t.cols, std::move(t.data), nullptr, false); }

  Var<T> constant(std::size_t rows, std::size_t cols, std::vector<T> data) {
    if (data.size() != rows * cols) throw ShapeMismatch("constant data does not match its shape");
    return push(rows, cols, std::move(data), nullptr, false);
  }

  // Leaf viewing external storage. Gradients are added into grad_sink (if
  // non-null) during backward. The storage must outlive the tape.
  Var<T> external(std::size_t rows, std::size_t cols, const T* data, T* grad_sink) {
    bool needs = record_ && grad_sink != nullptr;
    Var<T> v = push(rows, cols, {}, data, needs);
    if (needs) {
      nodes_[v.id].backward = [grad_sink](Tape& t, std::uint32_t self) {
        const T* g = t.grad_or_null(self);
        const std::size_t n = t.size(self);
        for (std::size_t i = 0; i < n; ++i) grad_sink[i] += g[i];
      };
    }
    return v;
  }

  // Creates a node from a computed value. inputs determine whether the node
  // needs a gradient; the closure is stored only when it does.
  Var<T> make(std::size_t rows, std::size_t cols, std::vector<T> value,
              std::initializer_list<Var<T>> inputs, Backward backward) {
    bool needs = false;
    if (record_)
      for (const auto& in : inputs) needs = needs || nodes_[in.id].needs_grad;
    Var<T> v = push(rows, cols, std::move(value), nullptr, needs);
    if (needs) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  Var<T> make(std::size_t rows, std::size_t cols, std::vector<T> value, const std::vector<Var<T>>& inputs,
              Backward backward) {
    bool needs = false;
    if (record_)
      for (const auto& in : inputs) needs = needs || nodes_[in.id].needs_grad;
    Var<T> v = push(rows, cols, std::move(value), nullptr, needs);
    if (needs) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  std::size_t rows(std::uint32_t id) const { return nodes_[id].rows; }
  std::size_t cols(std::uint32_t id) const { return nodes_[id].cols; }
  std::size_t size(std::uint32_t id) const { return nodes_[id].rows * nodes_[id].cols; }
  const T* value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.ext ? n.ext : n.own.data();
  }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  // Gradient buffer for a node, allocated on first use.
  T* grad(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.rows * n.cols, T(0));
    return n.grad.data();
  }
  const T* grad_or_null(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.grad.empty() ? nullptr : n.grad.data();
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar.
  void backward(Var<T> loss) {
    if (size(loss.id) != 1) throw NonScalarLoss("backward() needs a 1x1 loss");
    if (!record_) throw NonScalarLoss("backward() on a tape that does not record");
    if (!nodes_[loss.id].needs_grad) return;
    grad(loss.id)[0] += T(1);
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

 private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<T> own;
    const T* ext = nullptr;
    std::vector<T> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var<T> push(std::size_t rows, std::size_t cols, std::vector<T> value, const T* ext, bool needs) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.own = std::move(value);
    n.ext = ext;
    n.needs_grad = needs;
    nodes_.push_back(std::move(n));
    return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace genplan::ad
