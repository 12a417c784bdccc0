/*
 * Copyright 2026 The DiffWorld Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense real tensors with an eager reverse-mode tape.
//
// A Tensor is an immutable handle onto a graph node. Operations on tensors
// that require gradients record their inputs and a backward rule as they
// execute; backward() orders the reachable nodes topologically and replays
// the rules in reverse. Complex values are stored as a leading axis of size
// two (real plane, imaginary plane).

#ifndef DIFFWORLD_TENSOR_HPP_
#define DIFFWORLD_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "diffworld/error.hpp"

namespace diffworld {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node;

// Gradient buffers of a node's inputs, one slot per input. A slot is null
// when that input does not require a gradient.
using GradSlots = std::span<std::vector<Real>* const>;

// Accumulates d(loss)/d(inputs) given the node and d(loss)/d(node).
using BackwardFn = std::function<void(const Node& self,
                                      std::span<const Real> grad_out,
                                      GradSlots grad_in)>;

struct Node {
  Shape shape;
  std::vector<Real> value;
  bool requires_grad = false;
  std::vector<std::shared_ptr<const Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

class Tensor {
 public:
  // Scalar zero, detached.
  Tensor();

  static Tensor constant(Shape shape, std::vector<Real> data);
  static Tensor parameter(Shape shape, std::vector<Real> data);
  static Tensor scalar(Real value);
  static Tensor full(Shape shape, Real value);
  static Tensor zeros(Shape shape) { return full(std::move(shape), 0); }
  static Tensor vector(std::vector<Real> data);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }
  std::span<const Real> data() const { return node_->value; }
  std::vector<Real> to_vector() const { return node_->value; }
  Real operator[](std::size_t i) const { return node_->value[i]; }
  // Value of a single-element tensor.
  Real item() const;

  bool requires_grad() const { return node_->requires_grad; }
  // Same values, cut from the graph.
  Tensor detach() const;

  const detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<const detail::Node>& node_ptr() const { return node_; }

  // Builds an op result. When no input requires a gradient the backward rule
  // and the input references are dropped.
  static Tensor from_op(Shape shape, std::vector<Real> value,
                        std::vector<Tensor> inputs, detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<const detail::Node> node)
      : node_(std::move(node)) {}

  std::shared_ptr<const detail::Node> node_;
};

// Topologically ordered record of every node reachable from a root that
// participates in differentiation. Inputs always precede their consumers.
class GraphTape {
 public:
  static GraphTape record(const Tensor& root);

  std::span<const std::shared_ptr<const detail::Node>> nodes() const {
    return order_;
  }
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<std::shared_ptr<const detail::Node>> order_;
};

// Gradients of a scalar loss with respect to the leaf parameters it
// depends on.
class Gradients {
 public:
  // Gradient for a leaf, shaped like the leaf. Zeros if the loss does not
  // depend on it.
  std::vector<Real> wrt(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend Gradients backward(const Tensor& loss);
  std::unordered_map<const detail::Node*, std::vector<Real>> grads_;
  std::vector<std::shared_ptr<const detail::Node>> keep_alive_;
};

// Reverse-mode sweep from a single-element loss. A loss that is not attached
// to a graph yields an empty gradient map.
Gradients backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops broadcast numpy-style (trailing axes aligned).

enum class ElementwiseOp {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kExp,
  kLog,
  kLog10,
  kSqrt,
  kClampMin,
  kClampMax,
  kSigmoid,
  kAbs,
  kNeg,
  kSquare,
};

// Generic entry point. Unary kinds ignore `b`; clamps read their bound from
// `bound`.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b = nullptr,
                   Real bound = 0);

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor pow(const Tensor& base, const Tensor& exponent);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor log10(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp_min(const Tensor& x, Real lo);
Tensor clamp_max(const Tensor& x, Real hi);
Tensor clamp(const Tensor& x, Real lo, Real hi);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, Real b);
Tensor operator-(const Tensor& a, Real b);
Tensor operator*(const Tensor& a, Real b);
Tensor operator/(const Tensor& a, Real b);
Tensor operator+(Real a, const Tensor& b);
Tensor operator-(Real a, const Tensor& b);
Tensor operator*(Real a, const Tensor& b);

// ---------------------------------------------------------------------------
// Linear algebra and reductions.

// (m x k) . (k x n) -> (m x n).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---------------------------------------------------------------------------
// Shape ops.

Tensor reshape(const Tensor& x, Shape shape);
// Sub-tensor x[index] along the leading axis.
Tensor select(const Tensor& x, std::size_t index);
// Rows [begin, end) along the leading axis.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);
// Concatenation along a new leading axis; all parts share a shape.
Tensor stack(std::span<const Tensor> parts);
// 1-D: first `length` samples, zero-extended when longer than the input.
Tensor resize(const Tensor& x, std::size_t length);

// ---------------------------------------------------------------------------
// Spectral and signal ops.

// Real FFT of a 1-D signal zero-padded to n (a power of two). Returns
// shape {2, n/2+1}: real plane then imaginary plane.
Tensor real_fft(const Tensor& x, std::size_t n);
// Inverse of real_fft for a {2, n/2+1} spectrum; imaginary parts of the DC
// and Nyquist bins are ignored. Returns n samples.
Tensor inverse_real_fft(const Tensor& spectrum, std::size_t n);
// |z| for a {2, ...} complex tensor; returns the trailing shape. The
// gradient at z = 0 is taken as zero.
Tensor complex_abs(const Tensor& z);
// y[t] = sum_k taps[k] * x[t - k], output length equals input length.
Tensor causal_conv(const Tensor& x, const Tensor& taps);
// y[t] = x[t - samples] (zero before the start), same length as x.
Tensor delay(const Tensor& x, std::size_t samples);
// 1-D average pooling; padded positions are excluded from the average.
Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                  std::size_t padding);

}  // namespace diffworld

#endif  // DIFFWORLD_TENSOR_HPP_
