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

#include "diffworld/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "diffworld/fft.hpp"

namespace diffworld {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<Real> data,
                                        bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ValidationError("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor::Tensor() : node_(make_leaf({}, {0}, false)) {}

Tensor Tensor::constant(Shape shape, std::vector<Real> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<Real> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

Tensor Tensor::scalar(Real value) { return constant({}, {value}); }

Tensor Tensor::full(Shape shape, Real value) {
  const std::size_t n = shape_size(shape);
  return constant(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::vector(std::vector<Real> data) {
  const std::size_t n = data.size();
  return constant({n}, std::move(data));
}

Real Tensor::item() const {
  if (size() != 1) {
    throw ValidationError("item() on tensor of shape " +
                          shape_string(shape()));
  }
  return node_->value[0];
}

Tensor Tensor::detach() const {
  if (!requires_grad()) return *this;
  return constant(shape(), node_->value);
}

Tensor Tensor::from_op(Shape shape, std::vector<Real> value,
                       std::vector<Tensor> inputs,
                       detail::BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Tape and backward

GraphTape GraphTape::record(const Tensor& root) {
  GraphTape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> visited;
  // Iterative post-order DFS.
  std::vector<std::pair<std::shared_ptr<const detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node_ptr(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.order_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

std::vector<Real> Gradients::wrt(const Tensor& leaf) const {
  auto it = grads_.find(leaf.node());
  if (it == grads_.end()) return std::vector<Real>(leaf.size(), 0);
  return it->second;
}

bool Gradients::contains(const Tensor& leaf) const {
  return grads_.count(leaf.node()) != 0;
}

Gradients backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ValidationError("backward requires a scalar loss, got shape " +
                          shape_string(loss.shape()));
  }
  Gradients out;
  if (!loss.requires_grad()) return out;

  const GraphTape tape = GraphTape::record(loss);
  std::unordered_map<const detail::Node*, std::vector<Real>> grads;
  grads[loss.node()] = {Real(1)};

  const auto nodes = tape.nodes();
  for (auto rit = nodes.rbegin(); rit != nodes.rend(); ++rit) {
    const detail::Node* node = rit->get();
    auto it = grads.find(node);
    if (it == grads.end()) continue;
    if (!node->backward) {
      out.grads_[node] = std::move(it->second);
      out.keep_alive_.push_back(*rit);
      grads.erase(it);
      continue;
    }
    std::vector<Real> grad_out = std::move(it->second);
    grads.erase(it);
    std::vector<std::vector<Real>*> slots(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const detail::Node* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      auto& buf = grads[in];
      if (buf.empty()) buf.assign(in->value.size(), 0);
      slots[i] = &buf;
    }
    node->backward(*node, grad_out, slots);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Broadcasting

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ValidationError("shapes " + shape_string(a) + " and " +
                            shape_string(b) + " are not broadcast-compatible");
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

namespace {

// Maps each flat output index to a flat input index. Empty when the input
// already has the output shape.
std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  if (in == out) return {};
  const std::size_t total = shape_size(out);
  std::vector<std::size_t> map(total, 0);
  if (shape_size(in) == 1) return map;
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    stride[i + offset] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  std::vector<std::size_t> counter(rank, 0);
  std::size_t pos = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    map[flat] = pos;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++counter[axis];
      pos += stride[axis];
      if (counter[axis] < out[axis]) break;
      pos -= stride[axis] * counter[axis];
      counter[axis] = 0;
    }
  }
  return map;
}

bool is_unary(ElementwiseOp op) {
  switch (op) {
    case ElementwiseOp::kAdd:
    case ElementwiseOp::kSub:
    case ElementwiseOp::kMul:
    case ElementwiseOp::kDiv:
    case ElementwiseOp::kPow:
      return false;
    default:
      return true;
  }
}

Tensor binary(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t n = shape_size(out_shape);
  auto ia = std::make_shared<std::vector<std::size_t>>(
      broadcast_index(a.shape(), out_shape));
  auto ib = std::make_shared<std::vector<std::size_t>>(
      broadcast_index(b.shape(), out_shape));
  const auto av = a.data();
  const auto bv = b.data();
  auto at = [&](std::size_t i) { return av[ia->empty() ? i : (*ia)[i]]; };
  auto bt = [&](std::size_t i) { return bv[ib->empty() ? i : (*ib)[i]]; };

  std::vector<Real> out(n);
  switch (op) {
    case ElementwiseOp::kAdd:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) + bt(i);
      break;
    case ElementwiseOp::kSub:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) - bt(i);
      break;
    case ElementwiseOp::kMul:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) * bt(i);
      break;
    case ElementwiseOp::kDiv:
      for (std::size_t i = 0; i < n; ++i) out[i] = at(i) / bt(i);
      break;
    case ElementwiseOp::kPow:
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::pow(at(i), bt(i));
        if (!std::isfinite(out[i]) && std::isfinite(at(i)) &&
            std::isfinite(bt(i))) {
          throw DomainError("pow of " + std::to_string(at(i)) + " to " +
                                std::to_string(bt(i)) + " is not finite",
                            i);
        }
      }
      break;
    default:
      throw ValidationError("not a binary elementwise op");
  }

  return Tensor::from_op(
      std::move(out_shape), std::move(out), {a, b},
      [op, ia, ib](const detail::Node& self, std::span<const Real> g,
                   detail::GradSlots slots) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        std::vector<Real>* ga = slots[0];
        std::vector<Real>* gb = slots[1];
        const std::size_t n = g.size();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t ja = ia->empty() ? i : (*ia)[i];
          const std::size_t jb = ib->empty() ? i : (*ib)[i];
          const Real x = av[ja];
          const Real y = bv[jb];
          switch (op) {
            case ElementwiseOp::kAdd:
              if (ga) (*ga)[ja] += g[i];
              if (gb) (*gb)[jb] += g[i];
              break;
            case ElementwiseOp::kSub:
              if (ga) (*ga)[ja] += g[i];
              if (gb) (*gb)[jb] -= g[i];
              break;
            case ElementwiseOp::kMul:
              if (ga) (*ga)[ja] += g[i] * y;
              if (gb) (*gb)[jb] += g[i] * x;
              break;
            case ElementwiseOp::kDiv:
              if (ga) (*ga)[ja] += g[i] / y;
              if (gb) (*gb)[jb] -= g[i] * x / (y * y);
              break;
            case ElementwiseOp::kPow: {
              const Real r = self.value[i];
              if (ga && x != 0) (*ga)[ja] += g[i] * y * r / x;
              if (ga && x == 0) (*ga)[ja] += g[i] * y * std::pow(x, y - 1);
              if (gb && x > 0) (*gb)[jb] += g[i] * r * std::log(x);
              break;
            }
            default:
              break;
          }
        }
      });
}

Tensor unary(ElementwiseOp op, const Tensor& x, Real bound) {
  const auto xv = x.data();
  const std::size_t n = xv.size();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real v = xv[i];
    switch (op) {
      case ElementwiseOp::kExp:
        out[i] = std::exp(v);
        break;
      case ElementwiseOp::kLog:
        if (!(v > 0)) throw DomainError("log of non-positive value", i);
        out[i] = std::log(v);
        break;
      case ElementwiseOp::kLog10:
        if (!(v > 0)) throw DomainError("log10 of non-positive value", i);
        out[i] = std::log10(v);
        break;
      case ElementwiseOp::kSqrt:
        if (v < 0) throw DomainError("sqrt of negative value", i);
        out[i] = std::sqrt(v);
        break;
      case ElementwiseOp::kClampMin:
        out[i] = v < bound ? bound : v;
        break;
      case ElementwiseOp::kClampMax:
        out[i] = v > bound ? bound : v;
        break;
      case ElementwiseOp::kSigmoid:
        out[i] = v >= 0 ? Real(1) / (Real(1) + std::exp(-v))
                        : std::exp(v) / (Real(1) + std::exp(v));
        break;
      case ElementwiseOp::kAbs:
        out[i] = std::abs(v);
        break;
      case ElementwiseOp::kNeg:
        out[i] = -v;
        break;
      case ElementwiseOp::kSquare:
        out[i] = v * v;
        break;
      default:
        throw ValidationError("not a unary elementwise op");
    }
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x},
      [op, bound](const detail::Node& self, std::span<const Real> g,
                  detail::GradSlots slots) {
        std::vector<Real>& gx = *slots[0];
        const auto& xv = self.inputs[0]->value;
        const auto& yv = self.value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const Real v = xv[i];
          Real d = 0;
          switch (op) {
            case ElementwiseOp::kExp:
              d = yv[i];
              break;
            case ElementwiseOp::kLog:
              d = Real(1) / v;
              break;
            case ElementwiseOp::kLog10:
              d = Real(1) / (v * std::numbers::ln10_v<Real>);
              break;
            case ElementwiseOp::kSqrt:
              // Zero at the origin instead of +inf.
              d = yv[i] > 0 ? Real(0.5) / yv[i] : Real(0);
              break;
            case ElementwiseOp::kClampMin:
              d = v >= bound ? 1 : 0;
              break;
            case ElementwiseOp::kClampMax:
              d = v <= bound ? 1 : 0;
              break;
            case ElementwiseOp::kSigmoid:
              d = yv[i] * (1 - yv[i]);
              break;
            case ElementwiseOp::kAbs:
              d = v > 0 ? 1 : (v < 0 ? -1 : 0);
              break;
            case ElementwiseOp::kNeg:
              d = -1;
              break;
            case ElementwiseOp::kSquare:
              d = 2 * v;
              break;
            default:
              break;
          }
          gx[i] += g[i] * d;
        }
      });
}

}  // namespace

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b,
                   Real bound) {
  if (is_unary(op)) return unary(op, a, bound);
  if (b == nullptr) throw ValidationError("binary elementwise op needs two operands");
  return binary(op, a, *b);
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::kDiv, a, b); }
Tensor pow(const Tensor& base, const Tensor& exponent) {
  return binary(ElementwiseOp::kPow, base, exponent);
}
Tensor exp(const Tensor& x) { return unary(ElementwiseOp::kExp, x, 0); }
Tensor log(const Tensor& x) { return unary(ElementwiseOp::kLog, x, 0); }
Tensor log10(const Tensor& x) { return unary(ElementwiseOp::kLog10, x, 0); }
Tensor sqrt(const Tensor& x) { return unary(ElementwiseOp::kSqrt, x, 0); }
Tensor clamp_min(const Tensor& x, Real lo) { return unary(ElementwiseOp::kClampMin, x, lo); }
Tensor clamp_max(const Tensor& x, Real hi) { return unary(ElementwiseOp::kClampMax, x, hi); }
Tensor clamp(const Tensor& x, Real lo, Real hi) { return clamp_max(clamp_min(x, lo), hi); }
Tensor sigmoid(const Tensor& x) { return unary(ElementwiseOp::kSigmoid, x, 0); }
Tensor abs(const Tensor& x) { return unary(ElementwiseOp::kAbs, x, 0); }
Tensor neg(const Tensor& x) { return unary(ElementwiseOp::kNeg, x, 0); }
Tensor square(const Tensor& x) { return unary(ElementwiseOp::kSquare, x, 0); }

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& a) { return neg(a); }
Tensor operator+(const Tensor& a, Real b) { return add(a, Tensor::scalar(b)); }
Tensor operator-(const Tensor& a, Real b) { return sub(a, Tensor::scalar(b)); }
Tensor operator*(const Tensor& a, Real b) { return mul(a, Tensor::scalar(b)); }
Tensor operator/(const Tensor& a, Real b) { return div(a, Tensor::scalar(b)); }
Tensor operator+(Real a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(Real a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(Real a, const Tensor& b) { return mul(Tensor::scalar(a), b); }

// ---------------------------------------------------------------------------
// Linear algebra and reductions

namespace {

// c(m x n) += a(m x k) . b(k x n), with optional transposes of the stored
// operands.
void gemm_accumulate(std::span<const Real> a, bool trans_a,
                     std::span<const Real> b, bool trans_b, std::span<Real> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = trans_a ? a[p * m + i] : a[i * k + p];
      if (aip == 0) continue;
      if (!trans_b) {
        const Real* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * k + p];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ValidationError("matmul expects 2-D operands, got " +
                          shape_string(a.shape()) + " and " +
                          shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ValidationError("matmul inner dimensions differ: " +
                          shape_string(a.shape()) + " . " +
                          shape_string(b.shape()));
  }
  std::vector<Real> out(m * n, 0);
  gemm_accumulate(a.data(), false, b.data(), false, out, m, k, n);
  return Tensor::from_op(
      {m, n}, std::move(out), {a, b},
      [m, k, n](const detail::Node& self, std::span<const Real> g,
                detail::GradSlots slots) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        // dA = G . B^T, dB = A^T . G
        if (slots[0]) gemm_accumulate(g, false, bv, true, *slots[0], m, n, k);
        if (slots[1]) gemm_accumulate(av, true, g, false, *slots[1], k, m, n);
      });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ValidationError("transpose expects a 2-D tensor");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<Real> out(r * c);
  const auto v = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return Tensor::from_op({c, r}, std::move(out), {a},
                         [r, c](const detail::Node&, std::span<const Real> g,
                                detail::GradSlots slots) {
                           auto& gx = *slots[0];
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               gx[i * c + j] += g[j * r + i];
                         });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return Tensor::from_op({}, {total}, {x},
                         [](const detail::Node&, std::span<const Real> g,
                            detail::GradSlots slots) {
                           for (Real& v : *slots[0]) v += g[0];
                         });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ValidationError("mean of an empty tensor");
  return sum(x) * (Real(1) / static_cast<Real>(x.size()));
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ValidationError("cannot reshape " + shape_string(x.shape()) +
                          " to " + shape_string(shape));
  }
  return Tensor::from_op(std::move(shape), x.to_vector(), {x},
                         [](const detail::Node&, std::span<const Real> g,
                            detail::GradSlots slots) {
                           auto& gx = *slots[0];
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         });
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.dim(0)) {
    throw ValidationError("slice [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") out of range for " +
                          shape_string(x.shape()));
  }
  Shape shape = x.shape();
  const std::size_t inner = x.size() / shape[0];
  shape[0] = end - begin;
  const auto v = x.data();
  std::vector<Real> out(v.begin() + begin * inner, v.begin() + end * inner);
  const std::size_t offset = begin * inner;
  return Tensor::from_op(std::move(shape), std::move(out), {x},
                         [offset](const detail::Node&, std::span<const Real> g,
                                  detail::GradSlots slots) {
                           auto& gx = *slots[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                             gx[offset + i] += g[i];
                         });
}

Tensor select(const Tensor& x, std::size_t index) {
  Tensor s = slice(x, index, index + 1);
  Shape shape(x.shape().begin() + 1, x.shape().end());
  return reshape(s, std::move(shape));
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ValidationError("stack of zero tensors");
  const Shape& inner = parts[0].shape();
  const std::size_t n = parts[0].size();
  std::vector<Real> out;
  out.reserve(n * parts.size());
  for (const Tensor& p : parts) {
    if (p.shape() != inner) {
      throw ValidationError("stack: shape " + shape_string(p.shape()) +
                            " differs from " + shape_string(inner));
    }
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  return Tensor::from_op(std::move(shape), std::move(out),
                         std::vector<Tensor>(parts.begin(), parts.end()),
                         [n](const detail::Node&, std::span<const Real> g,
                             detail::GradSlots slots) {
                           for (std::size_t p = 0; p < slots.size(); ++p) {
                             if (!slots[p]) continue;
                             auto& gx = *slots[p];
                             for (std::size_t i = 0; i < n; ++i)
                               gx[i] += g[p * n + i];
                           }
                         });
}

Tensor resize(const Tensor& x, std::size_t length) {
  if (x.rank() != 1) throw ValidationError("resize expects a 1-D tensor");
  const std::size_t keep = std::min(length, x.size());
  std::vector<Real> out(length, 0);
  std::copy_n(x.data().begin(), keep, out.begin());
  return Tensor::from_op({length}, std::move(out), {x},
                         [keep](const detail::Node&, std::span<const Real> g,
                                detail::GradSlots slots) {
                           auto& gx = *slots[0];
                           for (std::size_t i = 0; i < keep; ++i) gx[i] += g[i];
                         });
}

// ---------------------------------------------------------------------------
// Spectral and signal ops

Tensor real_fft(const Tensor& x, std::size_t n) {
  if (x.rank() != 1) throw ValidationError("real_fft expects a 1-D signal");
  const FftPlan& plan = fft_plan(n);
  if (x.size() > n) {
    throw ValidationError("real_fft input of length " +
                          std::to_string(x.size()) + " exceeds n = " +
                          std::to_string(n));
  }
  const std::size_t bins = plan.bins();
  std::vector<Real> out(2 * bins);
  plan.forward_real(x.data(), std::span<Real>(out).first(bins),
                    std::span<Real>(out).subspan(bins));
  const std::size_t length = x.size();
  return Tensor::from_op(
      {2, bins}, std::move(out), {x},
      [n, bins, length](const detail::Node&, std::span<const Real> g,
                        detail::GradSlots slots) {
        // Adjoint of the forward DFT: n * irfft of the gradient with the
        // interior bins halved.
        std::vector<Real> re(g.begin(), g.begin() + bins);
        std::vector<Real> im(g.begin() + bins, g.end());
        for (std::size_t k = 1; k + 1 < bins; ++k) {
          re[k] *= Real(0.5);
          im[k] *= Real(0.5);
        }
        std::vector<Real> dx(n);
        fft_plan(n).inverse_real(re, im, dx);
        auto& gx = *slots[0];
        for (std::size_t j = 0; j < length; ++j)
          gx[j] += dx[j] * static_cast<Real>(n);
      });
}

Tensor inverse_real_fft(const Tensor& spectrum, std::size_t n) {
  const FftPlan& plan = fft_plan(n);
  const std::size_t bins = plan.bins();
  if (spectrum.shape() != Shape{2, bins}) {
    throw ValidationError("inverse_real_fft expects shape " +
                          shape_string({2, bins}) + ", got " +
                          shape_string(spectrum.shape()));
  }
  std::vector<Real> out(n);
  const auto v = spectrum.data();
  plan.inverse_real(v.first(bins), v.subspan(bins), out);
  return Tensor::from_op(
      {n}, std::move(out), {spectrum},
      [n, bins](const detail::Node&, std::span<const Real> g,
                detail::GradSlots slots) {
        std::vector<Real> re(bins), im(bins);
        fft_plan(n).forward_real(g, re, im);
        auto& gs = *slots[0];
        const Real edge = Real(1) / static_cast<Real>(n);
        const Real mid = Real(2) / static_cast<Real>(n);
        for (std::size_t k = 0; k < bins; ++k) {
          const bool end = k == 0 || k + 1 == bins;
          gs[k] += re[k] * (end ? edge : mid);
          if (!end) gs[bins + k] += im[k] * mid;
        }
      });
}

Tensor complex_abs(const Tensor& z) {
  if (z.rank() == 0 || z.dim(0) != 2) {
    throw ValidationError("complex_abs expects a leading axis of size 2, got " +
                          shape_string(z.shape()));
  }
  const std::size_t half = z.size() / 2;
  const auto v = z.data();
  std::vector<Real> out(half);
  for (std::size_t i = 0; i < half; ++i) out[i] = std::hypot(v[i], v[half + i]);
  Shape shape(z.shape().begin() + 1, z.shape().end());
  return Tensor::from_op(
      std::move(shape), std::move(out), {z},
      [half](const detail::Node& self, std::span<const Real> g,
             detail::GradSlots slots) {
        const auto& zv = self.inputs[0]->value;
        auto& gz = *slots[0];
        for (std::size_t i = 0; i < half; ++i) {
          const Real m = self.value[i];
          if (m == 0) continue;
          gz[i] += g[i] * zv[i] / m;
          gz[half + i] += g[i] * zv[half + i] / m;
        }
      });
}

Tensor causal_conv(const Tensor& x, const Tensor& taps) {
  if (x.rank() != 1 || taps.rank() != 1) {
    throw ValidationError("causal_conv expects 1-D signal and taps");
  }
  const std::size_t n = x.size();
  const std::size_t k = taps.size();
  const auto xv = x.data();
  const auto hv = taps.data();
  std::vector<Real> out(n, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t kmax = std::min(k, t + 1);
    Real acc = 0;
    for (std::size_t j = 0; j < kmax; ++j) acc += hv[j] * xv[t - j];
    out[t] = acc;
  }
  return Tensor::from_op(
      {n}, std::move(out), {x, taps},
      [n, k](const detail::Node& self, std::span<const Real> g,
             detail::GradSlots slots) {
        const auto& xv = self.inputs[0]->value;
        const auto& hv = self.inputs[1]->value;
        for (std::size_t t = 0; t < n; ++t) {
          const std::size_t kmax = std::min(k, t + 1);
          if (slots[0]) {
            auto& gx = *slots[0];
            for (std::size_t j = 0; j < kmax; ++j) gx[t - j] += g[t] * hv[j];
          }
          if (slots[1]) {
            auto& gh = *slots[1];
            for (std::size_t j = 0; j < kmax; ++j) gh[j] += g[t] * xv[t - j];
          }
        }
      });
}

Tensor delay(const Tensor& x, std::size_t samples) {
  if (x.rank() != 1) throw ValidationError("delay expects a 1-D signal");
  const std::size_t n = x.size();
  std::vector<Real> out(n, 0);
  const auto v = x.data();
  for (std::size_t t = samples; t < n; ++t) out[t] = v[t - samples];
  return Tensor::from_op({n}, std::move(out), {x},
                         [n, samples](const detail::Node&, std::span<const Real> g,
                                      detail::GradSlots slots) {
                           auto& gx = *slots[0];
                           for (std::size_t t = samples; t < n; ++t)
                             gx[t - samples] += g[t];
                         });
}

Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                  std::size_t padding) {
  if (x.rank() != 1) throw ValidationError("avg_pool1d expects a 1-D signal");
  if (kernel == 0 || stride == 0) {
    throw ValidationError("avg_pool1d needs positive kernel and stride");
  }
  const std::size_t n = x.size();
  if (n + 2 * padding < kernel) {
    throw ValidationError("avg_pool1d input shorter than kernel");
  }
  const std::size_t out_len = (n + 2 * padding - kernel) / stride + 1;
  // Valid input range of each window.
  std::vector<std::pair<std::size_t, std::size_t>> ranges(out_len);
  std::vector<Real> out(out_len, 0);
  const auto v = x.data();
  for (std::size_t o = 0; o < out_len; ++o) {
    const std::ptrdiff_t start =
        static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(padding);
    const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(start, 0));
    const std::size_t hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        start + static_cast<std::ptrdiff_t>(kernel), static_cast<std::ptrdiff_t>(n)));
    ranges[o] = {lo, hi};
    Real acc = 0;
    for (std::size_t i = lo; i < hi; ++i) acc += v[i];
    out[o] = hi > lo ? acc / static_cast<Real>(hi - lo) : 0;
  }
  return Tensor::from_op(
      {out_len}, std::move(out), {x},
      [ranges = std::move(ranges)](const detail::Node&, std::span<const Real> g,
                                   detail::GradSlots slots) {
        auto& gx = *slots[0];
        for (std::size_t o = 0; o < ranges.size(); ++o) {
          const auto [lo, hi] = ranges[o];
          if (hi <= lo) continue;
          const Real share = g[o] / static_cast<Real>(hi - lo);
          for (std::size_t i = lo; i < hi; ++i) gx[i] += share;
        }
      });
}

}  // namespace diffworld
