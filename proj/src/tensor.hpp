#ifndef CIRN_TENSOR_HPP
#define CIRN_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace cirn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor participating in a reverse-mode graph. Each node
// keeps links to its parents and a closure implementing the backward rule;
// the DAG of parent links is the recorded graph, topologically ordered by
// construction.
template <typename T>
class Tensor : public std::enable_shared_from_this<Tensor<T>> {
 public:
  using Ptr = std::shared_ptr<Tensor<T>>;

  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // lazily allocated, same length as value
  bool requires_grad = false;

  std::vector<Ptr> parents;
  std::function<void(Tensor<T>&)> backprop;  // reads this->grad, accumulates into parents

  static Ptr create(Shape s, bool req_grad = false) {
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(s);
    t->value.assign(shape_numel(t->shape), T(0));
    t->requires_grad = req_grad;
    return t;
  }

  static Ptr from_values(Shape s, std::vector<T> vals, bool req_grad = false) {
    if (shape_numel(s) != vals.size())
      throw DimensionError("tensor init: shape " + shape_str(s) + " does not match " +
                           std::to_string(vals.size()) + " values");
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(s);
    t->value = std::move(vals);
    t->requires_grad = req_grad;
    return t;
  }

  static Ptr scalar(T v, bool req_grad = false) {
    return from_values({1}, {v}, req_grad);
  }

  std::size_t numel() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }

  void zero_grad() { grad.assign(value.size(), T(0)); }

  void fill_uniform(Rng& rng, T lo, T hi) {
    for (auto& v : value) v = static_cast<T>(rng.uniform(lo, hi));
  }

  void fill_normal(Rng& rng, T mean, T stddev) {
    for (auto& v : value) v = static_cast<T>(rng.normal(mean, stddev));
  }
};

namespace detail {

template <typename T>
inline void topo_visit(const typename Tensor<T>::Ptr& node,
                       std::unordered_set<const Tensor<T>*>& seen,
                       std::vector<typename Tensor<T>::Ptr>& order) {
  // iterative DFS; graphs can be thousands of nodes deep
  struct Frame {
    typename Tensor<T>::Ptr n;
    std::size_t next = 0;
  };
  if (seen.count(node.get())) return;
  std::vector<Frame> stack;
  stack.push_back({node, 0});
  seen.insert(node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      auto& p = f.n->parents[f.next++];
      if (!seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Reverse-topological gradient accumulation from a scalar loss.
// Gradients of leaves not on any path to the loss stay zero.
template <typename T>
inline void backward(const typename Tensor<T>::Ptr& loss) {
  if (loss->numel() != 1)
    throw DimensionError("backward: loss must be scalar, got " + shape_str(loss->shape));
  std::unordered_set<const Tensor<T>*> seen;
  std::vector<typename Tensor<T>::Ptr> order;
  detail::topo_visit<T>(loss, seen, order);
  loss->ensure_grad();
  loss->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& node = *it;
    if (node->backprop) node->backprop(*node);
  }
}

// ---------------------------------------------------------------------------
// op helpers

namespace detail {

template <typename T>
inline typename Tensor<T>::Ptr make_node(Shape s, std::vector<typename Tensor<T>::Ptr> parents) {
  auto out = Tensor<T>::create(std::move(s));
  for (auto& p : parents)
    if (p->requires_grad) out->requires_grad = true;
  if (out->requires_grad) out->parents = std::move(parents);
  return out;
}

template <typename T>
inline void require_same_shape(const typename Tensor<T>::Ptr& a,
                               const typename Tensor<T>::Ptr& b, const char* op) {
  if (a->shape != b->shape)
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a->shape) +
                         " vs " + shape_str(b->shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// element-wise ops (identical shapes; broadcasting is explicit via expand_rows)

template <typename T>
inline typename Tensor<T>::Ptr add(typename Tensor<T>::Ptr a, typename Tensor<T>::Ptr b) {
  detail::require_same_shape<T>(a, b, "add");
  auto out = detail::make_node<T>(a->shape, {a, b});
  for (std::size_t i = 0; i < out->numel(); ++i) out->value[i] = a->value[i] + b->value[i];
  if (out->requires_grad)
    out->backprop = [a, b](Tensor<T>& o) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) a->grad[i] += o.grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) b->grad[i] += o.grad[i];
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr sub(typename Tensor<T>::Ptr a, typename Tensor<T>::Ptr b) {
  detail::require_same_shape<T>(a, b, "sub");
  auto out = detail::make_node<T>(a->shape, {a, b});
  for (std::size_t i = 0; i < out->numel(); ++i) out->value[i] = a->value[i] - b->value[i];
  if (out->requires_grad)
    out->backprop = [a, b](Tensor<T>& o) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) a->grad[i] += o.grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) b->grad[i] -= o.grad[i];
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr mul(typename Tensor<T>::Ptr a, typename Tensor<T>::Ptr b) {
  detail::require_same_shape<T>(a, b, "mul");
  auto out = detail::make_node<T>(a->shape, {a, b});
  for (std::size_t i = 0; i < out->numel(); ++i) out->value[i] = a->value[i] * b->value[i];
  if (out->requires_grad)
    out->backprop = [a, b](Tensor<T>& o) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) a->grad[i] += o.grad[i] * b->value[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) b->grad[i] += o.grad[i] * a->value[i];
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr scale(typename Tensor<T>::Ptr a, T c) {
  auto out = detail::make_node<T>(a->shape, {a});
  for (std::size_t i = 0; i < out->numel(); ++i) out->value[i] = a->value[i] * c;
  if (out->requires_grad)
    out->backprop = [a, c](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) a->grad[i] += o.grad[i] * c;
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr relu(typename Tensor<T>::Ptr a) {
  auto out = detail::make_node<T>(a->shape, {a});
  for (std::size_t i = 0; i < out->numel(); ++i)
    out->value[i] = a->value[i] > T(0) ? a->value[i] : T(0);
  if (out->requires_grad)
    out->backprop = [a](Tensor<T>& o) {
      a->ensure_grad();
      // subgradient at 0 is 0
      for (std::size_t i = 0; i < o.numel(); ++i)
        if (a->value[i] > T(0)) a->grad[i] += o.grad[i];
    };
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
inline typename Tensor<T>::Ptr reshape(typename Tensor<T>::Ptr a, Shape s) {
  if (shape_numel(s) != a->numel())
    throw DimensionError("reshape: " + shape_str(a->shape) + " -> " + shape_str(s));
  auto out = detail::make_node<T>(std::move(s), {a});
  out->value = a->value;
  if (out->requires_grad)
    out->backprop = [a](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) a->grad[i] += o.grad[i];
    };
  return out;
}

// Explicit broadcast of a width-d vector to n rows.
template <typename T>
inline typename Tensor<T>::Ptr expand_rows(typename Tensor<T>::Ptr v, std::size_t n) {
  if (v->shape.size() != 1 && !(v->shape.size() == 2 && v->shape[0] == 1))
    throw DimensionError("expand_rows: expected vector, got " + shape_str(v->shape));
  std::size_t d = v->numel();
  auto out = detail::make_node<T>({n, d}, {v});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out->value[r * d + c] = v->value[c];
  if (out->requires_grad)
    out->backprop = [v, n, d](Tensor<T>& o) {
      v->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) v->grad[c] += o.grad[r * d + c];
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr slice_rows(typename Tensor<T>::Ptr a, std::size_t begin,
                                          std::size_t end) {
  if (a->shape.size() != 2) throw DimensionError("slice_rows: expected 2-D tensor");
  if (begin > end || end > a->shape[0])
    throw DataError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                    ") out of bounds for " + shape_str(a->shape));
  std::size_t d = a->shape[1];
  auto out = detail::make_node<T>({end - begin, d}, {a});
  std::copy(a->value.begin() + begin * d, a->value.begin() + end * d, out->value.begin());
  if (out->requires_grad)
    out->backprop = [a, begin, d](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) a->grad[begin * d + i] += o.grad[i];
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr slice_cols(typename Tensor<T>::Ptr a, std::size_t begin,
                                          std::size_t end) {
  if (a->shape.size() != 2) throw DimensionError("slice_cols: expected 2-D tensor");
  std::size_t rows = a->shape[0], d = a->shape[1];
  if (begin > end || end > d) throw DimensionError("slice_cols: column range out of bounds");
  std::size_t w = end - begin;
  auto out = detail::make_node<T>({rows, w}, {a});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out->value[r * w + c] = a->value[r * d + begin + c];
  if (out->requires_grad)
    out->backprop = [a, begin, d, rows, w](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) a->grad[r * d + begin + c] += o.grad[r * w + c];
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr concat_cols(std::vector<typename Tensor<T>::Ptr> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  std::size_t rows = parts[0]->shape[0];
  std::size_t total = 0;
  for (auto& p : parts) {
    if (p->shape.size() != 2 || p->shape[0] != rows)
      throw DimensionError("concat_cols: row mismatch");
    total += p->shape[1];
  }
  auto out = detail::make_node<T>({rows, total}, parts);
  std::size_t off = 0;
  for (auto& p : parts) {
    std::size_t w = p->shape[1];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) out->value[r * total + off + c] = p->value[r * w + c];
    off += w;
  }
  if (out->requires_grad)
    out->backprop = [parts, rows, total](Tensor<T>& o) {
      std::size_t off = 0;
      for (auto& p : parts) {
        std::size_t w = p->shape[1];
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c)
              p->grad[r * w + c] += o.grad[r * total + off + c];
        }
        off += w;
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr transpose2d(typename Tensor<T>::Ptr a) {
  if (a->shape.size() != 2) throw DimensionError("transpose2d: expected 2-D tensor");
  std::size_t rows = a->shape[0], cols = a->shape[1];
  auto out = detail::make_node<T>({cols, rows}, {a});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out->value[c * rows + r] = a->value[r * cols + c];
  if (out->requires_grad)
    out->backprop = [a, rows, cols](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) a->grad[r * cols + c] += o.grad[c * rows + r];
    };
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
inline typename Tensor<T>::Ptr matmul(typename Tensor<T>::Ptr a, typename Tensor<T>::Ptr b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw DimensionError("matmul: " + shape_str(a->shape) + " x " + shape_str(b->shape));
  std::size_t p = a->shape[0], q = a->shape[1], r = b->shape[1];
  auto out = detail::make_node<T>({p, r}, {a, b});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      T av = a->value[i * q + k];
      if (av == T(0)) continue;
      for (std::size_t j = 0; j < r; ++j) out->value[i * r + j] += av * b->value[k * r + j];
    }
  if (out->requires_grad)
    out->backprop = [a, b, p, q, r](Tensor<T>& o) {
      if (a->requires_grad) {
        a->ensure_grad();  // dA = dC . B^T
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < r; ++j) {
            T g = o.grad[i * r + j];
            if (g == T(0)) continue;
            for (std::size_t k = 0; k < q; ++k) a->grad[i * q + k] += g * b->value[k * r + j];
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();  // dB = A^T . dC
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            T av = a->value[i * q + k];
            if (av == T(0)) continue;
            for (std::size_t j = 0; j < r; ++j) b->grad[k * r + j] += av * o.grad[i * r + j];
          }
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr add_rowvec(typename Tensor<T>::Ptr m, typename Tensor<T>::Ptr v) {
  if (m->shape.size() != 2 || v->numel() != m->shape[1])
    throw DimensionError("add_rowvec: " + shape_str(m->shape) + " + " + shape_str(v->shape));
  std::size_t rows = m->shape[0], d = m->shape[1];
  auto out = detail::make_node<T>(m->shape, {m, v});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) out->value[r * d + c] = m->value[r * d + c] + v->value[c];
  if (out->requires_grad)
    out->backprop = [m, v, rows, d](Tensor<T>& o) {
      if (m->requires_grad) {
        m->ensure_grad();
        for (std::size_t i = 0; i < o.numel(); ++i) m->grad[i] += o.grad[i];
      }
      if (v->requires_grad) {
        v->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < d; ++c) v->grad[c] += o.grad[r * d + c];
      }
    };
  return out;
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
inline typename Tensor<T>::Ptr sum_all(typename Tensor<T>::Ptr a) {
  auto out = detail::make_node<T>({1}, {a});
  T acc = T(0);
  for (T v : a->value) acc += v;
  out->value[0] = acc;
  if (out->requires_grad)
    out->backprop = [a](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += o.grad[0];
    };
  return out;
}

// ---------------------------------------------------------------------------
// nonlinearities over the last axis

template <typename T>
inline typename Tensor<T>::Ptr softmax_lastdim(typename Tensor<T>::Ptr a) {
  if (a->shape.empty() || a->shape.back() < 1)
    throw DimensionError("softmax_lastdim: empty last axis");
  std::size_t w = a->shape.back();
  std::size_t rows = a->numel() / w;
  auto out = detail::make_node<T>(a->shape, {a});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a->value.data() + r * w;
    T* y = out->value.data() + r * w;
    T mx = x[0];
    for (std::size_t c = 1; c < w; ++c) mx = std::max(mx, x[c]);
    if (!std::isfinite(static_cast<double>(mx)))
      throw NumericError("softmax_lastdim: non-finite input");
    T denom = T(0);
    for (std::size_t c = 0; c < w; ++c) {
      y[c] = std::exp(x[c] - mx);
      denom += y[c];
    }
    for (std::size_t c = 0; c < w; ++c) y[c] /= denom;
  }
  if (out->requires_grad)
    out->backprop = [a, rows, w](Tensor<T>& o) {
      a->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = o.value.data() + r * w;
        const T* gy = o.grad.data() + r * w;
        T dot = T(0);
        for (std::size_t c = 0; c < w; ++c) dot += gy[c] * y[c];
        for (std::size_t c = 0; c < w; ++c) a->grad[r * w + c] += y[c] * (gy[c] - dot);
      }
    };
  return out;
}

template <typename T>
inline typename Tensor<T>::Ptr layer_norm(typename Tensor<T>::Ptr x, typename Tensor<T>::Ptr gain,
                                          typename Tensor<T>::Ptr bias, T eps) {
  std::size_t d = x->shape.back();
  if (gain->numel() != d || bias->numel() != d)
    throw DimensionError("layer_norm: gain/bias width mismatch");
  std::size_t rows = x->numel() / d;
  auto out = detail::make_node<T>(x->shape, {x, gain, bias});
  // saved per-row stats for the backward rule
  auto mean = std::make_shared<std::vector<T>>(rows);
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x->value.data() + r * d;
    T mu = T(0);
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<T>(d);
    T is = T(1) / std::sqrt(var + eps);
    (*mean)[r] = mu;
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c)
      out->value[r * d + c] = gain->value[c] * (xr[c] - mu) * is + bias->value[c];
  }
  if (out->requires_grad)
    out->backprop = [x, gain, bias, rows, d, mean, inv_std](Tensor<T>& o) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x->value.data() + r * d;
        const T* gy = o.grad.data() + r * d;
        T mu = (*mean)[r];
        T is = (*inv_std)[r];
        if (gain->requires_grad) {
          gain->ensure_grad();
          for (std::size_t c = 0; c < d; ++c) gain->grad[c] += gy[c] * (xr[c] - mu) * is;
        }
        if (bias->requires_grad) {
          bias->ensure_grad();
          for (std::size_t c = 0; c < d; ++c) bias->grad[c] += gy[c];
        }
        if (x->requires_grad) {
          x->ensure_grad();
          // dxhat = gy * gain; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (std::size_t c = 0; c < d; ++c) {
            T xhat = (xr[c] - mu) * is;
            T dxhat = gy[c] * gain->value[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t c = 0; c < d; ++c) {
            T xhat = (xr[c] - mu) * is;
            T dxhat = gy[c] * gain->value[c];
            x->grad[r * d + c] +=
                is * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
          }
        }
      }
    };
  return out;
}

// Inverted dropout: survivors scaled by 1/(1-rate) so eval is the identity.
template <typename T>
inline typename Tensor<T>::Ptr dropout(typename Tensor<T>::Ptr x, double rate, bool training,
                                       Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  auto mask = std::make_shared<std::vector<T>>(x->numel());
  T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x->numel(); ++i)
    (*mask)[i] = rng.next_double() < rate ? T(0) : keep_scale;
  auto out = detail::make_node<T>(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] * (*mask)[i];
  if (out->requires_grad)
    out->backprop = [x, mask](Tensor<T>& o) {
      x->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) x->grad[i] += o.grad[i] * (*mask)[i];
    };
  return out;
}

// Row gather from an embedding table; backward scatter-adds.
template <typename T>
inline typename Tensor<T>::Ptr gather_rows(typename Tensor<T>::Ptr table,
                                           const std::vector<std::size_t>& ids) {
  if (table->shape.size() != 2) throw DimensionError("gather_rows: expected 2-D table");
  std::size_t v = table->shape[0], d = table->shape[1];
  for (std::size_t id : ids)
    if (id >= v)
      throw DataError("gather_rows: id " + std::to_string(id) + " out of range " +
                      std::to_string(v));
  auto out = detail::make_node<T>({ids.size(), d}, {table});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy(table->value.begin() + ids[r] * d, table->value.begin() + (ids[r] + 1) * d,
              out->value.begin() + r * d);
  if (out->requires_grad) {
    auto ids_copy = std::make_shared<std::vector<std::size_t>>(ids);
    out->backprop = [table, ids_copy, d](Tensor<T>& o) {
      table->ensure_grad();
      for (std::size_t r = 0; r < ids_copy->size(); ++r)
        for (std::size_t c = 0; c < d; ++c)
          table->grad[(*ids_copy)[r] * d + c] += o.grad[r * d + c];
    };
  }
  return out;
}

// Fused log-softmax cross-entropy over a length-K logit vector.
template <typename T>
inline typename Tensor<T>::Ptr cross_entropy_logits(typename Tensor<T>::Ptr logits,
                                                    std::size_t target) {
  std::size_t k = logits->numel();
  if (target >= k) throw DataError("cross_entropy_logits: target out of range");
  const T* x = logits->value.data();
  T mx = x[0];
  for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, x[c]);
  T denom = T(0);
  for (std::size_t c = 0; c < k; ++c) denom += std::exp(x[c] - mx);
  T lse = mx + std::log(denom);
  auto out = detail::make_node<T>({1}, {logits});
  out->value[0] = lse - x[target];
  if (!std::isfinite(static_cast<double>(out->value[0])))
    throw NumericError("cross_entropy_logits: non-finite loss");
  if (out->requires_grad) {
    auto probs = std::make_shared<std::vector<T>>(k);
    for (std::size_t c = 0; c < k; ++c) (*probs)[c] = std::exp(x[c] - mx) / denom;
    out->backprop = [logits, probs, target](Tensor<T>& o) {
      logits->ensure_grad();
      for (std::size_t c = 0; c < probs->size(); ++c)
        logits->grad[c] += o.grad[0] * ((*probs)[c] - (c == target ? T(1) : T(0)));
    };
  }
  return out;
}

}  // namespace cirn

#endif
