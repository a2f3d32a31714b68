#ifndef CIRN_OPS_CONV_HPP
#define CIRN_OPS_CONV_HPP

#include "tensor.hpp"

namespace cirn {

enum class Padding { Same, Valid };

// Direct cross-correlation over a C_in x H x W map with a
// C_out x C_in x kh x kw kernel and optional per-channel bias.
template <typename T>
inline typename Tensor<T>::Ptr conv2d(typename Tensor<T>::Ptr x, typename Tensor<T>::Ptr k,
                                      typename Tensor<T>::Ptr bias, Padding padding) {
  if (x->shape.size() != 3 || k->shape.size() != 4)
    throw DimensionError("conv2d: expected CxHxW input and OxCxKhxKw kernel, got " +
                         shape_str(x->shape) + " and " + shape_str(k->shape));
  std::size_t cin = x->shape[0], h = x->shape[1], w = x->shape[2];
  std::size_t cout = k->shape[0], kh = k->shape[2], kw = k->shape[3];
  if (k->shape[1] != cin)
    throw DimensionError("conv2d: channel mismatch, input " + shape_str(x->shape) +
                         " vs kernel " + shape_str(k->shape));
  if (bias && bias->numel() != cout) throw DimensionError("conv2d: bias width mismatch");
  std::size_t ph = 0, pw = 0, oh, ow;
  if (padding == Padding::Same) {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw DimensionError("conv2d: same padding requires odd kernel extents");
    ph = kh / 2;
    pw = kw / 2;
    oh = h;
    ow = w;
  } else {
    if (h < kh || w < kw) throw DimensionError("conv2d: kernel larger than input (valid mode)");
    oh = h - kh + 1;
    ow = w - kw + 1;
  }
  std::vector<typename Tensor<T>::Ptr> parents = {x, k};
  if (bias) parents.push_back(bias);
  auto out = detail::make_node<T>({cout, oh, ow}, parents);
  auto at_x = [&](std::size_t c, std::size_t i, std::size_t j) {
    return x->value[(c * h + i) * w + j];
  };
  for (std::size_t oc = 0; oc < cout; ++oc) {
    T b = bias ? bias->value[oc] : T(0);
    for (std::size_t oi = 0; oi < oh; ++oi)
      for (std::size_t oj = 0; oj < ow; ++oj) {
        T acc = b;
        for (std::size_t ic = 0; ic < cin; ++ic)
          for (std::size_t ki = 0; ki < kh; ++ki) {
            std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi + ki) -
                                static_cast<std::ptrdiff_t>(ph);
            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kj = 0; kj < kw; ++kj) {
              std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj + kj) -
                                  static_cast<std::ptrdiff_t>(pw);
              if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += at_x(ic, ii, jj) * k->value[((oc * cin + ic) * kh + ki) * kw + kj];
            }
          }
        out->value[(oc * oh + oi) * ow + oj] = acc;
      }
  }
  if (out->requires_grad)
    out->backprop = [x, k, bias, cin, h, w, cout, kh, kw, ph, pw, oh, ow](Tensor<T>& o) {
      if (x->requires_grad) x->ensure_grad();
      if (k->requires_grad) k->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t oc = 0; oc < cout; ++oc)
        for (std::size_t oi = 0; oi < oh; ++oi)
          for (std::size_t oj = 0; oj < ow; ++oj) {
            T g = o.grad[(oc * oh + oi) * ow + oj];
            if (g == T(0)) continue;
            if (bias && bias->requires_grad) bias->grad[oc] += g;
            for (std::size_t ic = 0; ic < cin; ++ic)
              for (std::size_t ki = 0; ki < kh; ++ki) {
                std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi + ki) -
                                    static_cast<std::ptrdiff_t>(ph);
                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kj = 0; kj < kw; ++kj) {
                  std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj + kj) -
                                      static_cast<std::ptrdiff_t>(pw);
                  if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
                  std::size_t xi = (ic * h + ii) * w + jj;
                  std::size_t kidx = ((oc * cin + ic) * kh + ki) * kw + kj;
                  if (x->requires_grad) x->grad[xi] += g * k->value[kidx];
                  if (k->requires_grad) k->grad[kidx] += g * x->value[xi];
                }
              }
          }
    };
  return out;
}

// 2x2/stride-2 max pool; ragged edges pool the in-bounds sub-window.
// Backward routes to the first argmax in row-major order.
template <typename T>
inline typename Tensor<T>::Ptr maxpool2d(typename Tensor<T>::Ptr x) {
  if (x->shape.size() != 3) throw DimensionError("maxpool2d: expected CxHxW input");
  std::size_t c = x->shape[0], h = x->shape[1], w = x->shape[2];
  std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  auto out = detail::make_node<T>({c, oh, ow}, {x});
  auto argmax = std::make_shared<std::vector<std::size_t>>(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oi = 0; oi < oh; ++oi)
      for (std::size_t oj = 0; oj < ow; ++oj) {
        std::size_t best = 0;
        T bestv = T(0);
        bool first = true;
        for (std::size_t di = 0; di < 2; ++di) {
          std::size_t ii = oi * 2 + di;
          if (ii >= h) continue;
          for (std::size_t dj = 0; dj < 2; ++dj) {
            std::size_t jj = oj * 2 + dj;
            if (jj >= w) continue;
            std::size_t idx = (ch * h + ii) * w + jj;
            if (first || x->value[idx] > bestv) {
              bestv = x->value[idx];
              best = idx;
              first = false;
            }
          }
        }
        out->value[(ch * oh + oi) * ow + oj] = bestv;
        (*argmax)[(ch * oh + oi) * ow + oj] = best;
      }
  if (out->requires_grad)
    out->backprop = [x, argmax](Tensor<T>& o) {
      x->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) x->grad[(*argmax)[i]] += o.grad[i];
    };
  return out;
}

// Per-channel spatial maximum: CxHxW -> C.
template <typename T>
inline typename Tensor<T>::Ptr global_maxpool(typename Tensor<T>::Ptr x) {
  if (x->shape.size() != 3) throw DimensionError("global_maxpool: expected CxHxW input");
  std::size_t c = x->shape[0], hw = x->shape[1] * x->shape[2];
  if (hw == 0) throw DimensionError("global_maxpool: empty spatial map");
  auto out = detail::make_node<T>({c}, {x});
  auto argmax = std::make_shared<std::vector<std::size_t>>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::size_t best = ch * hw;
    for (std::size_t i = 1; i < hw; ++i)
      if (x->value[ch * hw + i] > x->value[best]) best = ch * hw + i;
    out->value[ch] = x->value[best];
    (*argmax)[ch] = best;
  }
  if (out->requires_grad)
    out->backprop = [x, argmax](Tensor<T>& o) {
      x->ensure_grad();
      for (std::size_t ch = 0; ch < o.numel(); ++ch) x->grad[(*argmax)[ch]] += o.grad[ch];
    };
  return out;
}

// Per-channel spatial mean: CxHxW -> C.
template <typename T>
inline typename Tensor<T>::Ptr global_meanpool(typename Tensor<T>::Ptr x) {
  if (x->shape.size() != 3) throw DimensionError("global_meanpool: expected CxHxW input");
  std::size_t c = x->shape[0], hw = x->shape[1] * x->shape[2];
  if (hw == 0) throw DimensionError("global_meanpool: empty spatial map");
  auto out = detail::make_node<T>({c}, {x});
  T inv = T(1) / static_cast<T>(hw);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T acc = T(0);
    for (std::size_t i = 0; i < hw; ++i) acc += x->value[ch * hw + i];
    out->value[ch] = acc * inv;
  }
  if (out->requires_grad)
    out->backprop = [x, hw, inv](Tensor<T>& o) {
      x->ensure_grad();
      for (std::size_t ch = 0; ch < o.numel(); ++ch)
        for (std::size_t i = 0; i < hw; ++i) x->grad[ch * hw + i] += o.grad[ch] * inv;
    };
  return out;
}

// Concatenate CxHxW maps along the channel axis.
template <typename T>
inline typename Tensor<T>::Ptr concat_channels(std::vector<typename Tensor<T>::Ptr> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no parts");
  std::size_t h = parts[0]->shape[1], w = parts[0]->shape[2];
  std::size_t ctotal = 0;
  for (auto& p : parts) {
    if (p->shape.size() != 3 || p->shape[1] != h || p->shape[2] != w)
      throw DimensionError("concat_channels: spatial mismatch " + shape_str(p->shape));
    ctotal += p->shape[0];
  }
  auto out = detail::make_node<T>({ctotal, h, w}, parts);
  std::size_t off = 0;
  for (auto& p : parts) {
    std::copy(p->value.begin(), p->value.end(), out->value.begin() + off);
    off += p->numel();
  }
  if (out->requires_grad)
    out->backprop = [parts](Tensor<T>& o) {
      std::size_t off = 0;
      for (auto& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->numel(); ++i) p->grad[i] += o.grad[off + i];
        }
        off += p->numel();
      }
    };
  return out;
}

// Pairwise element-wise products between sentence rows:
// H1 (n x d), H2 (m x d) -> I (n x m x d) with I[i,j] = h1_i (*) h2_j.
template <typename T>
inline typename Tensor<T>::Ptr interaction_matrix(typename Tensor<T>::Ptr h1,
                                                  typename Tensor<T>::Ptr h2) {
  if (h1->shape.size() != 2 || h2->shape.size() != 2 || h1->shape[1] != h2->shape[1])
    throw DimensionError("interaction_matrix: width mismatch " + shape_str(h1->shape) + " vs " +
                         shape_str(h2->shape));
  std::size_t n = h1->shape[0], m = h2->shape[0], d = h1->shape[1];
  auto out = detail::make_node<T>({n, m, d}, {h1, h2});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < d; ++c)
        out->value[(i * m + j) * d + c] = h1->value[i * d + c] * h2->value[j * d + c];
  if (out->requires_grad)
    out->backprop = [h1, h2, n, m, d](Tensor<T>& o) {
      if (h1->requires_grad) h1->ensure_grad();
      if (h2->requires_grad) h2->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t c = 0; c < d; ++c) {
            T g = o.grad[(i * m + j) * d + c];
            if (h1->requires_grad) h1->grad[i * d + c] += g * h2->value[j * d + c];
            if (h2->requires_grad) h2->grad[j * d + c] += g * h1->value[i * d + c];
          }
    };
  return out;
}

// Stack L tensors of shape n x m x d along a new trailing layer axis.
template <typename T>
inline typename Tensor<T>::Ptr stack_lastdim(std::vector<typename Tensor<T>::Ptr> parts) {
  if (parts.empty()) throw DimensionError("stack_lastdim: no parts");
  Shape base = parts[0]->shape;
  for (auto& p : parts)
    if (p->shape != base) throw DimensionError("stack_lastdim: shape mismatch");
  std::size_t l = parts.size(), inner = shape_numel(base);
  Shape out_shape = base;
  out_shape.push_back(l);
  auto out = detail::make_node<T>(out_shape, parts);
  for (std::size_t li = 0; li < l; ++li)
    for (std::size_t i = 0; i < inner; ++i) out->value[i * l + li] = parts[li]->value[i];
  if (out->requires_grad)
    out->backprop = [parts, l, inner](Tensor<T>& o) {
      for (std::size_t li = 0; li < l; ++li) {
        auto& p = parts[li];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (std::size_t i = 0; i < inner; ++i) p->grad[i] += o.grad[i * l + li];
      }
    };
  return out;
}

// Permute an n x m x d x L stack into a (d*L) x n x m map with channel
// index l*d + c (layer-major blocks), the layout convolutions consume.
template <typename T>
inline typename Tensor<T>::Ptr fold_stack_to_channels(typename Tensor<T>::Ptr stack) {
  if (stack->shape.size() != 4)
    throw DimensionError("fold_stack_to_channels: expected n x m x d x L, got " +
                         shape_str(stack->shape));
  std::size_t n = stack->shape[0], m = stack->shape[1], d = stack->shape[2], l = stack->shape[3];
  auto out = detail::make_node<T>({d * l, n, m}, {stack});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t li = 0; li < l; ++li)
          out->value[((li * d + c) * n + i) * m + j] = stack->value[((i * m + j) * d + c) * l + li];
  if (out->requires_grad)
    out->backprop = [stack, n, m, d, l](Tensor<T>& o) {
      stack->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t c = 0; c < d; ++c)
            for (std::size_t li = 0; li < l; ++li)
              stack->grad[((i * m + j) * d + c) * l + li] +=
                  o.grad[((li * d + c) * n + i) * m + j];
    };
  return out;
}

// Element-wise multiply by a constant (non-differentiated) mask of scale
// factors; used to zero padded interaction cells.
template <typename T>
inline typename Tensor<T>::Ptr mul_mask(typename Tensor<T>::Ptr x, const std::vector<T>& mask) {
  if (mask.size() != x->numel()) throw DimensionError("mul_mask: mask length mismatch");
  auto out = detail::make_node<T>(x->shape, {x});
  for (std::size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] * mask[i];
  if (out->requires_grad) {
    auto m = std::make_shared<std::vector<T>>(mask);
    out->backprop = [x, m](Tensor<T>& o) {
      x->ensure_grad();
      for (std::size_t i = 0; i < o.numel(); ++i) x->grad[i] += o.grad[i] * (*m)[i];
    };
  }
  return out;
}

}  // namespace cirn

#endif
