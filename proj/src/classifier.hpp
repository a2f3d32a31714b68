#ifndef CIRN_CLASSIFIER_HPP
#define CIRN_CLASSIFIER_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "encoder.hpp"
#include "tensor.hpp"

namespace cirn {

constexpr std::size_t kNumClasses = 3;

template <typename T>
struct HeadParams {
  using Ptr = typename Tensor<T>::Ptr;
  Ptr w;  // 3 x d'
  Ptr b;  // 3

  static HeadParams init_random(std::size_t feature_width, Rng& rng) {
    HeadParams p;
    p.w = Tensor<T>::create({kNumClasses, feature_width}, true);
    init::glorot<T>(p.w, feature_width, kNumClasses, rng);
    p.b = Tensor<T>::create({kNumClasses}, true);
    return p;
  }

  void collect(std::vector<NamedParam<T>>& out) const {
    out.push_back({"head.w", w, true});
    out.push_back({"head.b", b, false});
  }
};

// Logits W.F + b for a feature vector F of width d'; dropout on F first
// when training.
template <typename T>
inline typename Tensor<T>::Ptr head_logits(typename Tensor<T>::Ptr features,
                                           const HeadParams<T>& params, double dropout_rate,
                                           bool training, Rng& rng) {
  std::size_t dprime = params.w->shape[1];
  if (features->numel() != dprime)
    throw DimensionError("classify: feature width " + std::to_string(features->numel()) +
                         " does not match head width " + std::to_string(dprime));
  auto f = dropout<T>(reshape<T>(features, {1, dprime}), dropout_rate, training, rng);
  auto logits = add_rowvec<T>(matmul<T>(f, transpose2d<T>(params.w)), params.b);
  return reshape<T>(logits, {kNumClasses});
}

// p = softmax(W.F + b)
template <typename T>
inline std::array<double, kNumClasses> classify_probs(typename Tensor<T>::Ptr logits) {
  auto p = softmax_lastdim<T>(logits);
  std::array<double, kNumClasses> out{};
  for (std::size_t i = 0; i < kNumClasses; ++i) out[i] = static_cast<double>(p->value[i]);
  return out;
}

// Argmax with ties broken toward the lowest index.
inline int predict(const std::array<double, kNumClasses>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(kNumClasses); ++i)
    if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace cirn

#endif
