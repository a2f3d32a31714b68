#ifndef CIRN_INTERACTION_HPP
#define CIRN_INTERACTION_HPP

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "ops_conv.hpp"
#include "tensor.hpp"
#include "text_data.hpp"

namespace cirn {

enum class LayerSelection { All, LastOnly };

// The n x m x d x L_used interaction tensor plus its validity mask.
// Values at masked cells are exactly zero.
template <typename T>
struct InteractionStack {
  typename Tensor<T>::Ptr values;
  std::vector<std::uint8_t> pair_mask;  // n*m entries, 1 iff both positions are real
  std::size_t l_used = 0;

  std::size_t n() const { return values->shape[0]; }
  std::size_t m() const { return values->shape[1]; }
  std::size_t d() const { return values->shape[2]; }
};

// Sentence-wise rows of one layer's hidden states; [CLS]/[SEP] rows excluded.
template <typename T>
inline std::pair<typename Tensor<T>::Ptr, typename Tensor<T>::Ptr> split_pair(
    typename Tensor<T>::Ptr h, const TokenizedPair& pair) {
  if (pair.s1_range.first == pair.s1_range.second ||
      pair.s2_range.first == pair.s2_range.second)
    throw DataError("split_pair: empty sentence range");
  if (pair.s2_range.second > h->shape[0])
    throw DataError("split_pair: ranges exceed hidden-state rows");
  auto h1 = slice_rows<T>(h, pair.s1_range.first, pair.s1_range.second);
  auto h2 = slice_rows<T>(h, pair.s2_range.first, pair.s2_range.second);
  return {h1, h2};
}

// Per selected layer: split, interact, stack along the trailing layer axis.
// LastOnly keeps just the final layer (L_used = 1).
template <typename T>
inline InteractionStack<T> stack_interactions(
    const std::vector<typename Tensor<T>::Ptr>& layers, const TokenizedPair& pair,
    LayerSelection selection) {
  if (layers.empty()) throw DimensionError("stack_interactions: no layers");
  std::size_t first = selection == LayerSelection::LastOnly ? layers.size() - 1 : 0;
  std::vector<typename Tensor<T>::Ptr> parts;
  for (std::size_t l = first; l < layers.size(); ++l) {
    auto [h1, h2] = split_pair<T>(layers[l], pair);
    parts.push_back(interaction_matrix<T>(h1, h2));
  }
  InteractionStack<T> stack;
  stack.values = stack_lastdim<T>(parts);
  stack.l_used = parts.size();
  stack.pair_mask.assign(pair.n * pair.m, 1);
  return stack;
}

// Zero out every (i, j) cell where either position is padded, across all
// channels and layers; updates pair_mask to match.
template <typename T>
inline InteractionStack<T> mask_interactions(const InteractionStack<T>& stack,
                                             const std::vector<std::uint8_t>& s1_valid,
                                             const std::vector<std::uint8_t>& s2_valid) {
  std::size_t n = stack.n(), m = stack.m(), d = stack.d(), l = stack.l_used;
  if (s1_valid.size() != n || s2_valid.size() != m)
    throw DimensionError("mask_interactions: validity vector length mismatch");
  InteractionStack<T> out;
  out.l_used = l;
  out.pair_mask.assign(n * m, 0);
  std::vector<T> mask(stack.values->numel(), T(0));
  bool all_valid = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      bool valid = s1_valid[i] && s2_valid[j];
      all_valid = all_valid && valid;
      out.pair_mask[i * m + j] = valid ? 1 : 0;
      if (valid)
        for (std::size_t c = 0; c < d * l; ++c) mask[(i * m + j) * d * l + c] = T(1);
    }
  out.values = all_valid ? stack.values : mul_mask<T>(stack.values, mask);
  return out;
}

// Debug export: one row per (i, j, channel, layer) cell.
template <typename T>
inline void export_interactions_csv(const InteractionStack<T>& stack, std::ostream& os) {
  os << "i,j,channel,layer,value\n";
  std::size_t n = stack.n(), m = stack.m(), d = stack.d(), l = stack.l_used;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t li = 0; li < l; ++li)
          os << i << "," << j << "," << c << "," << li << ","
             << stack.values->value[((i * m + j) * d + c) * l + li] << "\n";
}

}  // namespace cirn

#endif
