#ifndef CIRN_DENSENET_HPP
#define CIRN_DENSENET_HPP

#include <string>
#include <vector>

#include "config.hpp"
#include "encoder.hpp"
#include "interaction.hpp"
#include "ops_conv.hpp"

namespace cirn {

// Stage-wise channel plan: folded input, post-reduction, then alternating
// dense-block / transition counts. The last entry is the feature width d'.
inline std::vector<std::size_t> densenet_channel_plan(std::size_t d, std::size_t l_used,
                                                      const DenseNetConfig& cfg) {
  std::vector<std::size_t> plan;
  std::size_t c = d * l_used;
  plan.push_back(c);
  c = static_cast<std::size_t>(cfg.eta * static_cast<double>(c));
  if (c == 0) throw ConfigError("densenet: eta reduces channels to zero");
  plan.push_back(c);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    c += cfg.layers_per_block * cfg.growth;
    plan.push_back(c);
    if (b + 1 < cfg.blocks) {
      c = static_cast<std::size_t>(cfg.theta * static_cast<double>(c));
      if (c == 0) throw ConfigError("densenet: theta compresses channels to zero");
      plan.push_back(c);
    }
  }
  return plan;
}

// Pure shape function for the final feature width d'.
inline std::size_t densenet_feature_width(std::size_t d, std::size_t l_used,
                                          const DenseNetConfig& cfg) {
  return densenet_channel_plan(d, l_used, cfg).back();
}

template <typename T>
struct DenseNetParams {
  using Ptr = typename Tensor<T>::Ptr;

  struct Block {
    std::vector<Ptr> conv_k;  // 3x3 kernels, one per dense layer
    std::vector<Ptr> conv_b;
    Ptr trans_k, trans_b;     // 1x1 transition, absent after the final block
  };

  Ptr reduce_k, reduce_b;  // initial 1x1 reduction
  std::vector<Block> blocks;
  std::size_t in_channels = 0;

  static DenseNetParams init_random(const DenseNetConfig& cfg, std::size_t in_channels,
                                    Rng& rng) {
    DenseNetParams p;
    p.in_channels = in_channels;
    std::size_t c0 = static_cast<std::size_t>(cfg.eta * static_cast<double>(in_channels));
    if (c0 == 0) throw ConfigError("densenet: eta reduces channels to zero");
    auto make = [&](Shape s) { return Tensor<T>::create(std::move(s), true); };
    p.reduce_k = make({c0, in_channels, 1, 1});
    init::glorot<T>(p.reduce_k, in_channels, c0, rng);
    p.reduce_b = make({c0});
    std::size_t c = c0;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      Block blk;
      std::size_t cin = c;
      for (std::size_t k = 0; k < cfg.layers_per_block; ++k) {
        auto kern = make({cfg.growth, cin, 3, 3});
        init::glorot<T>(kern, cin * 9, cfg.growth * 9, rng);
        blk.conv_k.push_back(kern);
        blk.conv_b.push_back(make({cfg.growth}));
        cin += cfg.growth;
      }
      c = cin;
      if (b + 1 < cfg.blocks) {
        std::size_t ct = static_cast<std::size_t>(cfg.theta * static_cast<double>(c));
        if (ct == 0) throw ConfigError("densenet: theta compresses channels to zero");
        blk.trans_k = make({ct, c, 1, 1});
        init::glorot<T>(blk.trans_k, c, ct, rng);
        blk.trans_b = make({ct});
        c = ct;
      }
      p.blocks.push_back(std::move(blk));
    }
    return p;
  }

  void collect(std::vector<NamedParam<T>>& out) const {
    out.push_back({"densenet.reduce_k", reduce_k, true});
    out.push_back({"densenet.reduce_b", reduce_b, false});
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      std::string pre = "densenet.block" + std::to_string(b) + ".";
      for (std::size_t k = 0; k < blocks[b].conv_k.size(); ++k) {
        out.push_back({pre + "conv" + std::to_string(k) + "_k", blocks[b].conv_k[k], true});
        out.push_back({pre + "conv" + std::to_string(k) + "_b", blocks[b].conv_b[k], false});
      }
      if (blocks[b].trans_k) {
        out.push_back({pre + "trans_k", blocks[b].trans_k, true});
        out.push_back({pre + "trans_b", blocks[b].trans_b, false});
      }
    }
  }
};

// Fold the stack into (d * L_used) channels over an n x m map, 1x1-convolve
// down to floor(eta * d * L_used) channels, ReLU.
template <typename T>
inline typename Tensor<T>::Ptr reduce_channels(const InteractionStack<T>& stack,
                                               const DenseNetParams<T>& params) {
  auto folded = fold_stack_to_channels<T>(stack.values);
  if (folded->shape[0] != params.in_channels)
    throw DimensionError("reduce_channels: stack has " + std::to_string(folded->shape[0]) +
                         " folded channels, parameters expect " +
                         std::to_string(params.in_channels));
  return relu<T>(conv2d<T>(folded, params.reduce_k, params.reduce_b, Padding::Same));
}

// z_k = ReLU(conv3x3(concat(Z_0, z_1 .. z_{k-1}))); output concatenates the
// block input with every layer's growth channels.
template <typename T>
inline typename Tensor<T>::Ptr dense_block(typename Tensor<T>::Ptr x,
                                           const typename DenseNetParams<T>::Block& blk) {
  std::vector<typename Tensor<T>::Ptr> feats = {x};
  for (std::size_t k = 0; k < blk.conv_k.size(); ++k) {
    auto in = feats.size() == 1 ? feats[0] : concat_channels<T>(feats);
    feats.push_back(relu<T>(conv2d<T>(in, blk.conv_k[k], blk.conv_b[k], Padding::Same)));
  }
  return concat_channels<T>(feats);
}

// 1x1 compression to floor(theta * C) channels, ReLU, 2x2/stride-2 max pool.
template <typename T>
inline typename Tensor<T>::Ptr transition_layer(typename Tensor<T>::Ptr x,
                                                const typename DenseNetParams<T>::Block& blk) {
  return maxpool2d<T>(relu<T>(conv2d<T>(x, blk.trans_k, blk.trans_b, Padding::Same)));
}

// reduce -> (dense block -> transition)* -> dense block -> global max pool.
template <typename T>
inline typename Tensor<T>::Ptr extract_features(const InteractionStack<T>& stack,
                                                const DenseNetParams<T>& params) {
  if (stack.n() == 0 || stack.m() == 0)
    throw ConfigError("extract_features: empty spatial map at input");
  auto x = reduce_channels<T>(stack, params);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    x = dense_block<T>(x, params.blocks[b]);
    if (params.blocks[b].trans_k) {
      if (x->shape[1] == 0 || x->shape[2] == 0)
        throw ConfigError("extract_features: spatial extent vanished before block " +
                          std::to_string(b + 1));
      x = transition_layer<T>(x, params.blocks[b]);
    }
  }
  return global_maxpool<T>(x);
}

}  // namespace cirn

#endif
