#ifndef CIRN_ENCODER_HPP
#define CIRN_ENCODER_HPP

#include <cmath>
#include <string>
#include <vector>

#include "config.hpp"
#include "tensor.hpp"
#include "text_data.hpp"

namespace cirn {

template <typename T>
struct NamedParam {
  std::string name;
  typename Tensor<T>::Ptr tensor;
  bool is_weight_matrix = false;  // L2 decay applies only to these
};

namespace init {

// Scaled uniform with bound sqrt(6 / (fan_in + fan_out)).
template <typename T>
inline void glorot(typename Tensor<T>::Ptr w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  T bound = static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  w->fill_uniform(rng, -bound, bound);
}

}  // namespace init

template <typename T>
struct TransformerLayerParams {
  using Ptr = typename Tensor<T>::Ptr;
  Ptr wq, bq, wk, bk, wv, bv, wo, bo;     // attention projections, d x d
  Ptr w1, b1, w2, b2;                     // feed-forward, d x ffn and ffn x d
  Ptr ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

template <typename T>
struct EncoderParams {
  using Ptr = typename Tensor<T>::Ptr;
  Ptr token_emb;    // vocab_size x d
  Ptr segment_emb;  // 2 x d
  Ptr position_emb; // max_positions x d
  std::vector<TransformerLayerParams<T>> layers;

  static EncoderParams init_random(const EncoderConfig& cfg, Rng& rng) {
    EncoderParams p;
    auto make = [&](Shape s) { return Tensor<T>::create(std::move(s), true); };
    p.token_emb = make({cfg.vocab_size, cfg.d});
    p.token_emb->fill_normal(rng, T(0), T(0.02));
    p.segment_emb = make({2, cfg.d});
    p.segment_emb->fill_normal(rng, T(0), T(0.02));
    p.position_emb = make({cfg.max_positions, cfg.d});
    p.position_emb->fill_normal(rng, T(0), T(0.02));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      TransformerLayerParams<T> lp;
      for (auto* w : {&lp.wq, &lp.wk, &lp.wv, &lp.wo}) {
        *w = make({cfg.d, cfg.d});
        init::glorot<T>(*w, cfg.d, cfg.d, rng);
      }
      lp.bq = make({cfg.d});
      lp.bk = make({cfg.d});
      lp.bv = make({cfg.d});
      lp.bo = make({cfg.d});
      lp.w1 = make({cfg.d, cfg.ffn_dim});
      init::glorot<T>(lp.w1, cfg.d, cfg.ffn_dim, rng);
      lp.b1 = make({cfg.ffn_dim});
      lp.w2 = make({cfg.ffn_dim, cfg.d});
      init::glorot<T>(lp.w2, cfg.ffn_dim, cfg.d, rng);
      lp.b2 = make({cfg.d});
      lp.ln1_gain = make({cfg.d});
      lp.ln1_gain->value.assign(cfg.d, T(1));
      lp.ln1_bias = make({cfg.d});
      lp.ln2_gain = make({cfg.d});
      lp.ln2_gain->value.assign(cfg.d, T(1));
      lp.ln2_bias = make({cfg.d});
      p.layers.push_back(std::move(lp));
    }
    return p;
  }

  void collect(std::vector<NamedParam<T>>& out) const {
    out.push_back({"encoder.token_emb", token_emb, false});
    out.push_back({"encoder.segment_emb", segment_emb, false});
    out.push_back({"encoder.position_emb", position_emb, false});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& lp = layers[l];
      std::string pre = "encoder.layer" + std::to_string(l) + ".";
      out.push_back({pre + "wq", lp.wq, true});
      out.push_back({pre + "bq", lp.bq, false});
      out.push_back({pre + "wk", lp.wk, true});
      out.push_back({pre + "bk", lp.bk, false});
      out.push_back({pre + "wv", lp.wv, true});
      out.push_back({pre + "bv", lp.bv, false});
      out.push_back({pre + "wo", lp.wo, true});
      out.push_back({pre + "bo", lp.bo, false});
      out.push_back({pre + "w1", lp.w1, true});
      out.push_back({pre + "b1", lp.b1, false});
      out.push_back({pre + "w2", lp.w2, true});
      out.push_back({pre + "b2", lp.b2, false});
      out.push_back({pre + "ln1_gain", lp.ln1_gain, false});
      out.push_back({pre + "ln1_bias", lp.ln1_bias, false});
      out.push_back({pre + "ln2_gain", lp.ln2_gain, false});
      out.push_back({pre + "ln2_bias", lp.ln2_bias, false});
    }
  }
};

// X_i = T[token_i] + S[segment_i] + P[i]; dropout after the sum when training.
template <typename T>
inline typename Tensor<T>::Ptr embed_inputs(const std::vector<std::size_t>& token_ids,
                                            const std::vector<int>& segment_ids,
                                            const EncoderParams<T>& params,
                                            const EncoderConfig& cfg, bool training, Rng& rng) {
  if (token_ids.size() > cfg.max_positions)
    throw DataError("sequence length " + std::to_string(token_ids.size()) +
                    " exceeds max_positions " + std::to_string(cfg.max_positions));
  std::vector<std::size_t> segs(segment_ids.size()), pos(token_ids.size());
  for (std::size_t i = 0; i < segs.size(); ++i) segs[i] = static_cast<std::size_t>(segment_ids[i]);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  auto x = add<T>(add<T>(gather_rows<T>(params.token_emb, token_ids),
                         gather_rows<T>(params.segment_emb, segs)),
                  gather_rows<T>(params.position_emb, pos));
  return dropout<T>(x, cfg.dropout, training, rng);
}

// Post-norm Transformer layer with masked multi-head attention. Padded key
// positions get a large negative additive bias before the softmax.
template <typename T>
inline typename Tensor<T>::Ptr self_attention_layer(typename Tensor<T>::Ptr h_in,
                                                    const std::vector<int>& mask,
                                                    const TransformerLayerParams<T>& lp,
                                                    const EncoderConfig& cfg, bool training,
                                                    Rng& rng) {
  std::size_t n = h_in->shape[0], d = h_in->shape[1];
  if (mask.size() != n) throw DimensionError("self_attention_layer: mask length mismatch");
  std::size_t dk = d / cfg.heads;
  T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

  auto h_drop = dropout<T>(h_in, cfg.dropout, training, rng);
  auto q = add_rowvec<T>(matmul<T>(h_drop, lp.wq), lp.bq);
  auto k = add_rowvec<T>(matmul<T>(h_drop, lp.wk), lp.bk);
  auto v = add_rowvec<T>(matmul<T>(h_drop, lp.wv), lp.bv);

  // constant additive bias, identical for every query row
  auto mask_bias = Tensor<T>::create({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      mask_bias->value[i * n + j] = mask[j] ? T(0) : T(-1e9);

  std::vector<typename Tensor<T>::Ptr> heads;
  for (std::size_t hd = 0; hd < cfg.heads; ++hd) {
    auto qh = slice_cols<T>(q, hd * dk, (hd + 1) * dk);
    auto kh = slice_cols<T>(k, hd * dk, (hd + 1) * dk);
    auto vh = slice_cols<T>(v, hd * dk, (hd + 1) * dk);
    auto scores = scale<T>(matmul<T>(qh, transpose2d<T>(kh)), att_scale);
    auto weights = softmax_lastdim<T>(add<T>(scores, mask_bias));
    heads.push_back(matmul<T>(weights, vh));
  }
  auto ctx = concat_cols<T>(heads);
  auto att_out =
      add_rowvec<T>(matmul<T>(dropout<T>(ctx, cfg.dropout, training, rng), lp.wo), lp.bo);
  auto h1 = layer_norm<T>(add<T>(h_in, att_out), lp.ln1_gain, lp.ln1_bias,
                          static_cast<T>(cfg.ln_eps));

  auto ffn_in = dropout<T>(h1, cfg.dropout, training, rng);
  auto hidden = relu<T>(add_rowvec<T>(matmul<T>(ffn_in, lp.w1), lp.b1));
  auto ffn_out = add_rowvec<T>(
      matmul<T>(dropout<T>(hidden, cfg.dropout, training, rng), lp.w2), lp.b2);
  return layer_norm<T>(add<T>(h1, ffn_out), lp.ln2_gain, lp.ln2_bias,
                       static_cast<T>(cfg.ln_eps));
}

// All L layer outputs, H^(l) for l = 1..L, each N' x d.
template <typename T>
inline std::vector<typename Tensor<T>::Ptr> encode_layers(
    const std::vector<std::size_t>& token_ids, const std::vector<int>& segment_ids,
    const std::vector<int>& mask, const EncoderParams<T>& params, const EncoderConfig& cfg,
    bool training, Rng& rng) {
  auto h = embed_inputs<T>(token_ids, segment_ids, params, cfg, training, rng);
  std::vector<typename Tensor<T>::Ptr> outputs;
  outputs.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    h = self_attention_layer<T>(h, mask, params.layers[l], cfg, training, rng);
    outputs.push_back(h);
  }
  return outputs;
}

}  // namespace cirn

#endif
