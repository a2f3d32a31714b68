#ifndef CIRN_MODEL_HPP
#define CIRN_MODEL_HPP

#include <array>
#include <optional>
#include <vector>

#include "classifier.hpp"
#include "config.hpp"
#include "densenet.hpp"
#include "encoder.hpp"
#include "interaction.hpp"
#include "text_data.hpp"

namespace cirn {

// Feature width fed to the classification head under each ablation mode.
inline std::size_t model_feature_width(const ModelConfig& cfg) {
  switch (cfg.ablation) {
    case AblationMode::None:
      return densenet_feature_width(cfg.encoder.d, cfg.encoder.layers, cfg.densenet);
    case AblationMode::LastLayerOnly:
      return densenet_feature_width(cfg.encoder.d, 1, cfg.densenet);
    case AblationMode::NoInteraction:
      return cfg.encoder.layers * cfg.encoder.d;
    case AblationMode::NoDenseNet:
      // projected to the full model's width to keep head sizes comparable
      return densenet_feature_width(cfg.encoder.d, cfg.encoder.layers, cfg.densenet);
  }
  return 0;
}

// The complete network: encoder, interaction stacking, feature extraction,
// classification head. Ablation modes rewire the middle stages.
template <typename T>
class CirnModel {
 public:
  using Ptr = typename Tensor<T>::Ptr;

  ModelConfig cfg;
  EncoderParams<T> encoder;
  std::optional<DenseNetParams<T>> densenet;
  Ptr proj_w, proj_b;  // no_densenet pooled-feature projection
  HeadParams<T> head;

  static CirnModel init_random(const ModelConfig& cfg, Rng& rng) {
    CirnModel model;
    model.cfg = cfg;
    model.encoder = EncoderParams<T>::init_random(cfg.encoder, rng);
    std::size_t l_used =
        cfg.ablation == AblationMode::LastLayerOnly ? 1 : cfg.encoder.layers;
    if (cfg.ablation == AblationMode::None || cfg.ablation == AblationMode::LastLayerOnly)
      model.densenet =
          DenseNetParams<T>::init_random(cfg.densenet, cfg.encoder.d * l_used, rng);
    std::size_t width = model_feature_width(cfg);
    if (cfg.ablation == AblationMode::NoDenseNet) {
      std::size_t pooled = 2 * cfg.encoder.d * cfg.encoder.layers;  // max + mean pools
      model.proj_w = Tensor<T>::create({pooled, width}, true);
      init::glorot<T>(model.proj_w, pooled, width, rng);
      model.proj_b = Tensor<T>::create({width}, true);
    }
    model.head = HeadParams<T>::init_random(width, rng);
    return model;
  }

  std::vector<NamedParam<T>> parameters() const {
    std::vector<NamedParam<T>> out;
    encoder.collect(out);
    if (densenet) densenet->collect(out);
    if (proj_w) {
      out.push_back({"proj.w", proj_w, true});
      out.push_back({"proj.b", proj_b, false});
    }
    head.collect(out);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->numel();
    return n;
  }

  struct ForwardResult {
    Ptr loss;    // per-example cross-entropy (unregularized)
    Ptr logits;  // length-3 tensor
    std::array<double, kNumClasses> probs;
  };

  // Forward one (possibly padded) example. `attention_mask` marks real
  // positions; sentence spans in `pair` refer to real rows only.
  ForwardResult forward_example(const std::vector<std::size_t>& token_ids,
                                const std::vector<int>& segment_ids,
                                const std::vector<int>& attention_mask,
                                const TokenizedPair& pair, int label, bool training,
                                Rng& rng) const {
    auto layer_outputs = encode_layers<T>(token_ids, segment_ids, attention_mask, encoder,
                                          cfg.encoder, training, rng);
    Ptr features;
    switch (cfg.ablation) {
      case AblationMode::None:
      case AblationMode::LastLayerOnly: {
        auto stack = stack_interactions<T>(layer_outputs, pair,
                                           cfg.ablation == AblationMode::LastLayerOnly
                                               ? LayerSelection::LastOnly
                                               : LayerSelection::All);
        features = extract_features<T>(stack, *densenet);
        break;
      }
      case AblationMode::NoInteraction: {
        // per-layer [CLS] vectors concatenated across all L layers
        std::vector<Ptr> cls_rows;
        for (auto& h : layer_outputs) cls_rows.push_back(slice_rows<T>(h, 0, 1));
        features = reshape<T>(concat_cols<T>(cls_rows),
                              {cfg.encoder.layers * cfg.encoder.d});
        break;
      }
      case AblationMode::NoDenseNet: {
        auto stack = stack_interactions<T>(layer_outputs, pair, LayerSelection::All);
        auto folded = fold_stack_to_channels<T>(stack.values);
        std::size_t c = folded->shape[0];
        auto pooled = concat_cols<T>({reshape<T>(global_maxpool<T>(folded), {1, c}),
                                      reshape<T>(global_meanpool<T>(folded), {1, c})});
        features = reshape<T>(
            add_rowvec<T>(matmul<T>(pooled, proj_w), proj_b), {proj_w->shape[1]});
        break;
      }
    }
    ForwardResult result;
    result.logits = head_logits<T>(features, head, cfg.encoder.dropout, training, rng);
    result.probs = classify_probs<T>(result.logits);
    result.loss = cross_entropy_logits<T>(result.logits, static_cast<std::size_t>(label));
    return result;
  }
};

}  // namespace cirn

#endif
