#include <doctest.h>

#include "densenet.hpp"
#include "gradcheck.hpp"
#include "model.hpp"

using namespace cirn;
using DT = Tensor<double>;

namespace {

TokenizedPair make_pair(std::size_t n, std::size_t m) {
  TokenizedPair pair;
  pair.n = n;
  pair.m = m;
  pair.token_ids.assign(n + m + 3, 0);
  pair.segment_ids.assign(n + 2, 0);
  pair.segment_ids.insert(pair.segment_ids.end(), m + 1, 1);
  pair.s1_range = {1, 1 + n};
  pair.s2_range = {n + 2, n + 2 + m};
  return pair;
}

InteractionStack<double> random_stack(std::size_t n, std::size_t m, std::size_t d,
                                      std::size_t l, Rng& rng) {
  auto pair = make_pair(n, m);
  std::vector<DT::Ptr> layers;
  for (std::size_t li = 0; li < l; ++li) {
    auto h = DT::create({n + m + 3, d}, true);
    h->fill_uniform(rng, -1.0, 1.0);
    layers.push_back(h);
  }
  return stack_interactions<double>(layers, pair, LayerSelection::All);
}

}  // namespace

TEST_CASE("channel plan at the reference configuration") {
  DenseNetConfig cfg;  // eta 0.3, growth 20, 8 layers/block, 2 blocks, theta 0.5
  auto plan = densenet_channel_plan(32, 4, cfg);  // d*L = 128
  REQUIRE(plan.size() == 5);
  CHECK(plan[0] == 128);
  CHECK(plan[1] == 38);   // floor(0.3 * 128)
  CHECK(plan[2] == 198);  // + 8 * 20
  CHECK(plan[3] == 99);   // floor(0.5 * 198)
  CHECK(plan[4] == 259);  // + 8 * 20
  CHECK(densenet_feature_width(32, 4, cfg) == 259);
}

TEST_CASE("channel plan rejects degenerate ratios") {
  DenseNetConfig cfg;
  cfg.eta = 0.01;
  CHECK_THROWS_AS(densenet_channel_plan(4, 1, cfg), ConfigError);
}

TEST_CASE("dense block grows channels, keeps spatial extent") {
  DenseNetConfig cfg;
  cfg.growth = 3;
  cfg.layers_per_block = 2;
  cfg.blocks = 1;
  cfg.eta = 0.5;
  Rng rng(31);
  auto params = DenseNetParams<double>::init_random(cfg, 8, rng);
  auto x = DT::create({4, 3, 5}, true);  // eta * 8 = 4 channels in
  x->fill_uniform(rng, -1.0, 1.0);
  auto y = dense_block<double>(x, params.blocks[0]);
  CHECK(y->shape == Shape{4 + 2 * 3, 3, 5});
}

TEST_CASE("transition layer compresses channels and halves spatial extents") {
  DenseNetConfig cfg;
  cfg.growth = 2;
  cfg.layers_per_block = 1;
  cfg.blocks = 2;
  cfg.eta = 0.5;
  cfg.theta = 0.5;
  Rng rng(32);
  auto params = DenseNetParams<double>::init_random(cfg, 8, rng);
  REQUIRE(params.blocks[0].trans_k);
  CHECK_FALSE(params.blocks[1].trans_k);  // no transition after the final block
  auto x = DT::create({6, 5, 4}, true);   // block 0 output: 4 + 2 = 6 channels
  x->fill_uniform(rng, -1.0, 1.0);
  auto y = transition_layer<double>(x, params.blocks[0]);
  CHECK(y->shape == Shape{3, 3, 2});  // floor(0.5*6), ceil(5/2), ceil(4/2)
}

TEST_CASE("extract_features output width matches the shape function") {
  DenseNetConfig cfg;
  cfg.eta = 0.3;
  cfg.growth = 4;
  cfg.layers_per_block = 2;
  cfg.blocks = 2;
  cfg.theta = 0.5;
  std::size_t d = 6, l = 2;
  Rng rng(33);
  auto stack = random_stack(5, 4, d, l, rng);
  auto params = DenseNetParams<double>::init_random(cfg, d * l, rng);
  auto f = extract_features<double>(stack, params);
  CHECK(f->shape == Shape{densenet_feature_width(d, l, cfg)});
}

TEST_CASE("extract_features rejects mismatched stacks") {
  DenseNetConfig cfg;
  cfg.growth = 2;
  cfg.layers_per_block = 1;
  cfg.blocks = 1;
  Rng rng(34);
  auto params = DenseNetParams<double>::init_random(cfg, 12, rng);
  auto stack = random_stack(2, 2, 4, 1, rng);  // folds to 4 channels, not 12
  CHECK_THROWS_AS(extract_features<double>(stack, params), DimensionError);
}

TEST_CASE("densenet parameter collection") {
  DenseNetConfig cfg;
  cfg.growth = 2;
  cfg.layers_per_block = 2;
  cfg.blocks = 2;
  Rng rng(35);
  auto params = DenseNetParams<double>::init_random(cfg, 10, rng);
  std::vector<NamedParam<double>> named;
  params.collect(named);
  // reduce (k,b) + 2 blocks * 2 convs * (k,b) + 1 transition * (k,b)
  CHECK(named.size() == 2 + 2 * 2 * 2 + 2);
  std::size_t weights = 0;
  for (const auto& p : named)
    if (p.is_weight_matrix) ++weights;
  CHECK(weights == 1 + 4 + 1);  // all kernels decay, no biases
}

TEST_CASE("model_feature_width per ablation mode") {
  ModelConfig cfg;
  cfg.encoder.d = 32;
  cfg.encoder.layers = 4;
  CHECK(model_feature_width(cfg) == 259);
  cfg.ablation = AblationMode::LastLayerOnly;
  CHECK(model_feature_width(cfg) ==
        densenet_feature_width(32, 1, cfg.densenet));
  cfg.ablation = AblationMode::NoInteraction;
  CHECK(model_feature_width(cfg) == 4 * 32);
  cfg.ablation = AblationMode::NoDenseNet;
  CHECK(model_feature_width(cfg) == 259);
}

TEST_CASE("densenet gradients pass finite differences") {
  DenseNetConfig cfg;
  cfg.eta = 0.5;
  cfg.growth = 2;
  cfg.layers_per_block = 1;
  cfg.blocks = 1;
  Rng rng(36);
  auto stack = random_stack(3, 3, 2, 2, rng);
  auto params = DenseNetParams<double>::init_random(cfg, 4, rng);
  auto forward = [&] {
    auto f = extract_features<double>(stack, params);
    return sum_all<double>(mul<double>(f, f));
  };
  CHECK(grad_check<double>(forward, params.reduce_k, 1e-5, 1e-5, 8).pass);
  CHECK(grad_check<double>(forward, params.blocks[0].conv_k[0], 1e-5, 1e-5, 8).pass);
}
