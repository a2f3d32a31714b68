#include <sstream>

#include <doctest.h>

#include "encoder.hpp"
#include "interaction.hpp"
#include "text_data.hpp"

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

}  // namespace

TEST_CASE("split_pair extracts sentence rows") {
  auto pair = make_pair(2, 1);
  // rows: [CLS] a b [SEP] c [SEP], d = 2
  auto h = DT::from_values({6, 2}, {0, 0, 1, 2, 3, 4, 9, 9, 5, 6, 8, 8});
  auto [h1, h2] = split_pair<double>(h, pair);
  CHECK(h1->shape == Shape{2, 2});
  CHECK(h1->value == std::vector<double>{1, 2, 3, 4});
  CHECK(h2->shape == Shape{1, 2});
  CHECK(h2->value == std::vector<double>{5, 6});

  auto short_h = DT::create({4, 2});
  CHECK_THROWS_AS(split_pair<double>(short_h, pair), DataError);

  auto empty = make_pair(0, 1);
  CHECK_THROWS_AS(split_pair<double>(h, empty), DataError);
}

TEST_CASE("stack_interactions shape law and per-layer slices") {
  std::size_t n = 3, m = 2, d = 4, L = 3;
  auto pair = make_pair(n, m);
  std::vector<DT::Ptr> layers;
  Rng rng(21);
  for (std::size_t l = 0; l < L; ++l) {
    auto h = DT::create({n + m + 3, d});
    h->fill_uniform(rng, -1.0, 1.0);
    layers.push_back(h);
  }
  auto stack = stack_interactions<double>(layers, pair, LayerSelection::All);
  CHECK(stack.values->shape == Shape{n, m, d, L});
  CHECK(stack.l_used == L);
  CHECK(stack.pair_mask == std::vector<std::uint8_t>(n * m, 1));

  // each layer slice must equal the product of that layer's sentence rows
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < d; ++c) {
          double h1 = layers[l]->value[(pair.s1_range.first + i) * d + c];
          double h2 = layers[l]->value[(pair.s2_range.first + j) * d + c];
          double got = stack.values->value[((i * m + j) * d + c) * L + l];
          CHECK(got == h1 * h2);  // bitwise, both are single multiplies
        }

  auto last = stack_interactions<double>(layers, pair, LayerSelection::LastOnly);
  CHECK(last.values->shape == Shape{n, m, d, 1});
  CHECK(last.l_used == 1);
  for (std::size_t i = 0; i < n * m * d; ++i)
    CHECK(last.values->value[i] == stack.values->value[i * L + (L - 1)]);
}

TEST_CASE("mask_interactions zeroes padded cells") {
  std::size_t n = 2, m = 2, d = 2, L = 1;
  auto pair = make_pair(n, m);
  std::vector<DT::Ptr> layers = {DT::create({n + m + 3, d})};
  for (std::size_t i = 0; i < layers[0]->numel(); ++i) layers[0]->value[i] = 1.0;
  auto stack = stack_interactions<double>(layers, pair, LayerSelection::All);

  auto masked = mask_interactions<double>(stack, {1, 0}, {1, 1});
  CHECK(masked.pair_mask == std::vector<std::uint8_t>{1, 1, 0, 0});
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < d * L; ++c) {
      CHECK(masked.values->value[(0 * m + j) * d * L + c] == 1.0);
      CHECK(masked.values->value[(1 * m + j) * d * L + c] == 0.0);
    }

  // all-valid masks leave the tensor untouched (same node)
  auto same = mask_interactions<double>(stack, {1, 1}, {1, 1});
  CHECK(same.values == stack.values);

  CHECK_THROWS_AS(mask_interactions<double>(stack, {1}, {1, 1}), DimensionError);
}

TEST_CASE("interaction gradients flow to both sentences") {
  auto pair = make_pair(2, 2);
  auto h = DT::create({7, 3}, true);
  Rng rng(8);
  h->fill_uniform(rng, -1.0, 1.0);
  auto stack = stack_interactions<double>({h}, pair, LayerSelection::All);
  backward<double>(sum_all<double>(stack.values));
  h->ensure_grad();
  // [CLS] and [SEP] rows receive no gradient
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(h->grad[0 * 3 + c] == 0.0);
    CHECK(h->grad[3 * 3 + c] == 0.0);
    CHECK(h->grad[6 * 3 + c] == 0.0);
    CHECK(h->grad[1 * 3 + c] != 0.0);
    CHECK(h->grad[4 * 3 + c] != 0.0);
  }
}

TEST_CASE("export_interactions_csv emits one row per cell") {
  auto pair = make_pair(1, 1);
  auto h = DT::from_values({5, 2}, {0, 0, 2, 3, 0, 0, 4, 5, 0, 0});
  auto stack = stack_interactions<double>({h}, pair, LayerSelection::All);
  std::ostringstream os;
  export_interactions_csv(stack, os);
  std::string text = os.str();
  CHECK(text.substr(0, 26) == "i,j,channel,layer,value\n0,");
  std::size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == 1 + 1 * 1 * 2 * 1);  // header + n*m*d*L
  CHECK(text.find("0,0,0,0,8") != std::string::npos);   // 2*4
  CHECK(text.find("0,0,1,0,15") != std::string::npos);  // 3*5
}
