#include "synth.hpp"

#include <algorithm>
#include <set>

#include "errors.hpp"
#include "rng.hpp"

namespace cirn {

namespace {

const char* kWords[] = {"cat",  "dog",  "bird", "fish", "tree",  "rock",  "road",
                        "rain", "snow", "wind", "moon", "star",  "lake",  "hill",
                        "boat", "door", "book", "song", "light", "stone"};
constexpr std::size_t kNumWords = sizeof(kWords) / sizeof(kWords[0]);

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += " ";
    s += toks[i];
  }
  return s;
}

std::vector<std::string> sample_distinct(Rng& rng, std::size_t count) {
  std::vector<std::size_t> idx(kNumWords);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(kWords[idx[i]]);
  return out;
}

}  // namespace

std::vector<ExampleRecord> make_subset_nli(std::size_t count, std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x5u));
  std::vector<ExampleRecord> records;
  for (std::size_t i = 0; i < count; ++i) {
    int label = static_cast<int>(i % 3);
    std::size_t plen = 4 + rng.next_below(4);
    auto premise = sample_distinct(rng, plen);
    std::vector<std::string> hyp;
    if (label == kEntailment) {
      // subset of the premise, no negation token
      std::size_t hlen = 2 + rng.next_below(std::min<std::size_t>(3, plen - 1));
      std::vector<std::string> pool = premise;
      rng.shuffle(pool);
      hyp.assign(pool.begin(), pool.begin() + hlen);
    } else if (label == kContradiction) {
      std::size_t hlen = 2 + rng.next_below(3);
      hyp = sample_distinct(rng, hlen);
      hyp[rng.next_below(hyp.size())] = "not";
    } else {
      // at least one token outside the premise, never "not"
      std::set<std::string> in_premise(premise.begin(), premise.end());
      while (true) {
        std::size_t hlen = 2 + rng.next_below(3);
        hyp = sample_distinct(rng, hlen);
        bool outside = false;
        for (auto& t : hyp) outside = outside || !in_premise.count(t);
        if (outside) break;
      }
    }
    records.push_back({join(premise), join(hyp), label});
  }
  return records;
}

std::vector<ExampleRecord> make_position_match(std::size_t count, std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x7u));
  constexpr std::size_t kLen = 5;
  constexpr std::size_t kVocab = 8;  // small vocabulary so matches are natural
  std::vector<ExampleRecord> records;
  for (std::size_t i = 0; i < count; ++i) {
    bool match = (i % 2) == 0;
    std::vector<std::string> s1(kLen), s2(kLen);
    for (auto& t : s1) t = kWords[rng.next_below(kVocab)];
    if (match) {
      for (auto& t : s2) t = kWords[rng.next_below(kVocab)];
      std::size_t pos = rng.next_below(kLen);
      s2[pos] = s1[pos];
    } else {
      for (std::size_t p = 0; p < kLen; ++p) {
        do {
          s2[p] = kWords[rng.next_below(kVocab)];
        } while (s2[p] == s1[p]);
      }
    }
    records.push_back({join(s1), join(s2), match ? kEntailment : kNeutral});
  }
  return records;
}

std::vector<ExampleRecord> make_synthetic(const std::string& task, std::size_t count,
                                          std::uint64_t seed) {
  if (task == "subset_nli") return make_subset_nli(count, seed);
  if (task == "position_match") return make_position_match(count, seed);
  throw ConfigError("unknown synthetic task: " + task);
}

}  // namespace cirn
