#ifndef CIRN_TEXT_DATA_HPP
#define CIRN_TEXT_DATA_HPP

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rng.hpp"

namespace cirn {

enum Label : int { kEntailment = 0, kContradiction = 1, kNeutral = 2 };

const char* label_name(int id);
int label_id_from_name(const std::string& name);  // throws DataError on unknown

struct ExampleRecord {
  std::string sentence1;  // premise
  std::string sentence2;  // hypothesis
  int label = kNeutral;
};

struct LoadResult {
  std::vector<ExampleRecord> records;
  std::size_t skipped = 0;  // gold_label "-" lines
};

// One JSON object per line with sentence1 / sentence2 / gold_label.
LoadResult load_jsonl(const std::string& path);

// Lowercase, split on whitespace; punctuation characters become their own
// tokens.
std::vector<std::string> tokenize_text(const std::string& text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;
  static constexpr std::size_t kSep = 3;

  Vocabulary();

  // Frequency-filtered, capped vocabulary. Ties sort lexicographically.
  static Vocabulary build(const std::vector<ExampleRecord>& records, std::size_t min_frequency,
                          std::size_t max_size);

  std::size_t id_of(const std::string& token) const;  // kUnk for OOV
  const std::string& token_of(std::size_t id) const;
  std::size_t size() const { return id_to_token_.size(); }

  void save(const std::string& path) const;  // one token per line, line = id
  static Vocabulary load(const std::string& path);

  const std::vector<std::string>& tokens() const { return id_to_token_; }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::unordered_map<std::string, std::size_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  void push(const std::string& tok);
};

// [CLS] s1 [SEP] s2 [SEP] with segment ids and sentence spans.
struct TokenizedPair {
  std::vector<std::size_t> token_ids;    // length n + m + 3
  std::vector<int> segment_ids;          // n+2 zeros then m+1 ones
  std::size_t n = 0;                     // S1 token count after truncation
  std::size_t m = 0;                     // S2 token count after truncation
  std::pair<std::size_t, std::size_t> s1_range;  // [begin, end)
  std::pair<std::size_t, std::size_t> s2_range;

  std::size_t total_len() const { return token_ids.size(); }
};

TokenizedPair tokenize_pair(const std::string& s1, const std::string& s2,
                            const Vocabulary& vocab, std::size_t max_sentence_len);

struct Batch {
  std::vector<TokenizedPair> pairs;
  std::vector<int> labels;
  std::size_t max_len = 0;                       // padded length
  std::vector<std::vector<std::size_t>> token_ids;  // padded with kPad
  std::vector<std::vector<int>> segment_ids;        // padded with 0
  std::vector<std::vector<int>> attention_mask;     // 1 = real token
};

// Primary plus floor(fraction * |auxiliary|) records sampled uniformly
// without replacement, order shuffled by rng.
std::vector<ExampleRecord> mix_datasets(const std::vector<ExampleRecord>& primary,
                                        const std::vector<ExampleRecord>& auxiliary,
                                        double fraction, Rng& rng);

// Tokenizes and pads; final partial batch emitted.
std::vector<Batch> make_batches(const std::vector<ExampleRecord>& records,
                                const Vocabulary& vocab, std::size_t batch_size,
                                std::size_t max_sentence_len, bool shuffle, Rng& rng);

}  // namespace cirn

#endif
