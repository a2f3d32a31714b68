#include "text_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"

namespace cirn {

const char* label_name(int id) {
  switch (id) {
    case kEntailment: return "entailment";
    case kContradiction: return "contradiction";
    case kNeutral: return "neutral";
    default: return "?";
  }
}

int label_id_from_name(const std::string& name) {
  if (name == "entailment") return kEntailment;
  if (name == "contradiction") return kContradiction;
  if (name == "neutral") return kNeutral;
  throw DataError("unknown label: \"" + name + "\"");
}

LoadResult load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError("parse error at " + path + ":" + std::to_string(lineno));
    if (!j.contains("sentence1") || !j.contains("sentence2") || !j.contains("gold_label"))
      throw DataError("missing field at " + path + ":" + std::to_string(lineno));
    std::string gold = j["gold_label"].get<std::string>();
    if (gold == "-") {  // SNLI convention: no annotator consensus
      ++result.skipped;
      continue;
    }
    ExampleRecord rec;
    rec.sentence1 = j["sentence1"].get<std::string>();
    rec.sentence2 = j["sentence2"].get<std::string>();
    rec.label = label_id_from_name(gold);
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<std::string> tokenize_text(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (std::isalnum(ch) || ch >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(ch)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  push("[PAD]");
  push("[UNK]");
  push("[CLS]");
  push("[SEP]");
}

void Vocabulary::push(const std::string& tok) {
  token_to_id_.emplace(tok, id_to_token_.size());
  id_to_token_.push_back(tok);
}

Vocabulary Vocabulary::build(const std::vector<ExampleRecord>& records, std::size_t min_frequency,
                             std::size_t max_size) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& rec : records) {
    for (auto& t : tokenize_text(rec.sentence1)) ++counts[t];
    for (auto& t : tokenize_text(rec.sentence2)) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  std::size_t cap = max_size > 4 ? max_size - 4 : 0;
  for (const auto& [tok, cnt] : items) {
    if (cnt < min_frequency) break;
    if (vocab.size() - 4 >= cap) break;
    vocab.push(tok);
  }
  return vocab;
}

std::size_t Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
  if (id >= id_to_token_.size()) throw DataError("token id out of range");
  return id_to_token_[id];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& tok : id_to_token_) out << tok << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return from_tokens(tokens);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 4 || tokens[0] != "[PAD]" || tokens[1] != "[UNK]" || tokens[2] != "[CLS]" ||
      tokens[3] != "[SEP]")
    throw FormatError("vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
  Vocabulary vocab;
  for (std::size_t i = 4; i < tokens.size(); ++i) vocab.push(tokens[i]);
  return vocab;
}

TokenizedPair tokenize_pair(const std::string& s1, const std::string& s2,
                            const Vocabulary& vocab, std::size_t max_sentence_len) {
  if (max_sentence_len < 1) throw ConfigError("max_sentence_len must be >= 1");
  auto toks1 = tokenize_text(s1);
  auto toks2 = tokenize_text(s2);
  if (toks1.empty() || toks2.empty())
    throw DataError("empty sentence after tokenization: \"" + (toks1.empty() ? s1 : s2) + "\"");
  if (toks1.size() > max_sentence_len) toks1.resize(max_sentence_len);  // keep heads
  if (toks2.size() > max_sentence_len) toks2.resize(max_sentence_len);

  TokenizedPair pair;
  pair.n = toks1.size();
  pair.m = toks2.size();
  pair.token_ids.reserve(pair.n + pair.m + 3);
  pair.token_ids.push_back(Vocabulary::kCls);
  for (auto& t : toks1) pair.token_ids.push_back(vocab.id_of(t));
  pair.token_ids.push_back(Vocabulary::kSep);
  for (auto& t : toks2) pair.token_ids.push_back(vocab.id_of(t));
  pair.token_ids.push_back(Vocabulary::kSep);
  pair.segment_ids.assign(pair.n + 2, 0);
  pair.segment_ids.insert(pair.segment_ids.end(), pair.m + 1, 1);
  pair.s1_range = {1, 1 + pair.n};
  pair.s2_range = {pair.n + 2, pair.n + 2 + pair.m};
  return pair;
}

std::vector<ExampleRecord> mix_datasets(const std::vector<ExampleRecord>& primary,
                                        const std::vector<ExampleRecord>& auxiliary,
                                        double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0) throw ConfigError("mix fraction must be in [0,1]");
  std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(auxiliary.size()));
  std::vector<std::size_t> idx(auxiliary.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // partial Fisher-Yates: first `take` entries are a uniform sample
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<ExampleRecord> mixed = primary;
  for (std::size_t i = 0; i < take; ++i) mixed.push_back(auxiliary[idx[i]]);
  rng.shuffle(mixed);
  return mixed;
}

std::vector<Batch> make_batches(const std::vector<ExampleRecord>& records,
                                const Vocabulary& vocab, std::size_t batch_size,
                                std::size_t max_sentence_len, bool shuffle, Rng& rng) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(order.size(), start + batch_size);
    Batch batch;
    for (std::size_t i = start; i < end; ++i) {
      const auto& rec = records[order[i]];
      batch.pairs.push_back(tokenize_pair(rec.sentence1, rec.sentence2, vocab, max_sentence_len));
      batch.labels.push_back(rec.label);
      batch.max_len = std::max(batch.max_len, batch.pairs.back().total_len());
    }
    for (const auto& pair : batch.pairs) {
      std::vector<std::size_t> ids = pair.token_ids;
      std::vector<int> segs = pair.segment_ids;
      std::vector<int> mask(pair.total_len(), 1);
      ids.resize(batch.max_len, Vocabulary::kPad);
      segs.resize(batch.max_len, 0);
      mask.resize(batch.max_len, 0);
      batch.token_ids.push_back(std::move(ids));
      batch.segment_ids.push_back(std::move(segs));
      batch.attention_mask.push_back(std::move(mask));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace cirn
