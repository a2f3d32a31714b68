#include "cirn/cirn.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "errors.hpp"
#include "harness.hpp"
#include "trainer.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <typename Fn>
cirn_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return CIRN_OK;
  } catch (const cirn::ConfigError& e) {
    g_last_error = e.what();
    return CIRN_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CIRN_ERR_RUNTIME;
  }
}

cirn_status run_command(const char* config_json, char** report_json,
                        nlohmann::json (*command)(const nlohmann::json&, std::ostream&)) {
  return guarded([&] {
    if (!config_json) throw cirn::ConfigError("config_json is NULL");
    nlohmann::json cfg = nlohmann::json::parse(config_json, nullptr, false);
    if (cfg.is_discarded()) throw cirn::ConfigError("config is not valid JSON");
    nlohmann::json report = command(cfg, std::cerr);
    if (report_json) *report_json = dup_string(report.dump(2));
  });
}

}  // namespace

struct cirn_model {
  cirn::LoadedModel loaded;
};

extern "C" {

const char* cirn_version(void) { return "1.0.0"; }

const char* cirn_last_error(void) { return g_last_error.c_str(); }

void cirn_free(char* p) { std::free(p); }

cirn_status cirn_run_train(const char* config_json, char** report_json) {
  return run_command(config_json, report_json, &cirn::run_train);
}

cirn_status cirn_run_gradcheck(const char* config_json, char** report_json) {
  cirn_status status = run_command(config_json, report_json, &cirn::run_gradcheck);
  return status;
}

cirn_status cirn_run_ablate(const char* config_json, char** report_json) {
  return run_command(config_json, report_json, &cirn::run_ablate);
}

cirn_status cirn_run_eval(const char* checkpoint_path, const char* dataset_path,
                          char** report_json) {
  return guarded([&] {
    if (!checkpoint_path || !dataset_path)
      throw cirn::ConfigError("checkpoint and dataset paths are required");
    nlohmann::json report = cirn::run_eval(checkpoint_path, dataset_path, std::cerr);
    if (report_json) *report_json = dup_string(report.dump(2));
  });
}

cirn_status cirn_model_open(const char* checkpoint_path, cirn_model** out) {
  return guarded([&] {
    if (!checkpoint_path || !out) throw cirn::ConfigError("NULL argument to cirn_model_open");
    auto* m = new cirn_model{cirn::load_model(checkpoint_path)};
    *out = m;
  });
}

void cirn_model_close(cirn_model* m) { delete m; }

cirn_status cirn_model_classify(cirn_model* m, const char* premise, const char* hypothesis,
                                double probs[3], int* label_id) {
  return guarded([&] {
    if (!m || !premise || !hypothesis)
      throw cirn::ConfigError("NULL argument to cirn_model_classify");
    auto pair = cirn::tokenize_pair(premise, hypothesis, m->loaded.vocab,
                                    m->loaded.max_sentence_len);
    std::vector<int> mask(pair.total_len(), 1);
    cirn::Rng unused(0);
    auto fwd = m->loaded.model.forward_example(pair.token_ids, pair.segment_ids, mask, pair,
                                               cirn::kNeutral, false, unused);
    if (probs)
      for (int i = 0; i < 3; ++i) probs[i] = fwd.probs[static_cast<std::size_t>(i)];
    if (label_id) *label_id = cirn::predict(fwd.probs);
  });
}

}  // extern "C"
