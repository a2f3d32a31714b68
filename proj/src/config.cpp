#include "config.hpp"

#include <fstream>
#include <set>

#include "errors.hpp"

namespace cirn {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown config key: " + (scope.empty() ? "" : scope + ".") + it.key());
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void EncoderConfig::validate() const {
  if (d < 1 || layers < 1 || heads < 1 || ffn_dim < 1)
    throw ConfigError("encoder dimensions must be >= 1");
  if (d % heads != 0) throw ConfigError("encoder: d must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
}

void DenseNetConfig::validate() const {
  if (eta <= 0.0 || eta > 1.0) throw ConfigError("densenet: eta must be in (0,1]");
  if (theta <= 0.0 || theta > 1.0) throw ConfigError("densenet: theta must be in (0,1]");
  if (growth < 1 || layers_per_block < 1 || blocks < 1)
    throw ConfigError("densenet: growth, layers_per_block, blocks must be >= 1");
}

const char* ablation_name(AblationMode m) {
  switch (m) {
    case AblationMode::None: return "none";
    case AblationMode::LastLayerOnly: return "last_layer_only";
    case AblationMode::NoInteraction: return "no_interaction";
    case AblationMode::NoDenseNet: return "no_densenet";
  }
  return "?";
}

AblationMode ablation_from_name(const std::string& name) {
  if (name == "none") return AblationMode::None;
  if (name == "last_layer_only") return AblationMode::LastLayerOnly;
  if (name == "no_interaction") return AblationMode::NoInteraction;
  if (name == "no_densenet") return AblationMode::NoDenseNet;
  throw ConfigError("unknown ablation mode: " + name);
}

void TrainerConfig::validate() const {
  if (rho <= 0.0 || eps <= 0.0 || lr_initial <= 0.0 || sgd_lr <= 0.0 || r_l2_max <= 0.0 ||
      t_ramp <= 0.0)
    throw ConfigError("trainer: rates must be positive");
  if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
  if (fallback_patience_steps < 1) throw ConfigError("trainer: patience must be >= 1");
}

void RunConfig::validate() const {
  model.encoder.validate();
  model.densenet.validate();
  trainer.validate();
  if (data.max_sentence_len < 1) throw ConfigError("data: max_sentence_len must be >= 1");
  if (data.mix_fraction < 0.0 || data.mix_fraction > 1.0)
    throw ConfigError("data: mix_fraction must be in [0,1]");
  if (!data.synthetic_task.empty() && data.synthetic_task != "subset_nli" &&
      data.synthetic_task != "position_match")
    throw ConfigError("data: unknown synthetic task: " + data.synthetic_task);
  if (data.synthetic_task.empty() && data.train_path.empty())
    throw ConfigError("data: either train_path or synthetic task is required");
}

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, {"seed", "out_dir", "ablation", "model", "trainer", "data"}, "");
  RunConfig c;
  get_if(j, "seed", c.seed);
  get_if(j, "out_dir", c.out_dir);
  if (j.contains("ablation"))
    c.model.ablation = ablation_from_name(j.at("ablation").get<std::string>());
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"d", "layers", "heads", "ffn_dim", "max_positions", "dropout", "ln_eps",
                       "densenet"},
                   "model");
    auto& e = c.model.encoder;
    get_if(m, "d", e.d);
    get_if(m, "layers", e.layers);
    get_if(m, "heads", e.heads);
    get_if(m, "ffn_dim", e.ffn_dim);
    get_if(m, "max_positions", e.max_positions);
    get_if(m, "dropout", e.dropout);
    get_if(m, "ln_eps", e.ln_eps);
    if (m.contains("densenet")) {
      const auto& dn = m.at("densenet");
      reject_unknown(dn, {"eta", "growth", "layers_per_block", "blocks", "theta"},
                     "model.densenet");
      auto& d = c.model.densenet;
      get_if(dn, "eta", d.eta);
      get_if(dn, "growth", d.growth);
      get_if(dn, "layers_per_block", d.layers_per_block);
      get_if(dn, "blocks", d.blocks);
      get_if(dn, "theta", d.theta);
    }
  }
  if (j.contains("trainer")) {
    const auto& t = j.at("trainer");
    reject_unknown(t, {"rho", "eps", "lr", "batch_size", "fallback_patience_steps", "sgd_lr",
                       "r_l2_max", "t_ramp", "max_epochs", "eval_every_steps"},
                   "trainer");
    auto& tc = c.trainer;
    get_if(t, "rho", tc.rho);
    get_if(t, "eps", tc.eps);
    get_if(t, "lr", tc.lr_initial);
    get_if(t, "batch_size", tc.batch_size);
    get_if(t, "fallback_patience_steps", tc.fallback_patience_steps);
    get_if(t, "sgd_lr", tc.sgd_lr);
    get_if(t, "r_l2_max", tc.r_l2_max);
    get_if(t, "t_ramp", tc.t_ramp);
    get_if(t, "max_epochs", tc.max_epochs);
    get_if(t, "eval_every_steps", tc.eval_every_steps);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"train_path", "dev_path", "aux_path", "mix_fraction", "max_sentence_len",
                       "min_frequency", "max_vocab_size", "synthetic"},
                   "data");
    auto& dc = c.data;
    get_if(d, "train_path", dc.train_path);
    get_if(d, "dev_path", dc.dev_path);
    get_if(d, "aux_path", dc.aux_path);
    get_if(d, "mix_fraction", dc.mix_fraction);
    get_if(d, "max_sentence_len", dc.max_sentence_len);
    get_if(d, "min_frequency", dc.min_frequency);
    get_if(d, "max_vocab_size", dc.max_vocab_size);
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      reject_unknown(s, {"task", "train", "dev", "seed"}, "data.synthetic");
      get_if(s, "task", dc.synthetic_task);
      get_if(s, "train", dc.synthetic_train);
      get_if(s, "dev", dc.synthetic_dev);
      get_if(s, "seed", dc.synthetic_seed);
    }
  }
  c.validate();
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["ablation"] = ablation_name(c.model.ablation);
  const auto& e = c.model.encoder;
  j["model"] = {{"d", e.d},
                {"layers", e.layers},
                {"heads", e.heads},
                {"ffn_dim", e.ffn_dim},
                {"max_positions", e.max_positions},
                {"dropout", e.dropout},
                {"ln_eps", e.ln_eps}};
  const auto& dn = c.model.densenet;
  j["model"]["densenet"] = {{"eta", dn.eta},
                            {"growth", dn.growth},
                            {"layers_per_block", dn.layers_per_block},
                            {"blocks", dn.blocks},
                            {"theta", dn.theta}};
  const auto& t = c.trainer;
  j["trainer"] = {{"rho", t.rho},
                  {"eps", t.eps},
                  {"lr", t.lr_initial},
                  {"batch_size", t.batch_size},
                  {"fallback_patience_steps", t.fallback_patience_steps},
                  {"sgd_lr", t.sgd_lr},
                  {"r_l2_max", t.r_l2_max},
                  {"t_ramp", t.t_ramp},
                  {"max_epochs", t.max_epochs},
                  {"eval_every_steps", t.eval_every_steps}};
  const auto& d = c.data;
  j["data"] = {{"train_path", d.train_path},
               {"dev_path", d.dev_path},
               {"aux_path", d.aux_path},
               {"mix_fraction", d.mix_fraction},
               {"max_sentence_len", d.max_sentence_len},
               {"min_frequency", d.min_frequency},
               {"max_vocab_size", d.max_vocab_size}};
  if (!d.synthetic_task.empty())
    j["data"]["synthetic"] = {{"task", d.synthetic_task},
                              {"train", d.synthetic_train},
                              {"dev", d.synthetic_dev},
                              {"seed", d.synthetic_seed}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return parse_run_config(j);
}

void apply_override(nlohmann::json& j, const std::string& key_eq_value) {
  auto eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value: " + key_eq_value);
  std::string key = key_eq_value.substr(0, eq);
  std::string raw = key_eq_value.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // plain string

  nlohmann::json* node = &j;
  std::size_t pos = 0;
  while (true) {
    auto dot = key.find('.', pos);
    std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("bad override key: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

}  // namespace cirn
