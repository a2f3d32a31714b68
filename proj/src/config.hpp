#ifndef CIRN_CONFIG_HPP
#define CIRN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cirn {

struct EncoderConfig {
  std::size_t vocab_size = 0;  // filled after vocabulary construction
  std::size_t d = 32;
  std::size_t layers = 4;  // L
  std::size_t heads = 4;
  std::size_t ffn_dim = 64;
  std::size_t max_positions = 128;
  double dropout = 0.1;
  double ln_eps = 1e-5;

  void validate() const;
};

struct DenseNetConfig {
  double eta = 0.3;    // initial 1x1 reduction ratio
  std::size_t growth = 20;
  std::size_t layers_per_block = 8;  // n_dense
  std::size_t blocks = 2;            // B
  double theta = 0.5;  // transition compression

  void validate() const;
};

enum class AblationMode { None, LastLayerOnly, NoInteraction, NoDenseNet };

const char* ablation_name(AblationMode m);
AblationMode ablation_from_name(const std::string& name);

struct ModelConfig {
  EncoderConfig encoder;
  DenseNetConfig densenet;
  AblationMode ablation = AblationMode::None;
};

struct TrainerConfig {
  double rho = 0.95;
  double eps = 1e-8;
  double lr_initial = 0.5;
  std::size_t batch_size = 70;
  std::size_t fallback_patience_steps = 30000;
  double sgd_lr = 3e-4;
  double r_l2_max = 0.9e-5;
  double t_ramp = 100000;
  std::size_t max_epochs = 10;
  std::size_t eval_every_steps = 100;

  void validate() const;
};

struct DataConfig {
  std::string train_path;
  std::string dev_path;
  std::string aux_path;   // optional mix-in dataset
  double mix_fraction = 0.0;
  std::size_t max_sentence_len = 32;
  std::size_t min_frequency = 1;
  std::size_t max_vocab_size = 30000;
  // alternative to file paths: generated task in {subset_nli, position_match}
  std::string synthetic_task;
  std::size_t synthetic_train = 200;
  std::size_t synthetic_dev = 64;
  std::uint64_t synthetic_seed = 7;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "run_out";
  ModelConfig model;
  TrainerConfig trainer;
  DataConfig data;

  void validate() const;
};

// Strict parse: unknown keys are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

RunConfig load_run_config(const std::string& path);

// Dotted-key override, e.g. "trainer.lr=0.3". The value is parsed as JSON
// when possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& key_eq_value);

}  // namespace cirn

#endif
