#ifndef CIRN_TRAINER_HPP
#define CIRN_TRAINER_HPP

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "model.hpp"
#include "text_data.hpp"

namespace cirn {

// Sigmoid-ramped L2 decay coefficient at step t, bounded by r_l2_max.
double l2_schedule(std::uint64_t t, const TrainerConfig& cfg);

enum class OptimMode { Adadelta, Sgd };

const char* optim_mode_name(OptimMode m);

struct OptimizerState {
  std::vector<std::vector<float>> sq_grad;    // E[g^2], parallel to parameters()
  std::vector<std::vector<float>> sq_update;  // E[dx^2]
  std::uint64_t step = 0;
  double best_dev_metric = -1.0;
  std::uint64_t last_improvement_step = 0;
  OptimMode mode = OptimMode::Adadelta;
  std::uint64_t epoch = 0;
  std::uint64_t batch_in_epoch = 0;
};

// One optimizer update over accumulated gradients. Throws NumericError on a
// non-finite gradient without touching any parameter.
void adadelta_step(const std::vector<NamedParam<float>>& params, OptimizerState& state,
                   const TrainerConfig& cfg);

// Adadelta -> SGD switch after fallback_patience_steps without improvement;
// fires at most once per run.
void fallback_check(OptimizerState& state, double dev_metric, const TrainerConfig& cfg);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::size_t count = 0;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [gold][pred]
};

EvalResult evaluate(const CirnModel<float>& model, const std::vector<ExampleRecord>& records,
                    const Vocabulary& vocab, std::size_t max_sentence_len,
                    std::size_t batch_size);

struct TrainOutcome {
  double dev_accuracy = 0.0;
  double dev_loss = 0.0;
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  std::uint64_t steps = 0;
  OptimMode mode = OptimMode::Adadelta;
  std::uint64_t epochs = 0;
};

struct RunOptions {
  std::uint64_t max_steps = 0;          // 0 = epoch-bounded only
  double stop_train_accuracy = 0.0;     // checked at epoch boundaries, 0 = off
  std::string best_checkpoint_path;     // saved on dev improvement when set
};

// Owns the data, vocabulary, model, and optimizer for one training run.
// All randomness is derived from (seed, stream, index), so a resumed run
// reproduces the uninterrupted trajectory bitwise.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);
  static Trainer resume(const std::string& checkpoint_path);

  // One optimization step over a batch; returns the regularized mean loss.
  double train_step(const Batch& batch);

  TrainOutcome run(std::ostream& log, const RunOptions& options = {});

  void save(const std::string& path) const;

  CirnModel<float>& model() { return model_; }
  OptimizerState& state() { return state_; }
  const Vocabulary& vocab() const { return vocab_; }
  const RunConfig& config() const { return cfg_; }
  const std::vector<ExampleRecord>& train_records() const { return train_records_; }
  const std::vector<ExampleRecord>& dev_records() const { return dev_records_; }

 private:
  Trainer() = default;
  void setup_data();
  void init_optimizer_buffers();

  RunConfig cfg_;
  Vocabulary vocab_;
  CirnModel<float> model_;
  OptimizerState state_;
  std::vector<ExampleRecord> train_records_;
  std::vector<ExampleRecord> dev_records_;
};

}  // namespace cirn

#endif
