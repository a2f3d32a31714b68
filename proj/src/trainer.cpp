#include "trainer.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "checkpoint.hpp"
#include "synth.hpp"

namespace cirn {

namespace {

// derived-stream ids under one run seed
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamShuffle = 2;
constexpr std::uint64_t kStreamDropout = 3;
constexpr std::uint64_t kStreamMix = 4;

std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

}  // namespace

double l2_schedule(std::uint64_t t, const TrainerConfig& cfg) {
  double half = cfg.t_ramp / 2.0;
  double z = (static_cast<double>(t) - half) * 8.0 / half;
  double sigma = 1.0 / (1.0 + std::exp(-z));
  return sigma * cfg.r_l2_max;
}

const char* optim_mode_name(OptimMode m) {
  return m == OptimMode::Adadelta ? "adadelta" : "sgd";
}

void adadelta_step(const std::vector<NamedParam<float>>& params, OptimizerState& state,
                   const TrainerConfig& cfg) {
  if (state.sq_grad.size() != params.size() || state.sq_update.size() != params.size())
    throw ConfigError("optimizer state does not match parameter list");
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& t = *params[p].tensor;
    t.ensure_grad();
    for (float g : t.grad)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in " + params[p].name + ", step aborted");
  }
  float rho = static_cast<float>(cfg.rho);
  float eps = static_cast<float>(cfg.eps);
  float lr = static_cast<float>(cfg.lr_initial);
  float sgd_lr = static_cast<float>(cfg.sgd_lr);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& t = *params[p].tensor;
    auto& eg2 = state.sq_grad[p];
    auto& edx2 = state.sq_update[p];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      float g = t.grad[i];
      if (state.mode == OptimMode::Sgd) {
        t.value[i] -= sgd_lr * g;
        continue;
      }
      eg2[i] = rho * eg2[i] + (1.0f - rho) * g * g;
      float dx = -lr * std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps) * g;
      edx2[i] = rho * edx2[i] + (1.0f - rho) * dx * dx;
      t.value[i] += dx;
    }
  }
}

void fallback_check(OptimizerState& state, double dev_metric, const TrainerConfig& cfg) {
  if (dev_metric > state.best_dev_metric) {
    state.best_dev_metric = dev_metric;
    state.last_improvement_step = state.step;
    return;
  }
  if (state.mode == OptimMode::Adadelta &&
      state.step - state.last_improvement_step >= cfg.fallback_patience_steps)
    state.mode = OptimMode::Sgd;
}

EvalResult evaluate(const CirnModel<float>& model, const std::vector<ExampleRecord>& records,
                    const Vocabulary& vocab, std::size_t max_sentence_len,
                    std::size_t batch_size) {
  if (records.empty()) throw DataError("evaluate: empty dataset");
  Rng unused(0);
  auto batches = make_batches(records, vocab, batch_size, max_sentence_len, false, unused);
  EvalResult result;
  double total_loss = 0.0;
  for (const auto& batch : batches)
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
      auto fwd = model.forward_example(batch.token_ids[i], batch.segment_ids[i],
                                       batch.attention_mask[i], batch.pairs[i], batch.labels[i],
                                       false, unused);
      int pred = predict(fwd.probs);
      int gold = batch.labels[i];
      ++result.confusion[static_cast<std::size_t>(gold)][static_cast<std::size_t>(pred)];
      if (pred == gold) result.accuracy += 1.0;
      total_loss += static_cast<double>(fwd.loss->value[0]);
      ++result.count;
    }
  result.accuracy /= static_cast<double>(result.count);
  result.mean_loss = total_loss / static_cast<double>(result.count);
  return result;
}

Trainer::Trainer(const RunConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  setup_data();
  vocab_ = Vocabulary::build(train_records_, cfg_.data.min_frequency, cfg_.data.max_vocab_size);
  cfg_.model.encoder.vocab_size = vocab_.size();
  std::size_t longest = 2 * cfg_.data.max_sentence_len + 3;
  if (cfg_.model.encoder.max_positions < longest) cfg_.model.encoder.max_positions = longest;
  Rng init_rng = Rng::derive(cfg_.seed, kStreamInit, 0);
  model_ = CirnModel<float>::init_random(cfg_.model, init_rng);
  init_optimizer_buffers();
}

void Trainer::setup_data() {
  const auto& d = cfg_.data;
  if (!d.synthetic_task.empty()) {
    train_records_ = make_synthetic(d.synthetic_task, d.synthetic_train, d.synthetic_seed);
    dev_records_ = make_synthetic(d.synthetic_task, d.synthetic_dev, d.synthetic_seed + 1);
  } else {
    train_records_ = load_jsonl(d.train_path).records;
    if (!d.dev_path.empty()) dev_records_ = load_jsonl(d.dev_path).records;
    if (!d.aux_path.empty() && d.mix_fraction > 0.0) {
      auto aux = load_jsonl(d.aux_path).records;
      Rng mix_rng = Rng::derive(cfg_.seed, kStreamMix, 0);
      train_records_ = mix_datasets(train_records_, aux, d.mix_fraction, mix_rng);
    }
  }
  if (train_records_.empty()) throw DataError("training dataset is empty");
  if (dev_records_.empty()) dev_records_ = train_records_;
}

void Trainer::init_optimizer_buffers() {
  state_.sq_grad.clear();
  state_.sq_update.clear();
  for (const auto& p : model_.parameters()) {
    state_.sq_grad.emplace_back(p.tensor->numel(), 0.0f);
    state_.sq_update.emplace_back(p.tensor->numel(), 0.0f);
  }
}

double Trainer::train_step(const Batch& batch) {
  auto params = model_.parameters();
  for (auto& p : params) p.tensor->zero_grad();
  Rng dropout_rng = Rng::derive(cfg_.seed, kStreamDropout, state_.step);
  double total_ce = 0.0;
  float inv_b = 1.0f / static_cast<float>(batch.pairs.size());
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    try {
      auto fwd = model_.forward_example(batch.token_ids[i], batch.segment_ids[i],
                                        batch.attention_mask[i], batch.pairs[i],
                                        batch.labels[i], true, dropout_rng);
      total_ce += static_cast<double>(fwd.loss->value[0]);
      backward<float>(scale<float>(fwd.loss, inv_b));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (batch example " + std::to_string(i) + ")");
    }
  }
  // L2 term R(t) * sum ||w||^2 over weight matrices, applied analytically
  double r = l2_schedule(state_.step, cfg_.trainer);
  double penalty = 0.0;
  for (auto& p : params) {
    if (!p.is_weight_matrix) continue;
    p.tensor->ensure_grad();
    for (std::size_t i = 0; i < p.tensor->numel(); ++i) {
      double w = static_cast<double>(p.tensor->value[i]);
      penalty += w * w;
      p.tensor->grad[i] += static_cast<float>(2.0 * r * w);
    }
  }
  adadelta_step(params, state_, cfg_.trainer);
  state_.step += 1;
  return total_ce / static_cast<double>(batch.pairs.size()) + r * penalty;
}

TrainOutcome Trainer::run(std::ostream& log, const RunOptions& options) {
  const auto& tc = cfg_.trainer;
  auto finalize = [&]() {
    TrainOutcome outcome;
    auto dev = evaluate(model_, dev_records_, vocab_, cfg_.data.max_sentence_len, tc.batch_size);
    auto train =
        evaluate(model_, train_records_, vocab_, cfg_.data.max_sentence_len, tc.batch_size);
    outcome.dev_accuracy = dev.accuracy;
    outcome.dev_loss = dev.mean_loss;
    outcome.train_accuracy = train.accuracy;
    outcome.train_loss = train.mean_loss;
    outcome.steps = state_.step;
    outcome.mode = state_.mode;
    outcome.epochs = state_.epoch;
    log << "step=" << state_.step << " split=dev loss=" << fmt_num(dev.mean_loss)
        << " acc=" << fmt_num(dev.accuracy) << " mode=" << optim_mode_name(state_.mode)
        << " r_l2=" << fmt_num(l2_schedule(state_.step, tc)) << "\n";
    return outcome;
  };

  while (state_.epoch < tc.max_epochs) {
    Rng shuffle_rng = Rng::derive(cfg_.seed, kStreamShuffle, state_.epoch);
    auto batches = make_batches(train_records_, vocab_, tc.batch_size,
                                cfg_.data.max_sentence_len, true, shuffle_rng);
    for (std::size_t bi = state_.batch_in_epoch; bi < batches.size(); ++bi) {
      double loss = train_step(batches[bi]);
      state_.batch_in_epoch = bi + 1;
      log << "step=" << state_.step << " split=train loss=" << fmt_num(loss)
          << " acc=- mode=" << optim_mode_name(state_.mode)
          << " r_l2=" << fmt_num(l2_schedule(state_.step - 1, tc)) << "\n";
      if (tc.eval_every_steps > 0 && state_.step % tc.eval_every_steps == 0) {
        auto dev =
            evaluate(model_, dev_records_, vocab_, cfg_.data.max_sentence_len, tc.batch_size);
        log << "step=" << state_.step << " split=dev loss=" << fmt_num(dev.mean_loss)
            << " acc=" << fmt_num(dev.accuracy) << " mode=" << optim_mode_name(state_.mode)
            << " r_l2=" << fmt_num(l2_schedule(state_.step, tc)) << "\n";
        double prev_best = state_.best_dev_metric;
        fallback_check(state_, dev.accuracy, tc);
        if (!options.best_checkpoint_path.empty() && state_.best_dev_metric > prev_best)
          save(options.best_checkpoint_path);
      }
      if (options.max_steps > 0 && state_.step >= options.max_steps) return finalize();
    }
    state_.epoch += 1;
    state_.batch_in_epoch = 0;
    if (options.stop_train_accuracy > 0.0) {
      auto train =
          evaluate(model_, train_records_, vocab_, cfg_.data.max_sentence_len, tc.batch_size);
      log << "step=" << state_.step << " split=train_eval loss=" << fmt_num(train.mean_loss)
          << " acc=" << fmt_num(train.accuracy) << " mode=" << optim_mode_name(state_.mode)
          << " r_l2=" << fmt_num(l2_schedule(state_.step, tc)) << "\n";
      if (train.accuracy >= options.stop_train_accuracy) return finalize();
    }
  }
  return finalize();
}

void Trainer::save(const std::string& path) const {
  CheckpointData ckpt;
  ckpt.meta["format"] = "cirn-checkpoint";
  ckpt.meta["config"] = run_config_to_json(cfg_);
  ckpt.meta["vocab"] = vocab_.tokens();
  ckpt.meta["state"] = {{"step", state_.step},
                        {"epoch", state_.epoch},
                        {"batch_in_epoch", state_.batch_in_epoch},
                        {"mode", optim_mode_name(state_.mode)},
                        {"best_dev_metric", state_.best_dev_metric},
                        {"last_improvement_step", state_.last_improvement_step}};
  auto params = model_.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    ckpt.tensors.push_back({params[p].name, params[p].tensor->shape, params[p].tensor->value});
    ckpt.tensors.push_back(
        {"opt.sq_grad." + params[p].name, params[p].tensor->shape, state_.sq_grad[p]});
    ckpt.tensors.push_back(
        {"opt.sq_update." + params[p].name, params[p].tensor->shape, state_.sq_update[p]});
  }
  save_checkpoint(path, ckpt);
}

Trainer Trainer::resume(const std::string& checkpoint_path) {
  CheckpointData ckpt = load_checkpoint(checkpoint_path);
  if (!ckpt.meta.contains("config") || !ckpt.meta.contains("state") ||
      !ckpt.meta.contains("vocab"))
    throw FormatError("checkpoint metadata incomplete");

  Trainer trainer;
  trainer.cfg_ = parse_run_config(ckpt.meta.at("config"));
  trainer.setup_data();
  trainer.vocab_ =
      Vocabulary::from_tokens(ckpt.meta.at("vocab").get<std::vector<std::string>>());
  trainer.cfg_.model.encoder.vocab_size = trainer.vocab_.size();
  std::size_t longest = 2 * trainer.cfg_.data.max_sentence_len + 3;
  if (trainer.cfg_.model.encoder.max_positions < longest)
    trainer.cfg_.model.encoder.max_positions = longest;
  Rng init_rng = Rng::derive(trainer.cfg_.seed, kStreamInit, 0);
  trainer.model_ = CirnModel<float>::init_random(trainer.cfg_.model, init_rng);
  trainer.init_optimizer_buffers();

  auto params = trainer.model_.parameters();
  auto find = [&](const std::string& name) -> const NamedTensorF32& {
    for (const auto& t : ckpt.tensors)
      if (t.name == name) return t;
    throw FormatError("checkpoint missing tensor: " + name);
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& saved = find(params[p].name);
    if (saved.shape != params[p].tensor->shape)
      throw FormatError("checkpoint tensor " + params[p].name + " has shape " +
                        shape_str(saved.shape) + ", model expects " +
                        shape_str(params[p].tensor->shape));
    params[p].tensor->value = saved.data;
    trainer.state_.sq_grad[p] = find("opt.sq_grad." + params[p].name).data;
    trainer.state_.sq_update[p] = find("opt.sq_update." + params[p].name).data;
  }
  const auto& st = ckpt.meta.at("state");
  trainer.state_.step = st.at("step").get<std::uint64_t>();
  trainer.state_.epoch = st.at("epoch").get<std::uint64_t>();
  trainer.state_.batch_in_epoch = st.at("batch_in_epoch").get<std::uint64_t>();
  trainer.state_.best_dev_metric = st.at("best_dev_metric").get<double>();
  trainer.state_.last_improvement_step = st.at("last_improvement_step").get<std::uint64_t>();
  trainer.state_.mode =
      st.at("mode").get<std::string>() == "sgd" ? OptimMode::Sgd : OptimMode::Adadelta;
  return trainer;
}

}  // namespace cirn
