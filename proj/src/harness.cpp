#include "harness.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>

#include "checkpoint.hpp"
#include "gradcheck.hpp"
#include "synth.hpp"
#include "trainer.hpp"

namespace fs = std::filesystem;

namespace cirn {

namespace {

nlohmann::json metrics_json(const char* split, double accuracy, double loss,
                            std::uint64_t steps, OptimMode mode) {
  return {{"split", split},
          {"accuracy", accuracy},
          {"loss", loss},
          {"steps", steps},
          {"mode", optim_mode_name(mode)}};
}

}  // namespace

nlohmann::json run_train(const nlohmann::json& config, std::ostream& out) {
  RunConfig cfg = parse_run_config(config);
  fs::create_directories(cfg.out_dir);
  Trainer trainer(cfg);

  {
    std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.json");
    cfg_out << run_config_to_json(trainer.config()).dump(2) << "\n";
  }
  trainer.vocab().save((fs::path(cfg.out_dir) / "vocab.txt").string());

  std::ofstream log(fs::path(cfg.out_dir) / "train.log");
  RunOptions options;
  options.best_checkpoint_path = (fs::path(cfg.out_dir) / "best.ckpt").string();
  TrainOutcome outcome = trainer.run(log, options);
  trainer.save((fs::path(cfg.out_dir) / "final.ckpt").string());

  nlohmann::json metrics = metrics_json("dev", outcome.dev_accuracy, outcome.dev_loss,
                                        outcome.steps, outcome.mode);
  {
    std::ofstream metrics_out(fs::path(cfg.out_dir) / "metrics.json");
    metrics_out << metrics.dump(2) << "\n";
  }
  out << "train: steps=" << outcome.steps << " dev_acc=" << outcome.dev_accuracy
      << " dev_loss=" << outcome.dev_loss << " mode=" << optim_mode_name(outcome.mode) << "\n";
  nlohmann::json report = metrics;
  report["train_accuracy"] = outcome.train_accuracy;
  report["train_loss"] = outcome.train_loss;
  report["out_dir"] = cfg.out_dir;
  return report;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  CheckpointData ckpt = load_checkpoint(checkpoint_path);
  if (!ckpt.meta.contains("config") || !ckpt.meta.contains("vocab"))
    throw FormatError("checkpoint metadata incomplete");
  LoadedModel lm;
  RunConfig cfg = parse_run_config(ckpt.meta.at("config"));
  lm.vocab = Vocabulary::from_tokens(ckpt.meta.at("vocab").get<std::vector<std::string>>());
  lm.max_sentence_len = cfg.data.max_sentence_len;
  cfg.model.encoder.vocab_size = lm.vocab.size();
  std::size_t longest = 2 * cfg.data.max_sentence_len + 3;
  if (cfg.model.encoder.max_positions < longest) cfg.model.encoder.max_positions = longest;
  Rng rng(0);
  lm.model = CirnModel<float>::init_random(cfg.model, rng);
  auto params = lm.model.parameters();
  for (auto& p : params) {
    const NamedTensorF32* found = nullptr;
    for (const auto& t : ckpt.tensors)
      if (t.name == p.name) {
        found = &t;
        break;
      }
    if (!found) throw FormatError("checkpoint missing tensor: " + p.name);
    if (found->shape != p.tensor->shape)
      throw FormatError("checkpoint tensor " + p.name + " has shape " +
                        shape_str(found->shape) + ", model expects " +
                        shape_str(p.tensor->shape));
    p.tensor->value = found->data;
  }
  std::size_t emb_rows = lm.model.encoder.token_emb->shape[0];
  if (emb_rows != lm.vocab.size())
    throw FormatError("vocabulary size " + std::to_string(lm.vocab.size()) +
                      " does not match embedding rows " + std::to_string(emb_rows));
  return lm;
}

nlohmann::json run_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                        std::ostream& out) {
  LoadedModel lm = load_model(checkpoint_path);
  auto loaded = load_jsonl(dataset_path);
  EvalResult result = evaluate(lm.model, loaded.records, lm.vocab, lm.max_sentence_len, 32);
  out << "eval: accuracy=" << result.accuracy << " mean_loss=" << result.mean_loss
      << " examples=" << result.count << " skipped=" << loaded.skipped << "\n";
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    for (std::size_t p = 0; p < kNumClasses; ++p)
      out << "confusion[" << label_name(static_cast<int>(g)) << "]["
          << label_name(static_cast<int>(p)) << "]=" << result.confusion[g][p] << "\n";
    confusion.push_back(result.confusion[g]);
  }
  return {{"split", "eval"},
          {"accuracy", result.accuracy},
          {"loss", result.mean_loss},
          {"examples", result.count},
          {"skipped", loaded.skipped},
          {"confusion", confusion}};
}

// ---------------------------------------------------------------------------
// gradient-check suite

namespace {

using D = double;
using DT = Tensor<double>;

DT::Ptr random_tensor(Shape s, Rng& rng, bool req_grad = true, double kink_margin = 0.0) {
  auto t = DT::create(std::move(s), req_grad);
  for (auto& v : t->value) {
    v = rng.uniform(-1.0, 1.0);
    if (kink_margin > 0.0 && std::fabs(v) < kink_margin)
      v = v < 0 ? -kink_margin : kink_margin;  // keep clear of ReLU / max ties
  }
  return t;
}

struct OpCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

OpCheckResult check_op(const std::string& name, DT::Ptr x,
                       const std::function<DT::Ptr()>& forward, double tol,
                       std::size_t max_coords = 0) {
  auto rep = grad_check<double>(forward, x, 1e-5, tol, max_coords);
  return {name, rep.max_rel_error, rep.pass};
}

std::vector<OpCheckResult> op_level_checks(std::uint64_t seed) {
  std::vector<OpCheckResult> results;
  const double tol = 1e-6;
  Rng rng(Rng::mix(seed, 0x6c));

  {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    results.push_back(check_op("matmul(a)", a,
                               [&] { return sum_all<D>(matmul<D>(a, b)); }, tol));
    results.push_back(check_op("matmul(b)", b,
                               [&] { return sum_all<D>(matmul<D>(a, b)); }, tol));
  }
  {
    auto a = random_tensor({2, 3}, rng);
    auto b = random_tensor({2, 3}, rng);
    results.push_back(check_op("ewise_add", a,
                               [&] { return sum_all<D>(mul<D>(add<D>(a, b), b)); }, tol));
    results.push_back(check_op("ewise_sub", a,
                               [&] { return sum_all<D>(mul<D>(sub<D>(a, b), b)); }, tol));
    results.push_back(check_op("ewise_mul", b,
                               [&] { return sum_all<D>(mul<D>(mul<D>(a, b), b)); }, tol));
  }
  {
    auto a = random_tensor({5}, rng, true, 0.05);
    results.push_back(check_op("relu", a, [&] { return sum_all<D>(relu<D>(a)); }, tol));
  }
  {
    auto a = random_tensor({2, 4}, rng);
    auto w = random_tensor({2, 4}, rng, false);
    results.push_back(check_op(
        "softmax_lastdim", a,
        [&] { return sum_all<D>(mul<D>(softmax_lastdim<D>(a), w)); }, tol));
  }
  {
    auto x = random_tensor({2, 4, 5}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto same = [&] { return sum_all<D>(conv2d<D>(x, k, b, Padding::Same)); };
    results.push_back(check_op("conv2d_same(x)", x, same, tol));
    results.push_back(check_op("conv2d_same(k)", k, same, tol));
    results.push_back(check_op("conv2d_same(bias)", b, same, tol));
    auto valid = [&] { return sum_all<D>(conv2d<D>(x, k, b, Padding::Valid)); };
    results.push_back(check_op("conv2d_valid(x)", x, valid, tol));
  }
  {
    auto x = random_tensor({2, 5, 5}, rng);
    auto w = random_tensor({2, 3, 3}, rng, false);
    results.push_back(check_op(
        "maxpool2d", x, [&] { return sum_all<D>(mul<D>(maxpool2d<D>(x), w)); }, tol));
  }
  {
    auto x = random_tensor({3, 3, 3}, rng);
    results.push_back(
        check_op("global_maxpool", x, [&] { return sum_all<D>(global_maxpool<D>(x)); }, tol));
    results.push_back(check_op(
        "global_meanpool", x, [&] { return sum_all<D>(global_meanpool<D>(x)); }, tol));
  }
  {
    auto a = random_tensor({2, 3, 3}, rng);
    auto b = random_tensor({3, 3, 3}, rng);
    auto w = random_tensor({5, 3, 3}, rng, false);
    results.push_back(check_op(
        "concat_channels", a,
        [&] { return sum_all<D>(mul<D>(concat_channels<D>({a, b}), w)); }, tol));
  }
  {
    auto x = random_tensor({3, 4}, rng);
    auto g = random_tensor({4}, rng);
    auto b = random_tensor({4}, rng);
    auto w = random_tensor({3, 4}, rng, false);
    auto f = [&] { return sum_all<D>(mul<D>(layer_norm<D>(x, g, b, 1e-5), w)); };
    results.push_back(check_op("layer_norm(x)", x, f, tol));
    results.push_back(check_op("layer_norm(gain)", g, f, tol));
    results.push_back(check_op("layer_norm(bias)", b, f, tol));
  }
  {
    auto h1 = random_tensor({3, 4}, rng);
    auto h2 = random_tensor({2, 4}, rng);
    auto w = random_tensor({3, 2, 4, 1}, rng, false);
    auto f = [&] {
      auto stack = stack_lastdim<D>({interaction_matrix<D>(h1, h2)});
      return sum_all<D>(mul<D>(stack, w));
    };
    results.push_back(check_op("interaction_stack(h1)", h1, f, tol));
    results.push_back(check_op("interaction_stack(h2)", h2, f, tol));
  }
  {
    auto stack = random_tensor({3, 2, 4, 2}, rng);
    auto w = random_tensor({8, 3, 2}, rng, false);
    results.push_back(check_op(
        "fold_stack_to_channels", stack,
        [&] { return sum_all<D>(mul<D>(fold_stack_to_channels<D>(stack), w)); }, tol));
  }
  {
    auto logits = random_tensor({3}, rng);
    results.push_back(check_op(
        "cross_entropy_logits", logits, [&] { return cross_entropy_logits<D>(logits, 1); },
        tol));
  }
  {
    auto v = random_tensor({4}, rng);
    auto w = random_tensor({3, 4}, rng, false);
    results.push_back(check_op(
        "expand_rows", v, [&] { return sum_all<D>(mul<D>(expand_rows<D>(v, 3), w)); }, tol));
  }
  return results;
}

// End-to-end model check at a toy configuration, 64-bit, dropout off.
std::vector<OpCheckResult> end_to_end_checks(std::uint64_t seed, double tol) {
  ModelConfig cfg;
  cfg.encoder.d = 16;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_dim = 24;
  cfg.encoder.max_positions = 16;
  cfg.encoder.dropout = 0.0;
  cfg.densenet.eta = 0.3;
  cfg.densenet.growth = 4;
  cfg.densenet.layers_per_block = 2;
  cfg.densenet.blocks = 1;
  cfg.densenet.theta = 0.5;

  auto records = make_subset_nli(8, seed);
  Vocabulary vocab = Vocabulary::build(records, 1, 100);
  cfg.encoder.vocab_size = vocab.size();
  Rng init_rng = Rng::derive(seed, 0xe2e, 0);
  auto model = CirnModel<double>::init_random(cfg, init_rng);

  auto pair = tokenize_pair(records[0].sentence1, records[0].sentence2, vocab, 5);
  std::vector<int> mask(pair.total_len(), 1);
  Rng unused(0);
  auto forward = [&] {
    return model
        .forward_example(pair.token_ids, pair.segment_ids, mask, pair, records[0].label, false,
                         unused)
        .loss;
  };

  std::vector<OpCheckResult> results;
  for (const auto& p : model.parameters()) {
    auto rep = grad_check<double>(forward, p.tensor, 1e-5, tol, 6);
    results.push_back({"model." + p.name, rep.max_rel_error, rep.pass});
  }
  return results;
}

}  // namespace

nlohmann::json run_gradcheck(const nlohmann::json& config, std::ostream& out) {
  std::uint64_t seed = 1;
  if (config.contains("seed")) seed = config.at("seed").get<std::uint64_t>();
  double e2e_tol = 1e-4;

  auto results = op_level_checks(seed);
  auto e2e = end_to_end_checks(seed, e2e_tol);
  results.insert(results.end(), e2e.begin(), e2e.end());

  bool all_pass = true;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : results) {
    all_pass = all_pass && r.pass;
    out << (r.pass ? "PASS " : "FAIL ") << std::left << std::setw(40) << r.name
        << " max_rel_error=" << std::scientific << std::setprecision(3) << r.max_rel_error
        << std::defaultfloat << "\n";
    checks.push_back({{"op", r.name}, {"max_rel_error", r.max_rel_error}, {"pass", r.pass}});
  }
  out << (all_pass ? "gradcheck: all checks passed\n" : "gradcheck: FAILURES present\n");
  return {{"pass", all_pass}, {"checks", checks}};
}

nlohmann::json run_ablate(const nlohmann::json& config, std::ostream& out) {
  RunConfig base = parse_run_config(config);
  fs::create_directories(base.out_dir);
  const AblationMode modes[] = {AblationMode::None, AblationMode::LastLayerOnly,
                                AblationMode::NoInteraction, AblationMode::NoDenseNet};
  nlohmann::json rows = nlohmann::json::array();
  for (AblationMode mode : modes) {
    RunConfig cfg = base;
    cfg.model.ablation = mode;
    cfg.out_dir = (fs::path(base.out_dir) / ablation_name(mode)).string();
    nlohmann::json report = run_train(run_config_to_json(cfg), out);
    rows.push_back({{"ablation", ablation_name(mode)},
                    {"dev_accuracy", report.at("accuracy")},
                    {"dev_loss", report.at("loss")},
                    {"steps", report.at("steps")}});
  }
  out << "\nablation            dev_accuracy\n";
  for (const auto& row : rows)
    out << std::left << std::setw(20) << row.at("ablation").get<std::string>()
        << row.at("dev_accuracy").get<double>() << "\n";
  nlohmann::json report = {{"rows", rows}, {"seed", base.seed}};
  std::ofstream report_out(fs::path(base.out_dir) / "ablation.json");
  report_out << report.dump(2) << "\n";
  return report;
}

}  // namespace cirn
