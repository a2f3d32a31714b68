#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "checkpoint.hpp"
#include "trainer.hpp"

using namespace cirn;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

RunConfig tiny_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.model.encoder.d = 8;
  cfg.model.encoder.layers = 2;
  cfg.model.encoder.heads = 2;
  cfg.model.encoder.ffn_dim = 12;
  cfg.model.encoder.dropout = 0.1;
  cfg.model.densenet.eta = 0.5;
  cfg.model.densenet.growth = 4;
  cfg.model.densenet.layers_per_block = 2;
  cfg.model.densenet.blocks = 1;
  cfg.trainer.batch_size = 4;
  cfg.trainer.max_epochs = 100;
  cfg.trainer.eval_every_steps = 0;
  cfg.data.synthetic_task = "subset_nli";
  cfg.data.synthetic_train = 12;
  cfg.data.synthetic_dev = 6;
  cfg.data.max_sentence_len = 8;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise") {
  CheckpointData ckpt;
  ckpt.meta = {{"format", "cirn-checkpoint"}, {"note", 42}};
  ckpt.tensors.push_back({"a", {2, 3}, {1.5f, -2.25f, 0.0f, 1e-30f, 3.0f, -0.5f}});
  ckpt.tensors.push_back({"b.nested", {1}, {7.0f}});
  auto path = temp_path("cirn_ckpt_roundtrip.ckpt");
  save_checkpoint(path, ckpt);

  auto loaded = load_checkpoint(path);
  CHECK(loaded.meta == ckpt.meta);
  REQUIRE(loaded.tensors.size() == 2);
  CHECK(loaded.tensors[0].name == "a");
  CHECK(loaded.tensors[0].shape == Shape{2, 3});
  CHECK(loaded.tensors[0].data == ckpt.tensors[0].data);
  CHECK(loaded.tensors[1].name == "b.nested");

  // no temporary file left behind
  CHECK_FALSE(fs::exists(path + ".tmp"));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects bad magic, version, and truncation") {
  auto path = temp_path("cirn_ckpt_bad.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  CheckpointData ckpt;
  ckpt.meta = {{"x", 1}};
  ckpt.tensors.push_back({"t", {4}, {1, 2, 3, 4}});
  save_checkpoint(path, ckpt);

  // flip the version field (bytes 4..7 after the magic)
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    std::uint32_t bad_version = 999;
    f.write(reinterpret_cast<const char*>(&bad_version), sizeof(bad_version));
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  // truncate a valid file mid-tensor
  save_checkpoint(path, ckpt);
  auto size = fs::file_size(path);
  fs::resize_file(path, size - 6);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);

  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), FormatError);
}

TEST_CASE("trainer save and resume restore everything") {
  auto cfg = tiny_config(5);
  Trainer trainer(cfg);
  std::ostringstream log;
  RunOptions options;
  options.max_steps = 3;
  trainer.run(log, options);
  auto path = temp_path("cirn_trainer_state.ckpt");
  trainer.save(path);

  Trainer resumed = Trainer::resume(path);
  CHECK(resumed.state().step == trainer.state().step);
  CHECK(resumed.state().epoch == trainer.state().epoch);
  CHECK(resumed.state().batch_in_epoch == trainer.state().batch_in_epoch);
  CHECK(resumed.state().mode == trainer.state().mode);
  CHECK(resumed.vocab().size() == trainer.vocab().size());
  auto pa = trainer.model().parameters();
  auto pb = resumed.model().parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].tensor->value == pb[i].tensor->value);
    CHECK(trainer.state().sq_grad[i] == resumed.state().sq_grad[i]);
    CHECK(trainer.state().sq_update[i] == resumed.state().sq_update[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("interrupted training equals uninterrupted training bitwise") {
  const std::uint64_t k = 3, k_extra = 4;
  auto cfg = tiny_config(6);

  // uninterrupted: k + k' steps in one run
  Trainer full(cfg);
  std::ostringstream log_full;
  RunOptions all_steps;
  all_steps.max_steps = k + k_extra;
  full.run(log_full, all_steps);

  // interrupted: k steps, checkpoint, resume, k' more steps
  Trainer first(cfg);
  std::ostringstream log_first;
  RunOptions k_steps;
  k_steps.max_steps = k;
  first.run(log_first, k_steps);
  auto path = temp_path("cirn_resume_test.ckpt");
  first.save(path);

  Trainer second = Trainer::resume(path);
  std::ostringstream log_second;
  second.run(log_second, all_steps);
  std::remove(path.c_str());

  CHECK(second.state().step == full.state().step);
  auto pa = full.model().parameters();
  auto pb = second.model().parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].tensor->value == pb[i].tensor->value);  // bitwise
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(full.state().sq_grad[i] == second.state().sq_grad[i]);
    CHECK(full.state().sq_update[i] == second.state().sq_update[i]);
  }
}

TEST_CASE("resume rejects incomplete checkpoints") {
  CheckpointData ckpt;
  ckpt.meta = {{"format", "cirn-checkpoint"}};  // no config/state/vocab
  auto path = temp_path("cirn_ckpt_incomplete.ckpt");
  save_checkpoint(path, ckpt);
  CHECK_THROWS_AS(Trainer::resume(path), FormatError);
  std::remove(path.c_str());
}
