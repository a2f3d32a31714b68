#ifndef CIRN_HARNESS_HPP
#define CIRN_HARNESS_HPP

#include <ostream>
#include <string>

#include <json.hpp>

#include "model.hpp"
#include "text_data.hpp"

namespace cirn {

// Command implementations shared by the C API and the CLI. Each returns a
// JSON report and writes artifacts under the configured output directory.
// Progress lines go to `out`.

nlohmann::json run_train(const nlohmann::json& config, std::ostream& out);

nlohmann::json run_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                        std::ostream& out);

// Central-difference checks for every differentiable op plus the end-to-end
// model at a toy configuration, in 64-bit mode. report["pass"] is the gate.
nlohmann::json run_gradcheck(const nlohmann::json& config, std::ostream& out);

// Full model plus the three ablations, shared seed and data order.
nlohmann::json run_ablate(const nlohmann::json& config, std::ostream& out);

// Inference-only model handle backing the C API.
struct LoadedModel {
  CirnModel<float> model;
  Vocabulary vocab;
  std::size_t max_sentence_len = 32;
};

LoadedModel load_model(const std::string& checkpoint_path);

}  // namespace cirn

#endif
