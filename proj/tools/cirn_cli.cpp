// Command-line front end; all model work goes through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cirn/cirn.h"

namespace {

// Loads the config file (if any) and applies dotted-key overrides.
int build_config(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& seed, const std::string& out_dir, std::string& result) {
  nlohmann::json cfg = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      return 2;
    }
    cfg = nlohmann::json::parse(in, nullptr, false);
    if (cfg.is_discarded()) {
      std::cerr << "error: config file is not valid JSON: " << config_path << "\n";
      return 2;
    }
  }
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got: " << kv << "\n";
      return 2;
    }
    std::string key = kv.substr(0, eq);
    nlohmann::json value = nlohmann::json::parse(kv.substr(eq + 1), nullptr, false);
    if (value.is_discarded()) value = kv.substr(eq + 1);
    nlohmann::json* node = &cfg;
    std::size_t pos = 0;
    while (true) {
      auto dot = key.find('.', pos);
      std::string part =
          key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      pos = dot + 1;
    }
  }
  if (!seed.empty()) cfg["seed"] = std::stoull(seed);
  if (!out_dir.empty()) cfg["out_dir"] = out_dir;
  result = cfg.dump();
  return 0;
}

int report_status(cirn_status status, char* report) {
  if (report) {
    std::cout << report << "\n";
    cirn_free(report);
  }
  if (status != CIRN_OK) std::cerr << "error: " << cirn_last_error() << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIRN: cascaded interactive reasoning for natural language inference"};
  app.require_subcommand(1);

  std::string config_path, seed, out_dir;
  std::vector<std::string> overrides;
  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run-configuration file");
    cmd->add_option("--set", overrides, "dotted-key override, e.g. trainer.lr=0.3")
        ->take_all();
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--out", out_dir, "output directory");
  };

  auto* train = app.add_subcommand("train", "train a model, write checkpoints and metrics");
  add_config_opts(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a JSON-lines dataset");
  std::string ckpt_path, data_path;
  eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("dataset", data_path, "JSON-lines dataset")->required();

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference checks for all operations");
  bool f64 = true;
  gradcheck->add_flag("--f64", f64, "use 64-bit elements (default, required)");
  add_config_opts(gradcheck);

  auto* ablate = app.add_subcommand("ablate", "train the full model and each ablation");
  add_config_opts(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  char* report = nullptr;
  if (train->parsed() || gradcheck->parsed() || ablate->parsed()) {
    std::string cfg;
    int rc = build_config(config_path, overrides, seed, out_dir, cfg);
    if (rc != 0) return rc;
    cirn_status status;
    if (train->parsed())
      status = cirn_run_train(cfg.c_str(), &report);
    else if (gradcheck->parsed())
      status = cirn_run_gradcheck(cfg.c_str(), &report);
    else
      status = cirn_run_ablate(cfg.c_str(), &report);
    return report_status(status, report);
  }
  return report_status(cirn_run_eval(ckpt_path.c_str(), data_path.c_str(), &report), report);
}
