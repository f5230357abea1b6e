// Experiment configuration: a flat JSON object whose unknown keys are errors.
#pragma once

#include "hipe/acquisition.hpp"
#include "hipe/batch_optimizer.hpp"
#include "hipe/bo_utility.hpp"
#include "hipe/hyper_inference.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hipe {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { kActiveLearning, kTwoShot };

RunMode parse_run_mode(const std::string& name);
std::string to_string(RunMode mode);

struct ExperimentConfig {
  std::string benchmark = "hartmann6_6d";
  /// Design method or acquisition; in two-shot mode it selects the first batch.
  std::string algo = "hipe";
  RunMode mode = RunMode::kActiveLearning;
  int q = 16;
  int batches = 4;
  std::vector<std::uint64_t> seeds = {0};
  /// "paper" (T=1024, N=128) or "fast" (T=256, N=64).
  std::string profile = "paper";
  int num_test_points = 1024;
  int num_draws = 128;
  McmcSchedule mcmc;
  double lengthscale_base = 0.75;
  KernelFamily kernel = KernelFamily::kMatern52;
  OptimizerConfig optimizer;
  std::optional<double> beta;
  BaldConditional bald_conditional = BaldConditional::kLabelEntropy;
  bool center_injection = true;
  NeiOptions nei;
  int nei_perturbations = 384;
  double nei_perturb_sd = 0.05;
  int eval_test_size = 2048;
  bool noisy_nll = false;
  std::vector<std::string> metrics = {"rmse", "nll", "inferred_value", "in_sample_best"};
  std::string out_dir = "results";

  /// Throws ConfigError.
  void validate() const;
  bool is_design_algo() const;
};

/// Applies profile defaults, then every other key. Throws ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// "3", "0..19" (inclusive) or "1,4,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Sets T and N from a profile name.
void apply_profile(ExperimentConfig& cfg, const std::string& profile);

}  // namespace hipe
