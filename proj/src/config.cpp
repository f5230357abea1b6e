#include "hipe/config.hpp"

#include "hipe/benchmarks.hpp"
#include "hipe/design.hpp"
#include "hipe/metrics.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hipe {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::uint64_t> seeds_from_json(const json& v) {
  if (v.is_number_unsigned()) return {v.get<std::uint64_t>()};
  if (v.is_string()) return parse_seed_list(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::uint64_t> out;
    for (const json& s : v) {
      if (!s.is_number_unsigned()) throw ConfigError("config key 'seeds' must hold non-negative integers");
      out.push_back(s.get<std::uint64_t>());
    }
    return out;
  }
  throw ConfigError("config key 'seeds' must be an integer, a list or a range string");
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "active_learning") return RunMode::kActiveLearning;
  if (name == "two_shot") return RunMode::kTwoShot;
  throw ConfigError("unknown mode '" + name + "' (expected active_learning or two_shot)");
}

std::string to_string(RunMode mode) { return mode == RunMode::kTwoShot ? "two_shot" : "active_learning"; }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  auto parse_one = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (s.empty() || s.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + s + "' in '" + text + "'");
    }
    if (used != s.size()) throw ConfigError("bad seed '" + s + "' in '" + text + "'");
    return v;
  };
  std::vector<std::uint64_t> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = parse_one(text.substr(0, dots));
    const std::uint64_t hi = parse_one(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_one(item));
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

void apply_profile(ExperimentConfig& cfg, const std::string& profile) {
  if (profile == "paper") {
    cfg.num_test_points = 1024;
    cfg.num_draws = 128;
  } else if (profile == "fast") {
    cfg.num_test_points = 256;
    cfg.num_draws = 64;
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected paper or fast)");
  }
  cfg.profile = profile;
}

bool ExperimentConfig::is_design_algo() const { return is_design_method(algo); }

void ExperimentConfig::validate() const {
  if (!is_design_method(algo)) {
    try {
      parse_acq_kind(algo);
    } catch (const std::exception&) {
      throw ConfigError("unknown algo '" + algo + "'");
    }
  }
  try {
    find_benchmark(benchmark);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (q < 1) throw ConfigError("q must be >= 1");
  if (batches < 1) throw ConfigError("batches must be >= 1");
  if (mode == RunMode::kTwoShot && batches < 2) throw ConfigError("two_shot mode needs batches >= 2");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (num_test_points < 1 || num_draws < 1 || eval_test_size < 1) throw ConfigError("sample counts must be positive");
  try {
    mcmc.validate();
    optimizer.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (num_draws < mcmc.num_samples()) {
    throw ConfigError("num_draws must be at least the ensemble size draws/thin");
  }
  if (beta && !(*beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (!(nei.tau > 0.0) || nei.num_samples < 1) throw ConfigError("nei_tau and nei_samples must be positive");
  if (nei_perturbations < 0 || !(nei_perturb_sd >= 0.0)) throw ConfigError("bad incumbent perturbation settings");
  if (!std::isfinite(lengthscale_base)) throw ConfigError("lengthscale_base must be finite");
  for (const std::string& m : metrics) {
    try {
      metric_higher_is_better(m);
    } catch (const std::exception&) {
      throw ConfigError("unknown metric '" + m + "'");
    }
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "benchmark",      "algo",          "mode",           "q",           "batches",        "seeds",
      "profile",        "num_test_points", "num_draws",    "mcmc_burn_in", "mcmc_draws",    "mcmc_thin",
      "lengthscale_base", "kernel",      "restarts",       "raw_samples", "max_iters",      "grad_tol",
      "beta",           "bald_conditional", "center_injection", "nei_tau", "nei_samples",  "nei_perturbations",
      "nei_perturb_sd", "eval_test_size", "noisy_nll",     "metrics",     "out_dir"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig cfg;
  if (doc.contains("profile")) apply_profile(cfg, get_as<std::string>(doc, "profile"));
  if (doc.contains("benchmark")) cfg.benchmark = get_as<std::string>(doc, "benchmark");
  if (doc.contains("algo")) cfg.algo = get_as<std::string>(doc, "algo");
  if (doc.contains("mode")) cfg.mode = parse_run_mode(get_as<std::string>(doc, "mode"));
  if (doc.contains("q")) cfg.q = get_as<int>(doc, "q");
  if (doc.contains("batches")) cfg.batches = get_as<int>(doc, "batches");
  if (doc.contains("seeds")) cfg.seeds = seeds_from_json(doc.at("seeds"));
  if (doc.contains("num_test_points")) cfg.num_test_points = get_as<int>(doc, "num_test_points");
  if (doc.contains("num_draws")) cfg.num_draws = get_as<int>(doc, "num_draws");
  if (doc.contains("mcmc_burn_in")) cfg.mcmc.burn_in = get_as<int>(doc, "mcmc_burn_in");
  if (doc.contains("mcmc_draws")) cfg.mcmc.draws = get_as<int>(doc, "mcmc_draws");
  if (doc.contains("mcmc_thin")) cfg.mcmc.thin = get_as<int>(doc, "mcmc_thin");
  if (doc.contains("lengthscale_base")) cfg.lengthscale_base = get_as<double>(doc, "lengthscale_base");
  if (doc.contains("kernel")) {
    try {
      cfg.kernel = parse_kernel_family(get_as<std::string>(doc, "kernel"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (doc.contains("restarts")) cfg.optimizer.restarts = get_as<int>(doc, "restarts");
  if (doc.contains("raw_samples")) cfg.optimizer.raw_samples = get_as<int>(doc, "raw_samples");
  if (doc.contains("max_iters")) cfg.optimizer.max_iters = get_as<int>(doc, "max_iters");
  if (doc.contains("grad_tol")) cfg.optimizer.grad_tol = get_as<double>(doc, "grad_tol");
  if (doc.contains("beta")) {
    const json& b = doc.at("beta");
    if (b.is_string() && b.get<std::string>() == "auto") {
      cfg.beta.reset();
    } else if (b.is_number()) {
      cfg.beta = b.get<double>();
    } else {
      throw ConfigError("config key 'beta' must be a number or \"auto\"");
    }
  }
  if (doc.contains("bald_conditional")) {
    const auto v = get_as<std::string>(doc, "bald_conditional");
    if (v == "label_entropy") {
      cfg.bald_conditional = BaldConditional::kLabelEntropy;
    } else if (v == "closed_form") {
      cfg.bald_conditional = BaldConditional::kClosedForm;
    } else if (v == "monte_carlo") {
      cfg.bald_conditional = BaldConditional::kMonteCarlo;
    } else {
      throw ConfigError("bald_conditional must be label_entropy, closed_form or monte_carlo");
    }
  }
  if (doc.contains("center_injection")) cfg.center_injection = get_as<bool>(doc, "center_injection");
  if (doc.contains("nei_tau")) cfg.nei.tau = get_as<double>(doc, "nei_tau");
  if (doc.contains("nei_samples")) cfg.nei.num_samples = get_as<int>(doc, "nei_samples");
  if (doc.contains("nei_perturbations")) cfg.nei_perturbations = get_as<int>(doc, "nei_perturbations");
  if (doc.contains("nei_perturb_sd")) cfg.nei_perturb_sd = get_as<double>(doc, "nei_perturb_sd");
  if (doc.contains("eval_test_size")) cfg.eval_test_size = get_as<int>(doc, "eval_test_size");
  if (doc.contains("noisy_nll")) cfg.noisy_nll = get_as<bool>(doc, "noisy_nll");
  if (doc.contains("metrics")) cfg.metrics = get_as<std::vector<std::string>>(doc, "metrics");
  if (doc.contains("out_dir")) cfg.out_dir = get_as<std::string>(doc, "out_dir");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["benchmark"] = cfg.benchmark;
  doc["algo"] = cfg.algo;
  doc["mode"] = to_string(cfg.mode);
  doc["q"] = cfg.q;
  doc["batches"] = cfg.batches;
  doc["seeds"] = cfg.seeds;
  doc["profile"] = cfg.profile;
  doc["num_test_points"] = cfg.num_test_points;
  doc["num_draws"] = cfg.num_draws;
  doc["mcmc_burn_in"] = cfg.mcmc.burn_in;
  doc["mcmc_draws"] = cfg.mcmc.draws;
  doc["mcmc_thin"] = cfg.mcmc.thin;
  doc["lengthscale_base"] = cfg.lengthscale_base;
  doc["kernel"] = to_string(cfg.kernel);
  doc["restarts"] = cfg.optimizer.restarts;
  doc["raw_samples"] = cfg.optimizer.raw_samples;
  doc["max_iters"] = cfg.optimizer.max_iters;
  doc["grad_tol"] = cfg.optimizer.grad_tol;
  if (cfg.beta) {
    doc["beta"] = *cfg.beta;
  } else {
    doc["beta"] = "auto";
  }
  switch (cfg.bald_conditional) {
    case BaldConditional::kLabelEntropy: doc["bald_conditional"] = "label_entropy"; break;
    case BaldConditional::kClosedForm: doc["bald_conditional"] = "closed_form"; break;
    case BaldConditional::kMonteCarlo: doc["bald_conditional"] = "monte_carlo"; break;
  }
  doc["center_injection"] = cfg.center_injection;
  doc["nei_tau"] = cfg.nei.tau;
  doc["nei_samples"] = cfg.nei.num_samples;
  doc["nei_perturbations"] = cfg.nei_perturbations;
  doc["nei_perturb_sd"] = cfg.nei_perturb_sd;
  doc["eval_test_size"] = cfg.eval_test_size;
  doc["noisy_nll"] = cfg.noisy_nll;
  doc["metrics"] = cfg.metrics;
  doc["out_dir"] = cfg.out_dir;
  return doc;
}

}  // namespace hipe
