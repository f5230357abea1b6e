#include "hipe/experiment.hpp"

#include "hipe/bo_utility.hpp"
#include "hipe/design.hpp"
#include "hipe/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

namespace hipe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::array<double, 3> quantiles(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.05), at(0.5), at(0.95)};
}

AcqOptions acq_options(const ExperimentConfig& cfg) {
  AcqOptions opts;
  opts.beta = cfg.beta;
  opts.bald_conditional = cfg.bald_conditional;
  return opts;
}

OptimizerConfig optimizer_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  OptimizerConfig oc = cfg.optimizer;
  oc.seed = seed;
  return oc;
}

struct Selection {
  Matrix batch;
  double value = kNaN;
  double beta = kNaN;
  std::string selector;
};

Selection select_initial(const ExperimentConfig& cfg, const HyperEnsemble& ensemble, const Dataset& standardized,
                         Index dim, std::uint64_t seed, int b) {
  Selection sel;
  sel.selector = cfg.algo;
  if (cfg.is_design_algo()) {
    const DesignMethod method = parse_design_method(cfg.algo);
    DesignRequest req;
    req.q = cfg.q;
    req.dim = static_cast<int>(dim);
    req.include_center = cfg.center_injection && b == 0;
    if (method == DesignMethod::kSobol) {
      // One scrambled sequence per seed, continued across batches.
      req.seed = stream_seed(seed, Stream::kDesign);
      req.sequence_offset = static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(cfg.q);
    } else {
      req.seed = stream_seed(seed, Stream::kDesign, b);
    }
    sel.batch = make_design(method, req);
    return sel;
  }
  const AcqKind kind = parse_acq_kind(cfg.algo);
  auto ctx = std::make_shared<const AcqContext>(AcqContext::with_random_draws(
      ensemble, standardized, cfg.num_test_points, cfg.num_draws, cfg.q, stream_seed(seed, Stream::kAcquisition, b),
      acq_options(cfg)));
  const OptimizationResult res = optimize_batch(make_acquisition(kind, ctx), cfg.q, static_cast<int>(dim),
                                                optimizer_for(cfg, stream_seed(seed, Stream::kOptimizer, b)));
  sel.batch = res.batch;
  sel.value = res.value;
  sel.beta = ctx->beta();
  return sel;
}

Selection select_bo(const ExperimentConfig& cfg, const HyperEnsemble& ensemble, const Dataset& standardized,
                    Index dim, std::uint64_t seed, int b) {
  auto ctx = std::make_shared<const NeiContext>(ensemble, standardized, cfg.q, stream_seed(seed, Stream::kNei, b),
                                                cfg.nei);
  const OptimizerConfig oc = optimizer_for(cfg, stream_seed(seed, Stream::kOptimizer, b));
  std::vector<Matrix> candidates = raw_candidates(cfg.q, static_cast<int>(dim), oc.raw_samples, oc.seed);
  std::vector<Matrix> around = incumbent_perturbations(ctx->incumbent(), cfg.q, cfg.nei_perturbations,
                                                       cfg.nei_perturb_sd, stream_seed(seed, Stream::kPerturb, b));
  candidates.insert(candidates.end(), around.begin(), around.end());
  const OptimizationResult res = optimize_from_candidates(make_nei_objective(ctx), candidates, oc);
  Selection sel;
  sel.batch = res.batch;
  sel.value = res.value;
  sel.selector = "nei";
  return sel;
}

std::map<std::string, double> compute_metrics(const ExperimentConfig& cfg, const Benchmark& bench,
                                              const HyperEnsemble& ensemble, const Dataset& standardized,
                                              const Standardizer& standardizer, const Matrix& test_x,
                                              const Vector& test_f, const Dataset& raw, std::uint64_t seed, int b) {
  std::map<std::string, double> out;
  auto wanted = [&](const char* name) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), name) != cfg.metrics.end();
  };
  if (wanted("rmse") || wanted("nll")) {
    const ModelMetrics mm = evaluate_model(ensemble, standardized, standardizer, test_x, test_f, cfg.noisy_nll);
    if (wanted("rmse")) out["rmse"] = mm.rmse;
    if (wanted("nll")) out["nll"] = mm.nll;
  }
  if (wanted("inferred_value")) {
    const Vector x = inferred_maximizer(ensemble, standardized, optimizer_for(cfg, stream_seed(seed, Stream::kInference, b)));
    out["inferred_value"] = true_value(bench, x);
  }
  if (wanted("in_sample_best")) out["in_sample_best"] = true_values(bench, raw.points).maxCoeff();
  return out;
}

// Fills record as batches complete so a failure leaves the finished ones.
void run_impl(const ExperimentConfig& cfg, std::uint64_t seed, bool bo_stage, RunRecord& record) {
  record.config = cfg;
  record.seed = seed;
  record.failed_batch = 0;
  cfg.validate();
  const Benchmark bench = find_benchmark(cfg.benchmark);
  const Index dim = bench.total_dim;

  Rng noise(stream_seed(seed, Stream::kNoise));
  const Matrix test_x = evaluation_points(cfg.benchmark, seed, cfg.eval_test_size, dim);
  const Vector test_f = true_values(bench, test_x);

  Dataset data = Dataset::empty(dim);
  Dataset standardized = data;
  Standardizer standardizer;
  Stopwatch first_fit;
  HyperEnsemble ensemble = fit_ensemble(cfg, standardized, stream_seed(seed, Stream::kFit, 0));
  double fit_seconds = first_fit.seconds();

  for (int b = 0; b < cfg.batches; ++b) {
    record.failed_batch = b;
    BatchRecord br;
    br.batch_index = b;
    br.ensemble = summarize(ensemble);
    const bool use_bo = bo_stage && b >= 1;

    Stopwatch select_clock;
    const Selection sel = use_bo ? select_bo(cfg, ensemble, standardized, dim, seed, b)
                                 : select_initial(cfg, ensemble, standardized, dim, seed, b);
    const double select_seconds = select_clock.seconds();
    if (use_bo) {
      br.timings.bo_model_fit = fit_seconds;
      br.timings.bo_utility_optimization = select_seconds;
    } else {
      br.timings.model_fit_initial = fit_seconds;
      br.timings.acquisition_optimization = select_seconds;
    }
    br.selector = sel.selector;
    br.design = sel.batch;
    br.selection_value = sel.value;
    br.beta = sel.beta;
    br.outcomes = evaluate_batch(bench, sel.batch, noise);
    data.append(sel.batch, br.outcomes);

    standardizer = Standardizer::fit(data.outcomes);
    standardized = standardizer.apply(data);
    Stopwatch fit_clock;
    ensemble = fit_ensemble(cfg, standardized, stream_seed(seed, Stream::kFit, b + 1));
    fit_seconds = fit_clock.seconds();
    if (b + 1 == cfg.batches) br.timings.metrics_model_fit = fit_seconds;

    br.metrics = compute_metrics(cfg, bench, ensemble, standardized, standardizer, test_x, test_f, data, seed, b);
    record.batches.push_back(std::move(br));
  }
  record.failed_batch = -1;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, Stream stream, int batch) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream) + static_cast<std::uint64_t>(batch));
}

EnsembleSummary summarize(const HyperEnsemble& ensemble) {
  EnsembleSummary s;
  s.source = ensemble.source == EnsembleSource::kPrior ? "prior" : "posterior";
  if (ensemble.samples.empty()) return s;
  for (Index d = 0; d < ensemble.dim(); ++d) {
    std::vector<double> v;
    for (const HyperSample& h : ensemble.samples) v.push_back(h.lengthscales(d));
    s.lengthscales.push_back(quantiles(v));
  }
  std::vector<double> noise;
  std::vector<double> mean;
  for (const HyperSample& h : ensemble.samples) {
    noise.push_back(h.noise_var);
    mean.push_back(h.mean_const);
  }
  s.noise_var = quantiles(noise);
  s.mean_const = quantiles(mean);
  return s;
}

Matrix evaluation_points(const std::string& benchmark, std::uint64_t seed, int count, Index dim) {
  Rng rng(derive_seed(stream_seed(seed, Stream::kTestSet), fnv1a(benchmark)));
  return uniform_matrix(count, dim, rng);
}

HyperEnsemble fit_ensemble(const ExperimentConfig& cfg, const Dataset& standardized, std::uint64_t seed) {
  const HyperPriorSpec spec = HyperPriorSpec::defaults(standardized.dim(), cfg.lengthscale_base);
  if (standardized.is_empty()) return sample_prior(spec, cfg.mcmc.num_samples(), seed, cfg.kernel);
  return sample_ensemble(standardized, spec, cfg.mcmc, seed, cfg.kernel);
}

RunRecord run_active_learning(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord record;
  run_impl(cfg, seed, false, record);
  return record;
}

RunRecord run_two_shot(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord record;
  run_impl(cfg, seed, true, record);
  return record;
}

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord record;
  try {
    run_impl(cfg, seed, cfg.mode == RunMode::kTwoShot, record);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    record.failed = true;
    record.error = e.what();
  }
  return record;
}

std::vector<MetricRow> metric_rows(const RunRecord& record) {
  std::vector<MetricRow> rows;
  const std::string& algo = record.config.algo;
  const std::string& bench = record.config.benchmark;
  for (const BatchRecord& br : record.batches) {
    for (const std::string& m : record.config.metrics) {
      const auto it = br.metrics.find(m);
      if (it != br.metrics.end()) rows.push_back({record.seed, algo, bench, br.batch_index, m, it->second});
    }
  }
  if (record.failed) rows.push_back({record.seed, algo, bench, record.failed_batch, "failed", 1.0});
  return rows;
}

double score_acquisition(const ExperimentConfig& cfg, AcqKind kind, const Dataset& data, const Matrix& batch,
                         std::uint64_t seed) {
  data.validate();
  const Standardizer st = Standardizer::fit(data.outcomes);
  const Dataset standardized = st.apply(data);
  const HyperEnsemble ensemble = fit_ensemble(cfg, standardized, stream_seed(seed, Stream::kFit, 0));
  const AcqContext ctx = AcqContext::with_random_draws(ensemble, standardized, cfg.num_test_points, cfg.num_draws,
                                                       batch.rows(), stream_seed(seed, Stream::kAcquisition, 0),
                                                       acq_options(cfg));
  return evaluate_acquisition(kind, ctx, batch);
}

}  // namespace hipe
