#ifndef BEAMSENSE_HARNESS_HPP
#define BEAMSENSE_HARNESS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beamsense/config.hpp"
#include "beamsense/dqn.hpp"
#include "beamsense/env.hpp"
#include "beamsense/policies.hpp"
#include "beamsense/predictor.hpp"

namespace beamsense::harness {

struct ScenarioSection {
  env::TrajectoryConfig trajectory;  // trajectory.seed == 0 derives from the run seed
  env::CodebookConfig codebook;
  env::ChannelParams channel;
  std::string dataset_csv;  // when set, replaces the synthetic generator

  void validate() const;
};

struct ExperimentConfig {
  ScenarioSection scenario;
  predictor::PredictorConfig predictor;
  dqn::DqnConfig dqn;
  std::vector<double> budgets{0.3};
  std::vector<double> v_values;                 // empty: paired by default_v_for_budget
  std::vector<policies::PolicyKind> policies{policies::PolicyKind::dqn};
  std::vector<int> age_limits;                  // empty: {predictor.age_limit}
  std::vector<std::uint64_t> seeds{1};
  long long horizon = 20000;
  std::string output_dir = "beamsense_out";
  int workers = 1;
  bool save_trace = false;

  static ExperimentConfig from_config(const config::ConfigMap& cfg);
  void validate() const;

  /// Budget/V pairing after defaults are applied.
  std::vector<double> paired_v_values() const;
};

/// Known config keys per section; used to reject typos up front.
const std::map<std::string, std::vector<std::string>>& known_config_keys();

/// Fig.-5-style pairing: small budgets get small V.
double default_v_for_budget(double alpha_max);

struct DatasetSplits {
  std::span<const env::ScenarioSample> train;
  std::span<const env::ScenarioSample> validation;
  std::span<const env::ScenarioSample> test;
};

/// Contiguous 70/10/20 split in slot order.
DatasetSplits split_dataset(std::span<const env::ScenarioSample> samples);

/// Builds (or loads) the scenario for one run seed.
std::vector<env::ScenarioSample> build_scenario(const ExperimentConfig& config,
                                                std::uint64_t run_seed);

/// Trains the age-augmented predictor on the training split.
predictor::TrainedPredictor train_predictor_stage(const ExperimentConfig& config,
                                                  std::span<const env::ScenarioSample> samples,
                                                  int age_limit, std::uint64_t run_seed);

struct RunMetrics {
  double sensing_rate = 0;
  double mean_queue = 0;
  double top1 = 0;
  double top3 = 0;
  double mean_loss = 0;
  double wall_time_seconds = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct Algorithm1Result {
  std::string predictor_checkpoint;
  std::string qnet_checkpoint;
  std::string metrics_csv;
  RunMetrics metrics;
  std::vector<StageTiming> timings;
};

/// Runs the whole pipeline for the first (budget, V) pair with the dqn
/// policy: scenario -> split -> augment -> train predictor -> train DQN ->
/// inference -> artifacts. Deterministic per (config, seed); on failure the
/// partially written outputs are removed and the stage name is reported.
Algorithm1Result run_algorithm1(const ExperimentConfig& config, std::uint64_t seed,
                                const std::string& out_dir);

struct ArmSpec {
  double budget = 0.3;
  double v_param = 10.0;
  policies::PolicyKind policy = policies::PolicyKind::dqn;
  int age_limit = 0;
  std::uint64_t seed = 1;

  std::string name() const;
};

struct ArmResult {
  ArmSpec spec;
  bool ok = false;
  std::string error;
  RunMetrics metrics;
};

struct SweepResult {
  std::vector<ArmResult> arms;
  std::string runs_csv;
  std::string summary_csv;
};

/// Cross product of (budget,V) x policy x age_limit x seed. Scenarios and
/// predictors are shared across arms of a seed; arms run in parallel up to
/// config.workers with isolated RNG streams, so results do not depend on
/// the worker count. Per-arm failures are recorded and the sweep continues.
SweepResult sweep(const ExperimentConfig& config, const std::string& out_dir);

/// Renders plot-ready CSVs (x, series, mean, std) and SVG line charts from
/// a sweep/evaluation output directory. Throws when there is nothing to plot.
std::vector<std::string> emit_plots(const std::string& results_dir,
                                    const std::string& out_dir);

// --- serialization helpers shared by the CLI and tests --------------------

std::string metrics_csv_text(const ArmSpec& spec, long long horizon,
                             const RunMetrics& metrics);
std::string trace_csv_text(std::span<const dqn::SlotRecord> trace);
void write_trained_predictor(const predictor::TrainedPredictor& trained,
                             const std::string& checkpoint_path,
                             const std::string& meta_path);
predictor::TrainedPredictor load_trained_predictor(const std::string& checkpoint_path,
                                                   const std::string& meta_path);

RunMetrics to_run_metrics(const dqn::InferenceResult& result);

}  // namespace beamsense::harness

#endif
