#include "beamsense/harness.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "beamsense/util.hpp"

namespace fs = std::filesystem;

namespace beamsense::harness {

namespace {

using json = nlohmann::json;

double stage_seconds(const std::chrono::steady_clock::time_point& from) {
  return std::chrono::duration_cast<std::chrono::duration<double>>(
             std::chrono::steady_clock::now() - from)
      .count();
}

std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace

void ScenarioSection::validate() const {
  trajectory.validate();
  codebook.validate();
  channel.validate();
}

const std::map<std::string, std::vector<std::string>>& known_config_keys() {
  static const std::map<std::string, std::vector<std::string>> allowed = {
      {"",
       {"budgets", "v_values", "policies", "age_limits", "seeds", "horizon",
        "output_dir", "workers", "save_trace"}},
      {"scenario",
       {"num_slots", "speed_min", "speed_max", "position_noise_std", "embedding_dim",
        "embedding_noise_std", "seed", "num_antennas", "num_beams", "tx_power",
        "noise_variance", "dataset_csv"}},
      {"predictor",
       {"age_limit", "epochs", "learning_rate", "batch_size", "hidden",
        "include_age_zero"}},
      {"dqn",
       {"gamma", "learning_rate", "batch_size", "epochs", "iterations_per_epoch",
        "epsilon_start", "epsilon_end", "epsilon_decay_fraction", "target_sync_period",
        "hidden", "replay_capacity", "age_cap", "queue_cap"}},
  };
  return allowed;
}

double default_v_for_budget(double alpha_max) {
  if (alpha_max < 0.2) return 1.0;
  if (alpha_max < 0.6) return 10.0;
  return 100.0;
}

ExperimentConfig ExperimentConfig::from_config(const config::ConfigMap& cfg) {
  cfg.check_known_keys(known_config_keys());
  ExperimentConfig out;

  out.scenario.trajectory.num_slots =
      static_cast<int>(cfg.get_int("scenario", "num_slots", 2000));
  out.scenario.trajectory.speed_min = cfg.get_double("scenario", "speed_min", 0.35);
  out.scenario.trajectory.speed_max = cfg.get_double("scenario", "speed_max", 0.63);
  out.scenario.trajectory.position_noise_std =
      cfg.get_double("scenario", "position_noise_std", 1.0);
  out.scenario.trajectory.embedding_dim =
      static_cast<int>(cfg.get_int("scenario", "embedding_dim", 16));
  out.scenario.trajectory.embedding_noise_std =
      cfg.get_double("scenario", "embedding_noise_std", 0.05);
  out.scenario.trajectory.seed = cfg.get_uint64("scenario", "seed", 0);
  out.scenario.codebook.num_antennas =
      static_cast<int>(cfg.get_int("scenario", "num_antennas", 8));
  out.scenario.codebook.num_beams =
      static_cast<int>(cfg.get_int("scenario", "num_beams", 8));
  out.scenario.channel.tx_power = cfg.get_double("scenario", "tx_power", 1.0);
  out.scenario.channel.noise_variance =
      cfg.get_double("scenario", "noise_variance", 1.0);
  out.scenario.dataset_csv = cfg.get_string("scenario", "dataset_csv", "");

  out.predictor.age_limit = static_cast<int>(cfg.get_int("predictor", "age_limit", 0));
  out.predictor.epochs = static_cast<int>(cfg.get_int("predictor", "epochs", 15));
  out.predictor.learning_rate = cfg.get_double("predictor", "learning_rate", 1e-3);
  out.predictor.batch_size = static_cast<int>(cfg.get_int("predictor", "batch_size", 32));
  {
    std::vector<long long> hidden = cfg.get_int_list("predictor", "hidden", {256, 256});
    out.predictor.hidden_layers.assign(hidden.begin(), hidden.end());
  }
  out.predictor.include_age_zero = cfg.get_bool("predictor", "include_age_zero", true);

  out.dqn.gamma = cfg.get_double("dqn", "gamma", 0.99);
  out.dqn.learning_rate = cfg.get_double("dqn", "learning_rate", 1e-3);
  out.dqn.batch_size = static_cast<int>(cfg.get_int("dqn", "batch_size", 64));
  out.dqn.epochs = static_cast<int>(cfg.get_int("dqn", "epochs", 100));
  out.dqn.iterations_per_epoch =
      static_cast<int>(cfg.get_int("dqn", "iterations_per_epoch", 300));
  out.dqn.epsilon_start = cfg.get_double("dqn", "epsilon_start", 1.0);
  out.dqn.epsilon_end = cfg.get_double("dqn", "epsilon_end", 0.05);
  out.dqn.epsilon_decay_fraction = cfg.get_double("dqn", "epsilon_decay_fraction", 0.5);
  out.dqn.target_sync_period =
      static_cast<int>(cfg.get_int("dqn", "target_sync_period", 200));
  {
    std::vector<long long> hidden = cfg.get_int_list("dqn", "hidden", {64, 64});
    out.dqn.hidden_layers.assign(hidden.begin(), hidden.end());
  }
  out.dqn.replay_capacity = static_cast<int>(cfg.get_int("dqn", "replay_capacity", 50000));
  out.dqn.age_cap = static_cast<int>(cfg.get_int("dqn", "age_cap", 0));
  out.dqn.queue_cap = cfg.get_double("dqn", "queue_cap", 50.0);

  out.budgets = cfg.get_double_list("", "budgets", {0.3});
  out.v_values = cfg.get_double_list("", "v_values", {});
  {
    std::vector<std::string> names = cfg.get_string_list("", "policies", {"dqn"});
    out.policies.clear();
    for (const std::string& name : names) {
      out.policies.push_back(policies::parse_policy_kind(name));
    }
  }
  {
    std::vector<long long> ages = cfg.get_int_list("", "age_limits", {});
    out.age_limits.assign(ages.begin(), ages.end());
  }
  out.seeds = cfg.get_uint64_list("", "seeds", {1});
  out.horizon = cfg.get_int("", "horizon", 20000);
  out.output_dir = cfg.get_string("", "output_dir", "beamsense_out");
  out.workers = static_cast<int>(cfg.get_int("", "workers", 1));
  out.save_trace = cfg.get_bool("", "save_trace", false);

  out.validate();
  return out;
}

void ExperimentConfig::validate() const {
  scenario.validate();
  predictor.validate();
  dqn.validate();
  if (budgets.empty()) {
    throw std::invalid_argument("budgets must not be empty");
  }
  for (double b : budgets) {
    if (!(b > 0.0 && b <= 1.0)) {
      throw std::invalid_argument("budgets entries must satisfy 0 < alpha_max <= 1");
    }
  }
  if (!v_values.empty() && v_values.size() != budgets.size()) {
    throw std::invalid_argument("v_values must align with budgets (same length)");
  }
  for (double v : v_values) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument("v_values entries must satisfy v_param >= 0");
    }
  }
  for (int n : age_limits) {
    if (n < 0) throw std::invalid_argument("age_limits entries must be >= 0");
  }
  if (policies.empty()) throw std::invalid_argument("policies must not be empty");
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::vector<double> ExperimentConfig::paired_v_values() const {
  if (!v_values.empty()) return v_values;
  std::vector<double> out;
  out.reserve(budgets.size());
  for (double b : budgets) out.push_back(default_v_for_budget(b));
  return out;
}

DatasetSplits split_dataset(std::span<const env::ScenarioSample> samples) {
  const std::size_t n = samples.size();
  const std::size_t train = static_cast<std::size_t>(0.7 * static_cast<double>(n));
  const std::size_t val = static_cast<std::size_t>(0.1 * static_cast<double>(n));
  if (train == 0 || val == 0 || train + val >= n) {
    throw std::invalid_argument(
        "dataset too small for a 70/10/20 split (need at least 10 slots)");
  }
  return {samples.subspan(0, train), samples.subspan(train, val),
          samples.subspan(train + val)};
}

std::vector<env::ScenarioSample> build_scenario(const ExperimentConfig& config,
                                                std::uint64_t run_seed) {
  if (!config.scenario.dataset_csv.empty()) {
    env::CsvSchema schema{config.scenario.trajectory.embedding_dim,
                          config.scenario.codebook.num_beams};
    return env::load_csv_dataset(config.scenario.dataset_csv, schema);
  }
  env::TrajectoryConfig traj = config.scenario.trajectory;
  if (traj.seed == 0) {
    traj.seed = derive_seed(run_seed, "scenario");
  }
  return env::generate_trajectory(traj, config.scenario.codebook, config.scenario.channel);
}

predictor::TrainedPredictor train_predictor_stage(const ExperimentConfig& config,
                                                  std::span<const env::ScenarioSample> samples,
                                                  int age_limit, std::uint64_t run_seed) {
  DatasetSplits splits = split_dataset(samples);
  predictor::PredictorConfig pcfg = config.predictor;
  pcfg.age_limit = age_limit;
  const std::vector<predictor::AugmentedExample> augmented =
      predictor::augment_dataset(splits.train, age_limit, pcfg.include_age_zero);
  return predictor::train_predictor(
      augmented, pcfg, config.scenario.codebook.num_beams,
      derive_seed(run_seed, "predictor-N" + std::to_string(age_limit)));
}

RunMetrics to_run_metrics(const dqn::InferenceResult& result) {
  RunMetrics m;
  m.sensing_rate = result.sensing_rate;
  m.mean_queue = result.mean_queue;
  m.top1 = result.top1;
  m.top3 = result.top3;
  m.mean_loss = result.mean_loss;
  m.wall_time_seconds = result.wall_time_seconds;
  return m;
}

std::string ArmSpec::name() const {
  std::ostringstream out;
  out << "b" << short_double(budget) << "_v" << short_double(v_param) << "_"
      << policies::to_string(policy) << "_N" << age_limit << "_seed" << seed;
  return out.str();
}

std::string metrics_csv_text(const ArmSpec& spec, long long horizon,
                             const RunMetrics& metrics) {
  std::ostringstream out;
  out << "budget,v,policy,age_limit,seed,horizon,sensing_rate,mean_queue,top1,top3,"
         "mean_loss\n";
  out << format_double(spec.budget) << ',' << format_double(spec.v_param) << ','
      << policies::to_string(spec.policy) << ',' << spec.age_limit << ',' << spec.seed
      << ',' << horizon << ',' << format_double(metrics.sensing_rate) << ','
      << format_double(metrics.mean_queue) << ',' << format_double(metrics.top1) << ','
      << format_double(metrics.top3) << ',' << format_double(metrics.mean_loss) << '\n';
  return out.str();
}

std::string trace_csv_text(std::span<const dqn::SlotRecord> trace) {
  std::ostringstream out;
  out << "slot,action,age,queue,loss,top1_hit,top3_hit,fresh_loss\n";
  for (const dqn::SlotRecord& r : trace) {
    out << r.slot << ',' << r.action << ',' << r.age << ',' << format_double(r.queue)
        << ',' << format_double(r.loss) << ',' << r.top1_hit << ',' << r.top3_hit << ',';
    if (std::isfinite(r.fresh_loss)) {
      out << format_double(r.fresh_loss);
    }
    out << '\n';
  }
  return out.str();
}

void write_trained_predictor(const predictor::TrainedPredictor& trained,
                             const std::string& checkpoint_path,
                             const std::string& meta_path) {
  nn::checkpoint_save(trained.model, checkpoint_path);
  json meta;
  meta["age_limit"] = trained.age_limit;
  meta["num_beams"] = trained.num_beams;
  meta["pos_min"] = {trained.stats.pos_min(0), trained.stats.pos_min(1)};
  meta["pos_max"] = {trained.stats.pos_max(0), trained.stats.pos_max(1)};
  write_file(meta_path, meta.dump(2) + "\n");
}

predictor::TrainedPredictor load_trained_predictor(const std::string& checkpoint_path,
                                                   const std::string& meta_path) {
  if (!fs::exists(checkpoint_path)) {
    throw std::runtime_error("missing artifact: predictor checkpoint " + checkpoint_path);
  }
  if (!fs::exists(meta_path)) {
    throw std::runtime_error("missing artifact: predictor metadata " + meta_path);
  }
  predictor::TrainedPredictor trained;
  trained.model = nn::checkpoint_load(checkpoint_path);
  const json meta = json::parse(read_file(meta_path));
  trained.age_limit = meta.at("age_limit").get<int>();
  trained.num_beams = meta.at("num_beams").get<int>();
  trained.stats.pos_min =
      Eigen::Vector2d(meta.at("pos_min")[0].get<double>(), meta.at("pos_min")[1].get<double>());
  trained.stats.pos_max =
      Eigen::Vector2d(meta.at("pos_max")[0].get<double>(), meta.at("pos_max")[1].get<double>());
  return trained;
}

namespace {

std::string predictor_log_csv(const predictor::TrainedPredictor& trained) {
  std::ostringstream out;
  out << "epoch,mean_loss,train_top1\n";
  for (const predictor::EpochLogEntry& e : trained.log) {
    out << e.epoch << ',' << format_double(e.mean_loss) << ','
        << format_double(e.train_top1) << '\n';
  }
  return out.str();
}

std::string dqn_log_csv(const dqn::TrainedSensingPolicy& trained) {
  std::ostringstream out;
  out << "episode,return,sensing_rate,mean_td_loss,epsilon\n";
  for (const dqn::EpisodeLogEntry& e : trained.log) {
    out << e.episode << ',' << format_double(e.episode_return) << ','
        << format_double(e.sensing_rate) << ',' << format_double(e.mean_td_loss) << ','
        << format_double(e.epsilon) << '\n';
  }
  return out.str();
}

std::string timings_csv(const std::vector<StageTiming>& timings) {
  std::ostringstream out;
  out << "stage,seconds\n";
  for (const StageTiming& t : timings) {
    out << t.stage << ',' << format_double(t.seconds) << '\n';
  }
  return out.str();
}

/// Tracks files written during a staged pipeline so failures can clean up.
class OutputTracker {
 public:
  void record(const std::string& path) { paths_.push_back(path); }
  void write(const std::string& path, const std::string& content) {
    write_file(path, content);
    record(path);
  }
  void remove_all() noexcept {
    for (const std::string& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<std::string> paths_;
};

std::uint64_t dqn_seed_for(const ArmSpec& spec) {
  return derive_seed(spec.seed, "dqn:" + short_double(spec.budget) + ":v" +
                                    short_double(spec.v_param) + ":N" +
                                    std::to_string(spec.age_limit));
}

struct ArmOutput {
  RunMetrics metrics;
  std::vector<dqn::SlotRecord> trace;
};

/// Runs one arm against shared scenario/predictor state and writes its
/// artifacts into `arm_dir` (created by the caller).
ArmOutput run_arm(const ExperimentConfig& config, const ArmSpec& spec,
                  std::span<const env::ScenarioSample> dataset,
                  const predictor::TrainedPredictor& frozen, const std::string& arm_dir,
                  std::vector<StageTiming>* timings) {
  DatasetSplits splits = split_dataset(dataset);
  aoi::BudgetConfig budget{spec.budget, spec.v_param};
  budget.validate();

  std::unique_ptr<policies::SensingPolicy> baseline;
  dqn::TrainedSensingPolicy trained_dqn;
  if (spec.policy == policies::PolicyKind::dqn) {
    dqn::DqnConfig dcfg = config.dqn;
    if (dcfg.age_cap == 0) dcfg.age_cap = dqn::default_age_cap(spec.age_limit);
    const auto t0 = std::chrono::steady_clock::now();
    trained_dqn = dqn::train_sensing_policy(frozen, splits.validation, budget, dcfg,
                                            dqn_seed_for(spec));
    if (timings != nullptr) timings->push_back({"train_dqn", stage_seconds(t0)});
    if (!arm_dir.empty()) {
      nn::checkpoint_save(trained_dqn.qnet.net, arm_dir + "/qnet.ckpt");
      write_file(arm_dir + "/dqn_log.csv", dqn_log_csv(trained_dqn));
    }
    baseline = std::make_unique<dqn::DqnGreedyPolicy>(trained_dqn.qnet);
  } else {
    baseline = policies::make_baseline_policy(
        spec.policy, spec.budget, derive_seed(spec.seed, "policy:" + spec.name()));
  }

  const auto t1 = std::chrono::steady_clock::now();
  dqn::InferenceResult result =
      dqn::run_inference(*baseline, frozen, splits.test, budget, config.horizon, true);
  if (timings != nullptr) timings->push_back({"inference", stage_seconds(t1)});

  ArmOutput out;
  out.metrics = to_run_metrics(result);
  out.trace = std::move(result.trace);

  if (!arm_dir.empty()) {
    write_file(arm_dir + "/metrics.csv",
               metrics_csv_text(spec, config.horizon, out.metrics));
    if (config.save_trace) {
      write_file(arm_dir + "/trace.csv", trace_csv_text(out.trace));
    }
  }
  return out;
}

}  // namespace

Algorithm1Result run_algorithm1(const ExperimentConfig& config, std::uint64_t seed,
                                const std::string& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  OutputTracker outputs;
  Algorithm1Result result;

  std::string stage = "scenario";
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<env::ScenarioSample> dataset = build_scenario(config, seed);
    result.timings.push_back({"scenario", stage_seconds(t0)});

    stage = "train-predictor";
    const auto t1 = std::chrono::steady_clock::now();
    const int age_limit =
        config.age_limits.empty() ? config.predictor.age_limit : config.age_limits.front();
    predictor::TrainedPredictor frozen =
        train_predictor_stage(config, dataset, age_limit, seed);
    result.timings.push_back({"train_predictor", stage_seconds(t1)});
    result.predictor_checkpoint = out_dir + "/predictor.ckpt";
    nn::checkpoint_save(frozen.model, result.predictor_checkpoint);
    outputs.record(result.predictor_checkpoint);
    write_trained_predictor(frozen, result.predictor_checkpoint,
                            out_dir + "/predictor_meta.json");
    outputs.record(out_dir + "/predictor_meta.json");
    outputs.write(out_dir + "/predictor_log.csv", predictor_log_csv(frozen));

    stage = "train-dqn";
    ArmSpec spec;
    spec.budget = config.budgets.front();
    spec.v_param = config.paired_v_values().front();
    spec.policy = policies::PolicyKind::dqn;
    spec.age_limit = age_limit;
    spec.seed = seed;

    DatasetSplits splits = split_dataset(dataset);
    aoi::BudgetConfig budget{spec.budget, spec.v_param};
    dqn::DqnConfig dcfg = config.dqn;
    if (dcfg.age_cap == 0) dcfg.age_cap = dqn::default_age_cap(age_limit);
    const auto t2 = std::chrono::steady_clock::now();
    dqn::TrainedSensingPolicy trained =
        dqn::train_sensing_policy(frozen, splits.validation, budget, dcfg, dqn_seed_for(spec));
    result.timings.push_back({"train_dqn", stage_seconds(t2)});
    result.qnet_checkpoint = out_dir + "/qnet.ckpt";
    nn::checkpoint_save(trained.qnet.net, result.qnet_checkpoint);
    outputs.record(result.qnet_checkpoint);
    outputs.write(out_dir + "/dqn_log.csv", dqn_log_csv(trained));

    stage = "inference";
    const auto t3 = std::chrono::steady_clock::now();
    dqn::InferenceResult inference =
        dqn::run_inference(trained.qnet, frozen, splits.test, budget, config.horizon, true);
    result.timings.push_back({"inference", stage_seconds(t3)});
    result.metrics = to_run_metrics(inference);

    stage = "write-metrics";
    result.metrics_csv = out_dir + "/metrics.csv";
    outputs.write(result.metrics_csv, metrics_csv_text(spec, config.horizon, result.metrics));
    if (config.save_trace) {
      outputs.write(out_dir + "/trace.csv", trace_csv_text(inference.trace));
    }
    result.timings.push_back({"total", stage_seconds(t0)});
    outputs.write(out_dir + "/timings.csv", timings_csv(result.timings));
  } catch (const std::exception& e) {
    outputs.remove_all();
    throw std::runtime_error("stage " + stage + " failed: " + e.what());
  }
  return result;
}

namespace {

struct SummaryKey {
  double budget;
  double v_param;
  policies::PolicyKind policy;
  int age_limit;

  bool operator<(const SummaryKey& o) const {
    if (budget != o.budget) return budget < o.budget;
    if (v_param != o.v_param) return v_param < o.v_param;
    if (policy != o.policy) return policy < o.policy;
    return age_limit < o.age_limit;
  }
};

struct Welford {
  long long n = 0;
  double mean = 0, m2 = 0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double stddev() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

}  // namespace

SweepResult sweep(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/arms");
  fs::create_directories(out_dir + "/predictors");

  const std::vector<double> v_paired = config.paired_v_values();
  const std::vector<int> age_limits =
      config.age_limits.empty() ? std::vector<int>{config.predictor.age_limit}
                                : config.age_limits;

  // Scenario per seed (arms of a seed share the dataset).
  std::vector<std::vector<env::ScenarioSample>> scenarios(config.seeds.size());
  std::vector<std::string> scenario_errors(config.seeds.size());
  parallel_for(config.seeds.size(), config.workers, [&](std::size_t i) {
    try {
      scenarios[i] = build_scenario(config, config.seeds[i]);
    } catch (const std::exception& e) {
      scenario_errors[i] = e.what();
    }
  });

  // Predictor per (seed, age_limit).
  struct PredictorSlot {
    predictor::TrainedPredictor trained;
    std::string error;
  };
  std::vector<PredictorSlot> predictors(config.seeds.size() * age_limits.size());
  auto predictor_index = [&](std::size_t seed_idx, std::size_t age_idx) {
    return seed_idx * age_limits.size() + age_idx;
  };
  parallel_for(predictors.size(), config.workers, [&](std::size_t i) {
    const std::size_t seed_idx = i / age_limits.size();
    const std::size_t age_idx = i % age_limits.size();
    if (!scenario_errors[seed_idx].empty()) {
      predictors[i].error = scenario_errors[seed_idx];
      return;
    }
    try {
      predictors[i].trained = train_predictor_stage(
          config, scenarios[seed_idx], age_limits[age_idx], config.seeds[seed_idx]);
    } catch (const std::exception& e) {
      predictors[i].error = e.what();
    }
  });
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    for (std::size_t a = 0; a < age_limits.size(); ++a) {
      const PredictorSlot& slot = predictors[predictor_index(s, a)];
      if (!slot.error.empty()) continue;
      const std::string base = out_dir + "/predictors/seed" +
                               std::to_string(config.seeds[s]) + "_N" +
                               std::to_string(age_limits[a]);
      write_trained_predictor(slot.trained, base + ".ckpt", base + ".json");
      write_file(base + "_log.csv", predictor_log_csv(slot.trained));
    }
  }

  // Arm cross-product in deterministic order.
  struct ArmPlan {
    ArmSpec spec;
    std::size_t seed_idx;
    std::size_t age_idx;
  };
  std::vector<ArmPlan> plan;
  for (std::size_t b = 0; b < config.budgets.size(); ++b) {
    for (policies::PolicyKind policy : config.policies) {
      for (std::size_t a = 0; a < age_limits.size(); ++a) {
        for (std::size_t s = 0; s < config.seeds.size(); ++s) {
          ArmSpec spec;
          spec.budget = config.budgets[b];
          spec.v_param = v_paired[b];
          spec.policy = policy;
          spec.age_limit = age_limits[a];
          spec.seed = config.seeds[s];
          plan.push_back({spec, s, a});
        }
      }
    }
  }

  SweepResult result;
  result.arms.resize(plan.size());
  std::vector<std::vector<StageTiming>> arm_timings(plan.size());
  parallel_for(plan.size(), config.workers, [&](std::size_t i) {
    const ArmPlan& p = plan[i];
    ArmResult& arm = result.arms[i];
    arm.spec = p.spec;
    const PredictorSlot& slot = predictors[predictor_index(p.seed_idx, p.age_idx)];
    const std::string arm_dir = out_dir + "/arms/" + p.spec.name();
    try {
      if (!slot.error.empty()) {
        throw std::runtime_error("predictor unavailable: " + slot.error);
      }
      fs::create_directories(arm_dir);
      ArmOutput output = run_arm(config, p.spec, scenarios[p.seed_idx], slot.trained,
                                 arm_dir, &arm_timings[i]);
      arm.metrics = output.metrics;
      arm.ok = true;
    } catch (const std::exception& e) {
      arm.ok = false;
      arm.error = e.what();
      std::error_code ec;
      fs::create_directories(arm_dir, ec);
      try {
        write_file(arm_dir + "/error.txt", std::string(e.what()) + "\n");
      } catch (...) {
      }
    }
  });

  // runs.csv in plan order; wall times go to a separate file.
  {
    std::ostringstream runs;
    runs << "budget,v,policy,age_limit,seed,horizon,status,sensing_rate,mean_queue,top1,"
            "top3,mean_loss\n";
    std::ostringstream timings;
    timings << "arm,stage,seconds\n";
    for (std::size_t i = 0; i < result.arms.size(); ++i) {
      const ArmResult& arm = result.arms[i];
      runs << format_double(arm.spec.budget) << ',' << format_double(arm.spec.v_param)
           << ',' << policies::to_string(arm.spec.policy) << ',' << arm.spec.age_limit
           << ',' << arm.spec.seed << ',' << config.horizon << ','
           << (arm.ok ? "ok" : "failed") << ',';
      if (arm.ok) {
        runs << format_double(arm.metrics.sensing_rate) << ','
             << format_double(arm.metrics.mean_queue) << ','
             << format_double(arm.metrics.top1) << ',' << format_double(arm.metrics.top3)
             << ',' << format_double(arm.metrics.mean_loss);
      } else {
        runs << ",,,,";
      }
      runs << '\n';
      timings << arm.spec.name() << ",wall_time,"
              << format_double(arm.metrics.wall_time_seconds) << '\n';
      for (const StageTiming& t : arm_timings[i]) {
        timings << arm.spec.name() << ',' << t.stage << ',' << format_double(t.seconds)
                << '\n';
      }
    }
    result.runs_csv = out_dir + "/runs.csv";
    write_file(result.runs_csv, runs.str());
    write_file(out_dir + "/timings.csv", timings.str());
  }

  // summary.csv: mean and std over seeds, grouped in plan order.
  {
    std::map<SummaryKey, std::array<Welford, 5>> groups;
    std::vector<SummaryKey> order;
    for (const ArmResult& arm : result.arms) {
      if (!arm.ok) continue;
      SummaryKey key{arm.spec.budget, arm.spec.v_param, arm.spec.policy,
                     arm.spec.age_limit};
      if (groups.find(key) == groups.end()) order.push_back(key);
      auto& w = groups[key];
      w[0].add(arm.metrics.sensing_rate);
      w[1].add(arm.metrics.mean_queue);
      w[2].add(arm.metrics.top1);
      w[3].add(arm.metrics.top3);
      w[4].add(arm.metrics.mean_loss);
    }
    std::ostringstream summary;
    summary << "budget,v,policy,age_limit,seeds,sensing_rate_mean,sensing_rate_std,"
               "mean_queue_mean,mean_queue_std,top1_mean,top1_std,top3_mean,top3_std,"
               "mean_loss_mean,mean_loss_std\n";
    for (const SummaryKey& key : order) {
      const auto& w = groups[key];
      summary << format_double(key.budget) << ',' << format_double(key.v_param) << ','
              << policies::to_string(key.policy) << ',' << key.age_limit << ',' << w[0].n;
      for (const Welford& metric : w) {
        summary << ',' << format_double(metric.mean) << ','
                << format_double(metric.stddev());
      }
      summary << '\n';
    }
    result.summary_csv = out_dir + "/summary.csv";
    write_file(result.summary_csv, summary.str());
  }
  return result;
}

}  // namespace beamsense::harness
