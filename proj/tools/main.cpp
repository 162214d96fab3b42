#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "beamsense/config.hpp"
#include "beamsense/harness.hpp"
#include "beamsense/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace beamsense;

namespace {

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string out;
  std::string dataset_csv;
  std::string predictor_path;
  std::string qnet_path;
  std::string results_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool verbose = false;
};

std::string default_out_root() {
  const char* env = std::getenv("BEAMSENSE_OUT");
  return env != nullptr && *env != '\0' ? env : "beamsense_out";
}

void log_verbose(const CliOptions& opts, const std::string& message) {
  if (opts.verbose) {
    std::cerr << "[beamsense] " << message << "\n";
  }
}

/// Resolves --predictor to the checkpoint/meta file pair.
std::pair<std::string, std::string> predictor_paths(const std::string& arg) {
  std::string ckpt = arg;
  if (fs::is_directory(arg)) {
    ckpt = (fs::path(arg) / "predictor.ckpt").string();
  }
  std::string meta = ckpt;
  const std::string suffix = ".ckpt";
  if (meta.size() >= suffix.size() &&
      meta.compare(meta.size() - suffix.size(), suffix.size(), suffix) == 0) {
    meta = meta.substr(0, meta.size() - suffix.size()) + "_meta.json";
  } else {
    meta += ".meta.json";
  }
  return {ckpt, meta};
}

void write_manifest(const CliOptions& opts, const config::ConfigMap& cfg,
                    std::uint64_t master_seed, const std::string& dir,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["command"] = opts.command;
  manifest["version"] = kProjectVersion;
  manifest["checkpoint_format_version"] = 1;
  manifest["seed"] = master_seed;
  manifest["overrides"] = opts.overrides;
  manifest["config"] = cfg.render();
  json hashes = json::object();
  for (const std::string& path : outputs) {
    hashes[fs::relative(path, dir).string()] = fnv1a_hex(read_file(path));
  }
  manifest["outputs"] = hashes;
  write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

/// Collects every regular file under `dir` (for manifest hashing).
std::vector<std::string> files_under(const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_command(const CliOptions& opts) {
  // Configuration must parse and validate before any work starts; failures
  // here are usage errors (exit 2), signalled with std::invalid_argument.
  config::ConfigMap cfg;
  harness::ExperimentConfig experiment;
  std::uint64_t master_seed = 1;
  if (opts.command != "plot") {
    try {
      cfg = config::ConfigMap::parse_file(opts.config_path);
      for (const std::string& assignment : opts.overrides) {
        cfg.set_override(assignment);
      }
      if (!opts.dataset_csv.empty()) {
        cfg.set_override("scenario.dataset_csv=" + opts.dataset_csv);
      }
      if (opts.seed_given) {
        cfg.set_override("seeds=" + std::to_string(opts.seed));
      }
      experiment = harness::ExperimentConfig::from_config(cfg);
      master_seed = experiment.seeds.front();
    } catch (const std::exception& e) {
      std::cerr << "configuration error: " << e.what() << "\n";
      return 2;
    }
  }

  try {
    if (opts.command == "generate") {
      std::string out_path = opts.out;
      if (out_path.empty()) {
        out_path = default_out_root() + "/dataset.csv";
      }
      fs::create_directories(fs::path(out_path).parent_path().empty()
                                 ? "."
                                 : fs::path(out_path).parent_path().string());
      log_verbose(opts, "generating scenario to " + out_path);
      const std::vector<env::ScenarioSample> samples =
          harness::build_scenario(experiment, master_seed);
      env::save_csv_dataset(samples, out_path);
      const std::string dir = fs::path(out_path).parent_path().string().empty()
                                  ? "."
                                  : fs::path(out_path).parent_path().string();
      write_manifest(opts, cfg, master_seed, dir, {out_path});
      return 0;
    }

    const std::string out_dir =
        opts.out.empty() ? default_out_root() + "/" + opts.command : opts.out;

    if (opts.command == "train-predictor") {
      fs::create_directories(out_dir);
      log_verbose(opts, "training predictor into " + out_dir);
      const std::vector<env::ScenarioSample> samples =
          harness::build_scenario(experiment, master_seed);
      const int age_limit = experiment.age_limits.empty()
                                ? experiment.predictor.age_limit
                                : experiment.age_limits.front();
      predictor::TrainedPredictor trained =
          harness::train_predictor_stage(experiment, samples, age_limit, master_seed);
      harness::write_trained_predictor(trained, out_dir + "/predictor.ckpt",
                                       out_dir + "/predictor_meta.json");
      std::string log_text = "epoch,mean_loss,train_top1\n";
      for (const predictor::EpochLogEntry& e : trained.log) {
        log_text += std::to_string(e.epoch) + "," + format_double(e.mean_loss) + "," +
                    format_double(e.train_top1) + "\n";
      }
      write_file(out_dir + "/predictor_log.csv", log_text);
      write_manifest(opts, cfg, master_seed, out_dir, files_under(out_dir));
      return 0;
    }

    if (opts.command == "train-dqn") {
      fs::create_directories(out_dir);
      const auto [ckpt, meta] = predictor_paths(opts.predictor_path);
      predictor::TrainedPredictor frozen = harness::load_trained_predictor(ckpt, meta);
      log_verbose(opts, "training DQN against " + ckpt);
      const std::vector<env::ScenarioSample> samples =
          harness::build_scenario(experiment, master_seed);
      harness::DatasetSplits splits = harness::split_dataset(samples);
      aoi::BudgetConfig budget{experiment.budgets.front(),
                               experiment.paired_v_values().front()};
      dqn::DqnConfig dcfg = experiment.dqn;
      if (dcfg.age_cap == 0) dcfg.age_cap = dqn::default_age_cap(frozen.age_limit);
      dqn::TrainedSensingPolicy trained = dqn::train_sensing_policy(
          frozen, splits.validation, budget, dcfg, derive_seed(master_seed, "dqn-cli"));
      nn::checkpoint_save(trained.qnet.net, out_dir + "/qnet.ckpt");
      std::string log_text = "episode,return,sensing_rate,mean_td_loss,epsilon\n";
      for (const dqn::EpisodeLogEntry& e : trained.log) {
        log_text += std::to_string(e.episode) + "," + format_double(e.episode_return) +
                    "," + format_double(e.sensing_rate) + "," +
                    format_double(e.mean_td_loss) + "," + format_double(e.epsilon) + "\n";
      }
      write_file(out_dir + "/dqn_log.csv", log_text);
      write_manifest(opts, cfg, master_seed, out_dir, files_under(out_dir));
      return 0;
    }

    if (opts.command == "evaluate") {
      fs::create_directories(out_dir);
      const auto [ckpt, meta] = predictor_paths(opts.predictor_path);
      predictor::TrainedPredictor frozen = harness::load_trained_predictor(ckpt, meta);
      const std::vector<env::ScenarioSample> samples =
          harness::build_scenario(experiment, master_seed);
      harness::DatasetSplits splits = harness::split_dataset(samples);
      aoi::BudgetConfig budget{experiment.budgets.front(),
                               experiment.paired_v_values().front()};

      dqn::SensingQNet qnet;
      for (policies::PolicyKind kind : experiment.policies) {
        if (kind != policies::PolicyKind::dqn) continue;
        if (opts.qnet_path.empty()) {
          throw std::runtime_error(
              "missing artifact: dqn policy requested but no --qnet checkpoint given");
        }
        if (!fs::exists(opts.qnet_path)) {
          throw std::runtime_error("missing artifact: qnet checkpoint " + opts.qnet_path);
        }
        qnet.net = nn::checkpoint_load(opts.qnet_path);
        qnet.age_cap = experiment.dqn.age_cap > 0
                           ? experiment.dqn.age_cap
                           : dqn::default_age_cap(frozen.age_limit);
        qnet.queue_cap = experiment.dqn.queue_cap;
        break;
      }

      std::string metrics_text;
      bool first = true;
      for (policies::PolicyKind kind : experiment.policies) {
        log_verbose(opts, "evaluating policy " + policies::to_string(kind));
        harness::ArmSpec spec;
        spec.budget = budget.alpha_max;
        spec.v_param = budget.v_param;
        spec.policy = kind;
        spec.age_limit = frozen.age_limit;
        spec.seed = master_seed;

        dqn::InferenceResult result;
        if (kind == policies::PolicyKind::dqn) {
          result = dqn::run_inference(qnet, frozen, splits.test, budget,
                                      experiment.horizon, true);
        } else {
          std::unique_ptr<policies::SensingPolicy> policy =
              policies::make_baseline_policy(kind, budget.alpha_max,
                                             derive_seed(master_seed, "policy:" +
                                                                          policies::to_string(kind)));
          result = dqn::run_inference(*policy, frozen, splits.test, budget,
                                      experiment.horizon, true);
        }
        const std::string text =
            harness::metrics_csv_text(spec, experiment.horizon,
                                      harness::to_run_metrics(result));
        if (first) {
          metrics_text = text;
          first = false;
        } else {
          metrics_text += text.substr(text.find('\n') + 1);  // skip repeated header
        }
        if (experiment.save_trace) {
          write_file(out_dir + "/trace_" + policies::to_string(kind) + ".csv",
                     harness::trace_csv_text(result.trace));
        }
      }
      write_file(out_dir + "/metrics.csv", metrics_text);
      write_manifest(opts, cfg, master_seed, out_dir, files_under(out_dir));
      return 0;
    }

    if (opts.command == "sweep") {
      fs::create_directories(out_dir);
      log_verbose(opts, "running sweep into " + out_dir);
      harness::SweepResult result = harness::sweep(experiment, out_dir);
      write_manifest(opts, cfg, master_seed, out_dir,
                     {result.runs_csv, result.summary_csv});
      long long failed = 0;
      for (const harness::ArmResult& arm : result.arms) {
        if (!arm.ok) ++failed;
      }
      if (failed > 0) {
        std::cerr << failed << " of " << result.arms.size() << " arms failed\n";
        return 1;
      }
      return 0;
    }

    if (opts.command == "plot") {
      const std::string plot_out = opts.out.empty() ? opts.results_dir + "/plots" : opts.out;
      const std::vector<std::string> written =
          harness::emit_plots(opts.results_dir, plot_out);
      log_verbose(opts, "wrote " + std::to_string(written.size()) + " plot files");
      return 0;
    }

    std::cerr << "unknown command " << opts.command << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted-sensing beam prediction: synthetic scenario, AoI-aware "
               "predictor, DQN sensing policy"};
  app.require_subcommand(1);

  CliOptions opts;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", opts.config_path, "experiment config file")
          ->required()
          ->check(CLI::ExistingFile);
      cmd->add_option("--set", opts.overrides,
                      "config override as dotted key=value (repeatable)");
      cmd->add_option("--seed", opts.seed, "master seed (replaces the seeds list)")
          ->each([&](const std::string&) { opts.seed_given = true; });
    }
    cmd->add_flag("-v,--verbose", opts.verbose, "progress logging to stderr");
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset CSV");
  add_common(generate, true);
  generate->add_option("--out", opts.out, "output CSV path");

  CLI::App* train_pred =
      app.add_subcommand("train-predictor", "train the beam predictor");
  add_common(train_pred, true);
  train_pred->add_option("--dataset", opts.dataset_csv, "dataset CSV instead of generator")
      ->check(CLI::ExistingFile);
  train_pred->add_option("--out", opts.out, "output directory");

  CLI::App* train_dqn = app.add_subcommand("train-dqn", "train the sensing DQN");
  add_common(train_dqn, true);
  train_dqn->add_option("--predictor", opts.predictor_path,
                        "predictor checkpoint (or its directory)")
      ->required();
  train_dqn->add_option("--dataset", opts.dataset_csv, "dataset CSV instead of generator")
      ->check(CLI::ExistingFile);
  train_dqn->add_option("--out", opts.out, "output directory");

  CLI::App* evaluate = app.add_subcommand("evaluate", "run inference for the configured policies");
  add_common(evaluate, true);
  evaluate->add_option("--predictor", opts.predictor_path,
                       "predictor checkpoint (or its directory)")
      ->required();
  evaluate->add_option("--qnet", opts.qnet_path, "trained DQN checkpoint");
  evaluate->add_option("--dataset", opts.dataset_csv, "dataset CSV instead of generator")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out", opts.out, "output directory");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the experiment cross-product");
  add_common(sweep_cmd, true);
  sweep_cmd->add_option("--out", opts.out, "output directory");

  CLI::App* plot = app.add_subcommand("plot", "render figures from results");
  add_common(plot, false);
  plot->add_option("--results", opts.results_dir, "results directory (sweep or evaluate output)")
      ->required()
      ->check(CLI::ExistingDirectory);
  plot->add_option("--out", opts.out, "plot output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  opts.command = app.get_subcommands().front()->get_name();
  return run_command(opts);
}
