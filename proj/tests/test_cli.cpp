#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "beamsense/util.hpp"

namespace fs = std::filesystem;
using namespace beamsense;

namespace {

std::string cli_path() {
  const char* env = std::getenv("BEAMSENSE_CLI");
  REQUIRE_MESSAGE(env != nullptr, "BEAMSENSE_CLI must point at the built binary");
  return env;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run(const std::string& args) {
  const std::string out_file =
      (fs::temp_directory_path() / "bs_cli_output.txt").string();
  const std::string cmd = cli_path() + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WEXITSTATUS(status);
  result.output = read_file(out_file);
  return result;
}

const char* kSmokeConfig = R"cfg(
budgets = 0.5
v_values = 5
policies = dqn
seeds = 3
horizon = 200
save_trace = true

[scenario]
num_slots = 200
embedding_dim = 4
num_antennas = 4
num_beams = 4

[predictor]
age_limit = 1
epochs = 1
hidden = 16

[dqn]
epochs = 1
iterations_per_epoch = 40
batch_size = 8
hidden = 8
replay_capacity = 500
)cfg";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").exit_code == 2);                       // missing subcommand
  CHECK(run("generate").exit_code == 2);               // missing --config
  CHECK(run("frobnicate --config x").exit_code == 2);  // unknown subcommand
  const auto unknown_flag = run("generate --config /dev/null --frob 1");
  CHECK(unknown_flag.exit_code == 2);
  CHECK(unknown_flag.output.find("--frob") != std::string::npos);
}

TEST_CASE("full pipeline: generate, train, evaluate, plot") {
  const std::string dir = (fs::temp_directory_path() / "bs_cli_pipeline").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = dir + "/smoke.cfg";
  write_file(cfg_path, kSmokeConfig);

  const std::string base = " --config " + cfg_path + " --seed 3";

  const auto gen = run("generate" + base + " --out " + dir + "/dataset.csv");
  CAPTURE(gen.output);
  CHECK(gen.exit_code == 0);
  CHECK(fs::exists(dir + "/dataset.csv"));
  CHECK(fs::exists(dir + "/manifest.json"));

  const auto pred = run("train-predictor" + base + " --dataset " + dir +
                        "/dataset.csv --out " + dir + "/pred");
  CAPTURE(pred.output);
  CHECK(pred.exit_code == 0);
  CHECK(fs::exists(dir + "/pred/predictor.ckpt"));
  CHECK(fs::exists(dir + "/pred/predictor_meta.json"));
  CHECK(fs::exists(dir + "/pred/manifest.json"));

  const auto dqn_run = run("train-dqn" + base + " --dataset " + dir +
                           "/dataset.csv --predictor " + dir + "/pred --out " + dir + "/dqn");
  CAPTURE(dqn_run.output);
  CHECK(dqn_run.exit_code == 0);
  CHECK(fs::exists(dir + "/dqn/qnet.ckpt"));

  const auto eval = run("evaluate" + base + " --dataset " + dir + "/dataset.csv" +
                        " --predictor " + dir + "/pred --qnet " + dir +
                        "/dqn/qnet.ckpt --out " + dir + "/eval");
  CAPTURE(eval.output);
  CHECK(eval.exit_code == 0);
  CHECK(fs::exists(dir + "/eval/metrics.csv"));
  CHECK(fs::exists(dir + "/eval/trace_dqn.csv"));

  const auto plot = run("plot --results " + dir + "/eval --out " + dir + "/plots");
  CAPTURE(plot.output);
  CHECK(plot.exit_code == 0);
  CHECK(fs::exists(dir + "/plots"));

  SUBCASE("the evaluate manifest pins config, seed and output hashes") {
    const std::string manifest = read_file(dir + "/eval/manifest.json");
    CHECK(manifest.find("\"seed\": 3") != std::string::npos);
    CHECK(manifest.find("metrics.csv") != std::string::npos);
    CHECK(manifest.find("num_slots = 200") != std::string::npos);
  }

  fs::remove_all(dir);
}

TEST_CASE("config validation failures are usage errors naming the invariant") {
  const std::string dir = (fs::temp_directory_path() / "bs_cli_validate").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = dir + "/smoke.cfg";
  write_file(cfg_path, kSmokeConfig);

  const auto bad_gamma =
      run("evaluate --config " + cfg_path + " --predictor nowhere --set dqn.gamma=1.5");
  CHECK(bad_gamma.exit_code == 2);
  CHECK(bad_gamma.output.find("0 <= gamma < 1") != std::string::npos);

  const auto bad_key =
      run("evaluate --config " + cfg_path + " --predictor nowhere --set dqn.gamrna=0.5");
  CHECK(bad_key.exit_code == 2);
  CHECK(bad_key.output.find("gamrna") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("evaluate without artifacts is a runtime failure") {
  const std::string dir = (fs::temp_directory_path() / "bs_cli_missing").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir + "/smoke.cfg", kSmokeConfig);

  const auto missing = run("evaluate --config " + dir + "/smoke.cfg --predictor " + dir +
                           "/nope.ckpt --out " + dir + "/eval");
  CHECK(missing.exit_code == 1);
  CHECK(missing.output.find("missing artifact") != std::string::npos);

  SUBCASE("plot on an empty results dir fails with exit 1") {
    fs::create_directories(dir + "/empty");
    const auto plot = run("plot --results " + dir + "/empty");
    CHECK(plot.exit_code == 1);
  }

  fs::remove_all(dir);
}
