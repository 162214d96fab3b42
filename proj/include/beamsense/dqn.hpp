#ifndef BEAMSENSE_DQN_HPP
#define BEAMSENSE_DQN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "beamsense/aoi.hpp"
#include "beamsense/env.hpp"
#include "beamsense/nn.hpp"
#include "beamsense/policies.hpp"
#include "beamsense/predictor.hpp"

namespace beamsense::dqn {

/// One replay-memory record.
struct Transition {
  aoi::AoiQueueState state;
  int action = 0;
  double reward = 0.0;
  aoi::AoiQueueState next_state;
};

/// Fixed-capacity FIFO ring buffer with uniform sampling.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(const Transition& transition);
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t inserted() const { return inserted_; }
  const Transition& at(std::size_t i) const { return buffer_.at(i); }

  std::vector<Transition> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t inserted_ = 0;
  std::vector<Transition> buffer_;
};

struct DqnConfig {
  double gamma = 0.99;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 100;
  int iterations_per_epoch = 300;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // linear decay over this share of iterations
  int target_sync_period = 200;         // updates between target-network copies
  std::vector<int> hidden_layers{64, 64};
  int replay_capacity = 50000;
  int age_cap = 0;          // 0 selects default_age_cap(predictor age limit)
  double queue_cap = 50.0;  // state normalization caps

  void validate() const;
};

/// State-normalization default: the DQN should see ages well past the
/// predictor's training limit without saturating immediately.
int default_age_cap(int age_limit);

/// Trained Q-network plus the state normalization it was trained with.
struct SensingQNet {
  nn::MlpModel net;
  int age_cap = 20;
  double queue_cap = 50.0;
};

/// [(capped age)/age_cap, (capped queue)/queue_cap].
Eigen::Vector2d encode_state(const aoi::AoiQueueState& state, int age_cap, double queue_cap);

/// Epsilon-greedy action; Q-value ties resolve to 0 (not sensing).
int select_action(const SensingQNet& qnet, const aoi::AoiQueueState& state, double epsilon,
                  std::mt19937_64& rng);
int greedy_action(const SensingQNet& qnet, const aoi::AoiQueueState& state);

/// reward + gamma * max_a Q_target(next_state, a); no terminal states.
double bellman_target(double reward, const aoi::AoiQueueState& next_state,
                      const SensingQNet& target_qnet, double gamma);

/// One masked-regression step on a minibatch. Returns the mean squared TD
/// error measured before the parameters move.
double dqn_update(SensingQNet& qnet, const SensingQNet& target_qnet,
                  std::span<const Transition> batch, nn::OptimizerState& optimizer,
                  double gamma);

struct EpisodeLogEntry {
  int episode = 0;
  double episode_return = 0.0;
  double sensing_rate = 0.0;
  double mean_td_loss = 0.0;
  double epsilon = 0.0;
};

struct TrainedSensingPolicy {
  SensingQNet qnet;
  std::vector<EpisodeLogEntry> log;
};

/// Runs the episodic training loop against a frozen predictor: each step
/// selects an action, advances the age/queue dynamics, scores the predictor
/// on the post-action stale features, and performs one Q-learning update.
/// The dataset is walked cyclically from a random start slot per episode.
TrainedSensingPolicy train_sensing_policy(const predictor::TrainedPredictor& frozen,
                                          std::span<const env::ScenarioSample> dataset,
                                          const aoi::BudgetConfig& budget,
                                          const DqnConfig& config, std::uint64_t seed);

/// Greedy wrapper used at inference and in the harness policy table.
class DqnGreedyPolicy final : public policies::SensingPolicy {
 public:
  explicit DqnGreedyPolicy(const SensingQNet& qnet) : qnet_(&qnet) {}
  int decide(const aoi::AoiQueueState& state, long long) override {
    return greedy_action(*qnet_, state);
  }

 private:
  const SensingQNet* qnet_;
};

struct SlotRecord {
  long long slot = 0;
  int action = 0;
  int age = 0;        // age of the data used for this slot's prediction
  double queue = 0;   // Q(t) before the queue update
  double loss = 0;    // clamped cross-entropy of the slot prediction
  int top1_hit = 0;
  int top3_hit = 0;
  double fresh_loss = 0;  // loss of the acquisition-time forward; NaN when not sensing
};

struct InferenceResult {
  double sensing_rate = 0;
  double mean_queue = 0;
  double top1 = 0;
  double top3 = 0;
  double mean_loss = 0;
  double wall_time_seconds = 0;
  std::vector<SlotRecord> trace;
};

/// Sequential inference over `horizon` slots, walking the dataset
/// cyclically. Sensing performs the feature-acquisition work and an
/// immediate forward pass on the fresh features in addition to the per-slot
/// prediction, so wall time reflects the sensing rate.
InferenceResult run_inference(policies::SensingPolicy& policy,
                              const predictor::TrainedPredictor& frozen,
                              std::span<const env::ScenarioSample> dataset,
                              const aoi::BudgetConfig& budget, long long horizon,
                              bool keep_trace = true);

InferenceResult run_inference(const SensingQNet& qnet,
                              const predictor::TrainedPredictor& frozen,
                              std::span<const env::ScenarioSample> dataset,
                              const aoi::BudgetConfig& budget, long long horizon,
                              bool keep_trace = true);

}  // namespace beamsense::dqn

#endif
