#include "beamsense/dqn.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "beamsense/util.hpp"

namespace beamsense::dqn {

namespace {

std::size_t cyclic_index(long long pos, std::size_t size) {
  const long long n = static_cast<long long>(size);
  long long m = pos % n;
  if (m < 0) m += n;
  return static_cast<std::size_t>(m);
}

}  // namespace

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw std::invalid_argument("replay capacity must be >= 1");
  }
  buffer_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayMemory::push(const Transition& transition) {
  if (buffer_.size() < capacity_) {
    buffer_.push_back(transition);
  } else {
    buffer_[next_] = transition;  // overwrite the oldest entry
    next_ = (next_ + 1) % capacity_;
  }
  ++inserted_;
}

std::vector<Transition> ReplayMemory::sample(std::size_t batch, std::mt19937_64& rng) const {
  if (buffer_.empty()) {
    throw std::logic_error("cannot sample from an empty replay memory");
  }
  std::uniform_int_distribution<std::size_t> pick(0, buffer_.size() - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(buffer_[pick(rng)]);
  }
  return out;
}

void DqnConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("dqn.gamma must satisfy 0 <= gamma < 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("dqn.learning_rate must be > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("dqn.batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("dqn.epochs must be >= 1");
  if (iterations_per_epoch < 1) {
    throw std::invalid_argument("dqn.iterations_per_epoch must be >= 1");
  }
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
      !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw std::invalid_argument("dqn epsilon values must lie in [0, 1]");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw std::invalid_argument("dqn.epsilon_decay_fraction must lie in (0, 1]");
  }
  if (target_sync_period < 1) {
    throw std::invalid_argument("dqn.target_sync_period must be >= 1");
  }
  if (replay_capacity < 1) {
    throw std::invalid_argument("dqn.replay_capacity must be >= 1");
  }
  if (age_cap < 0) throw std::invalid_argument("dqn.age_cap must be >= 0");
  if (!(queue_cap > 0.0)) throw std::invalid_argument("dqn.queue_cap must be > 0");
  for (int width : hidden_layers) {
    if (width < 1) throw std::invalid_argument("dqn.hidden layer widths must be >= 1");
  }
}

int default_age_cap(int age_limit) { return std::max(2 * age_limit, 20); }

Eigen::Vector2d encode_state(const aoi::AoiQueueState& state, int age_cap, double queue_cap) {
  if (age_cap < 1 || !(queue_cap > 0.0)) {
    throw std::invalid_argument("encode_state: caps must be >= 1");
  }
  return {static_cast<double>(std::min(state.age, age_cap)) / age_cap,
          std::min(state.queue, queue_cap) / queue_cap};
}

int greedy_action(const SensingQNet& qnet, const aoi::AoiQueueState& state) {
  const Eigen::VectorXd q =
      nn::forward(qnet.net, encode_state(state, qnet.age_cap, qnet.queue_cap));
  return q(1) > q(0) ? 1 : 0;  // tie prefers not sensing
}

int select_action(const SensingQNet& qnet, const aoi::AoiQueueState& state, double epsilon,
                  std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("select_action: epsilon must lie in [0, 1]");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<int> coin(0, 1);
    return coin(rng);
  }
  return greedy_action(qnet, state);
}

double bellman_target(double reward, const aoi::AoiQueueState& next_state,
                      const SensingQNet& target_qnet, double gamma) {
  const Eigen::VectorXd q = nn::forward(
      target_qnet.net, encode_state(next_state, target_qnet.age_cap, target_qnet.queue_cap));
  return reward + gamma * q.maxCoeff();
}

double dqn_update(SensingQNet& qnet, const SensingQNet& target_qnet,
                  std::span<const Transition> batch, nn::OptimizerState& optimizer,
                  double gamma) {
  if (batch.empty()) {
    throw std::invalid_argument("dqn_update: empty batch");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd states(2, n);
  Eigen::MatrixXd next_states(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = batch[static_cast<std::size_t>(i)];
    states.col(i) = encode_state(tr.state, qnet.age_cap, qnet.queue_cap);
    next_states.col(i) =
        encode_state(tr.next_state, target_qnet.age_cap, target_qnet.queue_cap);
  }

  const Eigen::MatrixXd q_next = nn::forward_batch(target_qnet.net, next_states);
  const Eigen::MatrixXd q_now = nn::forward_batch(qnet.net, states);

  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(2, n);
  Eigen::MatrixXd masks = Eigen::MatrixXd::Zero(2, n);
  double td_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = batch[static_cast<std::size_t>(i)];
    const double target = tr.reward + gamma * q_next.col(i).maxCoeff();
    if (!std::isfinite(target)) {
      throw std::domain_error("dqn_update: non-finite Bellman target, update rejected");
    }
    targets(tr.action, i) = target;
    masks(tr.action, i) = 1.0;
    const double td = q_now(tr.action, i) - target;
    td_sum += td * td;
  }

  nn::Gradients grads = nn::mse_backward_batch(qnet.net, states, targets, masks);
  nn::apply_update(qnet.net, grads, optimizer);
  return td_sum / static_cast<double>(n);
}

TrainedSensingPolicy train_sensing_policy(const predictor::TrainedPredictor& frozen,
                                          std::span<const env::ScenarioSample> dataset,
                                          const aoi::BudgetConfig& budget,
                                          const DqnConfig& config, std::uint64_t seed) {
  budget.validate();
  config.validate();
  if (dataset.empty()) {
    throw std::invalid_argument("train_sensing_policy: empty dataset");
  }
  if (static_cast<int>(dataset.size()) < 2) {
    throw std::invalid_argument("train_sensing_policy: dataset shorter than one step");
  }

  const int age_cap = config.age_cap > 0 ? config.age_cap : default_age_cap(frozen.age_limit);

  TrainedSensingPolicy result;
  result.qnet.age_cap = age_cap;
  result.qnet.queue_cap = config.queue_cap;
  result.qnet.net = nn::make_mlp(2, config.hidden_layers, 2, derive_seed(seed, "dqn-init"));
  SensingQNet target = result.qnet;

  nn::OptimizerState opt;
  opt.kind = nn::OptimizerKind::adam;
  opt.learning_rate = config.learning_rate;

  ReplayMemory replay(static_cast<std::size_t>(config.replay_capacity));
  std::mt19937_64 episode_rng(derive_seed(seed, "dqn-episode"));
  std::mt19937_64 action_rng(derive_seed(seed, "dqn-action"));
  std::mt19937_64 replay_rng(derive_seed(seed, "dqn-replay"));

  const long long total_iters =
      static_cast<long long>(config.epochs) * config.iterations_per_epoch;
  const double decay_iters =
      std::max(1.0, std::floor(static_cast<double>(total_iters) * config.epsilon_decay_fraction));
  auto epsilon_at = [&](long long iter) {
    if (static_cast<double>(iter) >= decay_iters) return config.epsilon_end;
    const double frac = static_cast<double>(iter) / decay_iters;
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
  };

  long long global_iter = 0;
  long long updates = 0;

  for (int episode = 0; episode < config.epochs; ++episode) {
    std::uniform_int_distribution<long long> start_dist(
        0, static_cast<long long>(dataset.size()) - 1);
    std::uniform_int_distribution<int> age_dist(0, age_cap);
    std::uniform_real_distribution<double> queue_dist(0.0, 2.0);

    long long cursor = start_dist(episode_rng);
    aoi::AoiQueueState state{age_dist(episode_rng), queue_dist(episode_rng)};

    double episode_return = 0.0;
    long long senses = 0;
    double td_sum = 0.0;
    long long td_count = 0;
    double eps = epsilon_at(global_iter);

    for (int step = 0; step < config.iterations_per_epoch; ++step) {
      eps = epsilon_at(global_iter);
      const int action = select_action(result.qnet, state, eps, action_rng);
      const aoi::AoiQueueState next{aoi::step_age(state.age, action),
                                    aoi::step_queue(state.queue, action, budget.alpha_max)};

      // Post-action age indexing: a sensing action makes the current slot's
      // features available immediately.
      const std::size_t feature_idx = cyclic_index(cursor - next.age, dataset.size());
      const std::size_t label_idx = cyclic_index(cursor, dataset.size());
      const Eigen::VectorXd features =
          frozen.features_for(dataset[feature_idx], next.age);
      const double loss = predictor::prediction_loss(
          frozen.model, features, dataset[label_idx].label,
          predictor::LossKind::cross_entropy);
      const double r = aoi::reward(budget.v_param, loss, state.queue, action);

      replay.push({state, action, r, next});
      episode_return += r;
      senses += action;

      if (replay.size() >= static_cast<std::size_t>(config.batch_size)) {
        const std::vector<Transition> batch =
            replay.sample(static_cast<std::size_t>(config.batch_size), replay_rng);
        td_sum += dqn_update(result.qnet, target, batch, opt, config.gamma);
        ++td_count;
        ++updates;
        if (updates % config.target_sync_period == 0) {
          target.net = result.qnet.net;
        }
      }

      state = next;
      ++cursor;
      ++global_iter;
    }

    EpisodeLogEntry entry;
    entry.episode = episode;
    entry.episode_return = episode_return;
    entry.sensing_rate =
        static_cast<double>(senses) / static_cast<double>(config.iterations_per_epoch);
    entry.mean_td_loss = td_count > 0 ? td_sum / static_cast<double>(td_count) : 0.0;
    entry.epsilon = eps;
    result.log.push_back(entry);
  }
  return result;
}

InferenceResult run_inference(policies::SensingPolicy& policy,
                              const predictor::TrainedPredictor& frozen,
                              std::span<const env::ScenarioSample> dataset,
                              const aoi::BudgetConfig& budget, long long horizon,
                              bool keep_trace) {
  budget.validate();
  if (dataset.empty()) {
    throw std::invalid_argument("run_inference: empty dataset");
  }
  if (horizon < 1) {
    throw std::invalid_argument("run_inference: horizon must be >= 1");
  }

  InferenceResult result;
  if (keep_trace) result.trace.reserve(static_cast<std::size_t>(horizon));

  aoi::AoiQueueState state{0, 0.0};
  long long senses = 0;
  double queue_sum = 0.0;
  double loss_sum = 0.0;
  long long top1 = 0;
  long long top3 = 0;
  const int top3_k = std::min(3, frozen.num_beams);

  const auto t_start = std::chrono::steady_clock::now();
  for (long long t = 0; t < horizon; ++t) {
    const int action = policy.decide(state, t);
    const int age_used = aoi::step_age(state.age, action);
    const std::size_t label_idx = cyclic_index(t, dataset.size());
    const std::size_t feature_idx = cyclic_index(t - age_used, dataset.size());
    const env::ScenarioSample& label_sample = dataset[label_idx];

    double fresh_loss = std::numeric_limits<double>::quiet_NaN();
    if (action == 1) {
      // Sensing pipeline: acquire the fresh observation (re-running the
      // camera-surrogate extraction when the raw state is available) and
      // refresh the prediction immediately.
      const env::ScenarioSample& fresh_sample = dataset[label_idx];
      if (std::isfinite(fresh_sample.true_angle)) {
        volatile double sink = env::camera_embedding(
            fresh_sample.true_angle, static_cast<int>(fresh_sample.embedding.size()))
            .sum();
        (void)sink;
      }
      const Eigen::VectorXd fresh_features = frozen.features_for(fresh_sample, 0);
      const Eigen::VectorXd fresh_probs = predictor::predict_probs(frozen.model, fresh_features);
      fresh_loss = std::clamp(nn::cross_entropy(fresh_probs, label_sample.label), 0.0,
                              aoi::loss_clamp(frozen.num_beams));
    }

    const Eigen::VectorXd features = frozen.features_for(dataset[feature_idx], age_used);
    const Eigen::VectorXd probs = predictor::predict_probs(frozen.model, features);
    const double loss = std::clamp(nn::cross_entropy(probs, label_sample.label), 0.0,
                                   aoi::loss_clamp(frozen.num_beams));
    const int hit1 = predictor::topk_hit(probs, label_sample.label, 1) ? 1 : 0;
    const int hit3 = predictor::topk_hit(probs, label_sample.label, top3_k) ? 1 : 0;

    senses += action;
    queue_sum += state.queue;
    loss_sum += loss;
    top1 += hit1;
    top3 += hit3;

    if (keep_trace) {
      result.trace.push_back(
          {t, action, age_used, state.queue, loss, hit1, hit3, fresh_loss});
    }

    state = {age_used, aoi::step_queue(state.queue, action, budget.alpha_max)};
  }
  const auto t_end = std::chrono::steady_clock::now();

  const double n = static_cast<double>(horizon);
  result.sensing_rate = static_cast<double>(senses) / n;
  result.mean_queue = queue_sum / n;
  result.top1 = static_cast<double>(top1) / n;
  result.top3 = static_cast<double>(top3) / n;
  result.mean_loss = loss_sum / n;
  result.wall_time_seconds =
      std::chrono::duration_cast<std::chrono::duration<double>>(t_end - t_start).count();
  return result;
}

InferenceResult run_inference(const SensingQNet& qnet,
                              const predictor::TrainedPredictor& frozen,
                              std::span<const env::ScenarioSample> dataset,
                              const aoi::BudgetConfig& budget, long long horizon,
                              bool keep_trace) {
  DqnGreedyPolicy policy(qnet);
  return run_inference(policy, frozen, dataset, budget, horizon, keep_trace);
}

}  // namespace beamsense::dqn
