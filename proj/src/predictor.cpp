#include "beamsense/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "beamsense/aoi.hpp"
#include "beamsense/util.hpp"

namespace beamsense::predictor {

namespace {

int argmax_smallest_index(const Eigen::Ref<const Eigen::VectorXd>& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

}  // namespace

void PredictorConfig::validate() const {
  if (age_limit < 0) {
    throw std::invalid_argument("predictor.age_limit must be >= 0");
  }
  if (epochs < 1) {
    throw std::invalid_argument("predictor.epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("predictor.batch_size must be >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("predictor.learning_rate must be > 0");
  }
  for (int width : hidden_layers) {
    if (width < 1) {
      throw std::invalid_argument("predictor.hidden layer widths must be >= 1");
    }
  }
}

std::vector<AugmentedExample> augment_dataset(std::span<const env::ScenarioSample> samples,
                                              int age_limit, bool include_age_zero) {
  if (age_limit < 0) {
    throw std::invalid_argument("augment_dataset: age_limit must be >= 0");
  }
  std::vector<AugmentedExample> out;
  out.reserve(static_cast<std::size_t>(
      augmented_count(static_cast<long long>(samples.size()), age_limit, include_age_zero)));
  const int first_delta = include_age_zero ? 0 : 1;
  for (int t = 0; t < static_cast<int>(samples.size()); ++t) {
    for (int delta = first_delta; delta <= age_limit; ++delta) {
      if (t - delta < 0) break;  // no padding before the first slot
      const env::ScenarioSample& feature_slot = samples[static_cast<std::size_t>(t - delta)];
      AugmentedExample ex;
      ex.position = feature_slot.position;
      ex.embedding = feature_slot.embedding;
      ex.age = delta;
      ex.label = samples[static_cast<std::size_t>(t)].label;
      ex.source_slot = samples[static_cast<std::size_t>(t)].slot;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

long long augmented_count(long long num_samples, int age_limit, bool include_age_zero) {
  long long total = 0;
  for (int delta = include_age_zero ? 0 : 1; delta <= age_limit; ++delta) {
    total += std::max(0LL, num_samples - delta);
  }
  return total;
}

FeatureStats compute_feature_stats(std::span<const env::ScenarioSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("compute_feature_stats: empty sample set");
  }
  FeatureStats stats;
  stats.pos_min = samples.front().position;
  stats.pos_max = samples.front().position;
  for (const env::ScenarioSample& s : samples) {
    stats.pos_min = stats.pos_min.cwiseMin(s.position);
    stats.pos_max = stats.pos_max.cwiseMax(s.position);
  }
  return stats;
}

Eigen::VectorXd normalize_features(const Eigen::Vector2d& position,
                                   const Eigen::Ref<const Eigen::VectorXd>& embedding,
                                   int age, const FeatureStats& stats, int age_limit) {
  Eigen::VectorXd features(2 + embedding.size() + 1);
  for (int i = 0; i < 2; ++i) {
    const double range = stats.pos_max(i) - stats.pos_min(i);
    features(i) = range > 0.0 ? (position(i) - stats.pos_min(i)) / range : 0.5;
  }
  features.segment(2, embedding.size()) = embedding;
  const int cap = std::max(age_limit, 1);
  features(2 + embedding.size()) =
      static_cast<double>(aoi::age_capped(age, cap)) / static_cast<double>(cap);
  return features;
}

TrainedPredictor train_predictor(std::span<const AugmentedExample> examples,
                                 const PredictorConfig& config, int num_beams,
                                 std::uint64_t seed) {
  config.validate();
  if (examples.empty()) {
    throw std::invalid_argument("train_predictor: no training examples");
  }
  if (num_beams < 2) {
    throw std::invalid_argument("train_predictor: num_beams must be >= 2");
  }
  const int dim = static_cast<int>(examples.front().embedding.size());
  for (const AugmentedExample& ex : examples) {
    if (ex.embedding.size() != dim) {
      throw std::invalid_argument("train_predictor: inconsistent embedding dimensions");
    }
    if (ex.label < 0 || ex.label >= num_beams) {
      throw std::invalid_argument("train_predictor: label out of range");
    }
  }

  TrainedPredictor trained;
  trained.age_limit = config.age_limit;
  trained.num_beams = num_beams;
  {
    // Stats over the feature-slot positions of the training rows.
    FeatureStats stats;
    stats.pos_min = examples.front().position;
    stats.pos_max = examples.front().position;
    for (const AugmentedExample& ex : examples) {
      stats.pos_min = stats.pos_min.cwiseMin(ex.position);
      stats.pos_max = stats.pos_max.cwiseMax(ex.position);
    }
    trained.stats = stats;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(examples.size());
  Eigen::MatrixXd features(dim + 3, n);
  std::vector<int> labels(examples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const AugmentedExample& ex = examples[static_cast<std::size_t>(i)];
    features.col(i) = normalize_features(ex.position, ex.embedding, ex.age, trained.stats,
                                         config.age_limit);
    labels[static_cast<std::size_t>(i)] = ex.label;
  }

  trained.model = nn::make_mlp(dim + 3, config.hidden_layers, num_beams,
                               derive_seed(seed, "predictor-init"));
  nn::OptimizerState opt;
  opt.kind = nn::OptimizerKind::adam;
  opt.learning_rate = config.learning_rate;

  std::mt19937_64 shuffle_rng(derive_seed(seed, "predictor-shuffle"));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd batch(dim + 3, count);
      std::vector<int> batch_labels(static_cast<std::size_t>(count));
      for (Eigen::Index j = 0; j < count; ++j) {
        batch.col(j) = features.col(order[static_cast<std::size_t>(start + j)]);
        batch_labels[static_cast<std::size_t>(j)] =
            labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + j)])];
      }
      double batch_loss = 0.0;
      nn::Gradients grads = nn::backward_batch(trained.model, batch, batch_labels, &batch_loss);
      nn::apply_update(trained.model, grads, opt);
      loss_sum += batch_loss * static_cast<double>(count);
      seen += count;
    }

    EpochLogEntry entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / static_cast<double>(seen);
    // Training top-1 on the epoch-end parameters.
    const Eigen::MatrixXd logits = nn::forward_batch(trained.model, features);
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (argmax_smallest_index(logits.col(i)) == labels[static_cast<std::size_t>(i)]) {
        ++hits;
      }
    }
    entry.train_top1 = static_cast<double>(hits) / static_cast<double>(n);
    trained.log.push_back(entry);
  }
  return trained;
}

Eigen::VectorXd predict_probs(const nn::MlpModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& features) {
  return nn::softmax(nn::forward(model, features));
}

double prediction_loss(const nn::MlpModel& model,
                       const Eigen::Ref<const Eigen::VectorXd>& features, int true_label,
                       LossKind kind) {
  const Eigen::VectorXd probs = predict_probs(model, features);
  if (true_label < 0 || true_label >= probs.size()) {
    throw std::out_of_range("prediction_loss: label out of range");
  }
  switch (kind) {
    case LossKind::cross_entropy: {
      const double raw = nn::cross_entropy(probs, true_label);
      return std::clamp(raw, 0.0, aoi::loss_clamp(static_cast<int>(probs.size())));
    }
    case LossKind::top1_indicator:
      return argmax_smallest_index(probs) == true_label ? 0.0 : 1.0;
  }
  throw std::invalid_argument("prediction_loss: unknown loss kind");
}

bool topk_hit(const Eigen::Ref<const Eigen::VectorXd>& probs, int label, int k) {
  // The label is selected iff fewer than k indices outrank it, where j
  // outranks `label` when p_j > p_label, or p_j == p_label with j < label.
  int ranked_above = 0;
  for (int j = 0; j < probs.size(); ++j) {
    if (j == label) continue;
    if (probs(j) > probs(label) || (probs(j) == probs(label) && j < label)) {
      ++ranked_above;
    }
  }
  return ranked_above < k;
}

double topk_accuracy(const nn::MlpModel& model,
                     std::span<const std::pair<Eigen::VectorXd, int>> stream, int k) {
  if (stream.empty()) {
    throw std::domain_error("topk_accuracy: empty evaluation stream");
  }
  if (k < 1 || k > model.output_dim()) {
    throw std::invalid_argument("topk_accuracy: k must be in [1, M]");
  }
  long long hits = 0;
  for (const auto& [features, label] : stream) {
    const Eigen::VectorXd probs = predict_probs(model, features);
    if (label < 0 || label >= probs.size()) {
      throw std::out_of_range("topk_accuracy: label out of range");
    }
    if (topk_hit(probs, label, k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(stream.size());
}

}  // namespace beamsense::predictor
