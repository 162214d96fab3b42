#ifndef BEAMSENSE_PREDICTOR_HPP
#define BEAMSENSE_PREDICTOR_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "beamsense/env.hpp"
#include "beamsense/nn.hpp"

namespace beamsense::predictor {

/// One age-augmented training row: raw features captured `age` slots before
/// the slot the label belongs to.
struct AugmentedExample {
  Eigen::Vector2d position;   // raw observed position at slot source_slot - age
  Eigen::VectorXd embedding;  // raw camera-surrogate embedding at that slot
  int age = 0;                // delta used to build the row
  int label = 0;              // fresh label from source_slot
  int source_slot = 0;        // the label's slot t
};

struct PredictorConfig {
  int age_limit = 0;  // N; 0 disables augmentation
  int epochs = 15;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::vector<int> hidden_layers{256, 256};
  bool include_age_zero = true;

  void validate() const;
};

/// Position min/max over the training split; used for min-max scaling.
struct FeatureStats {
  Eigen::Vector2d pos_min = Eigen::Vector2d::Zero();
  Eigen::Vector2d pos_max = Eigen::Vector2d::Zero();
};

/// Builds every (t, delta) pair with delta in {0 (optional), 1, .., N} and
/// t - delta inside the sample range. Output ordered by t, then delta.
/// Samples must be in slot order.
std::vector<AugmentedExample> augment_dataset(std::span<const env::ScenarioSample> samples,
                                              int age_limit, bool include_age_zero = true);

/// Closed-form row count of augment_dataset for S consecutive samples.
long long augmented_count(long long num_samples, int age_limit, bool include_age_zero);

FeatureStats compute_feature_stats(std::span<const env::ScenarioSample> samples);

/// Final network input: [min-max position (2) | embedding (D) | age/N capped
/// at 1]. Degenerate stats map that coordinate to 0.5.
Eigen::VectorXd normalize_features(const Eigen::Vector2d& position,
                                   const Eigen::Ref<const Eigen::VectorXd>& embedding,
                                   int age, const FeatureStats& stats, int age_limit);

struct EpochLogEntry {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_top1 = 0.0;
};

/// Frozen predictor bundle: the network plus everything needed to rebuild
/// inference-time inputs.
struct TrainedPredictor {
  nn::MlpModel model;
  FeatureStats stats;
  int age_limit = 0;
  int num_beams = 0;
  std::vector<EpochLogEntry> log;

  Eigen::VectorXd features_for(const env::ScenarioSample& sample, int age) const {
    return normalize_features(sample.position, sample.embedding, age, stats, age_limit);
  }
};

/// Trains on augmented rows with Adam. Feature stats are computed from the
/// rows themselves (the caller passes training-split rows only).
TrainedPredictor train_predictor(std::span<const AugmentedExample> examples,
                                 const PredictorConfig& config, int num_beams,
                                 std::uint64_t seed);

Eigen::VectorXd predict_probs(const nn::MlpModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& features);

enum class LossKind { cross_entropy, top1_indicator };

/// cross_entropy: -log p_y clamped to [0, log(M)+10].
/// top1_indicator: 0 when the argmax beam matches, else 1 (lower is better).
double prediction_loss(const nn::MlpModel& model,
                       const Eigen::Ref<const Eigen::VectorXd>& features, int true_label,
                       LossKind kind);

/// Fraction of items whose label is among the k most probable beams;
/// probability ties resolve toward the smaller beam index.
double topk_accuracy(const nn::MlpModel& model,
                     std::span<const std::pair<Eigen::VectorXd, int>> stream, int k);

/// True when `label` is within the top-k entries of `probs` under the
/// smaller-index-first tie rule.
bool topk_hit(const Eigen::Ref<const Eigen::VectorXd>& probs, int label, int k);

}  // namespace beamsense::predictor

#endif
