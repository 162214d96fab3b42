#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "beamsense/env.hpp"
#include "beamsense/predictor.hpp"

using namespace beamsense;

namespace {

std::vector<env::ScenarioSample> toy_samples(int count, int embedding_dim = 4,
                                             int num_beams = 4, std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<env::ScenarioSample> out;
  for (int t = 0; t < count; ++t) {
    env::ScenarioSample s;
    s.slot = t;
    s.position = Eigen::Vector2d(static_cast<double>(t), 10.0 + gauss(rng));
    s.embedding = Eigen::VectorXd::NullaryExpr(embedding_dim, [&](Eigen::Index) {
      return gauss(rng);
    });
    s.label = t % num_beams;
    s.true_angle = 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("augmentation emits 585 rows for 100 slots with N=5") {
  const auto samples = toy_samples(100);
  const auto rows = predictor::augment_dataset(samples, 5, true);
  CHECK(rows.size() == 585);

  // Brute-force recount of valid (t, delta) pairs.
  long long expected = 0;
  for (int t = 0; t < 100; ++t) {
    for (int delta = 0; delta <= 5; ++delta) {
      if (t - delta >= 0) ++expected;
    }
  }
  CHECK(static_cast<long long>(rows.size()) == expected);
  CHECK(predictor::augmented_count(100, 5, true) == expected);
}

TEST_CASE("augmented count matches the brute force on random sizes") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size_dist(0, 200);
  std::uniform_int_distribution<int> limit_dist(0, 30);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int s = size_dist(rng);
    const int n = limit_dist(rng);
    const bool keep_zero = coin(rng) == 1;
    long long expected = 0;
    for (int t = 0; t < s; ++t) {
      for (int delta = keep_zero ? 0 : 1; delta <= n; ++delta) {
        if (t - delta >= 0) ++expected;
      }
    }
    CHECK(predictor::augmented_count(s, n, keep_zero) == expected);
    const auto samples = toy_samples(s);
    CHECK(static_cast<long long>(predictor::augment_dataset(samples, n, keep_zero).size()) ==
          expected);
  }
}

TEST_CASE("N=0 augmentation is the original dataset at age zero") {
  const auto samples = toy_samples(25);
  const auto rows = predictor::augment_dataset(samples, 0, true);
  REQUIRE(rows.size() == 25);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].age == 0);
    CHECK(rows[i].label == samples[i].label);
    CHECK(rows[i].position == samples[i].position);
    CHECK(rows[i].embedding == samples[i].embedding);
  }
}

TEST_CASE("each augmented row pairs stale features with the fresh label") {
  const auto samples = toy_samples(40);
  const auto rows = predictor::augment_dataset(samples, 7, true);
  int prev_slot = -1;
  int prev_age = -1;
  for (const predictor::AugmentedExample& row : rows) {
    const int feature_slot = row.source_slot - row.age;
    REQUIRE(feature_slot >= 0);
    CHECK(row.position == samples[static_cast<std::size_t>(feature_slot)].position);
    CHECK(row.embedding == samples[static_cast<std::size_t>(feature_slot)].embedding);
    CHECK(row.label == samples[static_cast<std::size_t>(row.source_slot)].label);
    // Ordered by label slot, then age.
    if (row.source_slot == prev_slot) {
      CHECK(row.age == prev_age + 1);
    } else {
      CHECK(row.source_slot > prev_slot);
      CHECK(row.age == 0);
    }
    prev_slot = row.source_slot;
    prev_age = row.age;
  }
  CHECK(rows.empty() == false);
  CHECK(predictor::augment_dataset({}, 5, true).empty());
}

TEST_CASE("feature normalization") {
  predictor::FeatureStats stats;
  stats.pos_min = Eigen::Vector2d(-10.0, 0.0);
  stats.pos_max = Eigen::Vector2d(10.0, 0.0);  // second coordinate degenerate
  const Eigen::VectorXd emb = Eigen::Vector2d(0.25, -0.5);

  const Eigen::VectorXd at_min =
      predictor::normalize_features(Eigen::Vector2d(-10.0, 0.0), emb, 0, stats, 5);
  CHECK(at_min(0) == 0.0);
  CHECK(at_min(1) == 0.5);  // degenerate coordinate maps to the middle
  CHECK(at_min(2) == 0.25);
  CHECK(at_min(3) == -0.5);
  CHECK(at_min(4) == 0.0);

  const Eigen::VectorXd at_limit =
      predictor::normalize_features(Eigen::Vector2d(0.0, 0.0), emb, 5, stats, 5);
  CHECK(at_limit(0) == 0.5);
  CHECK(at_limit(4) == 1.0);

  const Eigen::VectorXd beyond =
      predictor::normalize_features(Eigen::Vector2d(0.0, 0.0), emb, 15, stats, 5);
  CHECK(beyond(4) == 1.0);  // saturated via age_capped
}

TEST_CASE("training is deterministic and can memorize a singleton") {
  const auto samples = toy_samples(30, 4, 4);
  const auto rows = predictor::augment_dataset(samples, 2, true);
  predictor::PredictorConfig cfg;
  cfg.age_limit = 2;
  cfg.epochs = 3;
  cfg.hidden_layers = {16};

  const auto a = predictor::train_predictor(rows, cfg, 4, 99);
  const auto b = predictor::train_predictor(rows, cfg, 4, 99);
  for (std::size_t k = 0; k < a.model.weights.size(); ++k) {
    CHECK(a.model.weights[k] == b.model.weights[k]);
  }
  const auto c = predictor::train_predictor(rows, cfg, 4, 100);
  CHECK(a.model.weights[0] != c.model.weights[0]);

  SUBCASE("singleton memorization in 15 epochs") {
    predictor::PredictorConfig mem;
    mem.age_limit = 0;
    mem.epochs = 15;
    mem.learning_rate = 0.05;
    mem.hidden_layers = {16};
    const auto single = predictor::augment_dataset({samples.data(), 1}, 0, true);
    const auto trained = predictor::train_predictor(single, mem, 4, 7);
    const Eigen::VectorXd features = trained.features_for(samples[0], 0);
    CHECK(predictor::prediction_loss(trained.model, features, samples[0].label,
                                     predictor::LossKind::cross_entropy) < 0.01);
  }
}

TEST_CASE("predict_probs is a shift-invariant softmax that sums to one") {
  nn::MlpModel model = nn::make_mlp(3, {5}, 4, 21);
  const Eigen::Vector3d x(0.1, 0.2, 0.3);
  const Eigen::VectorXd p = predictor::predict_probs(model, x);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // A zero-initialised model yields exactly uniform probabilities.
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  const Eigen::VectorXd uniform = predictor::predict_probs(model, x);
  for (int i = 0; i < 4; ++i) CHECK(uniform(i) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("prediction losses") {
  nn::MlpModel model = nn::make_mlp({{2, 3, nn::Activation::identity}}, 3);
  model.weights[0].setZero();
  model.biases[0] << 30.0, 0.0, 0.0;  // p ~ (1, 0, 0)
  const Eigen::Vector2d x(1.0, 1.0);
  CHECK(predictor::prediction_loss(model, x, 0, predictor::LossKind::cross_entropy) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(predictor::prediction_loss(model, x, 0, predictor::LossKind::top1_indicator) == 0.0);
  CHECK(predictor::prediction_loss(model, x, 2, predictor::LossKind::top1_indicator) == 1.0);

  model.biases[0].setZero();  // uniform over 3
  CHECK(predictor::prediction_loss(model, x, 1, predictor::LossKind::cross_entropy) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // The clamp keeps even a confidently wrong prediction bounded.
  model.biases[0] << 100.0, 0.0, 0.0;
  const double clamped =
      predictor::prediction_loss(model, x, 1, predictor::LossKind::cross_entropy);
  CHECK(clamped == doctest::Approx(std::log(3.0) + 10.0).epsilon(1e-12));
}

TEST_CASE("top-k accuracy: bounds, ties, monotonicity") {
  nn::MlpModel model = nn::make_mlp({{4, 4, nn::Activation::identity}}, 3);
  model.weights[0] = Eigen::MatrixXd::Identity(4, 4);
  model.biases[0].setZero();

  std::vector<std::pair<Eigen::VectorXd, int>> stream;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 3);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(4);
    for (int j = 0; j < 4; ++j) x(j) = gauss(rng);
    stream.emplace_back(x, label(rng));
  }

  CHECK(predictor::topk_accuracy(model, stream, 4) == 1.0);
  const double top1 = predictor::topk_accuracy(model, stream, 1);
  const double top2 = predictor::topk_accuracy(model, stream, 2);
  const double top3 = predictor::topk_accuracy(model, stream, 3);
  CHECK(top1 <= top2);
  CHECK(top2 <= top3);
  CHECK_THROWS_AS(predictor::topk_accuracy(model, {}, 1), std::domain_error);
  CHECK_THROWS_AS(predictor::topk_accuracy(model, stream, 5), std::invalid_argument);

  SUBCASE("ties break toward the smaller index") {
    const Eigen::Vector4d equal(0.25, 0.25, 0.25, 0.25);
    CHECK(predictor::topk_hit(equal, 0, 1));
    CHECK_FALSE(predictor::topk_hit(equal, 1, 1));
    CHECK(predictor::topk_hit(equal, 1, 2));
    CHECK_FALSE(predictor::topk_hit(equal, 3, 3));
    CHECK(predictor::topk_hit(equal, 3, 4));
  }

  SUBCASE("a perfect predictor scores 1.0 at k = 1") {
    std::vector<std::pair<Eigen::VectorXd, int>> aligned;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
      x(i) = 5.0;
      aligned.emplace_back(x, i);
    }
    CHECK(predictor::topk_accuracy(model, aligned, 1) == 1.0);
  }
}

TEST_CASE("training loss decreases from the first to the last epoch") {
  env::TrajectoryConfig traj;
  traj.num_slots = 300;
  traj.embedding_dim = 8;
  traj.seed = 44;
  const auto samples = env::generate_trajectory(traj, {8, 4}, {});
  const auto rows = predictor::augment_dataset(samples, 1, true);
  predictor::PredictorConfig cfg;
  cfg.age_limit = 1;
  cfg.epochs = 5;
  cfg.hidden_layers = {32, 32};
  const auto trained = predictor::train_predictor(rows, cfg, 4, 3);
  REQUIRE(trained.log.size() == 5);
  CHECK(trained.log.front().mean_loss > trained.log.back().mean_loss);
}
