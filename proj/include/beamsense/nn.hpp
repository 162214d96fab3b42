#ifndef BEAMSENSE_NN_HPP
#define BEAMSENSE_NN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace beamsense::nn {

enum class Activation : std::uint8_t { relu = 0, identity = 1 };

struct LayerSpec {
  int input_dim = 1;
  int output_dim = 1;
  Activation activation = Activation::relu;
};

/// Dense network parameters. Weight matrices are (output_dim x input_dim);
/// layer k's input_dim must equal layer k-1's output_dim.
struct MlpModel {
  std::vector<LayerSpec> layers;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t rng_seed = 0;

  int input_dim() const { return layers.front().input_dim; }
  int output_dim() const { return layers.back().output_dim; }
};

/// Builds a model with uniform(+-sqrt(6/(fan_in+fan_out))) weights and zero
/// biases, deterministically from the seed.
MlpModel make_mlp(const std::vector<LayerSpec>& layers, std::uint64_t seed);

/// Convenience builder: input -> hidden(relu)... -> output(identity).
MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  std::uint64_t seed);

/// Per-parameter gradients, same shapes as the model.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input);

/// Batched forward; columns are samples.
Eigen::MatrixXd forward_batch(const MlpModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// Numerically stable softmax (max subtraction).
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// -log(p_label) with the probability floored at 1e-12.
double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities, int label);

/// Gradients of softmax cross-entropy w.r.t. all parameters.
Gradients backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                   int label);

/// Mean softmax-CE gradient over a batch (columns = samples). Also returns
/// the mean loss when `mean_loss` is non-null.
Gradients backward_batch(const MlpModel& model,
                         const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         const std::vector<int>& labels, double* mean_loss = nullptr);

/// Gradients of 1/2 * sum_i mask_i (out_i - target_i)^2.
Gradients mse_backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                       const Eigen::Ref<const Eigen::VectorXd>& target,
                       const Eigen::Ref<const Eigen::VectorXd>& mask);

/// Mean masked-MSE gradient over a batch (columns = samples).
Gradients mse_backward_batch(const MlpModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             const Eigen::Ref<const Eigen::MatrixXd>& targets,
                             const Eigen::Ref<const Eigen::MatrixXd>& masks);

enum class OptimizerKind { sgd, adam };

/// SGD or Adam state. Adam moments are allocated on first use and carry the
/// fixed (beta1, beta2, epsilon) = (0.9, 0.999, 1e-8).
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  void validate() const;
};

/// Applies one optimizer step in place. Rejects non-finite gradients before
/// touching any state.
void apply_update(MlpModel& model, const Gradients& grads, OptimizerState& opt);

/// Binary checkpoint: magic, format version, layer specs, then little-endian
/// float64 parameters in layer order (weights row-major, then bias).
void checkpoint_save(const MlpModel& model, const std::string& path);
MlpModel checkpoint_load(const std::string& path);

}  // namespace beamsense::nn

#endif
