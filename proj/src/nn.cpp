#include "beamsense/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace beamsense::nn {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

void validate_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) {
    throw std::invalid_argument("model must have at least one layer");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].input_dim < 1 || layers[k].output_dim < 1) {
      throw std::invalid_argument("layer dims must be >= 1");
    }
    if (k > 0 && layers[k].input_dim != layers[k - 1].output_dim) {
      throw std::invalid_argument("layer " + std::to_string(k) +
                                  " input_dim does not chain with previous output_dim");
    }
  }
}

void check_input_dim(const MlpModel& model, Eigen::Index dim) {
  if (dim != model.input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(dim) +
                                ", model expects " + std::to_string(model.input_dim()));
  }
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu) {
    return z.cwiseMax(0.0);
  }
  return z;
}

// Derivative of the activation evaluated at the pre-activation.
Eigen::ArrayXXd activate_prime(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu) {
    return (z.array() > 0.0).cast<double>();
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input
  std::vector<Eigen::MatrixXd> pre_activations;
};

ForwardTrace traced_forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  ForwardTrace trace;
  trace.activations.reserve(model.layers.size() + 1);
  trace.pre_activations.reserve(model.layers.size());
  trace.activations.push_back(inputs);
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Eigen::MatrixXd z = (model.weights[k] * trace.activations.back()).colwise() + model.biases[k];
    trace.activations.push_back(activate(z, model.layers[k].activation));
    trace.pre_activations.push_back(std::move(z));
  }
  return trace;
}

// Shared backprop: given dL/d(output activations), accumulate parameter
// gradients, averaged over batch columns.
Gradients backprop(const MlpModel& model, const ForwardTrace& trace,
                   Eigen::MatrixXd delta_out) {
  const double inv_batch = 1.0 / static_cast<double>(delta_out.cols());
  Gradients grads;
  grads.weights.resize(model.layers.size());
  grads.biases.resize(model.layers.size());
  Eigen::MatrixXd delta = std::move(delta_out);
  for (int k = static_cast<int>(model.layers.size()) - 1; k >= 0; --k) {
    delta.array() *= activate_prime(trace.pre_activations[k], model.layers[k].activation);
    grads.weights[k].noalias() = inv_batch * (delta * trace.activations[k].transpose());
    grads.biases[k] = inv_batch * delta.rowwise().sum();
    if (k > 0) {
      delta = model.weights[k].transpose() * delta;
    }
  }
  return grads;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Eigen::ArrayXd shifted = logits.col(c).array() - logits.col(c).maxCoeff();
    Eigen::ArrayXd e = shifted.exp();
    p.col(c) = e / e.sum();
  }
  return p;
}

bool gradients_finite(const Gradients& grads) {
  for (const auto& w : grads.weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : grads.biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

void check_shapes(const MlpModel& model, const Gradients& grads) {
  if (grads.weights.size() != model.weights.size() ||
      grads.biases.size() != model.biases.size()) {
    throw std::invalid_argument("gradient layer count does not match model");
  }
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    if (grads.weights[k].rows() != model.weights[k].rows() ||
        grads.weights[k].cols() != model.weights[k].cols() ||
        grads.biases[k].size() != model.biases[k].size()) {
      throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(k));
    }
  }
}

// --- checkpoint serialization -------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  put_u64(out, bits);
}

struct Reader {
  const std::string& data;
  std::size_t offset = 0;

  void need(std::size_t n, const char* what) const {
    if (offset + n > data.size()) {
      throw std::runtime_error(std::string("checkpoint truncated while reading ") + what +
                               " at byte offset " + std::to_string(offset));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + i])) << (8 * i);
    }
    offset += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[offset + i])) << (8 * i);
    }
    offset += 8;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(data[offset++]);
  }
  double f64(const char* what) {
    std::uint64_t bits = u64(what);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
};

}  // namespace

MlpModel make_mlp(const std::vector<LayerSpec>& layers, std::uint64_t seed) {
  validate_layers(layers);
  MlpModel model;
  model.layers = layers;
  model.rng_seed = seed;
  std::mt19937_64 rng(seed);
  for (const LayerSpec& spec : layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    Eigen::MatrixXd w(spec.output_dim, spec.input_dim);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = uniform(rng);
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(spec.output_dim));
  }
  return model;
}

MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                  std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  int prev = input_dim;
  for (int width : hidden) {
    layers.push_back({prev, width, Activation::relu});
    prev = width;
  }
  layers.push_back({prev, output_dim, Activation::identity});
  return make_mlp(layers, seed);
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input) {
  check_input_dim(model, input.size());
  Eigen::MatrixXd a = input;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Eigen::MatrixXd z = (model.weights[k] * a).colwise() + model.biases[k];
    a = activate(z, model.layers[k].activation);
  }
  return a.col(0);
}

Eigen::MatrixXd forward_batch(const MlpModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  check_input_dim(model, inputs.rows());
  Eigen::MatrixXd a = inputs;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    Eigen::MatrixXd z = (model.weights[k] * a).colwise() + model.biases[k];
    a = activate(z, model.layers[k].activation);
  }
  return a;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return e / e.sum();
}

double cross_entropy(const Eigen::Ref<const Eigen::VectorXd>& probabilities, int label) {
  if (label < 0 || label >= probabilities.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " out of range [0, " + std::to_string(probabilities.size()) + ")");
  }
  return -std::log(std::max(probabilities(label), 1e-12));
}

Gradients backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                   int label) {
  return backward_batch(model, input, std::vector<int>{label});
}

Gradients backward_batch(const MlpModel& model,
                         const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         const std::vector<int>& labels, double* mean_loss) {
  check_input_dim(model, inputs.rows());
  if (static_cast<Eigen::Index>(labels.size()) != inputs.cols()) {
    throw std::invalid_argument("backward_batch: one label per input column required");
  }
  const ForwardTrace trace = traced_forward(model, inputs);
  Eigen::MatrixXd delta = softmax_columns(trace.activations.back());
  double loss_sum = 0.0;
  for (Eigen::Index c = 0; c < delta.cols(); ++c) {
    const int label = labels[static_cast<std::size_t>(c)];
    if (label < 0 || label >= model.output_dim()) {
      throw std::out_of_range("backward_batch: label out of range");
    }
    if (mean_loss != nullptr) {
      loss_sum += -std::log(std::max(delta(label, c), 1e-12));
    }
    delta(label, c) -= 1.0;
  }
  if (mean_loss != nullptr) {
    *mean_loss = loss_sum / static_cast<double>(delta.cols());
  }
  return backprop(model, trace, std::move(delta));
}

Gradients mse_backward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& input,
                       const Eigen::Ref<const Eigen::VectorXd>& target,
                       const Eigen::Ref<const Eigen::VectorXd>& mask) {
  return mse_backward_batch(model, input, target, mask);
}

Gradients mse_backward_batch(const MlpModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             const Eigen::Ref<const Eigen::MatrixXd>& targets,
                             const Eigen::Ref<const Eigen::MatrixXd>& masks) {
  check_input_dim(model, inputs.rows());
  if (targets.rows() != model.output_dim() || masks.rows() != model.output_dim() ||
      targets.cols() != inputs.cols() || masks.cols() != inputs.cols()) {
    throw std::invalid_argument("mse_backward: target/mask shape must be output_dim x batch");
  }
  const ForwardTrace trace = traced_forward(model, inputs);
  Eigen::MatrixXd delta =
      masks.cwiseProduct(trace.activations.back() - targets);
  return backprop(model, trace, std::move(delta));
}

void OptimizerState::validate() const {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("optimizer learning_rate must be > 0");
  }
}

void apply_update(MlpModel& model, const Gradients& grads, OptimizerState& opt) {
  opt.validate();
  check_shapes(model, grads);
  if (!gradients_finite(grads)) {
    throw std::domain_error("apply_update: non-finite gradient, update rejected");
  }

  if (opt.kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      model.weights[k] -= opt.learning_rate * grads.weights[k];
      model.biases[k] -= opt.learning_rate * grads.biases[k];
    }
    ++opt.step;
  } else {
    if (opt.m_weights.empty()) {
      for (std::size_t k = 0; k < model.weights.size(); ++k) {
        opt.m_weights.push_back(Eigen::MatrixXd::Zero(model.weights[k].rows(),
                                                      model.weights[k].cols()));
        opt.v_weights.push_back(Eigen::MatrixXd::Zero(model.weights[k].rows(),
                                                      model.weights[k].cols()));
        opt.m_biases.push_back(Eigen::VectorXd::Zero(model.biases[k].size()));
        opt.v_biases.push_back(Eigen::VectorXd::Zero(model.biases[k].size()));
      }
    }
    ++opt.step;
    const double bc1 = 1.0 - std::pow(OptimizerState::kBeta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(OptimizerState::kBeta2, static_cast<double>(opt.step));
    auto adam_step = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = OptimizerState::kBeta1 * m + (1.0 - OptimizerState::kBeta1) * g;
      v = OptimizerState::kBeta2 * v.array().matrix() +
          (1.0 - OptimizerState::kBeta2) * g.array().square().matrix();
      param.array() -= opt.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + OptimizerState::kEpsilon);
    };
    for (std::size_t k = 0; k < model.weights.size(); ++k) {
      adam_step(model.weights[k], opt.m_weights[k], opt.v_weights[k], grads.weights[k]);
      adam_step(model.biases[k], opt.m_biases[k], opt.v_biases[k], grads.biases[k]);
    }
  }

  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    if (!model.weights[k].allFinite() || !model.biases[k].allFinite()) {
      throw std::runtime_error("apply_update: parameters became non-finite at layer " +
                               std::to_string(k));
    }
  }
}

void checkpoint_save(const MlpModel& model, const std::string& path) {
  validate_layers(model.layers);
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, model.rng_seed);
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const LayerSpec& spec : model.layers) {
    put_u32(out, static_cast<std::uint32_t>(spec.input_dim));
    put_u32(out, static_cast<std::uint32_t>(spec.output_dim));
    out.push_back(static_cast<char>(spec.activation));
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    for (Eigen::Index r = 0; r < model.weights[k].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[k].cols(); ++c) {
        put_f64(out, model.weights[k](r, c));
      }
    }
    for (Eigen::Index i = 0; i < model.biases[k].size(); ++i) {
      put_f64(out, model.biases[k](i));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw std::runtime_error("checkpoint_save: cannot open " + path);
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw std::runtime_error("checkpoint_save: write failed for " + path);
  }
}

MlpModel checkpoint_load(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("checkpoint_load: cannot open " + path);
  }
  std::string data((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());
  Reader r{data};

  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint_load: bad magic at byte offset 0 in " + path);
  }
  r.offset += sizeof(kMagic);

  const std::uint32_t version = r.u32("format version");
  if (version != kFormatVersion) {
    throw std::runtime_error("checkpoint_load: incompatible format version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kFormatVersion) + ")");
  }

  MlpModel model;
  model.rng_seed = r.u64("rng seed");
  const std::uint32_t num_layers = r.u32("layer count");
  if (num_layers == 0 || num_layers > 1024) {
    throw std::runtime_error("checkpoint_load: implausible layer count " +
                             std::to_string(num_layers));
  }
  for (std::uint32_t k = 0; k < num_layers; ++k) {
    LayerSpec spec;
    spec.input_dim = static_cast<int>(r.u32("layer input_dim"));
    spec.output_dim = static_cast<int>(r.u32("layer output_dim"));
    const std::uint8_t act = r.u8("layer activation");
    if (act > 1) {
      throw std::runtime_error("checkpoint_load: unknown activation code " +
                               std::to_string(act) + " at byte offset " +
                               std::to_string(r.offset - 1));
    }
    spec.activation = static_cast<Activation>(act);
    model.layers.push_back(spec);
  }
  validate_layers(model.layers);

  for (const LayerSpec& spec : model.layers) {
    Eigen::MatrixXd w(spec.output_dim, spec.input_dim);
    for (Eigen::Index row = 0; row < w.rows(); ++row) {
      for (Eigen::Index col = 0; col < w.cols(); ++col) {
        w(row, col) = r.f64("weight");
      }
    }
    Eigen::VectorXd b(spec.output_dim);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b(i) = r.f64("bias");
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  if (r.offset != data.size()) {
    throw std::runtime_error("checkpoint_load: trailing bytes at byte offset " +
                             std::to_string(r.offset) + " in " + path);
  }
  return model;
}

}  // namespace beamsense::nn
