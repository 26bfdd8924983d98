#include "lgv/model.hpp"

#include "lgv/error.hpp"
#include "lgv/rng.hpp"

#include <bit>
#include <cmath>
#include <memory>
#include <random>

namespace lgv {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstLayerMap = Eigen::Map<const RowMajorMatrix>;
using LayerMap = Eigen::Map<RowMajorMatrix>;

struct LayerView {
  ConstLayerMap weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};

LayerView layer_view(const ModelSpec& spec, const Eigen::VectorXd& w, std::size_t l) {
  const auto in = static_cast<Eigen::Index>(spec.layer_widths()[l]);
  const auto out = static_cast<Eigen::Index>(spec.layer_widths()[l + 1]);
  const double* base = w.data() + spec.layer_offset(l);
  return {ConstLayerMap(base, out, in), Eigen::Map<const Eigen::VectorXd>(base + out * in, out)};
}

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  if (a == Activation::relu) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Derivative of the activation evaluated from pre-activations. ReLU'(0) is 0.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& z) {
  if (a == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
  return (1.0 - z.array().tanh().square()).matrix();
}

struct Forward {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // post[0] = inputs, post[l+1] = act(pre[l]) for hidden layers
};

Forward forward(const ModelSpec& spec, const Eigen::VectorXd& w, const Eigen::MatrixXd& x) {
  Forward f;
  const std::size_t layers = spec.num_layers();
  f.pre.reserve(layers);
  f.post.reserve(layers);
  f.post.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto view = layer_view(spec, w, l);
    Eigen::MatrixXd z = f.post.back() * view.weight.transpose();
    z.rowwise() += view.bias.transpose();
    f.pre.push_back(std::move(z));
    if (l + 1 < layers) f.post.push_back(activate(spec.activation(), f.pre.back()));
  }
  return f;
}

// Row-wise softmax probabilities and per-example cross-entropy.
void softmax_xent(const Eigen::MatrixXd& z, const std::vector<int>& labels, Eigen::MatrixXd& probs,
                  Eigen::VectorXd& losses) {
  const Eigen::Index n = z.rows();
  probs.resize(z.rows(), z.cols());
  losses.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - m).exp().matrix();
    const double s = e.sum();
    probs.row(i) = e / s;
    losses[i] = std::log(s) + m - z(i, labels[static_cast<std::size_t>(i)]);
  }
}

struct Backward {
  double loss = 0.0;
  Eigen::VectorXd weight_grad;
  Eigen::MatrixXd input_grad;
};

// Gradients of the mean loss, or of the summed loss when `summed` is set.
Backward backward(const ModelSpec& spec, const Eigen::VectorXd& w, const Batch& b, bool want_weights,
                  bool want_inputs, bool summed = false) {
  const auto n = static_cast<Eigen::Index>(b.size());
  Forward f = forward(spec, w, b.inputs);
  Eigen::MatrixXd probs;
  Eigen::VectorXd losses;
  softmax_xent(f.pre.back(), b.labels, probs, losses);

  Backward out;
  out.loss = losses.mean();
  Eigen::MatrixXd delta = probs;
  for (Eigen::Index i = 0; i < n; ++i) delta(i, b.labels[static_cast<std::size_t>(i)]) -= 1.0;
  if (!summed) delta /= static_cast<double>(n);

  if (want_weights) out.weight_grad = Eigen::VectorXd::Zero(w.size());
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const auto view = layer_view(spec, w, l);
    if (want_weights) {
      const auto in = view.weight.cols();
      const auto outw = view.weight.rows();
      double* base = out.weight_grad.data() + spec.layer_offset(l);
      LayerMap(base, outw, in) = delta.transpose() * f.post[l];
      Eigen::Map<Eigen::VectorXd>(base + outw * in, outw) = delta.colwise().sum().transpose();
    }
    if (l == 0 && !want_inputs) break;
    Eigen::MatrixXd upstream = delta * view.weight;
    if (l == 0) {
      out.input_grad = std::move(upstream);
    } else {
      delta = upstream.cwiseProduct(activation_slope(spec.activation(), f.pre[l - 1]));
    }
  }
  return out;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + name + "' (expected relu or tanh)");
}

ModelSpec::ModelSpec(std::vector<std::size_t> layer_widths, Activation activation)
    : widths_(std::move(layer_widths)), activation_(activation) {
  if (widths_.size() < 2) throw InvalidArgument("model needs at least an input and an output width");
  for (std::size_t w : widths_) {
    if (w == 0) throw InvalidArgument("layer widths must be positive");
  }
  std::uint64_t h = fnv1a(to_string(activation_));
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(parameter_count_);
    parameter_count_ += (widths_[l] + 1) * widths_[l + 1];
  }
  for (std::size_t w : widths_) h = mix_seed(h ^ w);
  hash_ = h;
}

WeightVector WeightVector::zeros(const ModelSpec& spec) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.parameter_count())), spec.hash()};
}

Batch Batch::rows(const std::vector<std::size_t>& indices) const {
  Batch out;
  out.inputs.resize(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(labels.at(indices[i]));
  }
  return out;
}

std::uint64_t content_hash(const Eigen::VectorXd& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 64; b += 8) {
      h ^= (bits >> b) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void check_weights(const ModelSpec& spec, const WeightVector& w) {
  if (w.spec_hash != spec.hash()) throw InvalidArgument("weight vector belongs to a different model spec");
  if (static_cast<std::size_t>(w.size()) != spec.parameter_count()) {
    throw InvalidArgument("weight vector has " + std::to_string(w.size()) + " entries, spec expects " +
                          std::to_string(spec.parameter_count()));
  }
}

void check_batch(const ModelSpec& spec, const Batch& b) {
  if (b.size() == 0) throw InvalidArgument("empty batch");
  if (static_cast<std::size_t>(b.inputs.rows()) != b.size()) {
    throw InvalidArgument("batch has " + std::to_string(b.inputs.rows()) + " input rows but " +
                          std::to_string(b.size()) + " labels");
  }
  if (static_cast<std::size_t>(b.inputs.cols()) != spec.input_dim()) {
    throw InvalidArgument("batch input dimension " + std::to_string(b.inputs.cols()) +
                          " does not match model input dimension " + std::to_string(spec.input_dim()));
  }
  const auto classes = static_cast<int>(spec.num_classes());
  for (int y : b.labels) {
    if (y < 0 || y >= classes) throw InvalidArgument("label " + std::to_string(y) + " out of range");
  }
}

WeightVector init_weights(const ModelSpec& spec, std::uint64_t seed) {
  WeightVector w = WeightVector::zeros(spec);
  Rng rng = make_rng(derive_seed(seed, "init"));
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_widths()[l];
    const std::size_t out = spec.layer_widths()[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t base = spec.layer_offset(l);
    for (std::size_t k = 0; k < in * out; ++k) w.values[static_cast<Eigen::Index>(base + k)] = dist(rng);
  }
  return w;
}

Eigen::MatrixXd logits(const ModelSpec& spec, const WeightVector& w, const Eigen::MatrixXd& inputs) {
  check_weights(spec, w);
  if (static_cast<std::size_t>(inputs.cols()) != spec.input_dim()) {
    throw InvalidArgument("input dimension does not match model");
  }
  return forward(spec, w.values, inputs).pre.back();
}

std::vector<int> predict(const ModelSpec& spec, const WeightVector& w, const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd z = logits(spec, w, inputs);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
      if (z(i, c) > z(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  check_batch(spec, b);
  const auto pred = predict(spec, w, b.inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == b.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

Eigen::VectorXd per_example_loss(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  check_weights(spec, w);
  check_batch(spec, b);
  const Forward f = forward(spec, w.values, b.inputs);
  Eigen::MatrixXd probs;
  Eigen::VectorXd losses;
  softmax_xent(f.pre.back(), b.labels, probs, losses);
  return losses;
}

double loss(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  return per_example_loss(spec, w, b).mean();
}

Eigen::MatrixXd grad_input(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  check_weights(spec, w);
  check_batch(spec, b);
  return backward(spec, w.values, b, false, true).input_grad;
}

Eigen::MatrixXd grad_input_per_example(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  check_weights(spec, w);
  check_batch(spec, b);
  return backward(spec, w.values, b, false, true, true).input_grad;
}

LossAndGrad loss_and_grad_weights(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  check_weights(spec, w);
  check_batch(spec, b);
  Backward r = backward(spec, w.values, b, true, false);
  return {r.loss, std::move(r.weight_grad)};
}

WeightVector grad_weights(const ModelSpec& spec, const WeightVector& w, const Batch& b) {
  return {loss_and_grad_weights(spec, w, b).grad, spec.hash()};
}

Objective make_objective(const ModelSpec& spec, const Batch& b) {
  check_batch(spec, b);
  Objective obj;
  obj.loss = [spec, b](const Eigen::VectorXd& w) { return loss(spec, WeightVector(w, spec.hash()), b); };
  obj.gradient = [spec, b](const Eigen::VectorXd& w) {
    return loss_and_grad_weights(spec, WeightVector(w, spec.hash()), b).grad;
  };
  return obj;
}

Objective quadratic_objective(Eigen::MatrixXd a) {
  if (a.rows() != a.cols()) throw InvalidArgument("quadratic objective needs a square matrix");
  auto shared = std::make_shared<const Eigen::MatrixXd>(std::move(a));
  Objective obj;
  obj.loss = [shared](const Eigen::VectorXd& w) { return 0.5 * w.dot(*shared * w); };
  obj.gradient = [shared](const Eigen::VectorXd& w) -> Eigen::VectorXd { return *shared * w; };
  return obj;
}

Objective scaled(Objective obj, double factor) {
  Objective out;
  out.loss = [inner = obj.loss, factor](const Eigen::VectorXd& w) { return factor * inner(w); };
  out.gradient = [inner = obj.gradient, factor](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return factor * inner(w);
  };
  return out;
}

Eigen::VectorXd hvp(const Objective& obj, const Eigen::VectorXd& w, const Eigen::VectorXd& v) {
  if (v.size() != w.size()) throw InvalidArgument("hvp direction length does not match weights");
  const double norm = v.norm();
  if (!(norm > 0.0)) throw InvalidArgument("hvp direction must be non-zero");
  const Eigen::VectorXd u = v / norm;
  const double h = 1e-4 * (1.0 + w.norm());
  const Eigen::VectorXd plus = obj.gradient(w + h * u);
  const Eigen::VectorXd minus = obj.gradient(w - h * u);
  return (plus - minus) * (norm / (2.0 * h));
}

WeightVector hvp(const ModelSpec& spec, const WeightVector& w, const Batch& b, const WeightVector& v) {
  check_weights(spec, w);
  check_weights(spec, v);
  return {hvp(make_objective(spec, b), w.values, v.values), spec.hash()};
}

}  // namespace lgv
