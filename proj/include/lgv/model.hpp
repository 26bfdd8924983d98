#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lgv {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Architecture of a fully connected classifier with softmax cross-entropy loss.
// Widths run from the input dimension to the class count.
class ModelSpec {
 public:
  ModelSpec(std::vector<std::size_t> layer_widths, Activation activation);

  const std::vector<std::size_t>& layer_widths() const noexcept { return widths_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t num_classes() const noexcept { return widths_.back(); }
  std::size_t num_layers() const noexcept { return widths_.size() - 1; }
  std::size_t parameter_count() const noexcept { return parameter_count_; }
  // Offset of layer l's weight block inside the flat vector; its bias follows the weights.
  std::size_t layer_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::uint64_t hash() const noexcept { return hash_; }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.widths_ == b.widths_ && a.activation_ == b.activation_;
  }

 private:
  std::vector<std::size_t> widths_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::size_t parameter_count_ = 0;
  std::uint64_t hash_ = 0;
};

// Flat parameter vector bound to the spec it was created for. Layout per layer:
// row-major (out x in) weight matrix followed by the out-sized bias.
struct WeightVector {
  Eigen::VectorXd values;
  std::uint64_t spec_hash = 0;

  WeightVector() = default;
  WeightVector(Eigen::VectorXd v, std::uint64_t hash) : values(std::move(v)), spec_hash(hash) {}

  static WeightVector zeros(const ModelSpec& spec);

  Eigen::Index size() const noexcept { return values.size(); }
  bool all_finite() const { return values.allFinite(); }
};

struct Batch {
  Eigen::MatrixXd inputs;  // n x d, one example per row
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  Batch rows(const std::vector<std::size_t>& indices) const;
};

// FNV-1a over the raw bit patterns; identifies weight contents in artifact metadata.
std::uint64_t content_hash(const Eigen::VectorXd& values);

// Throws InvalidArgument unless w belongs to spec and has the right length.
void check_weights(const ModelSpec& spec, const WeightVector& w);
void check_batch(const ModelSpec& spec, const Batch& b);

// Glorot-uniform weights, zero biases.
WeightVector init_weights(const ModelSpec& spec, std::uint64_t seed);

Eigen::MatrixXd logits(const ModelSpec& spec, const WeightVector& w, const Eigen::MatrixXd& inputs);
// Argmax per row; ties go to the lowest class index.
std::vector<int> predict(const ModelSpec& spec, const WeightVector& w, const Eigen::MatrixXd& inputs);
double accuracy(const ModelSpec& spec, const WeightVector& w, const Batch& b);

// Mean cross-entropy over the batch.
double loss(const ModelSpec& spec, const WeightVector& w, const Batch& b);
Eigen::VectorXd per_example_loss(const ModelSpec& spec, const WeightVector& w, const Batch& b);

// Gradient of the mean loss with respect to the inputs (n x d).
Eigen::MatrixXd grad_input(const ModelSpec& spec, const WeightVector& w, const Batch& b);
// Row i holds the gradient of example i's own loss (no 1/n factor).
Eigen::MatrixXd grad_input_per_example(const ModelSpec& spec, const WeightVector& w, const Batch& b);
WeightVector grad_weights(const ModelSpec& spec, const WeightVector& w, const Batch& b);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};
LossAndGrad loss_and_grad_weights(const ModelSpec& spec, const WeightVector& w, const Batch& b);

// Scalar objective over a flat weight vector. Geometry probes are written against
// this so they can run on closed-form test objectives as well as networks.
struct Objective {
  std::function<double(const Eigen::VectorXd&)> loss;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

Objective make_objective(const ModelSpec& spec, const Batch& b);
// L(w) = 0.5 * w^T A w with A symmetric.
Objective quadratic_objective(Eigen::MatrixXd a);
Objective scaled(Objective obj, double factor);

// Hessian-vector product from central differences of the gradient along v / ||v||.
Eigen::VectorXd hvp(const Objective& obj, const Eigen::VectorXd& w, const Eigen::VectorXd& v);
WeightVector hvp(const ModelSpec& spec, const WeightVector& w, const Batch& b, const WeightVector& v);

}  // namespace lgv
