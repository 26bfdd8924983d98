#pragma once

#include "lgv/collection.hpp"
#include "lgv/data.hpp"
#include "lgv/model.hpp"
#include "lgv/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lgv {

struct LrSchedule {
  enum class Kind { constant, step_decay };
  Kind kind = Kind::constant;
  double lr = 0.1;
  double factor = 0.1;    // step_decay multiplier
  std::size_t every = 1;  // step_decay period in epochs

  static LrSchedule constant(double lr) { return {Kind::constant, lr, 1.0, 1}; }
  static LrSchedule step_decay(double lr, double factor, std::size_t every) {
    return {Kind::step_decay, lr, factor, every};
  }
  double at_epoch(std::size_t epoch) const;
};

struct TrainConfig {
  std::size_t epochs = 1;
  LrSchedule schedule;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

// Mini-batch SGD with heavy-ball momentum:
//   v <- momentum * v + g;  w <- w - lr * (v + weight_decay * w)
// Batches are reshuffled at the start of each epoch from a seeded stream.
class SgdTrajectory {
 public:
  SgdTrajectory(const ModelSpec& spec, const Batch& train, WeightVector start, std::size_t batch_size,
                double momentum, double weight_decay, std::uint64_t seed);

  // Throws TrainingDiverged on a non-finite loss or weight.
  void step(double lr);

  std::size_t steps_per_epoch() const noexcept { return steps_per_epoch_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  std::size_t epoch() const noexcept { return steps_ / steps_per_epoch_; }
  const WeightVector& weights() const noexcept { return w_; }

 private:
  const ModelSpec& spec_;
  const Batch& train_;
  WeightVector w_;
  Eigen::VectorXd velocity_;
  std::size_t batch_size_;
  double momentum_;
  double weight_decay_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t steps_per_epoch_;
  std::size_t steps_ = 0;
};

// Trains from w_init (or seeded Glorot init). Appends one row per epoch to `log` if given.
WeightVector train(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg,
                   const std::optional<WeightVector>& w_init = std::nullopt,
                   std::vector<TrainLogRow>* log = nullptr);

struct LgvConfig {
  std::size_t n_epochs = 10;
  std::size_t n_weights = 40;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

// Constant-lr SGD from w0; snapshots at the end of each of K equal slices of the
// n_epochs * steps_per_epoch step budget. The momentum buffer carries across slices.
WeightCollection collect_lgv(const ModelSpec& spec, const Dataset& data, const WeightVector& w0,
                             const LgvConfig& cfg);

// Coordinate-wise mean.
WeightVector swa(const WeightCollection& coll);

}  // namespace lgv
