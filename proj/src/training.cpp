#include "lgv/training.hpp"

#include "lgv/error.hpp"
#include "lgv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lgv {

double LrSchedule::at_epoch(std::size_t epoch) const {
  if (kind == Kind::constant) return lr;
  return lr * std::pow(factor, static_cast<double>(epoch / std::max<std::size_t>(every, 1)));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("train: momentum must be in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train: weight_decay must be >= 0");
  if (!(schedule.lr >= 0.0)) throw InvalidArgument("train: learning rate must be >= 0");
  if (schedule.kind == LrSchedule::Kind::step_decay && schedule.every < 1) {
    throw InvalidArgument("train: step_decay period must be >= 1");
  }
}

SgdTrajectory::SgdTrajectory(const ModelSpec& spec, const Batch& train, WeightVector start, std::size_t batch_size,
                             double momentum, double weight_decay, std::uint64_t seed)
    : spec_(spec),
      train_(train),
      w_(std::move(start)),
      velocity_(Eigen::VectorXd::Zero(w_.size())),
      batch_size_(batch_size),
      momentum_(momentum),
      weight_decay_(weight_decay),
      rng_(make_rng(derive_seed(seed, "sgd-shuffle"))),
      order_(train.size()),
      steps_per_epoch_((train.size() + batch_size - 1) / batch_size) {
  check_weights(spec_, w_);
  check_batch(spec_, train_);
  std::iota(order_.begin(), order_.end(), 0);
}

void SgdTrajectory::step(double lr) {
  const std::size_t pos = steps_ % steps_per_epoch_;
  if (pos == 0) std::shuffle(order_.begin(), order_.end(), rng_);
  const std::size_t begin = pos * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, order_.size());
  const Batch mini = train_.rows(std::vector<std::size_t>(order_.begin() + begin, order_.begin() + end));

  const LossAndGrad lg = loss_and_grad_weights(spec_, w_, mini);
  if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
    throw TrainingDiverged(epoch(), "non-finite loss or gradient at step " + std::to_string(steps_));
  }
  velocity_ = momentum_ * velocity_ + lg.grad;
  w_.values -= lr * (velocity_ + weight_decay_ * w_.values);
  if (!w_.all_finite()) throw TrainingDiverged(epoch(), "non-finite weights at step " + std::to_string(steps_));
  ++steps_;
}

WeightVector train(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg,
                   const std::optional<WeightVector>& w_init, std::vector<TrainLogRow>* log) {
  cfg.validate();
  SgdTrajectory sgd(spec, data.train, w_init ? *w_init : init_weights(spec, cfg.seed), cfg.batch_size,
                    cfg.momentum, cfg.weight_decay, cfg.seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = cfg.schedule.at_epoch(e);
    for (std::size_t s = 0; s < sgd.steps_per_epoch(); ++s) sgd.step(lr);
    if (log != nullptr) {
      const double val_acc = data.val.size() > 0 ? accuracy(spec, sgd.weights(), data.val) : 0.0;
      log->push_back({e + 1, loss(spec, sgd.weights(), data.train), val_acc});
    }
  }
  return sgd.weights();
}

WeightCollection collect_lgv(const ModelSpec& spec, const Dataset& data, const WeightVector& w0,
                             const LgvConfig& cfg) {
  if (cfg.n_weights < 1) throw InvalidArgument("collect_lgv: K must be >= 1");
  if (cfg.n_epochs < 1) throw InvalidArgument("collect_lgv: n_epochs must be >= 1");
  if (!(cfg.lr > 0.0)) throw InvalidArgument("collect_lgv: learning rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw InvalidArgument("collect_lgv: momentum must be in [0, 1)");
  if (cfg.batch_size < 1) throw InvalidArgument("collect_lgv: batch_size must be >= 1");

  SgdTrajectory sgd(spec, data.train, w0, cfg.batch_size, cfg.momentum, cfg.weight_decay, cfg.seed);
  const std::size_t total = cfg.n_epochs * sgd.steps_per_epoch();
  if (cfg.n_weights > total) {
    throw InvalidArgument("collect_lgv: K = " + std::to_string(cfg.n_weights) + " exceeds the " +
                          std::to_string(total) + " SGD steps available");
  }

  WeightCollection out;
  out.meta.kind = "lgv";
  out.meta.lr = cfg.lr;
  out.meta.epochs = static_cast<double>(cfg.n_epochs);
  out.meta.samples_per_epoch = static_cast<double>(cfg.n_weights) / static_cast<double>(cfg.n_epochs);
  out.meta.source_hash = content_hash(w0.values);
  out.weights.reserve(cfg.n_weights);
  for (std::size_t k = 1; k <= cfg.n_weights; ++k) {
    const std::size_t boundary = k * total / cfg.n_weights;
    while (sgd.steps_taken() < boundary) sgd.step(cfg.lr);
    out.weights.push_back(sgd.weights());
  }
  return out;
}

WeightVector swa(const WeightCollection& coll) {
  check_collection(coll);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(coll[0].size());
  for (const auto& w : coll.weights) sum += w.values;
  return {sum / static_cast<double>(coll.size()), coll[0].spec_hash};
}

}  // namespace lgv
