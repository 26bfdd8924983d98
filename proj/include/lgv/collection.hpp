#pragma once

#include "lgv/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lgv {

struct CollectionMeta {
  std::string kind;  // e.g. "lgv", "rd", "projected"
  double lr = 0.0;
  double epochs = 0.0;
  double samples_per_epoch = 0.0;
  std::uint64_t source_hash = 0;
};

// Ordered set of weight vectors sharing one model spec.
struct WeightCollection {
  std::vector<WeightVector> weights;
  CollectionMeta meta;

  std::size_t size() const noexcept { return weights.size(); }
  bool empty() const noexcept { return weights.empty(); }
  const WeightVector& operator[](std::size_t i) const { return weights[i]; }

  static WeightCollection single(WeightVector w, std::string kind = "single");
  static WeightCollection copies(const WeightVector& w, std::size_t k, std::string kind);
};

// Throws InvalidArgument when empty or when members disagree on spec or length.
void check_collection(const WeightCollection& c);

}  // namespace lgv
