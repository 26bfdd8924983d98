#include "lgv/collection.hpp"

#include "lgv/error.hpp"

namespace lgv {

WeightCollection WeightCollection::single(WeightVector w, std::string kind) {
  WeightCollection c;
  c.meta.kind = std::move(kind);
  c.weights.push_back(std::move(w));
  return c;
}

WeightCollection WeightCollection::copies(const WeightVector& w, std::size_t k, std::string kind) {
  WeightCollection c;
  c.meta.kind = std::move(kind);
  c.weights.assign(k, w);
  return c;
}

void check_collection(const WeightCollection& c) {
  if (c.empty()) throw InvalidArgument("weight collection is empty");
  const auto& first = c.weights.front();
  for (const auto& w : c.weights) {
    if (w.spec_hash != first.spec_hash || w.size() != first.size()) {
      throw InvalidArgument("weight collection mixes model specs");
    }
  }
}

}  // namespace lgv
