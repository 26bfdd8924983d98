#pragma once

#include "lgv/collection.hpp"
#include "lgv/model.hpp"

#include <cstdint>
#include <filesystem>

namespace lgv {

// PCA of the deviations of a weight collection around its mean (the shift vector).
struct SubspaceBasis {
  WeightVector shift;
  Eigen::MatrixXd deviations;       // K x p, row k = w_k - shift
  Eigen::MatrixXd components;       // rank x p, orthonormal rows, descending singular value
  Eigen::VectorXd singular_values;  // min(K, p) entries, descending
  Eigen::VectorXd explained_ratio;  // sigma_i^2 / sum_j sigma_j^2
  std::size_t rank = 0;
  bool degenerate = false;  // every collected weight identical

  std::size_t count() const noexcept { return static_cast<std::size_t>(deviations.rows()); }
  // Explained variance ratio kept by the first c components.
  double cumulative_ratio(std::size_t c) const;
};

struct SvdOptions {
  // Above this parameter count the K x K Gram matrix is decomposed instead of P.
  std::size_t gram_threshold = 50000;
  // Singular values below rank_tolerance * sigma_max count as zero.
  double rank_tolerance = 1e-9;
};

// {center + e_k}, e_k ~ N(0, sigma^2 I).
WeightCollection rd_vicinity(const WeightVector& center, double sigma, std::size_t k, std::uint64_t seed);

// Exact SVD of the deviation matrix (no extra centering).
SubspaceBasis build_subspace(const WeightCollection& coll, const SvdOptions& opts = {});

// w_k -> shift + sum_{i <= C} <w_k - shift, v_i> v_i. C above the rank keeps every component.
WeightCollection project_top_c(const SubspaceBasis& basis, const WeightCollection& coll, std::size_t c);

// shift + P^T z_k with z_k ~ N(0, I_K).
WeightCollection sample_subspace(const SubspaceBasis& basis, std::size_t k_out, std::uint64_t seed);
// Same with caller-provided coefficients, one row of K entries per output weight.
WeightCollection sample_subspace(const SubspaceBasis& basis, const Eigen::MatrixXd& z);

// {new_shift + gamma * (w'_k - shift')} using the donor's deviations.
WeightCollection shift_deviations(const WeightVector& new_shift, const SubspaceBasis& donor, double gamma);

// Components as an LGVW file plus a JSON sidecar with singular values and ratios.
void save_basis(const std::filesystem::path& path, const ModelSpec& spec, const SubspaceBasis& basis);

}  // namespace lgv
