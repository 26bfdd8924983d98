#include "lgv/surrogates.hpp"

#include "lgv/error.hpp"
#include "lgv/rng.hpp"
#include "lgv/training.hpp"
#include "lgv/weights_io.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace lgv {

namespace {

// Largest-magnitude coordinate made positive so component identity is reproducible.
void fix_sign(Eigen::MatrixXd& m, Eigen::Index row) {
  auto v = m.row(row);
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
}

void set_spectrum(SubspaceBasis& b, const Eigen::VectorXd& sigma, double tol) {
  b.singular_values = sigma;
  const double total = sigma.squaredNorm();
  const double smax = sigma.size() > 0 ? sigma[0] : 0.0;
  b.degenerate = !(smax > 0.0);
  b.rank = 0;
  if (!b.degenerate) {
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      if (sigma[i] > tol * smax) ++b.rank;
    }
    b.explained_ratio = sigma.array().square() / total;
  } else {
    b.explained_ratio = Eigen::VectorXd::Zero(sigma.size());
  }
}

}  // namespace

double SubspaceBasis::cumulative_ratio(std::size_t c) const {
  const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(c), explained_ratio.size());
  return explained_ratio.head(n).sum();
}

WeightCollection rd_vicinity(const WeightVector& center, double sigma, std::size_t k, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("rd_vicinity: sigma must be >= 0");
  if (k < 1) throw InvalidArgument("rd_vicinity: K must be >= 1");
  WeightCollection out;
  out.meta.kind = "rd";
  out.meta.source_hash = content_hash(center.values);
  Rng rng = make_rng(derive_seed(seed, "rd"));
  std::normal_distribution<double> normal(0.0, 1.0);
  out.weights.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    WeightVector w = center;
    if (sigma > 0.0) {
      for (Eigen::Index j = 0; j < w.size(); ++j) w.values[j] += sigma * normal(rng);
    }
    out.weights.push_back(std::move(w));
  }
  return out;
}

SubspaceBasis build_subspace(const WeightCollection& coll, const SvdOptions& opts) {
  check_collection(coll);
  if (coll.size() < 2) throw InvalidArgument("build_subspace: need at least 2 weights");
  const auto k = static_cast<Eigen::Index>(coll.size());
  const Eigen::Index p = coll[0].size();

  SubspaceBasis b;
  b.shift = swa(coll);
  b.deviations.resize(k, p);
  for (Eigen::Index i = 0; i < k; ++i) {
    b.deviations.row(i) = (coll[static_cast<std::size_t>(i)].values - b.shift.values).transpose();
  }
  const double scale = 1.0 + b.deviations.cwiseAbs().maxCoeff() + b.shift.values.cwiseAbs().maxCoeff();
  if (b.deviations.colwise().sum().cwiseAbs().maxCoeff() > 1e-8 * scale * static_cast<double>(k)) {
    throw NumericError("build_subspace: deviation rows do not sum to zero");
  }

  // Identical weights leave only rounding noise from the mean.
  const double noise = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, b.shift.values.cwiseAbs().maxCoeff());
  if (b.deviations.cwiseAbs().maxCoeff() <= noise) {
    b.deviations.setZero();
    set_spectrum(b, Eigen::VectorXd::Zero(std::min(k, p)), opts.rank_tolerance);
    b.components.resize(0, p);
    return b;
  }

  if (static_cast<std::size_t>(p) <= opts.gram_threshold) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b.deviations, Eigen::ComputeThinV);
    set_spectrum(b, svd.singularValues(), opts.rank_tolerance);
    b.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(b.rank)).transpose();
  } else {
    // P P^T = U S^2 U^T, and v_i = P^T u_i / sigma_i.
    const Eigen::MatrixXd gram = b.deviations * b.deviations.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
    const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
    // Squaring the spectrum costs half the digits: values under sqrt(eps) * sigma_max are noise.
    const double tol = std::max(opts.rank_tolerance, std::sqrt(static_cast<double>(k) * std::numeric_limits<double>::epsilon()) * 10.0);
    set_spectrum(b, lambda.cwiseMax(0.0).cwiseSqrt(), tol);
    b.components.resize(static_cast<Eigen::Index>(b.rank), p);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(b.rank); ++i) {
      b.components.row(i) = (b.deviations.transpose() * u.col(i)).transpose() / b.singular_values[i];
    }
  }
  for (Eigen::Index i = 0; i < b.components.rows(); ++i) fix_sign(b.components, i);
  return b;
}

WeightCollection project_top_c(const SubspaceBasis& basis, const WeightCollection& coll, std::size_t c) {
  check_collection(coll);
  if (c > basis.count()) {
    throw InvalidArgument("project_top_c: C = " + std::to_string(c) + " exceeds K = " + std::to_string(basis.count()));
  }
  if (coll[0].size() != basis.shift.size()) throw InvalidArgument("project_top_c: dimension mismatch");
  const auto used = static_cast<Eigen::Index>(std::min(c, basis.rank));
  WeightCollection out;
  out.meta = coll.meta;
  out.meta.kind = "projected";
  out.weights.reserve(coll.size());
  for (const auto& w : coll.weights) {
    if (used == 0) {
      out.weights.push_back(basis.shift);
      continue;
    }
    const auto top = basis.components.topRows(used);
    const Eigen::VectorXd coef = top * (w.values - basis.shift.values);
    out.weights.emplace_back(basis.shift.values + top.transpose() * coef, basis.shift.spec_hash);
  }
  return out;
}

WeightCollection sample_subspace(const SubspaceBasis& basis, std::size_t k_out, std::uint64_t seed) {
  if (k_out < 1) throw InvalidArgument("sample_subspace: K_out must be >= 1");
  Rng rng = make_rng(derive_seed(seed, "subspace"));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(k_out), basis.deviations.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = normal(rng);
  }
  return sample_subspace(basis, z);
}

WeightCollection sample_subspace(const SubspaceBasis& basis, const Eigen::MatrixXd& z) {
  if (z.cols() != basis.deviations.rows()) throw InvalidArgument("sample_subspace: z must have K columns");
  WeightCollection out;
  out.meta.kind = "subspace_rd";
  out.weights.reserve(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out.weights.emplace_back(basis.shift.values + basis.deviations.transpose() * z.row(i).transpose(),
                             basis.shift.spec_hash);
  }
  return out;
}

WeightCollection shift_deviations(const WeightVector& new_shift, const SubspaceBasis& donor, double gamma) {
  if (new_shift.size() != donor.deviations.cols() || new_shift.spec_hash != donor.shift.spec_hash) {
    throw InvalidArgument("shift_deviations: new shift and donor subspace belong to different models");
  }
  WeightCollection out;
  out.meta.kind = "shifted";
  out.meta.source_hash = content_hash(new_shift.values);
  out.weights.reserve(donor.count());
  for (Eigen::Index i = 0; i < donor.deviations.rows(); ++i) {
    out.weights.emplace_back(new_shift.values + gamma * donor.deviations.row(i).transpose(), new_shift.spec_hash);
  }
  return out;
}

void save_basis(const std::filesystem::path& path, const ModelSpec& spec, const SubspaceBasis& basis) {
  write_lgvw(path, basis.components);
  nlohmann::json side;
  side["model"] = spec_to_json(spec);
  side["rank"] = basis.rank;
  side["degenerate"] = basis.degenerate;
  side["count"] = basis.count();
  side["singular_values"] = std::vector<double>(basis.singular_values.begin(), basis.singular_values.end());
  side["explained_ratio"] = std::vector<double>(basis.explained_ratio.begin(), basis.explained_ratio.end());
  std::ofstream os(sidecar_path(path), std::ios::trunc);
  if (!os) throw IoError("cannot write " + sidecar_path(path).string());
  os << side.dump(2) << '\n';
}

}  // namespace lgv
