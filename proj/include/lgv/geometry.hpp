#pragma once

#include "lgv/attack.hpp"
#include "lgv/collection.hpp"
#include "lgv/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace lgv {

struct EigenEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool degenerate = false;      // H v0 vanished; value reported as 0
  std::vector<double> history;  // Rayleigh quotient per iteration
};

// Power iteration on Hessian-vector products: v <- Hv / ||Hv||, lambda = v^T H v.
// Stops once the relative change of lambda drops below tol.
EigenEstimate hessian_max_eigenvalue(const Objective& obj, const Eigen::VectorXd& w, std::size_t max_iters,
                                     double tol, std::uint64_t seed);
EigenEstimate hessian_max_eigenvalue(const ModelSpec& spec, const WeightVector& w, const Batch& b,
                                     std::size_t max_iters, double tol, std::uint64_t seed);

struct TraceEstimate {
  double value = 0.0;
  double sem = 0.0;  // standard error of the probe mean
  std::vector<double> samples;
};

// Hutchinson estimator with Rademacher probes.
TraceEstimate hessian_trace(const Objective& obj, const Eigen::VectorXd& w, std::size_t n_probes, std::uint64_t seed);
TraceEstimate hessian_trace(const ModelSpec& spec, const WeightVector& w, const Batch& b, std::size_t n_probes,
                            std::uint64_t seed);

// Unit vector e / ||e|| with e ~ N(0, I_p). Depends only on (p, seed).
Eigen::VectorXd random_direction(Eigen::Index p, std::uint64_t seed);

struct RayProbe {
  Eigen::VectorXd origin;
  Eigen::VectorXd direction;
  std::vector<double> alphas;
  std::vector<double> losses;
};

// Evaluate the loss of a target on adversarial examples crafted against the displaced surrogate.
struct AdversarialLoss {
  NamedModel target;
  AttackConfig attack;
};

// Natural mode evaluates the surrogate's own loss at w + alpha d.
RayProbe ray_losses(const Objective& obj, const Eigen::VectorXd& w, std::uint64_t direction_seed,
                    const std::vector<double>& alphas);
RayProbe ray_losses(const ModelSpec& spec, const WeightVector& w, std::uint64_t direction_seed,
                    const std::vector<double>& alphas, const Batch& b,
                    const std::optional<AdversarialLoss>& adversarial = std::nullopt);

// Losses along w(alpha) = alpha * w_a + (1 - alpha) * w_b. Alphas may leave [0, 1].
RayProbe interpolate(const Objective& obj, const Eigen::VectorXd& w_a, const Eigen::VectorXd& w_b,
                     const std::vector<double>& alphas);
RayProbe interpolate(const ModelSpec& spec, const WeightVector& w_a, const WeightVector& w_b,
                     const std::vector<double>& alphas, const Batch& b,
                     const std::optional<AdversarialLoss>& adversarial = std::nullopt);

struct PlaneBasis {
  Eigen::VectorXd u;  // unit, along x_adv_1 - x
  Eigen::VectorXd v;  // unit, Gram-Schmidt remainder of x_adv_2 - x
  // Coordinates of a point in the plane through `origin`.
  Eigen::Vector2d coordinates(const Eigen::VectorXd& origin, const Eigen::VectorXd& point) const;
};

// Throws DegeneratePlane when x_adv_1 == x or the three points are collinear.
PlaneBasis plane_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& x_adv_1, const Eigen::VectorXd& x_adv_2);

struct PlaneMap {
  Eigen::VectorXd anchor;
  PlaneBasis basis;
  double radius = 0.0;
  std::vector<double> coords;  // shared by both axes, spanning [-1.2 r, 1.2 r]
  Eigen::MatrixXd loss;        // loss(i, j) at anchor + coords[i] u + coords[j] v
  bool in_disk(std::size_t i, std::size_t j) const;
};

// Ensemble-mean loss of label y over a grid_n x grid_n lattice in the plane. Grid points are
// clipped to `box` before evaluation.
PlaneMap disk_loss_map(const ModelSpec& spec, const WeightCollection& weights, const Eigen::VectorXd& x, int y,
                       const PlaneBasis& basis, double eps, std::size_t grid_n, const InputBox& box = {});

void write_ray_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, RayProbe>>& rays,
                   const std::string& comment = "");
void write_plane_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, PlaneMap>>& maps,
                     const std::string& comment = "");

}  // namespace lgv
