#include "lgv/geometry.hpp"

#include "lgv/error.hpp"
#include "lgv/format.hpp"
#include "lgv/rng.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace lgv {

namespace {

std::vector<double> evaluate_path(const std::vector<Eigen::VectorXd>& points,
                                  const std::function<double(const Eigen::VectorXd&)>& eval) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double v = eval(p);
    if (!std::isfinite(v)) throw NumericError("non-finite loss along probe path");
    out.push_back(v);
  }
  return out;
}

// Loss of a model at a weight point: natural loss, or target loss on adversarial examples
// crafted against that point.
std::function<double(const Eigen::VectorXd&)> model_evaluator(const ModelSpec& spec, const Batch& b,
                                                              const std::optional<AdversarialLoss>& adv) {
  if (!adv) {
    return [&spec, &b](const Eigen::VectorXd& w) { return loss(spec, WeightVector(w, spec.hash()), b); };
  }
  return [&spec, &b, &adv](const Eigen::VectorXd& w) {
    const auto surrogate = WeightCollection::single(WeightVector(w, spec.hash()));
    Batch crafted{ifgsm(spec, surrogate, b, adv->attack), b.labels};
    return loss(adv->target.spec, adv->target.weights, crafted);
  };
}

void check_alphas(const std::vector<double>& alphas) {
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] >= 0.0) || (i > 0 && alphas[i] < alphas[i - 1])) {
      throw InvalidArgument("ray alphas must be non-negative and ascending");
    }
  }
}

}  // namespace

EigenEstimate hessian_max_eigenvalue(const Objective& obj, const Eigen::VectorXd& w, std::size_t max_iters,
                                     double tol, std::uint64_t seed) {
  if (!(tol > 0.0)) throw InvalidArgument("hessian_max_eigenvalue: tol must be positive");
  if (max_iters < 1) throw InvalidArgument("hessian_max_eigenvalue: max_iters must be >= 1");
  EigenEstimate est;
  Eigen::VectorXd hv = hvp(obj, w, random_direction(w.size(), derive_seed(seed, "power-iteration")));
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const double norm = hv.norm();
    if (!(norm > 0.0)) {
      est.degenerate = it == 0;
      break;
    }
    const Eigen::VectorXd v = hv / norm;
    hv = hvp(obj, w, v);
    const double lambda = v.dot(hv);
    if (!std::isfinite(lambda)) throw NumericError("hessian_max_eigenvalue: non-finite Rayleigh quotient");
    est.history.push_back(lambda);
    est.value = lambda;
    est.iterations = it + 1;
    if (it > 0 && std::abs(lambda - prev) < tol * std::abs(lambda)) break;
    prev = lambda;
  }
  return est;
}

EigenEstimate hessian_max_eigenvalue(const ModelSpec& spec, const WeightVector& w, const Batch& b,
                                     std::size_t max_iters, double tol, std::uint64_t seed) {
  check_weights(spec, w);
  return hessian_max_eigenvalue(make_objective(spec, b), w.values, max_iters, tol, seed);
}

TraceEstimate hessian_trace(const Objective& obj, const Eigen::VectorXd& w, std::size_t n_probes, std::uint64_t seed) {
  if (n_probes < 1) throw InvalidArgument("hessian_trace: n_probes must be >= 1");
  Rng rng = make_rng(derive_seed(seed, "hutchinson"));
  std::bernoulli_distribution coin(0.5);
  TraceEstimate est;
  est.samples.reserve(n_probes);
  Eigen::VectorXd z(w.size());
  for (std::size_t k = 0; k < n_probes; ++k) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = coin(rng) ? 1.0 : -1.0;
    est.samples.push_back(z.dot(hvp(obj, w, z)));
  }
  const auto n = static_cast<double>(n_probes);
  double sum = 0.0;
  for (double s : est.samples) sum += s;
  est.value = sum / n;
  if (n_probes > 1) {
    double ss = 0.0;
    for (double s : est.samples) ss += (s - est.value) * (s - est.value);
    est.sem = std::sqrt(ss / (n - 1.0) / n);
  }
  return est;
}

TraceEstimate hessian_trace(const ModelSpec& spec, const WeightVector& w, const Batch& b, std::size_t n_probes,
                            std::uint64_t seed) {
  check_weights(spec, w);
  return hessian_trace(make_objective(spec, b), w.values, n_probes, seed);
}

Eigen::VectorXd random_direction(Eigen::Index p, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, "direction"));
  std::normal_distribution<double> normal;
  Eigen::VectorXd e(p);
  for (Eigen::Index i = 0; i < p; ++i) e[i] = normal(rng);
  return e / e.norm();
}

RayProbe ray_losses(const Objective& obj, const Eigen::VectorXd& w, std::uint64_t direction_seed,
                    const std::vector<double>& alphas) {
  check_alphas(alphas);
  RayProbe ray{w, random_direction(w.size(), direction_seed), alphas, {}};
  std::vector<Eigen::VectorXd> points;
  for (double a : alphas) points.push_back(a == 0.0 ? w : Eigen::VectorXd(w + a * ray.direction));
  ray.losses = evaluate_path(points, obj.loss);
  return ray;
}

RayProbe ray_losses(const ModelSpec& spec, const WeightVector& w, std::uint64_t direction_seed,
                    const std::vector<double>& alphas, const Batch& b, const std::optional<AdversarialLoss>& adversarial) {
  check_weights(spec, w);
  check_batch(spec, b);
  check_alphas(alphas);
  RayProbe ray{w.values, random_direction(w.size(), direction_seed), alphas, {}};
  std::vector<Eigen::VectorXd> points;
  for (double a : alphas) points.push_back(a == 0.0 ? w.values : Eigen::VectorXd(w.values + a * ray.direction));
  ray.losses = evaluate_path(points, model_evaluator(spec, b, adversarial));
  return ray;
}

namespace {

std::vector<Eigen::VectorXd> affine_path(const Eigen::VectorXd& w_a, const Eigen::VectorXd& w_b,
                                         const std::vector<double>& alphas) {
  if (w_a.size() != w_b.size()) throw InvalidArgument("interpolate: endpoint dimensions differ");
  std::vector<Eigen::VectorXd> points;
  for (double a : alphas) {
    if (a == 1.0) {
      points.push_back(w_a);
    } else if (a == 0.0) {
      points.push_back(w_b);
    } else {
      points.push_back(a * w_a + (1.0 - a) * w_b);
    }
  }
  return points;
}

}  // namespace

RayProbe interpolate(const Objective& obj, const Eigen::VectorXd& w_a, const Eigen::VectorXd& w_b,
                     const std::vector<double>& alphas) {
  RayProbe ray{w_b, w_a - w_b, alphas, {}};
  ray.losses = evaluate_path(affine_path(w_a, w_b, alphas), obj.loss);
  return ray;
}

RayProbe interpolate(const ModelSpec& spec, const WeightVector& w_a, const WeightVector& w_b,
                     const std::vector<double>& alphas, const Batch& b,
                     const std::optional<AdversarialLoss>& adversarial) {
  check_weights(spec, w_a);
  check_weights(spec, w_b);
  check_batch(spec, b);
  RayProbe ray{w_b.values, w_a.values - w_b.values, alphas, {}};
  ray.losses = evaluate_path(affine_path(w_a.values, w_b.values, alphas), model_evaluator(spec, b, adversarial));
  return ray;
}

Eigen::Vector2d PlaneBasis::coordinates(const Eigen::VectorXd& origin, const Eigen::VectorXd& point) const {
  const Eigen::VectorXd d = point - origin;
  return {d.dot(u), d.dot(v)};
}

PlaneBasis plane_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& x_adv_1, const Eigen::VectorXd& x_adv_2) {
  if (x.size() != x_adv_1.size() || x.size() != x_adv_2.size()) throw InvalidArgument("plane_basis: size mismatch");
  const Eigen::VectorXd u = x_adv_1 - x;
  const double uu = u.squaredNorm();
  if (!(uu > 0.0)) throw DegeneratePlane("plane_basis: first point coincides with the anchor");
  const Eigen::VectorXd w = x_adv_2 - x;
  const Eigen::VectorXd v = w - (w.dot(u) / uu) * u;
  const double vn = v.norm();
  if (!(vn > 1e-12 * std::max(1.0, w.norm()))) throw DegeneratePlane("plane_basis: points are collinear");
  PlaneBasis basis{u / std::sqrt(uu), v / vn};
  // One re-orthogonalization pass to push <u', v'> down to rounding level.
  basis.v -= basis.v.dot(basis.u) * basis.u;
  basis.v.normalize();
  return basis;
}

bool PlaneMap::in_disk(std::size_t i, std::size_t j) const {
  return coords[i] * coords[i] + coords[j] * coords[j] <= radius * radius;
}

PlaneMap disk_loss_map(const ModelSpec& spec, const WeightCollection& weights, const Eigen::VectorXd& x, int y,
                       const PlaneBasis& basis, double eps, std::size_t grid_n, const InputBox& box) {
  if (grid_n < 3) throw InvalidArgument("disk_loss_map: grid_n must be >= 3");
  check_collection(weights);
  PlaneMap map;
  map.anchor = x;
  map.basis = basis;
  map.radius = eps;
  const double extent = 1.2 * eps;
  const auto last = static_cast<double>(grid_n - 1);
  for (std::size_t i = 0; i < grid_n; ++i) {
    map.coords.push_back(extent * (2.0 * static_cast<double>(i) - last) / last);
  }

  Batch cells;
  cells.inputs.resize(static_cast<Eigen::Index>(grid_n * grid_n), x.size());
  cells.labels.assign(grid_n * grid_n, y);
  for (std::size_t i = 0; i < grid_n; ++i) {
    for (std::size_t j = 0; j < grid_n; ++j) {
      Eigen::VectorXd p = x + map.coords[i] * basis.u + map.coords[j] * basis.v;
      cells.inputs.row(static_cast<Eigen::Index>(i * grid_n + j)) = p.cwiseMax(box.lo).cwiseMin(box.hi).transpose();
    }
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(cells.inputs.rows());
  for (const auto& w : weights.weights) total += per_example_loss(spec, w, cells);
  total /= static_cast<double>(weights.size());

  map.loss.resize(static_cast<Eigen::Index>(grid_n), static_cast<Eigen::Index>(grid_n));
  for (std::size_t i = 0; i < grid_n; ++i) {
    for (std::size_t j = 0; j < grid_n; ++j) {
      map.loss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = total[static_cast<Eigen::Index>(i * grid_n + j)];
    }
  }
  return map;
}

void write_ray_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, RayProbe>>& rays,
                   const std::string& comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "probe,alpha,loss\n";
  for (const auto& [name, ray] : rays) {
    for (std::size_t i = 0; i < ray.alphas.size(); ++i) {
      os << name << ',' << fmt_real(ray.alphas[i]) << ',' << fmt_real(ray.losses[i]) << '\n';
    }
  }
}

void write_plane_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, PlaneMap>>& maps,
                     const std::string& comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "map,a,b,loss,in_disk\n";
  for (const auto& [name, map] : maps) {
    for (std::size_t i = 0; i < map.coords.size(); ++i) {
      for (std::size_t j = 0; j < map.coords.size(); ++j) {
        os << name << ',' << fmt_real(map.coords[i]) << ',' << fmt_real(map.coords[j]) << ','
           << fmt_real(map.loss(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ','
           << (map.in_disk(i, j) ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace lgv
