#include "doctest.h"

#include "lgv/error.hpp"
#include "lgv/geometry.hpp"
#include "lgv/rng.hpp"
#include "lgv/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace lgv;

namespace {

Eigen::MatrixXd random_psd(int p, std::uint64_t seed, double top) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(p, p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  Eigen::VectorXd ev = Eigen::VectorXd::LinSpaced(p, 0.05, 1.0);
  ev[p - 1] = top;
  return q * ev.asDiagonal() * q.transpose();
}

Eigen::VectorXd random_vec(int p, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST_CASE("power iteration on a diagonal quadratic") {
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(20, 0.5);
  diag[0] = 3.0;
  diag[1] = 1.0;
  auto obj = quadratic_objective(diag.asDiagonal().toDenseMatrix());
  auto est = hessian_max_eigenvalue(obj, random_vec(20, 1), 500, 1e-10, 3);
  CHECK(std::abs(est.value - 3.0) / 3.0 < 0.01);
  CHECK_FALSE(est.degenerate);
}

TEST_CASE("power iteration matches the dense eigensolver") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Eigen::MatrixXd a = random_psd(40, seed, 2.5 + seed);
    const double oracle = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
    auto est = hessian_max_eigenvalue(quadratic_objective(a), random_vec(40, seed + 10), 500, 1e-9, seed);
    CHECK(std::abs(est.value - oracle) / oracle < 0.01);
    for (std::size_t i = 1; i < est.history.size(); ++i) CHECK(est.history[i] >= est.history[i - 1] - 1e-8);
    auto scaled_est = hessian_max_eigenvalue(scaled(quadratic_objective(a), 7.0), random_vec(40, seed + 10), 500, 1e-9, seed);
    CHECK(std::abs(scaled_est.value - 7.0 * est.value) / (7.0 * est.value) < 1e-3);
  }
}

TEST_CASE("power iteration degenerate start") {
  auto obj = quadratic_objective(Eigen::MatrixXd::Zero(5, 5));
  auto est = hessian_max_eigenvalue(obj, Eigen::VectorXd::Ones(5), 10, 1e-6, 0);
  CHECK(est.degenerate);
  CHECK(est.value == 0.0);
  CHECK_THROWS_AS(hessian_max_eigenvalue(obj, Eigen::VectorXd::Ones(5), 10, 0.0, 0), InvalidArgument);
}

TEST_CASE("hutchinson trace") {
  Eigen::MatrixXd a = random_psd(30, 7, 4.0);
  const double tr = a.trace();
  auto obj = quadratic_objective(a);
  auto w = random_vec(30, 8);
  auto est = hessian_trace(obj, w, 100, 5);
  CHECK(std::abs(est.value - tr) / tr < 0.05);
  CHECK(est.samples.size() == 100);
  auto est_scaled = hessian_trace(scaled(obj, 3.0), w, 100, 5);
  CHECK(std::abs(est_scaled.value - 3.0 * est.value) / (3.0 * est.value) < 1e-3);
  auto other = hessian_trace(obj, w, 100, 6);
  CHECK(std::abs(other.value - est.value) <= 2.0 * std::sqrt(est.sem * est.sem + other.sem * other.sem));
  CHECK_THROWS_AS(hessian_trace(obj, w, 0, 5), InvalidArgument);
}

TEST_CASE("random directions") {
  auto d = random_direction(50, 4);
  CHECK(std::abs(d.norm() - 1.0) < 1e-12);
  CHECK(random_direction(50, 4) == d);
  CHECK(random_direction(50, 5) != d);
}

TEST_CASE("rays on a quadratic follow the closed form") {
  Eigen::MatrixXd a = random_psd(25, 9, 3.0);
  auto obj = quadratic_objective(a);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(25);
  std::vector<double> alphas{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  auto ray = ray_losses(obj, w, 11, alphas);
  CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-9);
  const double curv = ray.direction.dot(a * ray.direction);
  for (std::size_t i = 0; i < alphas.size(); ++i)
    CHECK(std::abs(ray.losses[i] - 0.5 * alphas[i] * alphas[i] * curv) < 1e-6);
  Eigen::VectorXd w2 = random_vec(25, 10);
  auto ray2 = ray_losses(obj, w2, 11, alphas);
  CHECK(ray2.direction == ray.direction);
  CHECK(ray2.losses[0] == obj.loss(w2));
  CHECK_THROWS_AS(ray_losses(obj, w, 11, {0.0, 2.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(ray_losses(obj, w, 11, {-1.0, 0.0}), InvalidArgument);
}

TEST_CASE("interpolation path") {
  Eigen::MatrixXd a = random_psd(10, 12, 2.0);
  auto obj = quadratic_objective(a);
  Eigen::VectorXd wa = random_vec(10, 13), wb = random_vec(10, 14);
  std::vector<double> alphas{-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
  auto path = interpolate(obj, wa, wb, alphas);
  CHECK(path.losses[2] == obj.loss(wb));
  CHECK(path.losses[5] == obj.loss(wa));
  // L(alpha) = 0.5 (wb + alpha d)^T A (wb + alpha d) with d = wa - wb
  Eigen::VectorXd d = wa - wb;
  const double c0 = 0.5 * wb.dot(a * wb), c1 = wb.dot(a * d), c2 = 0.5 * d.dot(a * d);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double t = alphas[i];
    CHECK(std::abs(path.losses[i] - (c0 + c1 * t + c2 * t * t)) < 1e-8 * (1.0 + std::abs(path.losses[i])));
  }
}

TEST_CASE("network probes on a small model") {
  auto ds = make_blobs(3, 4, {30, 5, 10}, 0.5, 8);
  ModelSpec spec({4, 6, 3}, Activation::tanh);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.schedule = LrSchedule::constant(0.05);
  cfg.batch_size = 10;
  auto w = train(spec, ds, cfg);
  auto w2 = init_weights(spec, 3);
  auto ray = ray_losses(spec, w, 4, {0.0, 0.5, 1.0}, ds.train);
  CHECK(ray.losses[0] == loss(spec, w, ds.train));
  auto ray2 = ray_losses(spec, w2, 4, {0.0, 0.5, 1.0}, ds.train);
  CHECK(ray2.direction == ray.direction);
  auto path = interpolate(spec, w, w2, {0.0, 0.5, 1.0}, ds.train);
  CHECK(path.losses[2] == loss(spec, w, ds.train));
  CHECK(path.losses[0] == loss(spec, w2, ds.train));

  NamedModel target{"t", spec, w2};
  AdversarialLoss adv{target, AttackConfig::with_defaults(Norm::linf, 0.05)};
  auto adv_ray = ray_losses(spec, w, 4, {0.0, 1.0}, ds.test, adv);
  CHECK(adv_ray.losses.size() == 2);
  Batch crafted{ifgsm(spec, WeightCollection::single(w), ds.test, adv.attack), ds.test.labels};
  CHECK(adv_ray.losses[0] == loss(spec, w2, crafted));

  auto h = hessian_max_eigenvalue(spec, w, ds.train, 100, 1e-6, 1);
  auto t = hessian_trace(spec, w, ds.train, 20, 1);
  CHECK(h.value > 0.0);
  CHECK(std::isfinite(t.value));
}

TEST_CASE("plane basis") {
  Eigen::VectorXd x = random_vec(6, 1), x1 = random_vec(6, 2), x2 = random_vec(6, 3);
  auto basis = plane_basis(x, x1, x2);
  CHECK(std::abs(basis.u.dot(basis.v)) < 1e-12);
  CHECK(std::abs(basis.u.norm() - 1.0) < 1e-12);
  CHECK(std::abs(basis.v.norm() - 1.0) < 1e-12);
  Eigen::Vector2d c1 = basis.coordinates(x, x1);
  CHECK(std::abs(c1[0] - (x1 - x).norm()) < 1e-12);
  CHECK(std::abs(c1[1]) < 1e-12);
  // Solve the 2x2 normal equations for x2 and rebuild it.
  Eigen::Matrix<double, Eigen::Dynamic, 2> m(6, 2);
  m << basis.u, basis.v;
  Eigen::Vector2d ab = (m.transpose() * m).ldlt().solve(m.transpose() * (x2 - x));
  CHECK((x + ab[0] * basis.u + ab[1] * basis.v - x2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(plane_basis(x, x, x2), DegeneratePlane);
  CHECK_THROWS_AS(plane_basis(x, x1, Eigen::VectorXd(x + 2.0 * (x1 - x))), DegeneratePlane);
}

TEST_CASE("disk loss map") {
  auto ds = make_blobs(3, 4, {30, 5, 10}, 0.5, 8);
  ModelSpec spec({4, 6, 3}, Activation::tanh);
  WeightCollection c;
  for (std::uint64_t s = 1; s <= 3; ++s) c.weights.push_back(init_weights(spec, s));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.5);
  auto basis = plane_basis(x, Eigen::VectorXd(x + Eigen::VectorXd::Unit(4, 0) * 0.1),
                           Eigen::VectorXd(x + Eigen::VectorXd::Unit(4, 1) * 0.1));
  auto map = disk_loss_map(spec, c, x, 1, basis, 0.1, 11);
  CHECK(map.coords.front() == doctest::Approx(-0.12).epsilon(1e-14));
  CHECK(map.coords.back() == doctest::Approx(0.12).epsilon(1e-14));
  Batch at_x{x.transpose(), {1}};
  double mean = 0.0;
  for (const auto& w : c.weights) mean += loss(spec, w, at_x) / 3.0;
  CHECK(map.loss(5, 5) == doctest::Approx(mean).epsilon(1e-14));
  CHECK(map.in_disk(5, 5));
  CHECK_FALSE(map.in_disk(0, 0));
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(11, 11);
  for (const auto& w : c.weights) avg += disk_loss_map(spec, WeightCollection::single(w), x, 1, basis, 0.1, 11).loss / 3.0;
  CHECK((avg - map.loss).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(disk_loss_map(spec, c, x, 1, basis, 0.1, 2), InvalidArgument);
}

TEST_CASE("linear model loss is monotone along the in-plane gradient") {
  ModelSpec spec({3, 2}, Activation::relu);
  Eigen::VectorXd v(8);
  v << 1.0, -0.5, 0.2, -1.0, 0.5, 0.3, 0.0, 0.0;
  WeightVector w(v, spec.hash());
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
  auto basis = plane_basis(x, Eigen::VectorXd(x + Eigen::VectorXd::Unit(3, 0) * 0.2),
                           Eigen::VectorXd(x + Eigen::VectorXd::Unit(3, 2) * 0.2));
  auto map = disk_loss_map(spec, WeightCollection::single(w), x, 0, basis, 0.2, 9);
  Batch at{x.transpose(), {0}};
  Eigen::VectorXd g = grad_input(spec, w, at).row(0).transpose();
  Eigen::Vector2d gp(g.dot(basis.u), g.dot(basis.v));
  REQUIRE(gp.norm() > 0.0);
  gp.normalize();
  // Directional finite differences along the projected gradient are positive everywhere on the grid.
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      Eigen::VectorXd p = x + map.coords[i] * basis.u + map.coords[j] * basis.v;
      const double h = 1e-6;
      Batch up{Eigen::RowVectorXd((p + h * (gp[0] * basis.u + gp[1] * basis.v)).transpose()), {0}};
      Batch dn{Eigen::RowVectorXd((p - h * (gp[0] * basis.u + gp[1] * basis.v)).transpose()), {0}};
      CHECK(loss(spec, w, up) > loss(spec, w, dn));
    }
  }
}

TEST_CASE("csv exports") {
  auto dir = std::filesystem::temp_directory_path() / "lgv_test_geo";
  std::filesystem::create_directories(dir);
  RayProbe r{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Unit(2, 0), {0.0, 1.0}, {0.5, 0.75}};
  write_ray_csv(dir / "rays.csv", {{"a", r}}, "h");
  std::ifstream is(dir / "rays.csv");
  std::string l1, l2, l3;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  CHECK(l1 == "# h");
  CHECK(l2 == "probe,alpha,loss");
  CHECK(l3 == "a,0,0.5");
}
