#pragma once

// Test-only reference computations, kept independent of the library's own code paths.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

// Central finite differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Nearest point of the L2 ball {|z - x| <= eps} to y, by golden-section search on the
// scaling factor t in [0, 1] of z = x + t (y - x).
inline Eigen::VectorXd l2_ball_nearest(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double eps) {
  const Eigen::VectorXd d = y - x;
  const double dn = d.norm();
  if (dn <= eps) return y;
  const double t_max = eps / dn;  // largest feasible scale
  auto dist = [&](double t) { return (x + t * d - y).norm(); };
  double lo = 0.0, hi = t_max;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (dist(a) < dist(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return x + 0.5 * (lo + hi) * d;
}

// Nearest point of the L-inf ball by independent per-coordinate minimization.
inline Eigen::VectorXd linf_ball_nearest(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double eps) {
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // argmin over [x_i - eps, x_i + eps] of |z_i - y_i|
    double best = x[i] - eps;
    for (double c : {x[i] - eps, x[i] + eps, y[i]}) {
      if (c >= x[i] - eps && c <= x[i] + eps && std::abs(c - y[i]) < std::abs(best - y[i])) best = c;
    }
    z[i] = best;
  }
  return z;
}


}  // namespace oracle
