// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include "oracles.hpp"

#include "lgv/attack.hpp"
#include "lgv/error.hpp"
#include "lgv/geometry.hpp"
#include "lgv/harness.hpp"
#include "lgv/surrogates.hpp"
#include "lgv/training.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef LGV_STANDARD_CONFIG
#error "LGV_STANDARD_CONFIG must point at the standard benchmark config"
#endif

using namespace lgv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double seconds) {
  std::printf("%s  criterion %2d  %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

template <typename F>
void run(int id, const std::string& title, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, title, o, s);
}

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

WeightVector random_weights(const ModelSpec& s, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.parameter_count()));
  for (auto& x : v) x = scale * n01(rng);
  return {v, s.hash()};
}

Batch random_batch(std::size_t n, std::size_t d, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = u(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(classes)));
  return b;
}

Eigen::VectorXd flat(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

// ---------------------------------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 pick(7001);
  double worst_in = 0.0, worst_w = 0.0;
  std::size_t max_p = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const std::size_t d = 2 + pick() % 15, h = 4 + pick() % 28, c = 2 + pick() % 5;
    const Activation act = draw % 2 ? Activation::tanh : Activation::relu;
    std::vector<std::size_t> widths{d, h};
    if (draw % 3 == 0) widths.push_back(h / 2 + 1);
    widths.push_back(c);
    const ModelSpec s(widths, act);
    if (s.parameter_count() > 2000) continue;
    max_p = std::max(max_p, s.parameter_count());
    const WeightVector w = random_weights(s, 9000 + draw);
    const Batch b = random_batch(1 + pick() % 8, d, static_cast<int>(c), 9100 + draw);
    auto f_in = [&](const Eigen::VectorXd& x) {
      Batch bb = b;
      bb.inputs = Eigen::Map<const Eigen::MatrixXd>(x.data(), b.inputs.rows(), b.inputs.cols());
      return loss(s, w, bb);
    };
    auto f_w = [&](const Eigen::VectorXd& v) { return loss(s, WeightVector(v, s.hash()), b); };
    worst_in = std::max(worst_in, oracle::max_relative_error(flat(grad_input(s, w, b)),
                                                             oracle::fd_gradient(f_in, flat(b.inputs))));
    worst_w = std::max(worst_w, oracle::max_relative_error(grad_weights(s, w, b).values,
                                                           oracle::fd_gradient(f_w, w.values)));
  }
  return {worst_in <= 1e-5 && worst_w <= 1e-5,
          "max rel err input " + num(worst_in) + ", weights " + num(worst_w) + ", p<=" + std::to_string(max_p)};
}

Outcome projection() {
  std::mt19937_64 rng(7002);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 16);
    const Norm norm = i % 2 ? Norm::l2 : Norm::linf;
    const double eps = 0.05 + u(rng);
    Eigen::VectorXd x(d), y(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      x[j] = n01(rng);
      y[j] = x[j] + 1.5 * n01(rng);
    }
    const Eigen::VectorXd got = project_ball(y.transpose(), x.transpose(), norm, eps).row(0).transpose();
    const Eigen::VectorXd want =
        norm == Norm::l2 ? oracle::l2_ball_nearest(y, x, eps) : oracle::linf_ball_nearest(y, x, eps);
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }

  // Iterates of attacks in both norms, with and without momentum and feature noise.
  const ModelSpec s({8, 16, 3}, Activation::tanh);
  const Batch b = random_batch(12, 8, 3, 7003);
  WeightCollection coll;
  for (int k = 0; k < 3; ++k) coll.weights.push_back(random_weights(s, 7010 + k, 1.0));
  double slack = 0.0;
  std::size_t iterates = 0;
  for (Norm norm : {Norm::l2, Norm::linf}) {
    for (int variant = 0; variant < 3; ++variant) {
      AttackConfig cfg = AttackConfig::with_defaults(norm, norm == Norm::l2 ? 0.5 : 0.1);
      cfg.alpha = cfg.epsilon / 3;
      cfg.n_iter = 20;
      cfg.momentum = variant == 1 ? 0.9 : 0.0;
      cfg.feature_noise_sigma = variant == 2 ? 0.5 : 0.0;
      ifgsm(s, coll, b, cfg, [&](std::size_t, const Eigen::MatrixXd& x_adv) {
        ++iterates;
        for (Eigen::Index r = 0; r < x_adv.rows(); ++r) {
          const Eigen::VectorXd delta = (x_adv.row(r) - b.inputs.row(r)).transpose();
          const double n = norm == Norm::l2 ? delta.norm() : delta.cwiseAbs().maxCoeff();
          slack = std::max(slack, n - cfg.epsilon);
          slack = std::max(slack, std::max(cfg.box.lo - x_adv.row(r).minCoeff(), x_adv.row(r).maxCoeff() - cfg.box.hi));
        }
      });
    }
  }
  return {worst <= 1e-8 && slack <= 1e-9,
          "oracle err " + num(worst) + ", constraint slack " + num(slack) + " over " + std::to_string(iterates) +
              " iterates"};
}

Outcome hessian() {
  double worst_eig = 0.0, worst_tr = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::mt19937_64 rng(7100 + trial);
    std::normal_distribution<double> n01;
    const Eigen::Index p = 20 + 6 * trial;
    Eigen::MatrixXd m(p, p);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
    const Eigen::MatrixXd a = m.transpose() * m / static_cast<double>(p);
    const Objective obj = quadratic_objective(a);
    Eigen::VectorXd w(p);
    for (auto& v : w) v = n01(rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double eig_true = es.eigenvalues().maxCoeff();
    const auto eig = hessian_max_eigenvalue(obj, w, 2000, 1e-12, 7200 + trial);
    const auto tr = hessian_trace(obj, w, 400, 7300 + trial);
    worst_eig = std::max(worst_eig, std::abs(eig.value - eig_true) / eig_true);
    worst_tr = std::max(worst_tr, std::abs(tr.value - a.trace()) / a.trace());
  }
  return {worst_eig <= 0.01 && worst_tr <= 0.05,
          "max rel err eig " + num(worst_eig) + ", trace " + num(worst_tr) + ", p<=44"};
}

Outcome subspace() {
  // Planted spectrum: P = U diag(sigma) V^T with zero-mean columns of U.
  const Eigen::Index k = 6, p = 60;
  const std::vector<double> sigma{7.0, 3.0, 2.0, 1.0, 0.25};
  std::mt19937_64 rng(7400);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(k, k);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n01(rng);
  g.col(0).setOnes();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_u(g);
  const Eigen::MatrixXd u = Eigen::MatrixXd(qr_u.householderQ()).rightCols(k - 1);  // orthogonal to ones
  Eigen::MatrixXd h(p, k - 1);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_v(h);
  const Eigen::MatrixXd v = Eigen::MatrixXd(qr_v.householderQ()).leftCols(k - 1);
  Eigen::VectorXd s(k - 1);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = sigma[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd dev = u * s.asDiagonal() * v.transpose();
  Eigen::VectorXd center(p);
  for (auto& c : center) c = n01(rng);

  const ModelSpec spec({static_cast<std::size_t>(p - 1), 1}, Activation::relu);
  WeightCollection coll;
  for (Eigen::Index r = 0; r < k; ++r) coll.weights.push_back({center + dev.row(r).transpose(), spec.hash()});
  const SubspaceBasis basis = build_subspace(coll);

  const double ratio_sum = basis.explained_ratio.sum();
  double sv_err = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) sv_err = std::max(sv_err, std::abs(basis.singular_values[i] - s[i]));
  double vec_err = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double c = std::abs(basis.components.row(i).dot(v.col(i)));
    vec_err = std::max(vec_err, 1.0 - c);
  }
  const WeightCollection c0 = project_top_c(basis, coll, 0);
  const WeightVector w_swa = swa(coll);
  bool c0_exact = true;
  for (const auto& w : c0.weights) c0_exact = c0_exact && (w.values.array() == w_swa.values.array()).all();
  const WeightCollection full = project_top_c(basis, coll, basis.rank);
  double recon = 0.0;
  for (std::size_t i = 0; i < coll.size(); ++i) {
    recon = std::max(recon, (full[i].values - coll[i].values).cwiseAbs().maxCoeff());
  }
  const bool pass = std::abs(ratio_sum - 1.0) <= 1e-9 && c0_exact && recon <= 1e-6 && sv_err <= 1e-6 &&
                    vec_err <= 1e-6 && basis.rank == 5;
  return {pass, "ratio sum-1 " + num(ratio_sum - 1.0) + ", C=0 exact " + (c0_exact ? "yes" : "no") +
                    ", C=rank err " + num(recon) + ", planted sv err " + num(sv_err) + ", direction err " +
                    num(vec_err)};
}

// A small instance of the standard benchmark used by the local-approximation checks.
struct SmallRun {
  RunConfig cfg;
  Dataset ds;
  ModelSpec spec;
  WeightVector w0;
  WeightCollection lgv;
};

SmallRun small_run() {
  RunConfig cfg = parse_config(json::object());
  cfg.dataset.per_class = {50, 50, 50};
  cfg.training.epochs = 30;
  cfg.training.decay_every = 10;
  cfg.lgv.n_epochs = 5;
  cfg.lgv.n_weights = 20;
  Dataset ds = build_dataset(cfg.dataset);
  const ModelSpec spec = cfg.spec();
  WeightVector w0 = train(spec, ds, cfg.train_config(0));
  WeightCollection lgv = collect_lgv(spec, ds, w0, cfg.lgv_config(0));
  return {cfg, std::move(ds), spec, std::move(w0), std::move(lgv)};
}

Outcome first_order_gap() {
  const SmallRun r = small_run();
  const SubspaceBasis basis = build_subspace(r.lgv);
  const Batch& b = r.ds.test;
  const Eigen::MatrixXd g_swa = grad_input(r.spec, basis.shift, b);
  auto gap = [&](double s) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(g_swa.rows(), g_swa.cols());
    for (Eigen::Index k = 0; k < basis.deviations.rows(); ++k) {
      const WeightVector w(basis.shift.values + s * basis.deviations.row(k).transpose(), r.spec.hash());
      mean += grad_input(r.spec, w, b);
    }
    mean /= static_cast<double>(basis.deviations.rows());
    return (mean - g_swa).norm();
  };
  std::string detail;
  bool pass = true;
  for (double s : {1e-2, 1e-3}) {
    const double ratio = gap(s / 2) / gap(s);
    pass = pass && ratio <= 0.5;
    detail += "s=" + num(s) + ": gap ratio " + num(ratio, 4) + "  ";
  }
  return {pass, detail};
}

Outcome structured_noise() {
  // Tiny tanh model, single input; J = d(grad_x L)/dw by central differences.
  const ModelSpec s({6, 10, 5, 3}, Activation::tanh);
  const WeightVector w = random_weights(s, 7500, 0.8);
  const Batch b = random_batch(1, 6, 3, 7501);
  const auto p = static_cast<Eigen::Index>(s.parameter_count());
  const Eigen::Index d = 6;
  auto gx = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return grad_input_per_example(s, WeightVector(v, s.hash()), b).row(0).transpose();
  };
  Eigen::MatrixXd jac(d, p);
  const double h = 1e-5;
  Eigen::VectorXd probe = w.values;
  for (Eigen::Index i = 0; i < p; ++i) {
    probe[i] = w.values[i] + h;
    const Eigen::VectorXd up = gx(probe);
    probe[i] = w.values[i] - h;
    const Eigen::VectorXd down = gx(probe);
    probe[i] = w.values[i];
    jac.col(i) = (up - down) / (2 * h);
  }
  const double sigma = 1e-3;
  const Eigen::MatrixXd predicted = sigma * sigma * jac * jac.transpose();

  std::mt19937_64 rng(7502);
  std::normal_distribution<double> n01;
  const int draws = 10000;
  Eigen::MatrixXd samples(draws, d);
  for (int k = 0; k < draws; ++k) {
    Eigen::VectorXd v = w.values;
    for (Eigen::Index i = 0; i < p; ++i) v[i] += sigma * n01(rng);
    samples.row(k) = gx(v).transpose();
  }
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  const Eigen::MatrixXd empirical = centered.transpose() * centered / static_cast<double>(draws - 1);
  const double rel = (empirical - predicted).norm() / predicted.norm();
  return {rel <= 0.10, "relative Frobenius error " + num(rel) + " (p=" + std::to_string(p) + ", d=6, 1e4 draws)"};
}

// ---------------------------------------------------------------------------------------------
// Standard benchmark, driven through the harness commands.

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

struct Benchmark {
  RunConfig cfg;
  fs::path out;
  // surrogate -> target -> mean success rate over seeds
  std::map<std::string, std::map<std::string, double>> rate;
  double seconds_attack = 0.0;

  double mean_rate(const std::string& surrogate) const {
    const auto& row = rate.at(surrogate);
    double m = 0.0;
    for (const auto& [t, r] : row) m += r;
    return m / static_cast<double>(row.size());
  }
};

json standard_config() {
  std::ifstream is(LGV_STANDARD_CONFIG);
  if (!is) throw IoError(std::string("cannot open ") + LGV_STANDARD_CONFIG);
  return json::parse(is);
}

Benchmark& benchmark() {
  static Benchmark bm = [] {
    Benchmark b;
    b.out = fs::temp_directory_path() / "lgv_acceptance_standard";
    fs::remove_all(b.out);
    json j = standard_config();
    j["output_dir"] = b.out.string();
    b.cfg = parse_config(j);
    const auto t0 = std::chrono::steady_clock::now();
    cmd_train(b.cfg);
    cmd_collect(b.cfg);
    cmd_attack(b.cfg);
    b.seconds_attack = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& r : csv_rows(b.out / "summary.csv")) b.rate[r[0]][r[1]] = std::stod(r[4]);
    return b;
  }();
  return bm;
}

Outcome transfer_trend() {
  const Benchmark& bm = benchmark();
  const auto& lgv = bm.rate.at("lgv");
  const auto& dnn = bm.rate.at("one_dnn");
  bool every_target = true;
  std::string detail;
  for (const auto& [t, r] : lgv) {
    every_target = every_target && r > dnn.at(t);
    detail += t + " " + num(r) + ">" + num(dnn.at(t)) + "  ";
  }
  const double m_lgv = bm.mean_rate("lgv"), m_swa = bm.mean_rate("lgv_swa"), m_dnn = bm.mean_rate("one_dnn");
  const bool order = m_lgv >= m_swa && m_swa >= m_dnn;
  detail += "| mean lgv " + num(m_lgv) + " swa " + num(m_swa) + " dnn " + num(m_dnn);
  const bool fast = bm.seconds_attack <= 600.0;
  detail += " | pipeline " + num(bm.seconds_attack) + "s";
  return {every_target && order && fast, detail};
}

Outcome flatness_trend() {
  const Benchmark& bm = benchmark();
  cmd_geometry(bm.cfg, GeometryProbe::hessian);
  cmd_geometry(bm.cfg, GeometryProbe::rays);

  // seed -> role -> (eig, trace) with LGV members averaged
  struct Acc {
    double eig = 0, tr = 0;
    int n = 0;
  };
  std::map<std::string, std::map<std::string, Acc>> h;
  for (const auto& r : csv_rows(bm.out / "geometry" / "hessian.csv")) {
    const std::string role = r[1].rfind("lgv", 0) == 0 && r[1] != "lgv_swa" ? "lgv" : r[1];
    auto& a = h[r[0]][role];
    a.eig += std::stod(r[2]);
    a.tr += std::stod(r[4]);
    ++a.n;
  }
  bool pass = true;
  std::string detail;
  for (auto& [seed, roles] : h) {
    auto get = [&](const std::string& role, bool eig) {
      const Acc& a = roles.at(role);
      return (eig ? a.eig : a.tr) / a.n;
    };
    for (bool eig : {true, false}) {
      const double d = get("dnn", eig), l = get("lgv", eig), s = get("lgv_swa", eig);
      const bool ok = d > l && l > s;
      pass = pass && ok;
      detail += "s" + seed + (eig ? " eig " : " tr ") + num(d) + ">" + num(l) + ">" + num(s) + (ok ? "" : "!") + " ";
    }
  }

  // Ray growth loss(alpha) - loss(0), averaged over directions, at every alpha > 0.
  std::map<std::string, std::map<std::string, std::map<double, double>>> growth;  // seed -> role -> alpha
  std::map<std::string, double> base;
  std::map<std::string, std::map<std::string, int>> count;
  for (const auto& r : csv_rows(bm.out / "geometry" / "rays.csv")) {
    // probe id: s<seed>_<origin>_d<dir>
    const std::string& id = r[0];
    const auto a = id.find('_'), b = id.rfind("_d");
    const std::string seed = id.substr(1, a - 1);
    std::string origin = id.substr(a + 1, b - a - 1);
    if (origin.rfind("lgv", 0) == 0 && origin != "lgv_swa") origin = "lgv";
    const double alpha = std::stod(r[1]), l = std::stod(r[2]);
    if (alpha == 0.0) {
      base[id] = l;
      ++count[seed][origin];
    } else {
      growth[seed][origin][alpha] += l - base.at(id);
    }
  }
  bool rays_ok = true;
  for (auto& [seed, roles] : growth) {
    for (const auto& [alpha, g] : roles["dnn"]) {
      const double d = g / count[seed]["dnn"];
      const double l = roles["lgv"][alpha] / count[seed]["lgv"];
      const double s = roles["lgv_swa"][alpha] / count[seed]["lgv_swa"];
      const bool ok = d > l && l > s;
      rays_ok = rays_ok && ok;
      if (alpha == bm.cfg.geometry.ray_alphas.back()) {
        detail += "| s" + seed + " ray@" + num(alpha) + " " + num(d) + ">" + num(l) + ">" + num(s) + (ok ? "" : "!");
      }
    }
  }
  if (!rays_ok) detail += " | ray ordering broken at some alpha";
  return {pass && rays_ok, detail};
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Outcome subspace_trend() {
  const Benchmark& bm = benchmark();
  cmd_geometry(bm.cfg, GeometryProbe::pca);
  // Mean cumulative explained ratio over seeds for each C.
  std::map<std::size_t, double> cum;
  std::map<std::size_t, int> n;
  for (const auto& r : csv_rows(bm.out / "geometry" / "pca.csv")) {
    const auto c = static_cast<std::size_t>(std::stoul(r[1]));
    cum[c] += std::stod(r[4]);
    ++n[c];
  }
  std::vector<double> x, y;
  std::string detail;
  for (const auto& rc : bm.cfg.surrogates) {
    if (rc.recipe != Recipe::projected) continue;
    const std::size_t key = std::min(rc.c, cum.rbegin()->first);
    const double ratio = rc.c == 0 ? 0.0 : cum[key] / n[key];
    x.push_back(ratio);
    y.push_back(bm.mean_rate(rc.name));
    detail += "C" + std::to_string(rc.c) + ":" + num(y.back()) + " ";
  }
  if (x.size() < 3) return {false, "standard config lists fewer than 3 projected surrogates"};
  const double rho = spearman(x, y);
  return {rho >= 0.8, "rho " + num(rho) + " | " + detail};
}

Outcome shift_trend() {
  const Benchmark& bm = benchmark();
  auto find = [&](Recipe recipe, std::optional<double> gamma, std::optional<bool> center_swa) -> std::string {
    for (const auto& rc : bm.cfg.surrogates) {
      if (rc.recipe != recipe) continue;
      if (gamma && rc.gamma != *gamma) continue;
      if (center_swa && rc.center_swa != *center_swa) continue;
      return rc.name;
    }
    throw ConfigError("standard config lacks a " + to_string(recipe) + " surrogate needed here");
  };
  const std::string swa_shift = find(Recipe::shifted, 1.0, true);
  const std::string swa_rd = find(Recipe::lgv_swa_rd, {}, {});
  const std::string half = find(Recipe::shifted, 0.5, false);
  const std::string one = find(Recipe::shifted, 1.0, false);
  const std::string rd = find(Recipe::rd, {}, {});
  const double a = bm.mean_rate(swa_shift), b = bm.mean_rate(swa_rd);
  const double h = bm.mean_rate(half), o = bm.mean_rate(one), r = bm.mean_rate(rd);
  const bool pass = a > b && h > o && h > r;
  return {pass, "swa+dev' " + num(a) + " vs swa+rd " + num(b) + " | dnn+0.5dev' " + num(h) + " vs dnn+dev' " + num(o) +
                    ", rd " + num(r)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "lgv_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  json j = standard_config();
  // Reduced sizes keep the double run cheap; every command is exercised.
  j["training"]["epochs"] = 8;
  j["training"]["decay_every"] = 3;
  j["lgv"]["n_epochs"] = 2;
  j["lgv"]["n_weights"] = 6;
  j["dataset"]["train_per_class"] = 30;
  j["attack"]["n_iter"] = 10;
  j["attack"]["n_examples"] = 20;
  j["geometry"] = {{"n_probes", 4}, {"max_iters", 15}, {"n_directions", 2}, {"grid_n", 5}, {"disk_examples", 1},
                   {"lgv_members", 2}};
  std::vector<json> surrogates;
  for (const auto& s : j["surrogates"]) {
    if (s.is_object() && s.value("recipe", "") == "projected" && s.value("C", 0) > 6) continue;
    surrogates.push_back(s);
  }
  j["surrogates"] = surrogates;
  {
    std::ofstream os(root / "run.json");
    os << j.dump(2);
  }
  const std::vector<std::vector<std::string>> commands{
      {"train"},           {"collect"},          {"attack"},           {"geometry", "rays"},
      {"geometry", "interpolate"}, {"geometry", "hessian"}, {"geometry", "disk"}, {"geometry", "pca"},
      {"sweep", "lr", "--values", "0,0.05"}, {"sweep", "sigma", "--values", "0.01"},
      {"sweep", "C", "--values", "0,2"},     {"sweep", "gamma", "--values", "0,0.5"},
      {"sweep", "iterations", "--values", "2"}, {"sweep", "epochs", "--values", "1"},
      {"sweep", "weights_per_epoch", "--values", "2"}};
  for (const char* run_dir : {"a", "b"}) {
    for (const auto& cmd : commands) {
      std::vector<std::string> args{"lgv", "-c", (root / "run.json").string(), "-o", (root / run_dir).string()};
      args.insert(args.end(), cmd.begin(), cmd.end());
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      std::streambuf* saved = std::cout.rdbuf();
      std::ostringstream sink;
      std::cout.rdbuf(sink.rdbuf());
      const int code = run_cli(static_cast<int>(argv.size()), argv.data());
      std::cout.rdbuf(saved);
      if (code != 0) return {false, "command `" + cmd[0] + "` exited with " + std::to_string(code)};
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    if (slurp(entry.path()) != slurp(root / "b" / rel)) return {false, rel.string() + " differs between runs"};
    ++compared;
  }
  return {compared >= 14, std::to_string(compared) + " CSV artifacts byte-identical across reruns"};
}

}  // namespace

int main() {
  run(1, "gradient correctness", gradients);
  run(2, "projection oracle and constraints", projection);
  run(3, "hessian oracles", hessian);
  run(4, "pca and subspace suite", subspace);
  run(5, "first-order gap scaling", first_order_gap);
  run(6, "structured feature noise", structured_noise);
  run(7, "transferability trend", transfer_trend);
  run(8, "flatness trend", flatness_trend);
  run(9, "subspace trend", subspace_trend);
  run(10, "shift trend", shift_trend);
  run(11, "determinism", determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
