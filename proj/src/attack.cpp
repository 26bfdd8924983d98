#include "lgv/attack.hpp"

#include "lgv/error.hpp"
#include "lgv/format.hpp"
#include "lgv/rng.hpp"

#include <algorithm>
#include <bit>
#include <tuple>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace lgv {

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

Eigen::RowVectorXd step_direction(const Eigen::RowVectorXd& g, Norm norm, StepMode mode) {
  if (mode == StepMode::raw) return g;
  if (norm == Norm::linf) return g.unaryExpr(&sign);
  const double n = g.norm();
  return n > 0.0 ? Eigen::RowVectorXd(g / n) : Eigen::RowVectorXd::Zero(g.size());
}

void check_in_box(const Eigen::MatrixXd& x, const InputBox& box) {
  if (x.size() == 0) return;
  if (x.minCoeff() < box.lo || x.maxCoeff() > box.hi) {
    throw InvalidArgument("attack inputs lie outside the input box");
  }
}

}  // namespace

std::string to_string(Norm n) { return n == Norm::l2 ? "l2" : "linf"; }

Norm parse_norm(const std::string& name) {
  if (name == "l2" || name == "L2") return Norm::l2;
  if (name == "linf" || name == "Linf" || name == "inf") return Norm::linf;
  throw InvalidArgument("unknown norm '" + name + "' (expected l2 or linf)");
}

AttackConfig AttackConfig::with_defaults(Norm norm, double epsilon) {
  AttackConfig cfg;
  cfg.norm = norm;
  cfg.epsilon = epsilon;
  cfg.alpha = epsilon / 10.0;
  cfg.n_iter = 50;
  return cfg;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw InvalidArgument("attack: epsilon must be >= 0");
  if (!(alpha > 0.0)) throw InvalidArgument("attack: alpha must be positive");
  if (step == StepMode::normalized && alpha > epsilon && epsilon > 0.0) {
    throw InvalidArgument("attack: alpha must not exceed epsilon");
  }
  if (n_iter < 1) throw InvalidArgument("attack: n_iter must be >= 1");
  if (!(momentum >= 0.0)) throw InvalidArgument("attack: momentum must be >= 0");
  if (!(feature_noise_sigma >= 0.0)) throw InvalidArgument("attack: feature_noise_sigma must be >= 0");
  if (!(box.hi > box.lo)) throw InvalidArgument("attack: empty input box");
}

Eigen::MatrixXd project_ball(const Eigen::MatrixXd& x_adv, const Eigen::MatrixXd& x, Norm norm, double eps) {
  if (x_adv.rows() != x.rows() || x_adv.cols() != x.cols()) {
    throw InvalidArgument("project_ball: shape mismatch");
  }
  Eigen::MatrixXd delta = x_adv - x;
  if (norm == Norm::linf) {
    delta = delta.cwiseMax(-eps).cwiseMin(eps);
  } else {
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      const double n = delta.row(i).norm();
      if (n > eps) delta.row(i) *= eps / n;
    }
  }
  return x + delta;
}

Eigen::MatrixXd ifgsm(const ModelSpec& spec, const WeightCollection& surrogate, const Batch& b,
                      const AttackConfig& cfg, const IterateObserver& observer) {
  cfg.validate();
  check_collection(surrogate);
  check_batch(spec, b);
  check_in_box(b.inputs, cfg.box);

  const std::size_t k = surrogate.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  Rng order_rng = make_rng(derive_seed(cfg.seed, "weight-order"));
  std::shuffle(order.begin(), order.end(), order_rng);

  const Eigen::Index n = b.inputs.rows();
  const Eigen::Index d = b.inputs.cols();

  // One noise stream per example so results do not depend on how examples are batched.
  std::vector<Rng> noise_rngs;
  if (cfg.feature_noise_sigma > 0.0) {
    const std::uint64_t base = derive_seed(cfg.seed, "feature-noise");
    for (Eigen::Index i = 0; i < n; ++i) noise_rngs.push_back(make_rng(derive_seed(base, static_cast<std::uint64_t>(i))));
  }
  std::normal_distribution<double> normal;

  Eigen::MatrixXd momentum_buf = Eigen::MatrixXd::Zero(n, d);
  Batch current{b.inputs, b.labels};
  for (std::size_t it = 0; it < cfg.n_iter; ++it) {
    const WeightVector& w = surrogate[order[it % k]];
    check_weights(spec, w);
    Eigen::MatrixXd g = grad_input_per_example(spec, w, current);
    if (!g.allFinite()) {
      throw NumericError("ifgsm: non-finite input gradient at iteration " + std::to_string(it) +
                         " (surrogate weight " + std::to_string(order[it % k]) + ")");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd gi = g.row(i);
      if (cfg.feature_noise_sigma > 0.0) {
        for (Eigen::Index j = 0; j < d; ++j) gi[j] += cfg.feature_noise_sigma * normal(noise_rngs[static_cast<std::size_t>(i)]);
      }
      if (cfg.momentum > 0.0) {
        const double l1 = gi.lpNorm<1>();
        momentum_buf.row(i) *= cfg.momentum;
        if (l1 > 0.0) momentum_buf.row(i) += gi / l1;
        gi = momentum_buf.row(i);
      }
      current.inputs.row(i) += cfg.alpha * step_direction(gi, cfg.norm, cfg.step);
    }
    current.inputs = project_ball(current.inputs, b.inputs, cfg.norm, cfg.epsilon)
                         .cwiseMax(cfg.box.lo)
                         .cwiseMin(cfg.box.hi);
    if (observer) observer(it, current.inputs);
  }
  return current.inputs;
}

std::vector<SummaryRow> TransferReport::summary() const {
  std::map<std::pair<std::string, std::string>, std::vector<const TransferRow*>> cells;
  for (const auto& r : rows) cells[{r.surrogate, r.target}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, group] : cells) {
    SummaryRow s;
    s.surrogate = key.first;
    s.target = key.second;
    s.norm = group.front()->norm;
    s.eps = group.front()->eps;
    s.n_seeds = group.size();
    double sum = 0.0;
    for (const auto* r : group) sum += r->success_rate;
    s.mean = sum / static_cast<double>(group.size());
    if (group.size() > 1) {
      double ss = 0.0;
      for (const auto* r : group) ss += (r->success_rate - s.mean) * (r->success_rate - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(group.size() - 1));
    }
    out.push_back(s);
  }
  return out;
}

double TransferReport::mean_rate(const std::string& surrogate, const std::string& target) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows) {
    if (r.surrogate == surrogate && r.target == target) {
      sum += r.success_rate;
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("no report rows for " + surrogate + " -> " + target);
  return sum / static_cast<double>(count);
}

void TransferReport::append(const TransferReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void TransferReport::sort_canonical() {
  std::stable_sort(rows.begin(), rows.end(), [](const TransferRow& a, const TransferRow& b) {
    return std::tie(a.surrogate, a.target, a.seed) < std::tie(b.surrogate, b.target, b.seed);
  });
}

TransferReport evaluate(const std::vector<NamedModel>& targets, const Eigen::MatrixXd& x_adv, const Batch& b,
                        const std::string& surrogate_id, const AttackConfig& cfg) {
  if (x_adv.rows() != static_cast<Eigen::Index>(b.size())) throw InvalidArgument("evaluate: row count mismatch");
  TransferReport report;
  for (const auto& t : targets) {
    const auto pred = predict(t.spec, t.weights, x_adv);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != b.labels[i] ? 1 : 0;
    TransferRow row;
    row.surrogate = surrogate_id;
    row.target = t.name;
    row.norm = cfg.norm;
    row.eps = cfg.epsilon;
    row.seed = cfg.seed;
    row.n = b.size();
    row.success_rate = b.size() > 0 ? static_cast<double>(wrong) / static_cast<double>(b.size()) : 0.0;
    report.rows.push_back(std::move(row));
  }
  return report;
}

TransferReport transfer_matrix(const std::vector<NamedSurrogate>& surrogates, const std::vector<NamedModel>& targets,
                               const Batch& b, const AttackConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw InvalidArgument("transfer_matrix: seeds must be non-empty");
  TransferReport report;
  for (std::uint64_t seed : seeds) {
    AttackConfig run = cfg;
    run.seed = seed;
    for (const auto& s : surrogates) {
      const Eigen::MatrixXd x_adv = ifgsm(s.spec, s.weights, b, run);
      report.append(evaluate(targets, x_adv, b, s.name, run));
    }
  }
  report.sort_canonical();
  return report;
}

void write_report_csv(const std::filesystem::path& path, const TransferReport& report, const std::string& comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "surrogate,target,norm,eps,seed,success_rate,n\n";
  for (const auto& r : report.rows) {
    os << r.surrogate << ',' << r.target << ',' << to_string(r.norm) << ',' << fmt_real(r.eps) << ',' << r.seed << ','
       << fmt_real(r.success_rate) << ',' << r.n << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, const TransferReport& report, const std::string& comment) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "surrogate,target,norm,eps,mean,sd,n_seeds\n";
  for (const auto& s : report.summary()) {
    os << s.surrogate << ',' << s.target << ',' << to_string(s.norm) << ',' << fmt_real(s.eps) << ','
       << fmt_real(s.mean) << ',' << fmt_real(s.sd) << ',' << s.n_seeds << '\n';
  }
}

nlohmann::json report_to_json(const TransferReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"surrogate", r.surrogate},
                    {"target", r.target},
                    {"norm", to_string(r.norm)},
                    {"eps", r.eps},
                    {"seed", r.seed},
                    {"success_rate", r.success_rate},
                    {"n", r.n}});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : report.summary()) {
    summary.push_back({{"surrogate", s.surrogate},
                       {"target", s.target},
                       {"norm", to_string(s.norm)},
                       {"eps", s.eps},
                       {"mean", s.mean},
                       {"sd", s.sd},
                       {"n_seeds", s.n_seeds}});
  }
  return {{"rows", rows}, {"summary", summary}};
}

void dump_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(m(i, j));
      for (int s = 0; s < 64; s += 8) os.put(static_cast<char>((bits >> s) & 0xffu));
    }
  }
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "f64"}, {"order", "row-major"}}.dump(2)
       << '\n';
}

}  // namespace lgv
