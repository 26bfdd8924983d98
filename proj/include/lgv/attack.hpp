#pragma once

#include "lgv/collection.hpp"
#include "lgv/data.hpp"
#include "lgv/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lgv {

enum class Norm { l2, linf };

std::string to_string(Norm n);
Norm parse_norm(const std::string& name);

// normalized: sign(g) for Linf, g / ||g||_2 for L2. raw: the gradient itself, as written
// in the plain multi-weight I-FGSM loop.
enum class StepMode { normalized, raw };

struct AttackConfig {
  Norm norm = Norm::linf;
  double epsilon = 4.0 / 255.0;
  double alpha = 0.4 / 255.0;
  std::size_t n_iter = 50;
  double momentum = 0.0;             // 0 disables gradient momentum
  double feature_noise_sigma = 0.0;  // white noise added to input gradients
  InputBox box;
  std::uint64_t seed = 0;
  StepMode step = StepMode::normalized;

  // alpha = epsilon / 10, 50 iterations.
  static AttackConfig with_defaults(Norm norm, double epsilon);
  void validate() const;
};

// Projection of each row of x_adv onto the norm ball of radius eps around the matching row of x.
Eigen::MatrixXd project_ball(const Eigen::MatrixXd& x_adv, const Eigen::MatrixXd& x, Norm norm, double eps);

// Called after every iteration with the 0-based iteration index and the current iterate.
using IterateObserver = std::function<void(std::size_t, const Eigen::MatrixXd&)>;

// Iterative FGSM over a weight collection. The collection is shuffled once from cfg.seed and
// iteration i differentiates weight order[i mod K]. Every iterate is projected onto the
// eps-ball and then clipped to the input box.
Eigen::MatrixXd ifgsm(const ModelSpec& spec, const WeightCollection& surrogate, const Batch& b,
                      const AttackConfig& cfg, const IterateObserver& observer = {});

struct NamedModel {
  std::string name;
  ModelSpec spec;
  WeightVector weights;
};

struct NamedSurrogate {
  std::string name;
  ModelSpec spec;
  WeightCollection weights;
};

struct TransferRow {
  std::string surrogate;
  std::string target;
  Norm norm = Norm::linf;
  double eps = 0.0;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
  std::size_t n = 0;
};

struct SummaryRow {
  std::string surrogate;
  std::string target;
  Norm norm = Norm::linf;
  double eps = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation over seeds, 0 for a single seed
  std::size_t n_seeds = 0;
};

struct TransferReport {
  std::vector<TransferRow> rows;

  std::vector<SummaryRow> summary() const;
  // Mean success rate of one (surrogate, target) cell; throws if absent.
  double mean_rate(const std::string& surrogate, const std::string& target) const;
  void append(const TransferReport& other);
  void sort_canonical();
};

// Misclassification rate of x_adv per target. Labels come from b; argmax ties go to the lowest class.
TransferReport evaluate(const std::vector<NamedModel>& targets, const Eigen::MatrixXd& x_adv, const Batch& b,
                        const std::string& surrogate_id = "", const AttackConfig& cfg = {});

// Every surrogate attacked once per seed and evaluated on every target.
TransferReport transfer_matrix(const std::vector<NamedSurrogate>& surrogates, const std::vector<NamedModel>& targets,
                               const Batch& b, const AttackConfig& cfg, const std::vector<std::uint64_t>& seeds);

// CSV header: surrogate,target,norm,eps,seed,success_rate,n. Non-empty `comment` is written
// as a leading '#' line.
void write_report_csv(const std::filesystem::path& path, const TransferReport& report,
                      const std::string& comment = "");
void write_summary_csv(const std::filesystem::path& path, const TransferReport& report,
                       const std::string& comment = "");
nlohmann::json report_to_json(const TransferReport& report);

// Raw little-endian f64 matrix with a JSON shape sidecar.
void dump_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace lgv
