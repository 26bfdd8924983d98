#pragma once

#include "lgv/attack.hpp"
#include "lgv/data.hpp"
#include "lgv/model.hpp"
#include "lgv/training.hpp"
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lgv {

struct DatasetConfig {
  Generator generator = Generator::blobs;
  int classes = 4;
  int dim = 16;
  SplitSizes per_class{50, 100, 250};
  double spread = 0.5;
  double noise = 0.1;  // spirals only
  std::uint64_t seed = 7;
  InputBox box;
  // idx_file only
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t val_count = 0;  // carved from the tail of the IDX training set
};

struct TrainingBlock {
  std::size_t epochs = 100;
  double lr = 0.1;
  bool step_decay = true;
  double decay_factor = 0.1;
  std::size_t decay_every = 34;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  double weight_decay = 1e-4;
};

struct LgvBlock {
  std::size_t n_epochs = 10;
  std::size_t n_weights = 40;
  std::optional<double> lr;  // defaults to half the base initial lr
  std::optional<double> momentum;
  std::optional<std::size_t> batch_size;
  std::optional<double> weight_decay;
};

enum class Recipe { one_dnn, rd, lgv, lgv_swa, lgv_swa_rd, subspace_rd, projected, shifted };
std::string to_string(Recipe r);

struct RecipeConfig {
  std::string name;
  Recipe recipe = Recipe::lgv;
  std::optional<double> sigma;  // rd / lgv_swa_rd; unset means the recipe default
  bool sigma_match = false;     // sigma = RMS of the donor LGV' deviations
  std::size_t c = 0;            // projected
  double gamma = 1.0;           // shifted
  bool center_swa = false;      // shifted: LGV-SWA (true) or the DNN (false)
  std::optional<std::size_t> k;  // sample count for rd / subspace_rd, defaults to n_weights
};

struct TargetConfig {
  std::string name;
  std::uint64_t seed = 0;
};

struct GeometryBlock {
  std::vector<double> ray_alphas{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::size_t n_directions = 10;
  std::uint64_t direction_seed = 100;
  std::vector<double> interp_alphas{-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
  std::size_t max_iters = 300;
  double tol = 1e-6;
  std::size_t n_probes = 100;
  std::size_t lgv_members = 8;  // evenly spaced snapshots probed as "individual LGV"
  std::size_t disk_examples = 2;
  std::size_t grid_n = 21;
  std::string adversarial_target;  // empty: natural loss
  // hessian probe on L(w) = 0.5 w^T A w with seeded random PSD A instead of a network
  std::size_t quadratic_dim = 0;
};

struct RunConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> layer_widths{16, 64, 64, 4};
  Activation activation = Activation::tanh;
  TrainingBlock training;
  LgvBlock lgv;
  std::vector<RecipeConfig> surrogates;
  AttackConfig attack;
  std::size_t n_examples = 100;
  std::vector<TargetConfig> targets;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::uint64_t prime_seed_offset = 500;
  GeometryBlock geometry;
  std::string output_dir = "runs/default";

  ModelSpec spec() const { return ModelSpec(layer_widths, activation); }
  TrainConfig train_config(std::uint64_t seed) const;
  LgvConfig lgv_config(std::uint64_t seed) const;
  bool needs_prime() const;
};

// Field names in errors use the dotted JSON path. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
// Canonical form with every default filled in.
nlohmann::json config_to_json(const RunConfig& cfg);
// "a.b.c=value"; value is parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& j, const std::string& assignment);
// fnv1a over the canonical JSON without output_dir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
// output_dir resolved against $LGV_OUTPUT_ROOT when relative.
std::filesystem::path output_root(const RunConfig& cfg);

Dataset build_dataset(const DatasetConfig& d);

enum class SweepParam { lr, epochs, weights_per_epoch, iterations, sigma, gamma, c };
SweepParam parse_sweep_param(const std::string& name);
std::string to_string(SweepParam p);

enum class GeometryProbe { rays, interpolate, hessian, disk, pca };
GeometryProbe parse_probe(const std::string& name);

// Each command returns the written artifact paths in order.
std::vector<std::filesystem::path> cmd_train(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_collect(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_attack(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_geometry(const RunConfig& cfg, GeometryProbe probe);
std::vector<std::filesystem::path> cmd_sweep(const RunConfig& cfg, SweepParam param, const std::vector<double>& values);

// Full front end; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace lgv
