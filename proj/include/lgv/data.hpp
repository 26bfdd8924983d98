#pragma once

#include "lgv/model.hpp"
#include "lgv/weights_io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lgv {

enum class Generator { blobs, spirals, idx_file };

std::string to_string(Generator g);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct InputBox {
  double lo = 0.0;
  double hi = 1.0;
};

struct Dataset {
  Batch train;
  Batch val;
  Batch test;
  Generator generator = Generator::blobs;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  InputBox box;
};

// Gaussian clusters around simplex vertices (pairwise distance >= 4 * spread),
// rotated by a seeded orthogonal matrix and affinely mapped into `box`.
// `n_per_class` counts are per class and per split.
Dataset make_blobs(int classes, int dim, SplitSizes n_per_class, double spread, std::uint64_t seed,
                   InputBox box = {});

// Interleaved 2-D spiral arms, one per class.
Dataset make_spirals(int classes, SplitSizes n_per_class, double noise, std::uint64_t seed, InputBox box = {});

// IDX reader: images (magic 0x00000803) and labels (0x00000801). Pixels are scaled to [0, 1].
Batch load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
// Writes u8 IDX files; inputs are expected in [0, 1] and quantized to 0..255.
void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const Batch& batch, std::size_t rows, std::size_t cols);

using Model = std::pair<ModelSpec, WeightVector>;

// Indices of examples every target classifies correctly.
std::vector<std::size_t> correctly_classified(const std::vector<Model>& targets, const Batch& b);

// Seeded random subset of n examples classified correctly by every target.
// Throws InsufficientExamples when fewer than n qualify.
Batch select_correct(const std::vector<Model>& targets, const Batch& b, std::size_t n, std::uint64_t seed);

}  // namespace lgv
