#include "lgv/data.hpp"

#include "lgv/error.hpp"
#include "lgv/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace lgv {

namespace {

Batch empty_batch(std::size_t n, int dim) {
  Batch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), dim);
  b.labels.resize(n);
  return b;
}

// Row order shuffled so classes are interleaved.
void shuffle_rows(Batch& b, Rng& rng) {
  std::vector<std::size_t> order(b.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  b = b.rows(order);
}

// One scalar affine map for all coordinates of all splits, so cluster geometry stays isotropic.
void fit_into_box(Dataset& ds) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Batch* b : {&ds.train, &ds.val, &ds.test}) {
    if (b->size() == 0) continue;
    lo = std::min(lo, b->inputs.minCoeff());
    hi = std::max(hi, b->inputs.maxCoeff());
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const double scale = (ds.box.hi - ds.box.lo) / span;
  for (Batch* b : {&ds.train, &ds.val, &ds.test}) {
    b->inputs = ((b->inputs.array() - lo) * scale + ds.box.lo).cwiseMax(ds.box.lo).cwiseMin(ds.box.hi).matrix();
  }
}

Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
}

Eigen::MatrixXd blob_centers(int classes, int dim, double edge, Rng& rng) {
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(classes, dim);
  if (classes <= dim) {
    // Scaled standard basis vectors form a regular simplex with the requested edge.
    const Eigen::MatrixXd rot = random_rotation(dim, rng);
    for (int k = 0; k < classes; ++k) centers.row(k) = (edge / std::numbers::sqrt2) * rot.col(k).transpose();
    return centers;
  }
  // More classes than dimensions: rejection sampling in a cube sized to fit them.
  const double side = edge * std::pow(static_cast<double>(classes), 1.0 / dim) * 2.0;
  std::uniform_real_distribution<double> unif(0.0, side);
  int placed = 0;
  while (placed < classes) {
    Eigen::RowVectorXd c(dim);
    for (int j = 0; j < dim; ++j) c[j] = unif(rng);
    bool ok = true;
    for (int k = 0; k < placed && ok; ++k) ok = (centers.row(k) - c).norm() >= edge;
    if (ok) centers.row(placed++) = c;
  }
  return centers;
}

std::uint32_t read_be32(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& os, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) os.put(static_cast<char>((v >> shift) & 0xffu));
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::blobs:
      return "blobs";
    case Generator::spirals:
      return "spirals";
    case Generator::idx_file:
      return "idx";
  }
  return "unknown";
}

Dataset make_blobs(int classes, int dim, SplitSizes n_per_class, double spread, std::uint64_t seed, InputBox box) {
  if (classes < 2) throw InvalidArgument("make_blobs: classes must be >= 2");
  if (dim < 2) throw InvalidArgument("make_blobs: dim must be >= 2");
  if (!(spread > 0.0)) throw InvalidArgument("make_blobs: spread must be positive");
  if (!(box.hi > box.lo)) throw InvalidArgument("make_blobs: empty input box");

  Rng rng = make_rng(derive_seed(seed, "blobs"));
  const Eigen::MatrixXd centers = blob_centers(classes, dim, std::max(1.0, 4.0 * spread), rng);
  std::normal_distribution<double> normal;

  Dataset ds;
  ds.generator = Generator::blobs;
  ds.seed = seed;
  ds.num_classes = static_cast<std::size_t>(classes);
  ds.box = box;
  auto fill = [&](Batch& b, std::size_t per_class) {
    b = empty_batch(per_class * static_cast<std::size_t>(classes), dim);
    std::size_t row = 0;
    for (int k = 0; k < classes; ++k) {
      for (std::size_t i = 0; i < per_class; ++i, ++row) {
        for (int j = 0; j < dim; ++j) {
          b.inputs(static_cast<Eigen::Index>(row), j) = centers(k, j) + spread * normal(rng);
        }
        b.labels[row] = k;
      }
    }
    shuffle_rows(b, rng);
  };
  fill(ds.train, n_per_class.train);
  fill(ds.val, n_per_class.val);
  fill(ds.test, n_per_class.test);
  fit_into_box(ds);
  return ds;
}

Dataset make_spirals(int classes, SplitSizes n_per_class, double noise, std::uint64_t seed, InputBox box) {
  if (classes != 2 && classes != 3) throw InvalidArgument("make_spirals: classes must be 2 or 3");
  if (!(noise >= 0.0)) throw InvalidArgument("make_spirals: noise must be >= 0");
  if (!(box.hi > box.lo)) throw InvalidArgument("make_spirals: empty input box");

  Rng rng = make_rng(derive_seed(seed, "spirals"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;

  Dataset ds;
  ds.generator = Generator::spirals;
  ds.seed = seed;
  ds.num_classes = static_cast<std::size_t>(classes);
  ds.box = box;
  auto fill = [&](Batch& b, std::size_t per_class) {
    b = empty_batch(per_class * static_cast<std::size_t>(classes), 2);
    std::size_t row = 0;
    for (int k = 0; k < classes; ++k) {
      const double phase = 2.0 * std::numbers::pi * k / classes;
      for (std::size_t i = 0; i < per_class; ++i, ++row) {
        // Radius starts away from the origin so arms never meet.
        const double t = unif(rng);
        const double r = 0.15 + 0.85 * t;
        const double theta = 3.0 * std::numbers::pi * t + phase;
        b.inputs(static_cast<Eigen::Index>(row), 0) = r * std::cos(theta) + noise * normal(rng);
        b.inputs(static_cast<Eigen::Index>(row), 1) = r * std::sin(theta) + noise * normal(rng);
        b.labels[row] = k;
      }
    }
    shuffle_rows(b, rng);
  };
  fill(ds.train, n_per_class.train);
  fill(ds.val, n_per_class.val);
  fill(ds.test, n_per_class.test);
  fit_into_box(ds);
  return ds;
}

Batch load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path.string());
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path.string());

  if (read_be32(img, images_path) != kIdxImages) throw IoError(images_path.string() + ": bad IDX image magic");
  if (read_be32(lab, labels_path) != kIdxLabels) throw IoError(labels_path.string() + ": bad IDX label magic");
  const std::uint32_t n = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n != n_labels) {
    throw IoError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(static_cast<std::size_t>(n) * pixels);
  if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IoError(images_path.string() + ": truncated IDX image data");
  }
  std::vector<unsigned char> lbuf(n);
  if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()))) {
    throw IoError(labels_path.string() + ": truncated IDX label data");
  }

  Batch b;
  b.inputs.resize(n, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      b.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[i * pixels + j] / 255.0;
    }
  }
  b.labels.assign(lbuf.begin(), lbuf.end());
  return b;
}

void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const Batch& batch, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(batch.inputs.cols()) != rows * cols) {
    throw InvalidArgument("write_idx: rows * cols does not match input width");
  }
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!img || !lab) throw IoError("cannot open IDX output files");
  write_be32(img, kIdxImages);
  write_be32(img, static_cast<std::uint32_t>(batch.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < batch.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < batch.inputs.cols(); ++j) {
      const double v = std::clamp(batch.inputs(i, j), 0.0, 1.0);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  write_be32(lab, kIdxLabels);
  write_be32(lab, static_cast<std::uint32_t>(batch.size()));
  for (int y : batch.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
  if (!img || !lab) throw IoError("failed writing IDX files");
}

std::vector<std::size_t> correctly_classified(const std::vector<Model>& targets, const Batch& b) {
  std::vector<bool> ok(b.size(), true);
  for (const auto& [spec, w] : targets) {
    check_batch(spec, b);
    const auto pred = predict(spec, w, b.inputs);
    for (std::size_t i = 0; i < pred.size(); ++i) ok[i] = ok[i] && pred[i] == b.labels[i];
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (ok[i]) out.push_back(i);
  }
  return out;
}

Batch select_correct(const std::vector<Model>& targets, const Batch& b, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> pool = correctly_classified(targets, b);
  if (pool.size() < n) throw InsufficientExamples(n, pool.size());
  Rng rng = make_rng(derive_seed(seed, "select"));
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  return b.rows(pool);
}

}  // namespace lgv
