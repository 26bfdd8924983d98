#include "lgv/weights_io.hpp"

#include "lgv/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace lgv {

namespace {

constexpr std::array<char, 4> kMagic{'L', 'G', 'V', 'W'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffu));
  }
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T))) {
    throw IoError("truncated LGVW header in " + path.string());
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void write_lgvw(const std::filesystem::path& path, const Eigen::MatrixXd& rows, DType dtype) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kLgvwVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rows.rows()));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(rows.cols()));
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (dtype == DType::f64) {
        put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(rows(k, j)));
      } else {
        put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(rows(k, j))));
      }
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

RawWeights read_lgvw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path.string() + " is not an LGVW file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kLgvwVersion) {
    throw IoError(path.string() + ": unsupported LGVW version " + std::to_string(version));
  }
  const auto tag = get_le<std::uint8_t>(is, path);
  if (tag > 1) throw IoError(path.string() + ": unknown dtype tag " + std::to_string(tag));
  const auto k = get_le<std::uint32_t>(is, path);
  const auto p = get_le<std::uint64_t>(is, path);

  RawWeights raw;
  raw.dtype = static_cast<DType>(tag);
  const std::size_t width = raw.dtype == DType::f64 ? 8 : 4;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(k) * p * width);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError(path.string() + ": truncated LGVW payload");
  }
  raw.rows.resize(k, static_cast<Eigen::Index>(p));
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < raw.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < raw.rows.cols(); ++c) {
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
      raw.rows(r, c) = raw.dtype == DType::f64
                           ? std::bit_cast<double>(v)
                           : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(v)));
    }
  }
  return raw;
}

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return {{"layer_widths", spec.layer_widths()}, {"activation", to_string(spec.activation())}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    return ModelSpec(j.at("layer_widths").get<std::vector<std::size_t>>(),
                     parse_activation(j.at("activation").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model spec: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid model spec: ") + e.what());
  }
}

void save_collection(const std::filesystem::path& path, const ModelSpec& spec, const WeightCollection& c,
                     DType dtype, const nlohmann::json& extra) {
  check_collection(c);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(spec.parameter_count()));
  for (std::size_t k = 0; k < c.size(); ++k) {
    check_weights(spec, c[k]);
    rows.row(static_cast<Eigen::Index>(k)) = c[k].values.transpose();
  }
  write_lgvw(path, rows, dtype);

  nlohmann::json side = extra;
  side["model"] = spec_to_json(spec);
  side["dtype"] = dtype == DType::f64 ? "f64" : "f32";
  side["count"] = c.size();
  side["dim"] = spec.parameter_count();
  side["collection"] = {{"kind", c.meta.kind},
                        {"lr", c.meta.lr},
                        {"epochs", c.meta.epochs},
                        {"samples_per_epoch", c.meta.samples_per_epoch},
                        {"source_hash", c.meta.source_hash}};
  std::ofstream os(sidecar_path(path), std::ios::trunc);
  if (!os) throw IoError("cannot write sidecar for " + path.string());
  os << side.dump(2) << '\n';
}

LoadedCollection load_collection(const std::filesystem::path& path) {
  std::ifstream is(sidecar_path(path));
  if (!is) throw IoError("missing sidecar " + sidecar_path(path).string());
  nlohmann::json side;
  try {
    is >> side;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  ModelSpec spec = spec_from_json(side.at("model"));
  RawWeights raw = read_lgvw(path);
  if (static_cast<std::size_t>(raw.rows.cols()) != spec.parameter_count()) {
    throw IoError(path.string() + ": weight dimension does not match sidecar model");
  }
  WeightCollection c;
  if (auto it = side.find("collection"); it != side.end()) {
    c.meta.kind = it->value("kind", "");
    c.meta.lr = it->value("lr", 0.0);
    c.meta.epochs = it->value("epochs", 0.0);
    c.meta.samples_per_epoch = it->value("samples_per_epoch", 0.0);
    c.meta.source_hash = it->value("source_hash", std::uint64_t{0});
  }
  for (Eigen::Index k = 0; k < raw.rows.rows(); ++k) {
    WeightVector w(raw.rows.row(k).transpose(), spec.hash());
    if (!w.all_finite()) throw IoError(path.string() + ": non-finite weight values");
    c.weights.push_back(std::move(w));
  }
  return {std::move(spec), std::move(c), std::move(side)};
}

}  // namespace lgv
