#pragma once

#include "lgv/collection.hpp"
#include "lgv/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace lgv {

// LGVW binary layout (little-endian):
//   "LGVW" | u32 version=1 | u8 dtype (0=f32, 1=f64) | u32 K | u64 p | K*p values
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint32_t kLgvwVersion = 1;

struct RawWeights {
  DType dtype = DType::f64;
  Eigen::MatrixXd rows;  // K x p
};

void write_lgvw(const std::filesystem::path& path, const Eigen::MatrixXd& rows, DType dtype = DType::f64);
RawWeights read_lgvw(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

// Writes `path` plus a `path.json` sidecar holding the spec and collection metadata.
// `extra` is merged into the sidecar.
void save_collection(const std::filesystem::path& path, const ModelSpec& spec, const WeightCollection& c,
                     DType dtype = DType::f64, const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCollection {
  ModelSpec spec;
  WeightCollection collection;
  nlohmann::json sidecar;
};

LoadedCollection load_collection(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace lgv
