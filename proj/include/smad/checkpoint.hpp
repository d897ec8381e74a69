#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "smad/model.hpp"

namespace smad {

/// Model snapshot. On disk: "SMADCKPT", u32 version, u64 header length, JSON
/// header (model config + metadata), u32 tensor count, then per tensor
/// u32 name length, name, u8 dtype (0 = f32), u64 rows, u64 cols and the
/// row-major little-endian payload.
struct Checkpoint {
  ModelConfig config;
  Parameters<float> params;
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
Checkpoint make_checkpoint(const Model<Scalar>& model, nlohmann::json meta = nlohmann::json::object()) {
  return {model.config(), model.parameters().template cast<float>(), std::move(meta)};
}

template <typename Scalar>
Model<Scalar> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<Scalar> model(ckpt.config);
  try {
    model.set_parameters(ckpt.params.template cast<Scalar>());
  } catch (const ContractError& e) {
    throw IntegrityError(std::string("checkpoint does not fit its model config: ") + e.what());
  }
  return model;
}

}  // namespace smad
