#pragma once

#include <filesystem>

#include <json.hpp>

#include "cast/nn/tensor.hpp"

namespace cast::nn {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File layout: one line of JSON manifest {"version", "tensors": [{"name",
// "shape", "offset"}], ...extra}, a newline, then the little-endian f32
// payload. Offsets count elements.
void save_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params,
                     const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  nlohmann::json manifest;
  ParamSet<float> params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into `dst` by name; every tensor of `dst` must be present
// with the same shape. Throws CheckpointError listing every mismatch.
void restore_params(const ParamSet<float>& src, ParamSet<float>& dst);

}  // namespace cast::nn
