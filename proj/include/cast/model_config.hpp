#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "cast/nn/tensor.hpp"

namespace cast {

struct ModelConfig {
  int d = 128;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ff = 512;
  int k_clip = 16;
  double dropout = 0.1;
  bool no_aggregation = false;  // feed subtree vectors straight to the decoder
  bool no_copy = false;         // generation distribution only
  int ast_vocab = 0;
  int code_vocab = 0;
  int summary_vocab = 0;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Fresh parameters with the layout implied by `cfg` (names are stable and
// are what checkpoints store).
nn::ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace cast
