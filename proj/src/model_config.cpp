#include "cast/model_config.hpp"

#include <stdexcept>

namespace cast {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(d, "d");
  positive(heads, "heads");
  positive(enc_layers, "enc_layers");
  positive(dec_layers, "dec_layers");
  positive(ff, "ff");
  positive(k_clip, "k_clip");
  positive(ast_vocab, "ast_vocab");
  positive(code_vocab, "code_vocab");
  positive(summary_vocab, "summary_vocab");
  if (d % heads != 0)
    throw std::invalid_argument("d (" + std::to_string(d) + ") must be divisible by heads (" + std::to_string(heads) + ")");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"heads", c.heads},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"ff", c.ff},
          {"k_clip", c.k_clip},
          {"dropout", c.dropout},
          {"no_aggregation", c.no_aggregation},
          {"no_copy", c.no_copy},
          {"ast_vocab", c.ast_vocab},
          {"code_vocab", c.code_vocab},
          {"summary_vocab", c.summary_vocab}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.value("d", c.d);
  c.heads = j.value("heads", c.heads);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.ff = j.value("ff", c.ff);
  c.k_clip = j.value("k_clip", c.k_clip);
  c.dropout = j.value("dropout", c.dropout);
  c.no_aggregation = j.value("no_aggregation", c.no_aggregation);
  c.no_copy = j.value("no_copy", c.no_copy);
  c.ast_vocab = j.value("ast_vocab", c.ast_vocab);
  c.code_vocab = j.value("code_vocab", c.code_vocab);
  c.summary_vocab = j.value("summary_vocab", c.summary_vocab);
  return c;
}

nn::ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  using nn::Init;
  std::mt19937_64 rng(seed);
  nn::ParamSet<float> ps;
  const int d = cfg.d;
  const int dh = d / cfg.heads;
  const int rel = 2 * cfg.k_clip + 1;

  ps.add("ast.embed", cfg.ast_vocab, d, Init::Embedding, rng);
  ps.add("ast.WC", d, d, Init::Xavier, rng);
  ps.add("ast.WA", d, d, Init::Xavier, rng);
  if (!cfg.no_aggregation) {
    ps.add("ast.WS", d, d, Init::Xavier, rng);
    ps.add("ast.WB", d, d, Init::Xavier, rng);
  }

  auto layer_norm = [&](const std::string& p) {
    ps.add(p + ".g", 1, d, Init::Ones, rng);
    ps.add(p + ".b", 1, d, Init::Zeros, rng);
  };
  auto attention = [&](const std::string& p) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) ps.add(p + "." + w, d, d, Init::Xavier, rng);
  };
  auto feed_forward = [&](const std::string& p) {
    ps.add(p + ".ff1.w", d, cfg.ff, Init::Xavier, rng);
    ps.add(p + ".ff1.b", 1, cfg.ff, Init::Zeros, rng);
    ps.add(p + ".ff2.w", cfg.ff, d, Init::Xavier, rng);
    ps.add(p + ".ff2.b", 1, d, Init::Zeros, rng);
  };

  ps.add("code.embed", cfg.code_vocab, d, Init::Embedding, rng);
  for (int i = 0; i < cfg.enc_layers; ++i) {
    std::string p = "code.L" + std::to_string(i);
    layer_norm(p + ".ln1");
    attention(p + ".attn");
    ps.add(p + ".relk", rel, dh, Init::Xavier, rng);
    ps.add(p + ".relv", rel, dh, Init::Xavier, rng);
    layer_norm(p + ".ln2");
    feed_forward(p);
  }
  layer_norm("code.ln");

  ps.add("dec.embed", cfg.summary_vocab, d, Init::Embedding, rng);
  for (int i = 0; i < cfg.dec_layers; ++i) {
    std::string p = "dec.L" + std::to_string(i);
    layer_norm(p + ".ln1");
    attention(p + ".self");
    layer_norm(p + ".ln2");
    attention(p + ".xast");
    layer_norm(p + ".ln3");
    attention(p + ".xcode");
    layer_norm(p + ".ln4");
    feed_forward(p);
  }
  layer_norm("dec.ln");
  ps.add("dec.out.w", d, cfg.summary_vocab, Init::Xavier, rng);
  ps.add("dec.out.b", 1, cfg.summary_vocab, Init::Zeros, rng);
  if (!cfg.no_copy) {
    ps.add("copy.Wcp", d, d, Init::Xavier, rng);
    ps.add("copy.gate.w", d, 1, Init::Xavier, rng);
    ps.add("copy.gate.b", 1, 1, Init::Zeros, rng);
  }
  return ps;
}

}  // namespace cast
