#pragma once

#include <random>
#include <string>
#include <vector>

#include "cast/dataset.hpp"
#include "cast/model_config.hpp"
#include "cast/nn/tape.hpp"
#include "cast/vocab.hpp"

namespace cast {

// Collects attention weight matrices (one per head per attention call) for
// inspection; rows are queries.
template <typename T>
struct AttentionTrace {
  std::vector<nn::Mat<T>> maps;
  std::vector<nn::Mat<T>> logits;  // pre-softmax scores, same order as maps
};

struct RunOptions {
  bool train = false;               // enables dropout
  std::mt19937_64* rng = nullptr;   // dropout randomness (required when training with dropout)
};

// Multi-head self-attention with clipped relative positions (keys and values
// both receive the per-offset vectors). Parameters under `prefix`:
// attn.{wq,wk,wv,wo}, relk, relv.
template <typename T>
nn::Var relative_self_attention(nn::Tape<T>& tape, nn::Var x, const std::string& prefix, int heads, int k_clip,
                                AttentionTrace<T>* trace = nullptr);

// Standard multi-head attention of queries `q` over `kv`, parameters
// `prefix`.{wq,wk,wv,wo}; `causal` masks future keys.
template <typename T>
nn::Var multi_head_attention(nn::Tape<T>& tape, nn::Var q, nn::Var kv, const std::string& prefix, int heads,
                             bool causal, AttentionTrace<T>* trace = nullptr);

// P^(c): row t is softmax over code positions i of <h_i W_cp, h_t>.
template <typename T>
nn::Var copy_distribution(nn::Tape<T>& tape, nn::Var code_states, nn::Var dec_states, nn::Var wcp);

// P_t(w) = gamma_t P^(g)_t(w) + (1 - gamma_t) * sum over positions i with
// code_ext[i] == w of P^(c)_t(i), over base + extended ids.
template <typename T>
nn::Var mix_distributions(nn::Tape<T>& tape, nn::Var p_gen, nn::Var p_copy, nn::Var gamma,
                          const std::vector<int>& code_ext, int ext_size);

// Fixed sinusoidal position signal, rows 0..n-1.
template <typename T>
nn::Mat<T> sinusoid_positions(int n, int d);

template <typename T>
class CastModel {
 public:
  explicit CastModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}

  struct Encoded {
    nn::Var ast;   // l x d, structure preorder
    nn::Var code;  // n x d
  };
  struct Decoded {
    nn::Var p;       // T x ext_size (T x |V_sum| without copy)
    nn::Var p_gen;   // T x |V_sum|
    nn::Var p_copy;  // T x n (copy only)
    nn::Var gamma;   // T x 1 (copy only)
    nn::Var states;  // T x d
    int ext_size = 0;
  };

  const ModelConfig& config() const { return cfg_; }

  nn::Var encode_ast(nn::Tape<T>& tape, const EncodedExample& ex) const;
  nn::Var encode_code(nn::Tape<T>& tape, const std::vector<int>& code_ids, const RunOptions& run = {}) const;
  Encoded encode(nn::Tape<T>& tape, const EncodedExample& ex, const RunOptions& run = {}) const;
  Decoded decode(nn::Tape<T>& tape, const Encoded& enc, const EncodedExample& ex, const std::vector<int>& inputs,
                 const RunOptions& run = {}) const;

  // Sum over target positions of -log P_t(gold); gold ids are extended ids
  // with copy, base ids without.
  nn::Var loss_sum(nn::Tape<T>& tape, const EncodedExample& ex, const RunOptions& run = {}) const;
  static int target_count(const EncodedExample& ex) { return static_cast<int>(ex.target.size()); }

  AttentionTrace<T>* trace = nullptr;

 private:
  nn::Var dropout(nn::Tape<T>& tape, nn::Var x, const RunOptions& run) const;
  ModelConfig cfg_;
};

struct GenerateOptions {
  int beam = 1;  // 1 = greedy
  int max_len = 30;
  double length_penalty = 1.0;  // score = logprob / length^penalty
};

struct DecodeOutput {
  std::vector<int> ids;  // extended ids, eos excluded
  std::vector<std::string> tokens;
  std::vector<double> gammas;  // gate value at each emitted step (1 without copy)
};

DecodeOutput generate(const CastModel<float>& model, const nn::ParamSet<float>& params, const EncodedExample& ex,
                      const Vocabulary& summary, const GenerateOptions& opts = {});

}  // namespace cast
