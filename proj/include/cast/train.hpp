#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cast/dataset.hpp"
#include "cast/metrics.hpp"
#include "cast/nn/optim.hpp"
#include "cast/seq_model.hpp"

namespace cast {

struct BatchResult {
  double loss_sum = 0.0;  // nats summed over target tokens
  int tokens = 0;
  double per_token() const { return tokens ? loss_sum / tokens : 0.0; }
};

// Adds the gradient of (sum of token losses / batch tokens) to params.grad.
// Examples run on up to `threads` workers; per-example gradients are reduced
// in example order, so the result does not depend on the thread count.
// Dropout randomness for example k comes from (dropout_seed, k).
BatchResult accumulate_gradients(const CastModel<float>& model, nn::ParamSet<float>& params,
                                 const std::vector<const EncodedExample*>& batch, bool train,
                                 std::uint64_t dropout_seed, int threads = 1);

// Mean nats/token without dropout.
BatchResult evaluate_loss(const CastModel<float>& model, const nn::ParamSet<float>& params,
                          const std::vector<EncodedExample>& data, int threads = 1);

// Greedy (or beam) summaries for every example, in order.
std::vector<DecodeOutput> summarize_all(const CastModel<float>& model, const nn::ParamSet<float>& params,
                                        const std::vector<EncodedExample>& data, const Vocabulary& summary,
                                        const GenerateOptions& opts, int threads = 1);

// Corpus BLEU-CN of generated summaries against the (untruncated) references.
double corpus_bleu(const std::vector<DecodeOutput>& outputs, const std::vector<EncodedExample>& data);

struct TrainOptions {
  nn::AdamWConfig optim;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 1;
  int threads = 1;
  bool val_bleu = true;
  GenerateOptions decode;
  std::optional<std::filesystem::path> out_dir;  // best.ckpt / last.ckpt / last.opt
  nlohmann::json checkpoint_extra = nlohmann::json::object();
  std::function<void(const nlohmann::json&)> on_epoch;  // receives each log record
};

struct TrainState {
  int epoch = 0;  // last completed epoch
  double best_val_loss = 1e300;
  int best_epoch = 0;
  int since_best = 0;
};

struct TrainResult {
  TrainState state;
  double last_train_loss = 0.0;
  bool early_stopped = false;
};

TrainResult train_model(const CastModel<float>& model, nn::ParamSet<float>& params, nn::OptimState<float>& opt,
                        const std::vector<EncodedExample>& train, const std::vector<EncodedExample>& valid,
                        const Vocabs& vocabs, const TrainOptions& options, TrainState state = {});

// Optimizer state and loop counters next to a checkpoint.
void save_optimizer(const std::filesystem::path& path, const nn::ParamSet<float>& params,
                    const nn::OptimState<float>& opt, const TrainState& state);
void load_optimizer(const std::filesystem::path& path, const nn::ParamSet<float>& params, nn::OptimState<float>& opt,
                    TrainState& state);

}  // namespace cast
