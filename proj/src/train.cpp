#include "cast/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <thread>

#include "cast/nn/checkpoint.hpp"

namespace cast {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  std::uint64_t out[1];
  std::uint32_t parts[2];
  seq.generate(parts, parts + 2);
  out[0] = (static_cast<std::uint64_t>(parts[0]) << 32) | parts[1];
  return out[0];
}

// Runs fn(k) for k in [begin, end) on up to `threads` workers.
template <typename F>
void parallel_for(int begin, int end, int threads, F fn) {
  const int n = end - begin;
  if (threads <= 1 || n <= 1) {
    for (int k = begin; k < end; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  const int w = std::min(threads, n);
  for (int t = 0; t < w; ++t)
    pool.emplace_back([=, &fn] {
      for (int k = begin + t; k < end; k += w) fn(k);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

BatchResult accumulate_gradients(const CastModel<float>& model, nn::ParamSet<float>& params,
                                 const std::vector<const EncodedExample*>& batch, bool train,
                                 std::uint64_t dropout_seed, int threads) {
  BatchResult res;
  for (const auto* ex : batch) res.tokens += CastModel<float>::target_count(*ex);
  if (res.tokens == 0) return res;
  const float scale = 1.0f / static_cast<float>(res.tokens);
  const int n = static_cast<int>(batch.size());
  const int chunk = std::max(1, threads);
  // chunks of `threads` tapes at a time; reduce each chunk in example order
  for (int start = 0; start < n; start += chunk) {
    const int stop = std::min(n, start + chunk);
    std::vector<std::unique_ptr<nn::Tape<float>>> tapes(static_cast<std::size_t>(stop - start));
    std::vector<double> losses(static_cast<std::size_t>(stop - start), 0.0);
    parallel_for(start, stop, threads, [&](int k) {
      std::mt19937_64 rng(mix_seed(dropout_seed, static_cast<std::uint64_t>(k)));
      RunOptions run{train, &rng};
      auto tape = std::make_unique<nn::Tape<float>>(&params);
      nn::Var loss = model.loss_sum(*tape, *batch[static_cast<std::size_t>(k)], run);
      tape->backward(loss);
      losses[static_cast<std::size_t>(k - start)] = tape->scalar(loss);
      tapes[static_cast<std::size_t>(k - start)] = std::move(tape);
    });
    for (std::size_t i = 0; i < tapes.size(); ++i) {
      tapes[i]->add_param_grads_to(params, scale);
      res.loss_sum += losses[i];
    }
  }
  return res;
}

BatchResult evaluate_loss(const CastModel<float>& model, const nn::ParamSet<float>& params,
                          const std::vector<EncodedExample>& data, int threads) {
  std::vector<double> losses(data.size(), 0.0);
  parallel_for(0, static_cast<int>(data.size()), threads, [&](int k) {
    nn::Tape<float> tape(&params);
    tape.set_grad_enabled(false);
    losses[static_cast<std::size_t>(k)] = tape.scalar(model.loss_sum(tape, data[static_cast<std::size_t>(k)]));
  });
  BatchResult res;
  for (std::size_t k = 0; k < data.size(); ++k) {
    res.loss_sum += losses[k];
    res.tokens += CastModel<float>::target_count(data[k]);
  }
  return res;
}

std::vector<DecodeOutput> summarize_all(const CastModel<float>& model, const nn::ParamSet<float>& params,
                                        const std::vector<EncodedExample>& data, const Vocabulary& summary,
                                        const GenerateOptions& opts, int threads) {
  std::vector<DecodeOutput> out(data.size());
  parallel_for(0, static_cast<int>(data.size()), threads, [&](int k) {
    out[static_cast<std::size_t>(k)] = generate(model, params, data[static_cast<std::size_t>(k)], summary, opts);
  });
  return out;
}

double corpus_bleu(const std::vector<DecodeOutput>& outputs, const std::vector<EncodedExample>& data) {
  std::vector<ScoredPair> pairs;
  for (std::size_t k = 0; k < data.size(); ++k) pairs.push_back({outputs[k].tokens, data[k].summary_tokens});
  return pairs.empty() ? 0.0 : bleu_cn(pairs);
}

void save_optimizer(const std::filesystem::path& path, const nn::ParamSet<float>& params,
                    const nn::OptimState<float>& opt, const TrainState& state) {
  nn::ParamSet<float> moments;
  for (std::size_t i = 0; i < params.size(); ++i) {
    moments.push({"m." + params[i].name, opt.m[i], {}});
    moments.push({"v." + params[i].name, opt.v[i], {}});
  }
  nn::save_checkpoint(path, moments,
                      {{"step", opt.t},
                       {"epoch", state.epoch},
                       {"best_val_loss", state.best_val_loss},
                       {"best_epoch", state.best_epoch},
                       {"since_best", state.since_best}});
}

void load_optimizer(const std::filesystem::path& path, const nn::ParamSet<float>& params, nn::OptimState<float>& opt,
                    TrainState& state) {
  auto ck = nn::load_checkpoint(path);
  opt = nn::make_optim_state(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = ck.params.get("m." + params[i].name);
    const auto& v = ck.params.get("v." + params[i].name);
    if (m.value.rows() != params[i].value.rows() || m.value.cols() != params[i].value.cols())
      throw nn::CheckpointError("optimizer state shape mismatch for " + params[i].name);
    opt.m[i] = m.value;
    opt.v[i] = v.value;
  }
  opt.t = ck.manifest.at("step").get<long long>();
  state.epoch = ck.manifest.at("epoch").get<int>();
  state.best_val_loss = ck.manifest.at("best_val_loss").get<double>();
  state.best_epoch = ck.manifest.at("best_epoch").get<int>();
  state.since_best = ck.manifest.at("since_best").get<int>();
}

TrainResult train_model(const CastModel<float>& model, nn::ParamSet<float>& params, nn::OptimState<float>& opt,
                        const std::vector<EncodedExample>& train, const std::vector<EncodedExample>& valid,
                        const Vocabs& vocabs, const TrainOptions& options, TrainState state) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (options.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  TrainResult result;
  std::vector<std::size_t> order(train.size());

  for (int epoch = state.epoch + 1; epoch <= options.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    // each epoch's order depends only on (seed, epoch), so resumed runs match
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    BatchResult epoch_loss;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      std::vector<const EncodedExample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + static_cast<std::size_t>(options.batch_size)); ++k)
        batch.push_back(&train[order[k]]);
      params.zero_grad();
      std::uint64_t dseed = mix_seed(options.seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(epoch) * 1000003ULL + start);
      auto b = accumulate_gradients(model, params, batch, true, dseed, options.threads);
      nn::adamw_step(params, opt, options.optim);
      epoch_loss.loss_sum += b.loss_sum;
      epoch_loss.tokens += b.tokens;
    }
    result.last_train_loss = epoch_loss.per_token();

    nlohmann::json rec = {{"epoch", epoch}, {"train_loss", result.last_train_loss}};
    double val_loss = result.last_train_loss;
    if (!valid.empty()) {
      val_loss = evaluate_loss(model, params, valid, options.threads).per_token();
      rec["val_loss"] = val_loss;
      if (options.val_bleu)
        rec["val_bleu"] = 100.0 * corpus_bleu(summarize_all(model, params, valid, vocabs.summary, options.decode,
                                                            options.threads),
                                              valid);
    }
    state.epoch = epoch;
    bool improved = val_loss < state.best_val_loss;
    if (improved) {
      state.best_val_loss = val_loss;
      state.best_epoch = epoch;
      state.since_best = 0;
    } else {
      ++state.since_best;
    }
    if (options.out_dir) {
      nlohmann::json extra = options.checkpoint_extra;
      extra["epoch"] = epoch;
      extra["val_loss"] = val_loss;
      if (improved) {
        nn::save_checkpoint(*options.out_dir / "best.ckpt", params, extra);
        rec["checkpoint"] = (*options.out_dir / "best.ckpt").string();
      }
      nn::save_checkpoint(*options.out_dir / "last.ckpt", params, extra);
      save_optimizer(*options.out_dir / "last.opt", params, opt, state);
    }
    rec["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.on_epoch) options.on_epoch(rec);
    if (state.since_best >= options.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.state = state;
  return result;
}

}  // namespace cast
