#include <doctest.h>

#include <filesystem>

#include "cast/nn/checkpoint.hpp"
#include "cast/train.hpp"
#include "model_util.hpp"

using namespace cast;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_values(const nn::ParamSet<float>& a, const nn::ParamSet<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].value != b[i].value) return false;
  return true;
}

}  // namespace

TEST_CASE("batch gradients do not depend on the thread count") {
  auto s = tiny_setup(5, 6);
  s.cfg.dropout = 0.2;
  CastModel<float> model(s.cfg);
  std::vector<const EncodedExample*> batch;
  for (const auto& e : s.encoded) batch.push_back(&e);
  auto one = init_params(s.cfg, 1);
  auto three = init_params(s.cfg, 1);
  auto r1 = accumulate_gradients(model, one, batch, true, 77, 1);
  auto r3 = accumulate_gradients(model, three, batch, true, 77, 3);
  CHECK(r1.loss_sum == r3.loss_sum);
  CHECK(r1.tokens == r3.tokens);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].grad == three[i].grad);
  // without dropout the training flag does not change anything
  auto a = init_params(s.cfg, 1), b = init_params(s.cfg, 1);
  s.cfg.dropout = 0.0;
  CastModel<float> plain(s.cfg);
  accumulate_gradients(plain, a, batch, true, 1, 1);
  accumulate_gradients(plain, b, batch, false, 2, 1);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].grad == b[i].grad);
}

TEST_CASE("batch gradient is the token-weighted mean of example gradients") {
  auto s = tiny_setup(9, 2);
  CastModel<float> model(s.cfg);
  auto both = init_params(s.cfg, 2);
  auto r = accumulate_gradients(model, both, {&s.encoded[0], &s.encoded[1]}, false, 0);
  auto first = init_params(s.cfg, 2), second = init_params(s.cfg, 2);
  auto r0 = accumulate_gradients(model, first, {&s.encoded[0]}, false, 0);
  auto r1 = accumulate_gradients(model, second, {&s.encoded[1]}, false, 0);
  CHECK(r.tokens == r0.tokens + r1.tokens);
  CHECK(r.loss_sum == doctest::Approx(r0.loss_sum + r1.loss_sum).epsilon(1e-6));
  for (std::size_t i = 0; i < both.size(); ++i) {
    nn::Mat<float> want = (first[i].grad * static_cast<float>(r0.tokens) + second[i].grad * static_cast<float>(r1.tokens)) /
                          static_cast<float>(r.tokens);
    CHECK((both[i].grad - want).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("training resumes exactly from the last checkpoint") {
  auto s = tiny_setup(12, 6);
  s.cfg.dropout = 0.1;
  CastModel<float> model(s.cfg);
  std::vector<EncodedExample> valid(s.encoded.begin(), s.encoded.begin() + 2);
  TrainOptions opts;
  opts.batch_size = 4;
  opts.seed = 3;
  opts.val_bleu = false;
  opts.optim.lr = 1e-3;

  auto straight = init_params(s.cfg, 4);
  auto opt_a = nn::make_optim_state(straight);
  opts.max_epochs = 4;
  auto ra = train_model(model, straight, opt_a, s.encoded, valid, s.vocabs, opts);
  CHECK(ra.state.epoch == 4);

  auto dir = fresh_dir("resume");
  auto first = init_params(s.cfg, 4);
  auto opt_b = nn::make_optim_state(first);
  opts.max_epochs = 2;
  opts.out_dir = dir;
  std::vector<nlohmann::json> log;
  opts.on_epoch = [&](const nlohmann::json& rec) { log.push_back(rec); };
  train_model(model, first, opt_b, s.encoded, valid, s.vocabs, opts);
  REQUIRE(log.size() == 2);
  CHECK(log[0].contains("val_loss"));
  CHECK(std::filesystem::exists(dir / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "last.ckpt"));
  CHECK(std::filesystem::exists(dir / "last.opt"));

  auto resumed = init_params(s.cfg, 99);
  nn::restore_params(nn::load_checkpoint(dir / "last.ckpt").params, resumed);
  nn::OptimState<float> opt_c;
  TrainState state;
  load_optimizer(dir / "last.opt", resumed, opt_c, state);
  CHECK(state.epoch == 2);
  CHECK(opt_c.t == opt_b.t);
  opts.max_epochs = 4;
  opts.out_dir.reset();
  auto rc = train_model(model, resumed, opt_c, s.encoded, valid, s.vocabs, opts, state);
  CHECK(rc.state.epoch == 4);
  CHECK(same_values(straight, resumed));
  std::filesystem::remove_all(dir);
}

TEST_CASE("early stopping after the patience runs out") {
  auto s = tiny_setup(13, 3);
  CastModel<float> model(s.cfg);
  auto params = init_params(s.cfg, 1);
  auto opt = nn::make_optim_state(params);
  TrainOptions opts;
  opts.max_epochs = 50;
  opts.patience = 2;
  opts.val_bleu = false;
  opts.optim.lr = 0.0;  // validation loss can never improve after epoch 1
  opts.optim.weight_decay = 0.0;
  auto r = train_model(model, params, opt, s.encoded, s.encoded, s.vocabs, opts);
  CHECK(r.early_stopped);
  CHECK(r.state.best_epoch == 1);
  CHECK(r.state.epoch == 3);
}

TEST_CASE("a tiny model memorizes four summaries") {
  auto s = tiny_setup(21, 4, 32);
  CastModel<float> model(s.cfg);
  auto params = init_params(s.cfg, 7);
  auto opt = nn::make_optim_state(params);
  TrainOptions opts;
  opts.max_epochs = 150;
  opts.patience = 1000;
  opts.batch_size = 4;
  opts.val_bleu = false;
  opts.optim.lr = 3e-3;
  opts.optim.weight_decay = 0.0;
  auto r = train_model(model, params, opt, s.encoded, {}, s.vocabs, opts);
  CHECK(r.last_train_loss < 0.1);
  auto out = summarize_all(model, params, s.encoded, s.vocabs.summary, {});
  int exact = 0;
  for (std::size_t k = 0; k < out.size(); ++k) exact += out[k].tokens == s.encoded[k].summary_tokens;
  CHECK(exact == 4);
  CHECK(corpus_bleu(out, s.encoded) == doctest::Approx(1.0));
}

TEST_CASE("optimizer state files reject mismatched parameters") {
  auto s = tiny_setup(1, 1);
  auto params = init_params(s.cfg, 1);
  auto opt = nn::make_optim_state(params);
  auto dir = fresh_dir("optstate");
  save_optimizer(dir / "x.opt", params, opt, {});
  ModelConfig other = s.cfg;
  other.d = 16;
  other.ff = 32;
  auto wrong = init_params(other, 1);
  nn::OptimState<float> o;
  TrainState st;
  CHECK_THROWS_AS(load_optimizer(dir / "x.opt", wrong, o, st), nn::CheckpointError);
  std::filesystem::remove_all(dir);
}
