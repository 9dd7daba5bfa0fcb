#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cast/nn/checkpoint.hpp"
#include "cast/nn/gradcheck.hpp"
#include "cast/nn/optim.hpp"
#include "cast/nn/tape.hpp"

using namespace cast::nn;

namespace {

Mat<double> scalar_mat(double v) {
  Mat<double> m(1, 1);
  m(0, 0) = v;
  return m;
}

Mat<double> random_mat(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

ParamSet<double> single_param(const std::string& name, Mat<double> value) {
  ParamSet<double> ps;
  NamedTensor<double> t;
  t.name = name;
  t.grad = Mat<double>::Zero(value.rows(), value.cols());
  t.value = std::move(value);
  ps.push(std::move(t));
  return ps;
}

}  // namespace

TEST_CASE("backward: scalar derivatives") {
  auto ps = single_param("x", scalar_mat(1.5));
  {
    Tape<double> t(&ps);
    Var x = t.param(0);
    Var f = t.mul(x, x);
    t.backward(f);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(3.0));
  }
  ps[0].value(0, 0) = 0.0;
  {
    Tape<double> t(&ps);
    Var x = t.param(0);
    t.backward(t.tanh(x));
    CHECK(t.grad(x)(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("backward: non-scalar loss is a graph error") {
  Tape<double> t;
  Var a = t.constant(Mat<double>::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(a), GraphError);
}

TEST_CASE("backward: unreachable parameters get zero gradient") {
  std::mt19937_64 rng(3);
  ParamSet<double> ps;
  ps.add("used", 2, 2, Init::Xavier, rng);
  ps.add("unused", 2, 2, Init::Xavier, rng);
  Tape<double> t(&ps);
  Var loss = t.sum(t.tanh(t.param("used")));
  t.backward(loss);
  ps.zero_grad();
  t.add_param_grads_to(ps);
  CHECK(ps.get("unused").grad.isZero());
  CHECK_FALSE(ps.get("used").grad.isZero());
}

TEST_CASE("shape errors name the operation") {
  Tape<double> t;
  Var a = t.constant(Mat<double>::Ones(2, 3));
  Var b = t.constant(Mat<double>::Ones(2, 3));
  CHECK_THROWS_AS(t.matmul(a, b), ShapeError);
  CHECK_THROWS_AS(t.gather_rows(a, {5}), ShapeError);
}

TEST_CASE("softmax rows are positive and normalized") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<float> t;
    Mat<float> x = random_mat(4, 9, rng, 5.0).cast<float>();
    auto y = t.value(t.softmax_rows(t.constant(x)));
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      CHECK(std::abs(y.row(i).cast<double>().sum() - 1.0) <= 1e-6);
      CHECK(y.row(i).minCoeff() > 0.0f);
    }
    auto c = t.value(t.softmax_rows(t.constant(random_mat(5, 5, rng).cast<float>()), true));
    CHECK(c(0, 0) == 1.0f);
    CHECK(c(1, 2) == 0.0f);
    CHECK(std::abs(c.row(3).cast<double>().sum() - 1.0) <= 1e-6);
  }
}

TEST_CASE("relative position gather and scatter") {
  // n=3, k=1: offsets clip to {-1,0,1} -> columns {0,1,2}
  CHECK(relative_index(0, 2, 1) == 2);
  CHECK(relative_index(2, 0, 1) == 0);
  CHECK(relative_index(1, 1, 1) == 1);
  Tape<double> t;
  Mat<double> r(3, 3);
  r << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  auto g = t.value(t.relative_gather(t.constant(r), 3, 1));
  Mat<double> expect(3, 3);
  expect << 2, 3, 3, 4, 5, 6, 7, 7, 8;
  CHECK(g == expect);
  Mat<double> a(3, 3);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  auto s = t.value(t.relative_scatter(t.constant(a), 1));
  Mat<double> se(3, 3);
  se << 0, 1, 5, 4, 5, 6, 15, 9, 0;
  CHECK(s == se);
}

TEST_CASE("grad_check: linear loss is exact") {
  std::mt19937_64 rng(1);
  Mat<double> x = random_mat(5, 1, rng);
  auto ps = single_param("w", random_mat(1, 5, rng));
  // central differences are exact for a linear loss at any step size; a wider
  // step keeps f64 cancellation well below the tolerance
  auto res = grad_check([&](Tape<double>& t) { return t.matmul(t.param("w"), t.constant(x)); }, ps, {.eps = 1e-3});
  CHECK(res.coords == 5);
  CHECK(res.max_rel_error <= 1e-10);
}

TEST_CASE("grad_check: softmax cross-entropy toy") {
  std::mt19937_64 rng(2);
  ParamSet<double> ps;
  ps.add("W", 6, 4, Init::Xavier, rng);
  ps.add("b", 1, 4, Init::Xavier, rng);
  Mat<double> x = random_mat(3, 6, rng);
  auto res = grad_check(
      [&](Tape<double>& t) {
        Var logits = t.add(t.matmul(t.constant(x), t.param("W")), t.param("b"));
        Var p = t.softmax_rows(logits);
        return t.affine(t.sum(t.log(t.pick(p, {0, 3, 1}))), -1.0 / 3.0, 0.0);
      },
      ps);
  CHECK(res.max_rel_error <= 1e-6);
}

TEST_CASE("grad_check: every primitive") {
  std::mt19937_64 rng(9);
  ParamSet<double> ps;
  ps.add("A", 4, 5, Init::Xavier, rng);
  ps.add("B", 5, 5, Init::Xavier, rng);
  ps.add("E", 7, 5, Init::Embedding, rng);
  ps.add("g", 1, 5, Init::Ones, rng);
  ps.add("h", 1, 5, Init::Xavier, rng);
  ps.add("c", 4, 1, Init::Xavier, rng);
  ps.add("R", 4, 5, Init::Xavier, rng);
  for (auto& p : ps) p.value += random_mat(static_cast<int>(p.value.rows()), static_cast<int>(p.value.cols()), rng, 0.3);
  auto build = [&](Tape<double>& t) {
    Var A = t.param("A"), B = t.param("B"), E = t.param("E");
    Var x = t.matmul(A, B);                                    // 4x5
    Var y = t.layer_norm(t.gelu(x), t.param("g"), t.param("h"));
    Var z = t.add(t.mul(y, t.tanh(x)), t.param("h"));          // row broadcast
    Var e = t.gather_rows(E, {1, 3, 3, 6});
    Var w = t.sub(t.sigmoid(e), t.mul_col(z, t.param("c")));
    Var s = t.softmax_rows(t.matmul_nt(w, A), true);           // 4x4 causal
    Var m = t.max_rows(t.concat_rows({w, z}));
    Var gm = t.group_mean(w, {{0, 1}, {}, {2, 3, 1}});
    Var rg = t.relative_gather(t.param("R"), 4, 2);
    Var rs = t.relative_scatter(t.mul(s, rg), 2);
    Var cat = t.concat_cols({t.slice_cols(gm, 1, 3), t.slice_rows(rs, 0, 3)});
    Var pad = t.pad_cols(t.softmax_rows(cat), 2);
    Var picked = t.log(t.pick(t.affine(pad, 0.5, 0.1), {0, 6, 3}));
    return t.add(t.sum(picked), t.sum(t.mul(m, m)));
  };
  auto res = grad_check(build, ps, {.eps = 1e-5, .fraction = 1.0, .min_coords = 10, .seed = 4});
  INFO(res.worst_param << " analytic " << res.worst_analytic << " numeric " << res.worst_numeric);
  CHECK(res.max_rel_error <= 1e-6);
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    ParamSet<double> ps;
    ps.add("W", 3, 3, Init::Xavier, rng);
    Mat<double> x = random_mat(2, 3, rng);
    auto f1 = [&](Tape<double>& t) { return t.sum(t.tanh(t.matmul(t.constant(x), t.param("W")))); };
    auto f2 = [&](Tape<double>& t) { return t.sum(t.softmax_rows(t.matmul(t.constant(x), t.param("W")))); };
    auto grad_of = [&](auto f) {
      ps.zero_grad();
      Tape<double> t(&ps);
      Var l = f(t);
      t.backward(l);
      t.add_param_grads_to(ps);
      return Mat<double>(ps[0].grad);
    };
    Mat<double> g1 = grad_of(f1), g2 = grad_of(f2);
    Mat<double> g12 = grad_of([&](Tape<double>& t) { return t.add(f1(t), f2(t)); });
    CHECK((g12 - (g1 + g2)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("AdamW: hand-evaluated first step") {
  auto ps = single_param("p", scalar_mat(1.0)).cast<float>();
  ps[0].grad(0, 0) = 0.5f;
  auto st = make_optim_state(ps);
  adamw_step(ps, st, {.lr = 0.1, .weight_decay = 0.01});
  CHECK(ps[0].value(0, 0) == doctest::Approx(0.899).epsilon(1e-6));
  CHECK(st.t == 1);
}

TEST_CASE("AdamW: zero gradient without decay leaves parameters alone") {
  auto ps = single_param("p", scalar_mat(0.75));
  auto st = make_optim_state(ps);
  for (int i = 0; i < 5; ++i) adamw_step(ps, st, {.lr = 0.1, .weight_decay = 0.0});
  CHECK(ps[0].value(0, 0) == 0.75);
}

TEST_CASE("AdamW: scalar quadratic converges") {
  auto ps = single_param("p", scalar_mat(0.0));
  auto st = make_optim_state(ps);
  for (int i = 0; i < 500; ++i) {
    ps[0].grad(0, 0) = 2.0 * (ps[0].value(0, 0) - 2.0);
    adamw_step(ps, st, {.lr = 0.05, .weight_decay = 0.0});
  }
  CHECK(std::abs(ps[0].value(0, 0) - 2.0) < 0.05);
}

TEST_CASE("AdamW with zero decay matches a plain Adam reference bitwise") {
  std::mt19937_64 rng(21);
  ParamSet<double> ps;
  ps.add("W", 3, 4, Init::Xavier, rng);
  auto st = make_optim_state(ps);
  // reference: textbook Adam written coordinate by coordinate
  std::vector<double> p(ps[0].value.data(), ps[0].value.data() + 12), m(12, 0.0), v(12, 0.0);
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 3; ++step) {
    Mat<double> g = random_mat(3, 4, rng);
    ps[0].grad = g;
    adamw_step(ps, st, {.lr = lr, .beta1 = b1, .beta2 = b2, .eps = eps, .weight_decay = 0.0});
    for (int i = 0; i < 12; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g.data()[i];
      const double g2 = g.data()[i] * g.data()[i];
      v[i] = b2 * v[i] + (1 - b2) * g2;
      double mh = m[i] * (1.0 / (1 - std::pow(b1, step)));
      double vh = v[i] * (1.0 / (1 - std::pow(b2, step)));
      p[i] -= lr * (mh / (std::sqrt(vh) + eps)) + lr * 0.0 * p[i];
    }
    for (int i = 0; i < 12; ++i) {
      INFO("step " << step << " coord " << i << " diff " << (ps[0].value.data()[i] - p[i]));
      CHECK(ps[0].value.data()[i] == p[i]);
    }
  }
}

TEST_CASE("checkpoint round trip and mismatch diagnostics") {
  std::mt19937_64 rng(8);
  ParamSet<float> ps;
  ps.add("a.w", 3, 2, Init::Xavier, rng);
  ps.add("b", 1, 4, Init::Embedding, rng);
  auto path = std::filesystem::temp_directory_path() / "cast_nn_ckpt_test.bin";
  save_checkpoint(path, ps, {{"config", {{"d", 2}}}});
  auto ck = load_checkpoint(path);
  CHECK(ck.manifest["version"] == kCheckpointVersion);
  CHECK(ck.manifest["config"]["d"] == 2);
  CHECK(ck.manifest["tensors"][1]["offset"] == 6);
  ParamSet<float> fresh;
  fresh.add("a.w", 3, 2, Init::Zeros, rng);
  fresh.add("b", 1, 4, Init::Zeros, rng);
  restore_params(ck.params, fresh);
  CHECK(fresh.get("a.w").value == ps.get("a.w").value);
  CHECK(fresh.get("b").value == ps.get("b").value);

  ParamSet<float> other;
  other.add("a.w", 2, 2, Init::Zeros, rng);
  other.add("c", 1, 1, Init::Zeros, rng);
  try {
    restore_params(ck.params, other);
    FAIL("mismatch not detected");
  } catch (const CheckpointError& e) {
    std::string msg = e.what();
    CHECK(msg.find("expected shape [2,2], found [3,2]") != std::string::npos);
    CHECK(msg.find("missing tensor c") != std::string::npos);
    CHECK(msg.find("unknown tensor b") != std::string::npos);
  }
  std::filesystem::remove(path);
}
