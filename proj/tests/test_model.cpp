#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cast/ast_encoder.hpp"
#include "cast/nn/gradcheck.hpp"
#include "cast/nn/optim.hpp"
#include "cast/seq_model.hpp"
#include "model_util.hpp"

using namespace cast;
using nn::Mat;
using nn::Tape;
using nn::Var;

namespace {

Mat<double> rows(std::initializer_list<std::initializer_list<double>> v) {
  Mat<double> m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : v) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

Mat<double> eye(int d) { return Mat<double>::Identity(d, d); }

// ---- independent reference forward pass (plain Eigen, recursion, no tape) ----

using M = Mat<double>;
using P = nn::ParamSet<double>;

const M& pv(const P& p, const std::string& name) { return p.get(name).value; }

M layer_norm(const M& x, const M& g, const M& b) {
  M out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).mean();
    double var = (x.row(i).array() - mu).square().mean();
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
  }
  return out;
}

M gelu(const M& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v))); });
}

M softmax_row(const M& logits, int valid_cols) {
  M out = M::Zero(1, logits.cols());
  double mx = -1e300;
  for (int j = 0; j < valid_cols; ++j) mx = std::max(mx, logits(0, j));
  double z = 0;
  for (int j = 0; j < valid_cols; ++j) z += std::exp(logits(0, j) - mx);
  for (int j = 0; j < valid_cols; ++j) out(0, j) = std::exp(logits(0, j) - mx) / z;
  return out;
}

M ref_attention(const M& xq, const M& xkv, const P& p, const std::string& prefix, int heads, bool causal,
                int k_clip, bool relative) {
  const std::string w = relative ? prefix + ".attn" : prefix;
  M q = xq * pv(p, w + ".wq"), k = xkv * pv(p, w + ".wk"), v = xkv * pv(p, w + ".wv");
  const int d = static_cast<int>(xq.cols()), dh = d / heads;
  M cat(xq.rows(), d);
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < xq.rows(); ++i) {
      M logits(1, xkv.rows());
      for (Eigen::Index j = 0; j < xkv.rows(); ++j) {
        M kj = k.block(j, h * dh, 1, dh);
        if (relative) {
          int off = std::clamp(static_cast<int>(j - i), -k_clip, k_clip) + k_clip;
          kj += pv(p, prefix + ".relk").row(off);
        }
        logits(0, j) = (q.block(i, h * dh, 1, dh).array() * kj.array()).sum() / std::sqrt(double(dh));
      }
      int valid = causal ? static_cast<int>(i) + 1 : static_cast<int>(xkv.rows());
      M a = softmax_row(logits, valid);
      M o = M::Zero(1, dh);
      for (Eigen::Index j = 0; j < xkv.rows(); ++j) {
        M vj = v.block(j, h * dh, 1, dh);
        if (relative) vj += pv(p, prefix + ".relv").row(std::clamp(static_cast<int>(j - i), -k_clip, k_clip) + k_clip);
        o += a(0, j) * vj;
      }
      cat.block(i, h * dh, 1, dh) = o;
    }
  }
  return cat * pv(p, w + ".wo");
}

M ref_rvnn_node(const EncodedSubtree& t, int node, const P& p, std::vector<M>& states) {
  M c = pv(p, "ast.embed").row(t.labels[static_cast<std::size_t>(node)]) * pv(p, "ast.WC");
  const auto& kids = t.children[static_cast<std::size_t>(node)];
  M h;
  if (kids.empty()) {
    h = c;
  } else {
    M mean = M::Zero(1, c.cols());
    for (int k : kids) mean += ref_rvnn_node(t, k, p, states);
    mean /= static_cast<double>(kids.size());
    h = (c + mean * pv(p, "ast.WA")).array().tanh().matrix();
  }
  states.push_back(h);
  return h;
}

M ref_structure_node(int node, const std::vector<std::vector<int>>& kids, const M& s, const P& p, M& out) {
  M sw = s.row(node) * pv(p, "ast.WS");
  M h;
  if (kids[static_cast<std::size_t>(node)].empty()) {
    h = sw.array().tanh().matrix();
  } else {
    M mean = M::Zero(1, s.cols());
    for (int k : kids[static_cast<std::size_t>(node)]) mean += ref_structure_node(k, kids, s, p, out);
    mean /= static_cast<double>(kids[static_cast<std::size_t>(node)].size());
    h = (sw + mean * pv(p, "ast.WB")).array().tanh().matrix();
  }
  out.row(node) = h;
  return h;
}

double ref_loss(const ModelConfig& cfg, const P& p, const EncodedExample& ex) {
  const int d = cfg.d;
  // AST channel
  const int m = static_cast<int>(ex.subtrees.size());
  M s(m, d);
  for (int t = 0; t < m; ++t) {
    const auto& tree = ex.subtrees[static_cast<std::size_t>(t)];
    std::vector<bool> child(tree.labels.size(), false);
    for (const auto& ks : tree.children)
      for (int k : ks) child[static_cast<std::size_t>(k)] = true;
    int root = static_cast<int>(std::find(child.begin(), child.end(), false) - child.begin());
    std::vector<M> states;
    ref_rvnn_node(tree, root, p, states);
    M pooled = states[0];
    for (const auto& h : states) pooled = pooled.cwiseMax(h);
    s.row(t) = pooled;
  }
  M ast(m, d);
  std::vector<std::vector<int>> kids(static_cast<std::size_t>(m));
  for (auto [a, b] : ex.structure) kids[static_cast<std::size_t>(a)].push_back(b);
  if (cfg.no_aggregation)
    ast = s;
  else
    ref_structure_node(0, kids, s, p, ast);
  // code channel
  M x(static_cast<Eigen::Index>(ex.code_ids.size()), d);
  for (std::size_t i = 0; i < ex.code_ids.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = pv(p, "code.embed").row(ex.code_ids[i]);
  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string pre = "code.L" + std::to_string(l);
    x += ref_attention(layer_norm(x, pv(p, pre + ".ln1.g"), pv(p, pre + ".ln1.b")),
                       layer_norm(x, pv(p, pre + ".ln1.g"), pv(p, pre + ".ln1.b")), p, pre, cfg.heads, false,
                       cfg.k_clip, true);
    M y = layer_norm(x, pv(p, pre + ".ln2.g"), pv(p, pre + ".ln2.b"));
    M hid = gelu((y * pv(p, pre + ".ff1.w")).rowwise() + pv(p, pre + ".ff1.b").row(0));
    x += (hid * pv(p, pre + ".ff2.w")).rowwise() + pv(p, pre + ".ff2.b").row(0);
  }
  M code = layer_norm(x, pv(p, "code.ln.g"), pv(p, "code.ln.b"));
  // decoder
  auto in = ex.decoder_input();
  M z(static_cast<Eigen::Index>(in.size()), d);
  for (std::size_t t = 0; t < in.size(); ++t)
    for (int j = 0; j < d; ++j) {
      double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(2 * (j / 2)) / d);
      z(static_cast<Eigen::Index>(t), j) = pv(p, "dec.embed")(in[t], j) * std::sqrt(double(d)) +
                                           (j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string pre = "dec.L" + std::to_string(l);
    M y = layer_norm(z, pv(p, pre + ".ln1.g"), pv(p, pre + ".ln1.b"));
    z += ref_attention(y, y, p, pre + ".self", cfg.heads, true, 0, false);
    y = layer_norm(z, pv(p, pre + ".ln2.g"), pv(p, pre + ".ln2.b"));
    z += ref_attention(y, ast, p, pre + ".xast", cfg.heads, false, 0, false);
    y = layer_norm(z, pv(p, pre + ".ln3.g"), pv(p, pre + ".ln3.b"));
    z += ref_attention(y, code, p, pre + ".xcode", cfg.heads, false, 0, false);
    y = layer_norm(z, pv(p, pre + ".ln4.g"), pv(p, pre + ".ln4.b"));
    M hid = gelu((y * pv(p, pre + ".ff1.w")).rowwise() + pv(p, pre + ".ff1.b").row(0));
    z += (hid * pv(p, pre + ".ff2.w")).rowwise() + pv(p, pre + ".ff2.b").row(0);
  }
  M hs = layer_norm(z, pv(p, "dec.ln.g"), pv(p, "dec.ln.b"));
  const int V = cfg.summary_vocab;
  double loss = 0;
  for (Eigen::Index t = 0; t < hs.rows(); ++t) {
    M pg = softmax_row((hs.row(t) * pv(p, "dec.out.w")) + pv(p, "dec.out.b"), V);
    int gold = cfg.no_copy ? ex.target_base[static_cast<std::size_t>(t)] : ex.target[static_cast<std::size_t>(t)];
    double prob;
    if (cfg.no_copy) {
      prob = pg(0, gold);
    } else {
      M scores = hs.row(t) * (code * pv(p, "copy.Wcp")).transpose();
      M pc = softmax_row(scores, static_cast<int>(scores.cols()));
      double gamma = 1 / (1 + std::exp(-((hs.row(t) * pv(p, "copy.gate.w"))(0, 0) + pv(p, "copy.gate.b")(0, 0))));
      prob = gold < V ? gamma * pg(0, gold) : 0.0;
      for (std::size_t i = 0; i < ex.code_ext.size(); ++i)
        if (ex.code_ext[i] == gold) prob += (1 - gamma) * pc(0, static_cast<Eigen::Index>(i));
    }
    loss -= std::log(prob);
  }
  return loss;
}

}  // namespace

// ---- AST encoder -----------------------------------------------------------

TEST_CASE("subtree RvNN: one-dimensional hand values") {
  Tape<double> tape;
  Var one = tape.constant(rows({{1.0}}));
  SUBCASE("single leaf passes its projection through") {
    Var embed = tape.constant(rows({{2.0}}));
    Var s = encode_subtree(tape, EncodedSubtree{{0}, {{}}}, embed, one, one);
    CHECK(tape.scalar(s) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("three-node chain: the root state wins the max") {
    // c = -1 at the leaf, 0 elsewhere: leaf -1, middle tanh(-1), root tanh(tanh(-1))
    Var embed = tape.constant(rows({{0.0}, {0.0}, {-1.0}}));
    Var s = encode_subtree(tape, EncodedSubtree{{0, 1, 2}, {{1}, {2}, {}}}, embed, one, one);
    CHECK(tape.scalar(s) == doctest::Approx(-0.64201).epsilon(1e-5));
    CHECK(tape.scalar(s) == doctest::Approx(std::tanh(std::tanh(-1.0))).epsilon(1e-14));
  }
  SUBCASE("children are averaged, not summed") {
    Var embed = tape.constant(rows({{0.0}, {-1.0}, {-3.0}}));
    Var s = encode_subtree(tape, EncodedSubtree{{0, 1, 2}, {{1, 2}, {}, {}}}, embed, one, one);
    CHECK(tape.scalar(s) == doctest::Approx(std::tanh(-2.0)).epsilon(1e-14));
  }
}

TEST_CASE("subtree RvNN: identity projection pools the embeddings") {
  Tape<double> tape;
  Var embed = tape.constant(rows({{0, 0}, {1, 0}, {0, 5}}));
  Var zero = tape.constant(Mat<double>::Zero(2, 2));
  Var s = encode_subtree(tape, EncodedSubtree{{0, 1, 2}, {{1, 2}, {}, {}}}, embed, tape.constant(eye(2)), zero);
  CHECK(tape.value(s)(0, 0) == 1.0);
  CHECK(tape.value(s)(0, 1) == 5.0);
}

TEST_CASE("subtree RvNN: node storage order does not matter") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Mat<double> e(6, 3), wc(3, 3), wa(3, 3);
  for (auto* m : {&e, &wc, &wa})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = nd(rng);
  // root 0 -> (1 -> (3, 4), 2 -> 5), labels equal to preorder ids
  EncodedSubtree a{{0, 1, 3, 4, 2, 5}, {{1, 4}, {2, 3}, {}, {}, {5}, {}}};
  // same tree stored in a scrambled order, root last
  EncodedSubtree b{{4, 3, 5, 1, 2, 0}, {{}, {}, {}, {1, 0}, {2}, {3, 4}}};
  Tape<double> tape;
  Var E = tape.constant(e), WC = tape.constant(wc), WA = tape.constant(wa);
  Mat<double> ra = tape.value(encode_subtree(tape, a, E, WC, WA));
  Mat<double> rb = tape.value(encode_subtree(tape, b, E, WC, WA));
  CHECK(ra == rb);
  // batched encoding equals one-at-a-time encoding bit for bit
  Mat<double> both = tape.value(encode_subtrees(tape, std::vector<EncodedSubtree>{a, EncodedSubtree{{2}, {{}}}, b}, E, WC, WA));
  CHECK(Mat<double>(both.row(0)) == ra);
  CHECK(Mat<double>(both.row(2)) == rb);
  CHECK(Mat<double>(both.row(1)) == tape.value(encode_subtree(tape, EncodedSubtree{{2}, {{}}}, E, WC, WA)));
}

TEST_CASE("subtree RvNN: max-pool dominates every node state") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Mat<double> e(4, 4), wc(4, 4), wa(4, 4);
  for (auto* m : {&e, &wc, &wa})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = nd(rng);
  Tape<double> tape;
  Var E = tape.constant(e), WC = tape.constant(wc), WA = tape.constant(wa);
  EncodedSubtree t{{0, 1, 2, 3}, {{1, 3}, {2}, {}, {}}};
  Mat<double> s = tape.value(encode_subtree(tape, t, E, WC, WA));
  for (int leaf : {2, 3}) {
    Mat<double> h = e.row(leaf) * wc;
    for (int j = 0; j < 4; ++j) CHECK(s(0, j) >= h(0, j));
  }
  // internal states are tanh outputs, so the pooled vector is at least the leaf max and above -1
  for (int j = 0; j < 4; ++j) CHECK(s(0, j) > -1.0);
}

TEST_CASE("structure RvNN: hand values and shape errors") {
  Tape<double> tape;
  Var one = tape.constant(rows({{1.0}}));
  SUBCASE("single node is tanh of its projection") {
    Var s = encode_structure(tape, tape.constant(rows({{0.5}})), {}, 1, one, one);
    CHECK(tape.scalar(s) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  }
  SUBCASE("parent with one child") {
    Var s = encode_structure(tape, tape.constant(rows({{0.3}, {-0.7}})), {{0, 1}}, 2, one, one);
    CHECK(tape.value(s)(1, 0) == doctest::Approx(std::tanh(-0.7)).epsilon(1e-15));
    CHECK(tape.value(s)(0, 0) == doctest::Approx(std::tanh(0.3 + std::tanh(-0.7))).epsilon(1e-15));
  }
  SUBCASE("output stays in preorder for a branching structure") {
    // 0 -> 1, 0 -> 2, 2 -> 3
    Var s = encode_structure(tape, tape.constant(rows({{0.1}, {0.2}, {0.3}, {0.4}})), {{0, 1}, {0, 2}, {2, 3}}, 4,
                             one, one);
    const auto& v = tape.value(s);
    CHECK(v(3, 0) == doctest::Approx(std::tanh(0.4)).epsilon(1e-15));
    CHECK(v(2, 0) == doctest::Approx(std::tanh(0.3 + std::tanh(0.4))).epsilon(1e-15));
    CHECK(v(1, 0) == doctest::Approx(std::tanh(0.2)).epsilon(1e-15));
    CHECK(v(0, 0) == doctest::Approx(std::tanh(0.1 + (v(1, 0) + v(2, 0)) / 2)).epsilon(1e-15));
  }
  SUBCASE("row count must match the structure") {
    CHECK_THROWS_AS(encode_structure(tape, tape.constant(rows({{0.1}, {0.2}})), {{0, 1}}, 3, one, one),
                    nn::ShapeError);
  }
  SUBCASE("edges must point forward in preorder") {
    CHECK_THROWS_AS(encode_structure(tape, tape.constant(rows({{0.1}, {0.2}})), {{1, 0}}, 2, one, one),
                    nn::ShapeError);
  }
}

// ---- attention -------------------------------------------------------------

namespace {

nn::ParamSet<double> attention_params(int d, int k_clip, std::uint64_t seed, bool relative) {
  std::mt19937_64 rng(seed);
  nn::ParamSet<double> ps;
  const std::string w = relative ? "L.attn" : "L";
  for (const char* n : {".wq", ".wk", ".wv", ".wo"}) ps.add(w + n, d, d, nn::Init::Xavier, rng);
  if (relative) {
    ps.add("L.relk", 2 * k_clip + 1, d / 2, nn::Init::Embedding, rng);
    ps.add("L.relv", 2 * k_clip + 1, d / 2, nn::Init::Embedding, rng);
  }
  return ps;
}

}  // namespace

TEST_CASE("relative self-attention: single position attends to itself") {
  auto ps = attention_params(4, 2, 1, true);
  Tape<double> tape(&ps);
  AttentionTrace<double> trace;
  relative_self_attention(tape, tape.constant(rows({{0.1, 0.2, 0.3, 0.4}})), "L", 2, 2, &trace);
  REQUIRE(trace.maps.size() == 2);
  for (const auto& m : trace.maps) CHECK(m(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("relative self-attention: scores depend only on the clipped offset") {
  // identical rows make content terms equal, so every score is a function of clip(j - i)
  const int n = 7, k = 2;
  auto ps = attention_params(4, k, 3, true);
  Tape<double> tape(&ps);
  AttentionTrace<double> trace;
  Mat<double> x = rows({{0.3, -0.2, 0.5, 0.1}}).replicate(n, 1);
  relative_self_attention(tape, tape.constant(x), "L", 2, k, &trace);
  for (const auto& e : trace.logits) {
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j) CHECK(e(i, j) == doctest::Approx(e(i + 1, j + 1)).epsilon(1e-12));
    // offsets beyond the clip share one vector
    CHECK(e(0, 3) == doctest::Approx(e(0, 6)).epsilon(1e-12));
    CHECK(e(6, 0) == doctest::Approx(e(6, 3)).epsilon(1e-12));
    CHECK(e(0, 1) != doctest::Approx(e(0, 2)).epsilon(1e-12));
  }
  for (const auto& a : trace.maps)
    for (int i = 0; i < n; ++i) CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("relative self-attention: two-dimensional hand computation") {
  // d = 2, one head, identity projections, relative keys and values of zero
  nn::ParamSet<double> ps;
  auto put = [&](const std::string& name, Mat<double> v) {
    ps.push({name, v, Mat<double>::Zero(v.rows(), v.cols())});
  };
  for (const char* n : {"L.attn.wq", "L.attn.wk", "L.attn.wv", "L.attn.wo"}) put(n, eye(2));
  put("L.relk", Mat<double>::Zero(3, 2));
  put("L.relv", Mat<double>::Zero(3, 2));
  Tape<double> tape(&ps);
  Mat<double> x = rows({{1, 0}, {0, 1}});
  Mat<double> out = tape.value(relative_self_attention(tape, tape.constant(x), "L", 1, 1));
  // row 0: scores (1, 0)/sqrt(2)
  double a = std::exp(1 / std::sqrt(2.0)) / (std::exp(1 / std::sqrt(2.0)) + 1);
  CHECK(out(0, 0) == doctest::Approx(a).epsilon(1e-14));
  CHECK(out(0, 1) == doctest::Approx(1 - a).epsilon(1e-14));
  CHECK(out(1, 0) == doctest::Approx(1 - a).epsilon(1e-14));
  CHECK(out(1, 1) == doctest::Approx(a).epsilon(1e-14));
}

TEST_CASE("cross-attention over a single key gives weight one") {
  auto ps = attention_params(4, 0, 2, false);
  Tape<double> tape(&ps);
  AttentionTrace<double> trace;
  multi_head_attention(tape, tape.constant(rows({{1, 2, 3, 4}})), tape.constant(rows({{-1, 0, 1, 0}})), "L", 2,
                       false, &trace);
  for (const auto& m : trace.maps) CHECK(m(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("causal attention never looks ahead") {
  auto ps = attention_params(4, 0, 4, false);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  Mat<double> x(5, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  Tape<double> tape(&ps);
  AttentionTrace<double> trace;
  Mat<double> base = tape.value(multi_head_attention(tape, tape.constant(x), tape.constant(x), "L", 2, true, &trace));
  for (const auto& m : trace.maps)
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) CHECK(m(i, j) == 0.0);
  x.row(4).setConstant(7.0);
  Mat<double> changed = tape.value(multi_head_attention(tape, tape.constant(x), tape.constant(x), "L", 2, true));
  CHECK(Mat<double>(base.topRows(4)) == Mat<double>(changed.topRows(4)));
}

// ---- copy ------------------------------------------------------------------

TEST_CASE("copy distribution: zero projection is uniform") {
  Tape<double> tape;
  Var code = tape.constant(rows({{1, 2}, {3, 4}, {5, 6}, {7, 8}}));
  Var dec = tape.constant(rows({{1, 0}, {0, 1}}));
  Mat<double> pc = tape.value(copy_distribution(tape, code, dec, tape.constant(Mat<double>::Zero(2, 2))));
  for (Eigen::Index i = 0; i < pc.size(); ++i) CHECK(pc.data()[i] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("copy distribution: permuting code positions permutes the columns") {
  Tape<double> tape;
  Mat<double> c = rows({{1, 0.5}, {-1, 2}, {0.3, 0.3}});
  Mat<double> cp = rows({{-1, 2}, {0.3, 0.3}, {1, 0.5}});
  Var dec = tape.constant(rows({{0.2, -0.4}}));
  Var w = tape.constant(rows({{1, 0.5}, {0.25, 1}}));
  Mat<double> a = tape.value(copy_distribution(tape, tape.constant(c), dec, w));
  Mat<double> b = tape.value(copy_distribution(tape, tape.constant(cp), dec, w));
  CHECK(a(0, 1) == doctest::Approx(b(0, 0)).epsilon(1e-15));
  CHECK(a(0, 2) == doctest::Approx(b(0, 1)).epsilon(1e-15));
  CHECK(a(0, 0) == doctest::Approx(b(0, 2)).epsilon(1e-15));
}

TEST_CASE("mixing: repeated code tokens pool their copy mass") {
  Tape<double> tape;
  // base vocabulary of 5, extended ids 5 (a) and 6 (b); code reads a b a
  Var pg = tape.constant(rows({{0.2, 0.2, 0.2, 0.2, 0.2}}));
  Var pc = tape.constant(rows({{0.5, 0.3, 0.2}}));
  std::vector<int> ext{5, 6, 5};
  SUBCASE("gate closed: copy only") {
    Mat<double> p = tape.value(mix_distributions(tape, pg, pc, tape.constant(rows({{0.0}})), ext, 7));
    CHECK(p(0, 5) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(p(0, 6) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(p.leftCols(5).sum() == 0.0);
  }
  SUBCASE("gate open: generation only, padded") {
    Mat<double> p = tape.value(mix_distributions(tape, pg, pc, tape.constant(rows({{1.0}})), ext, 7));
    for (int w = 0; w < 5; ++w) CHECK(p(0, w) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(p(0, 5) == 0.0);
    CHECK(p(0, 6) == 0.0);
  }
  SUBCASE("in-vocabulary code tokens receive both kinds of mass") {
    Mat<double> p = tape.value(mix_distributions(tape, pg, pc, tape.constant(rows({{0.25}})), {4, 5, 4}, 6));
    CHECK(p(0, 4) == doctest::Approx(0.25 * 0.2 + 0.75 * 0.7).epsilon(1e-15));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("out-of-range code ids are rejected") {
    CHECK_THROWS_AS(mix_distributions(tape, pg, pc, tape.constant(rows({{0.5}})), {5, 6, 7}, 7), nn::ShapeError);
  }
}

// ---- full model --------------------------------------------------------------

TEST_CASE("full model matches an independent reference forward pass") {
  auto s = tiny_setup(11, 3, 4);
  for (bool no_copy : {false, true}) {
    for (bool no_aggregation : {false, true}) {
      ModelConfig cfg = s.cfg;
      cfg.no_copy = no_copy;
      cfg.no_aggregation = no_aggregation;
      auto params = init_params(cfg, 17).cast<double>();
      CastModel<double> model(cfg);
      for (const auto& ex : s.encoded) {
        Tape<double> tape(&params);
        double got = tape.scalar(model.loss_sum(tape, ex));
        double want = ref_loss(cfg, params, ex);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("untrained output layer gives log |V| per token") {
  auto s = tiny_setup(2, 4);
  s.cfg.no_copy = true;
  auto params = init_params(s.cfg, 3).cast<double>();
  params.get("dec.out.w").value.setZero();
  CastModel<double> model(s.cfg);
  for (const auto& ex : s.encoded) {
    Tape<double> tape(&params);
    double per_token = tape.scalar(model.loss_sum(tape, ex)) / CastModel<double>::target_count(ex);
    CHECK(per_token == doctest::Approx(std::log(static_cast<double>(s.cfg.summary_vocab))).epsilon(1e-12));
  }
}

TEST_CASE("model distributions are normalized and causal") {
  auto s = tiny_setup(4, 2);
  auto params = init_params(s.cfg, 5).cast<double>();
  CastModel<double> model(s.cfg);
  const auto& ex = s.encoded[0];
  Tape<double> tape(&params);
  auto enc = model.encode(tape, ex);
  auto in = ex.decoder_input();
  auto dec = model.decode(tape, enc, ex, in);
  const auto& p = tape.value(dec.p);
  CHECK(dec.ext_size == s.cfg.summary_vocab + static_cast<int>(ex.oov.size()));
  for (Eigen::Index t = 0; t < p.rows(); ++t) CHECK(p.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
  // changing the last input leaves earlier rows untouched
  auto in2 = in;
  in2.back() = Vocabulary::kUnk == in2.back() ? Vocabulary::kEos : Vocabulary::kUnk;
  auto dec2 = model.decode(tape, enc, ex, in2);
  const auto& p2 = tape.value(dec2.p);
  CHECK(Mat<double>(p.topRows(p.rows() - 1)) == Mat<double>(p2.topRows(p.rows() - 1)));
}

TEST_CASE("end-to-end gradient check over a two-example batch") {
  auto s = tiny_setup(6, 2, 4);
  for (bool no_copy : {false, true}) {
    ModelConfig cfg = s.cfg;
    cfg.no_copy = no_copy;
    auto params = init_params(cfg, 21).cast<double>();
    CastModel<double> model(cfg);
    auto build = [&](Tape<double>& tape) {
      return tape.add(model.loss_sum(tape, s.encoded[0]), model.loss_sum(tape, s.encoded[1]));
    };
    nn::GradCheckOptions opts;
    opts.fraction = 0.05;
    opts.min_coords = 200;
    auto r = nn::grad_check(build, params, opts);
    INFO("worst parameter: " << r.worst_param << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
    CHECK(r.max_rel_error <= 1e-4);

    // Richardson-extrapolated central differences (fourth-order truncation,
    // larger steps, so far less roundoff) pin the gradients much tighter.
    auto eval = [&] {
      Tape<double> tape(&params);
      return tape.scalar(build(tape));
    };
    auto central = [&](double& x, double h) {
      const double saved = x;
      x = saved + h;
      double up = eval();
      x = saved - h;
      double down = eval();
      x = saved;
      return (up - down) / (2 * h);
    };
    std::mt19937_64 rng(3);
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = params[pi];
      std::uniform_int_distribution<Eigen::Index> pick(0, p.value.size() - 1);
      for (int k = 0; k < 4; ++k) {
        Eigen::Index i = pick(rng);
        double& x = p.value.data()[i];
        double numeric = (4 * central(x, 5e-4) - central(x, 1e-3)) / 3;
        double analytic = p.grad.data()[i];  // left by grad_check at the unperturbed point
        double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
        if (err > worst) {
          worst = err;
          worst_name = p.name;
        }
      }
    }
    INFO("Richardson worst: " << worst_name);
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("a few optimizer steps reduce the loss on one example") {
  auto s = tiny_setup(3, 1, 16);
  auto params = init_params(s.cfg, 2);
  auto opt = nn::make_optim_state(params);
  CastModel<float> model(s.cfg);
  nn::AdamWConfig adam;
  adam.lr = 1e-3;
  double prev = 1e300;
  for (int step = 0; step < 10; ++step) {
    params.zero_grad();
    Tape<float> tape(&params);
    Var loss = model.loss_sum(tape, s.encoded[0]);
    tape.backward(loss);
    tape.add_param_grads_to(params, 1.0f);
    double v = tape.scalar(loss);
    CHECK(v < prev);
    prev = v;
    nn::adamw_step(params, opt, adam);
  }
}

TEST_CASE("generation: width one is greedy, and pad and bos never appear") {
  auto s = tiny_setup(8, 3);
  auto params = init_params(s.cfg, 4);
  CastModel<float> model(s.cfg);
  for (const auto& ex : s.encoded) {
    GenerateOptions g;
    g.max_len = 8;
    auto out = generate(model, params, ex, s.vocabs.summary, g);
    // manual greedy decode over the same distribution
    std::vector<int> ids;
    Tape<float> tape(&params);
    auto enc = model.encode(tape, ex);
    for (int step = 0; step < g.max_len; ++step) {
      std::vector<int> in{Vocabulary::kBos};
      for (int id : ids) in.push_back(id >= s.cfg.summary_vocab ? Vocabulary::kUnk : id);
      auto dec = model.decode(tape, enc, ex, in);
      auto row = tape.value(dec.p).row(static_cast<Eigen::Index>(step));
      int best = -1;
      for (int w = 0; w < row.cols(); ++w) {
        if (w == Vocabulary::kPad || w == Vocabulary::kBos) continue;
        if (best < 0 || row(w) > row(best)) best = w;
      }
      if (best == Vocabulary::kEos) break;
      ids.push_back(best);
    }
    CHECK(out.ids == ids);
    CHECK(out.tokens.size() == out.ids.size());
    CHECK(out.gammas.size() == out.ids.size());
    for (int id : out.ids) {
      CHECK(id != Vocabulary::kPad);
      CHECK(id != Vocabulary::kBos);
    }
    g.beam = 4;
    auto wide = generate(model, params, ex, s.vocabs.summary, g);
    for (int id : wide.ids) CHECK(id != Vocabulary::kBos);
    CHECK(wide.ids.size() <= 8u);
  }
}
