#include "cast/seq_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cast/ast_encoder.hpp"

namespace cast {

using nn::Var;

template <typename T>
Var relative_self_attention(nn::Tape<T>& tape, Var x, const std::string& prefix, int heads, int k_clip,
                            AttentionTrace<T>* trace) {
  const int n = static_cast<int>(tape.value(x).rows());
  const int d = static_cast<int>(tape.value(x).cols());
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Var q = tape.matmul(x, tape.param(prefix + ".attn.wq"));
  Var k = tape.matmul(x, tape.param(prefix + ".attn.wk"));
  Var v = tape.matmul(x, tape.param(prefix + ".attn.wv"));
  Var rk = tape.param(prefix + ".relk");
  Var rv = tape.param(prefix + ".relv");
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = tape.slice_cols(q, h * dh, dh);
    Var kh = tape.slice_cols(k, h * dh, dh);
    Var vh = tape.slice_cols(v, h * dh, dh);
    // e_ij = q_i . (k_j + a^K_ij) / sqrt(d_h)
    Var logits = tape.add(tape.matmul_nt(qh, kh), tape.relative_gather(tape.matmul_nt(qh, rk), n, k_clip));
    Var scaled = tape.affine(logits, scale, T(0));
    Var alpha = tape.softmax_rows(scaled);
    if (trace) {
      trace->maps.push_back(tape.value(alpha));
      trace->logits.push_back(tape.value(scaled));
    }
    // o_i = sum_j alpha_ij (v_j + a^V_ij)
    outs.push_back(tape.add(tape.matmul(alpha, vh), tape.matmul(tape.relative_scatter(alpha, k_clip), rv)));
  }
  Var cat = heads == 1 ? outs[0] : tape.concat_cols(outs);
  return tape.matmul(cat, tape.param(prefix + ".attn.wo"));
}

template <typename T>
Var multi_head_attention(nn::Tape<T>& tape, Var q_in, Var kv, const std::string& prefix, int heads, bool causal,
                         AttentionTrace<T>* trace) {
  const int d = static_cast<int>(tape.value(q_in).cols());
  if (tape.value(kv).cols() != d) throw nn::ShapeError(prefix + ": query and key widths differ");
  const int dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Var q = tape.matmul(q_in, tape.param(prefix + ".wq"));
  Var k = tape.matmul(kv, tape.param(prefix + ".wk"));
  Var v = tape.matmul(kv, tape.param(prefix + ".wv"));
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = tape.slice_cols(q, h * dh, dh);
    Var kh = tape.slice_cols(k, h * dh, dh);
    Var vh = tape.slice_cols(v, h * dh, dh);
    Var scaled = tape.affine(tape.matmul_nt(qh, kh), scale, T(0));
    Var alpha = tape.softmax_rows(scaled, causal);
    if (trace) {
      trace->maps.push_back(tape.value(alpha));
      trace->logits.push_back(tape.value(scaled));
    }
    outs.push_back(tape.matmul(alpha, vh));
  }
  Var cat = heads == 1 ? outs[0] : tape.concat_cols(outs);
  return tape.matmul(cat, tape.param(prefix + ".wo"));
}

template <typename T>
Var copy_distribution(nn::Tape<T>& tape, Var code_states, Var dec_states, Var wcp) {
  if (tape.value(code_states).rows() < 1) throw nn::ShapeError("copy_distribution: no code positions");
  return tape.softmax_rows(tape.matmul_nt(dec_states, tape.matmul(code_states, wcp)));
}

template <typename T>
Var mix_distributions(nn::Tape<T>& tape, Var p_gen, Var p_copy, Var gamma, const std::vector<int>& code_ext,
                      int ext_size) {
  const auto& pg = tape.value(p_gen);
  const auto& pc = tape.value(p_copy);
  if (pc.cols() != static_cast<Eigen::Index>(code_ext.size()) || pg.rows() != pc.rows() || ext_size < pg.cols())
    throw nn::ShapeError("mix_distributions: inconsistent shapes");
  // one-hot map from code positions to extended ids; duplicates add up
  nn::Mat<T> onehot = nn::Mat<T>::Zero(static_cast<Eigen::Index>(code_ext.size()), ext_size);
  for (std::size_t i = 0; i < code_ext.size(); ++i) {
    if (code_ext[i] < 0 || code_ext[i] >= ext_size) throw nn::ShapeError("mix_distributions: code id out of range");
    onehot(static_cast<Eigen::Index>(i), code_ext[i]) = T(1);
  }
  Var gen = tape.pad_cols(tape.mul_col(p_gen, gamma), ext_size - static_cast<int>(pg.cols()));
  Var copy = tape.mul_col(tape.matmul(p_copy, tape.constant(std::move(onehot))), tape.affine(gamma, T(-1), T(1)));
  return tape.add(gen, copy);
}

template <typename T>
nn::Mat<T> sinusoid_positions(int n, int d) {
  nn::Mat<T> pe(n, d);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < d; ++i) {
      double angle = p / std::pow(10000.0, static_cast<double>(2 * (i / 2)) / d);
      pe(p, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

template <typename T>
Var CastModel<T>::dropout(nn::Tape<T>& tape, Var x, const RunOptions& run) const {
  if (!run.train || cfg_.dropout <= 0.0) return x;
  if (!run.rng) throw std::invalid_argument("dropout needs a random generator");
  return tape.dropout(x, cfg_.dropout, *run.rng);
}

template <typename T>
Var CastModel<T>::encode_ast(nn::Tape<T>& tape, const EncodedExample& ex) const {
  Var s = encode_subtrees(tape, ex.subtrees, tape.param("ast.embed"), tape.param("ast.WC"), tape.param("ast.WA"));
  if (cfg_.no_aggregation) return s;
  return encode_structure(tape, s, ex.structure, static_cast<int>(ex.subtrees.size()), tape.param("ast.WS"),
                          tape.param("ast.WB"));
}

template <typename T>
Var CastModel<T>::encode_code(nn::Tape<T>& tape, const std::vector<int>& code_ids, const RunOptions& run) const {
  if (code_ids.empty()) throw nn::ShapeError("encode_code: empty code sequence");
  Var x = dropout(tape, tape.gather_rows(tape.param("code.embed"), code_ids), run);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "code.L" + std::to_string(l);
    Var y = tape.layer_norm(x, tape.param(p + ".ln1.g"), tape.param(p + ".ln1.b"));
    x = tape.add(x, dropout(tape, relative_self_attention(tape, y, p, cfg_.heads, cfg_.k_clip, trace), run));
    y = tape.layer_norm(x, tape.param(p + ".ln2.g"), tape.param(p + ".ln2.b"));
    Var hidden = tape.gelu(tape.add(tape.matmul(y, tape.param(p + ".ff1.w")), tape.param(p + ".ff1.b")));
    Var ff = tape.add(tape.matmul(hidden, tape.param(p + ".ff2.w")), tape.param(p + ".ff2.b"));
    x = tape.add(x, dropout(tape, ff, run));
  }
  return tape.layer_norm(x, tape.param("code.ln.g"), tape.param("code.ln.b"));
}

template <typename T>
typename CastModel<T>::Encoded CastModel<T>::encode(nn::Tape<T>& tape, const EncodedExample& ex,
                                                    const RunOptions& run) const {
  return Encoded{encode_ast(tape, ex), encode_code(tape, ex.code_ids, run)};
}

template <typename T>
typename CastModel<T>::Decoded CastModel<T>::decode(nn::Tape<T>& tape, const Encoded& enc, const EncodedExample& ex,
                                                    const std::vector<int>& inputs, const RunOptions& run) const {
  const int len = static_cast<int>(inputs.size());
  if (len == 0) throw nn::ShapeError("decode: empty input");
  Var emb = tape.affine(tape.gather_rows(tape.param("dec.embed"), inputs), static_cast<T>(std::sqrt(cfg_.d)), T(0));
  Var x = dropout(tape, tape.add(emb, tape.constant(sinusoid_positions<T>(len, cfg_.d))), run);
  auto ln = [&](Var v, const std::string& name) {
    return tape.layer_norm(v, tape.param(name + ".g"), tape.param(name + ".b"));
  };
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "dec.L" + std::to_string(l);
    Var y = ln(x, p + ".ln1");
    x = tape.add(x, dropout(tape, multi_head_attention(tape, y, y, p + ".self", cfg_.heads, true, trace), run));
    // serial cross-attention: AST states first, then code states
    y = ln(x, p + ".ln2");
    x = tape.add(x, dropout(tape, multi_head_attention(tape, y, enc.ast, p + ".xast", cfg_.heads, false, trace), run));
    y = ln(x, p + ".ln3");
    x = tape.add(x, dropout(tape, multi_head_attention(tape, y, enc.code, p + ".xcode", cfg_.heads, false, trace), run));
    y = ln(x, p + ".ln4");
    Var hidden = tape.gelu(tape.add(tape.matmul(y, tape.param(p + ".ff1.w")), tape.param(p + ".ff1.b")));
    x = tape.add(x, dropout(tape, tape.add(tape.matmul(hidden, tape.param(p + ".ff2.w")), tape.param(p + ".ff2.b")), run));
  }
  Decoded out;
  out.states = ln(x, "dec.ln");
  out.p_gen = tape.softmax_rows(tape.add(tape.matmul(out.states, tape.param("dec.out.w")), tape.param("dec.out.b")));
  if (cfg_.no_copy) {
    out.p = out.p_gen;
    out.ext_size = static_cast<int>(tape.value(out.p_gen).cols());
    return out;
  }
  out.ext_size = static_cast<int>(tape.value(out.p_gen).cols()) + static_cast<int>(ex.oov.size());
  out.p_copy = copy_distribution(tape, enc.code, out.states, tape.param("copy.Wcp"));
  out.gamma = tape.sigmoid(tape.add(tape.matmul(out.states, tape.param("copy.gate.w")), tape.param("copy.gate.b")));
  out.p = mix_distributions(tape, out.p_gen, out.p_copy, out.gamma, ex.code_ext, out.ext_size);
  return out;
}

template <typename T>
Var CastModel<T>::loss_sum(nn::Tape<T>& tape, const EncodedExample& ex, const RunOptions& run) const {
  Encoded enc = encode(tape, ex, run);
  Decoded dec = decode(tape, enc, ex, ex.decoder_input(), run);
  const std::vector<int>& gold = cfg_.no_copy ? ex.target_base : ex.target;
  return tape.affine(tape.sum(tape.log(tape.pick(dec.p, gold))), T(-1), T(0));
}

template class CastModel<float>;
template class CastModel<double>;

#define CAST_INSTANTIATE(T)                                                                                      \
  template Var relative_self_attention<T>(nn::Tape<T>&, Var, const std::string&, int, int, AttentionTrace<T>*); \
  template Var multi_head_attention<T>(nn::Tape<T>&, Var, Var, const std::string&, int, bool,                   \
                                       AttentionTrace<T>*);                                                     \
  template Var copy_distribution<T>(nn::Tape<T>&, Var, Var, Var);                                               \
  template Var mix_distributions<T>(nn::Tape<T>&, Var, Var, Var, const std::vector<int>&, int);                 \
  template nn::Mat<T> sinusoid_positions<T>(int, int);
CAST_INSTANTIATE(float)
CAST_INSTANTIATE(double)
#undef CAST_INSTANTIATE

// ---- generation -------------------------------------------------------------

namespace {

struct Hypothesis {
  std::vector<int> ids;  // extended ids
  std::vector<double> gammas;
  double logprob = 0.0;
  bool done = false;
};

double normalized(const Hypothesis& h, double penalty) {
  double len = static_cast<double>(h.ids.size() + (h.done ? 1 : 0));
  return h.logprob / std::pow(std::max(len, 1.0), penalty);
}

}  // namespace

DecodeOutput generate(const CastModel<float>& model, const nn::ParamSet<float>& params, const EncodedExample& ex,
                      const Vocabulary& summary, const GenerateOptions& opts) {
  const int width = std::max(1, opts.beam);
  const int base = summary.size();
  nn::Tape<float> tape(&params);
  tape.set_grad_enabled(false);
  auto enc = model.encode(tape, ex);

  // decoder input for an emitted id: extended ids re-enter as unk
  auto as_input = [&](int id) { return id >= base ? Vocabulary::kUnk : id; };

  std::vector<Hypothesis> beams{Hypothesis{}};
  std::vector<Hypothesis> finished;
  for (int step = 0; step < opts.max_len; ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : beams) {
      std::vector<int> inputs{Vocabulary::kBos};
      for (int id : h.ids) inputs.push_back(as_input(id));
      auto dec = model.decode(tape, enc, ex, inputs);
      const auto& p = tape.value(dec.p);
      const Eigen::Index last = p.rows() - 1;
      double gamma = model.config().no_copy ? 1.0 : static_cast<double>(tape.value(dec.gamma)(last, 0));
      // rank allowed ids by probability; pad and bos are never emitted
      std::vector<int> order;
      for (int id = 0; id < static_cast<int>(p.cols()); ++id)
        if (id != Vocabulary::kPad && id != Vocabulary::kBos) order.push_back(id);
      const int keep = std::min<int>(width, static_cast<int>(order.size()));
      std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](int a, int b) {
        return p(last, a) > p(last, b) || (p(last, a) == p(last, b) && a < b);
      });
      for (int r = 0; r < keep; ++r) {
        Hypothesis c = h;
        c.logprob += std::log(std::max(static_cast<double>(p(last, order[static_cast<std::size_t>(r)])), 1e-30));
        if (order[static_cast<std::size_t>(r)] == Vocabulary::kEos) {
          c.done = true;
        } else {
          c.ids.push_back(order[static_cast<std::size_t>(r)]);
          c.gammas.push_back(gamma);
        }
        candidates.push_back(std::move(c));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Hypothesis& a, const Hypothesis& b) {
      return normalized(a, opts.length_penalty) > normalized(b, opts.length_penalty);
    });
    beams.clear();
    for (auto& c : candidates) {
      if (static_cast<int>(beams.size() + finished.size()) >= width) break;
      if (c.done)
        finished.push_back(std::move(c));
      else
        beams.push_back(std::move(c));
    }
    if (beams.empty()) break;
  }
  for (auto& b : beams) finished.push_back(std::move(b));
  auto best = std::max_element(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return normalized(a, opts.length_penalty) < normalized(b, opts.length_penalty);
  });
  DecodeOutput out;
  out.ids = best->ids;
  out.gammas = best->gammas;
  for (int id : out.ids) out.tokens.push_back(ex.ext_token(id, summary));
  return out;
}

}  // namespace cast
