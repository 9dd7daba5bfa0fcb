#pragma once

#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "cast/nn/tensor.hpp"

namespace cast::nn {

struct Var {
  int id = -1;
};

// Records a forward computation and replays it backwards. Parameter
// gradients are kept per tape so independent tapes can run concurrently and
// be reduced in a fixed order afterwards.
template <typename T>
class Tape {
 public:
  using Matrix = Mat<T>;

  explicit Tape(const ParamSet<T>* params = nullptr);

  Var constant(Matrix m);
  Var param(std::size_t index);
  Var param(const std::string& name);

  const Matrix& value(Var v) const;
  T scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Inference mode: nothing is recorded for the backward pass.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  // Reverse accumulation from a 1x1 loss. Throws GraphError otherwise.
  void backward(Var loss);
  const Matrix& grad(Var v) const;
  // dst.grad += scale * dL/dparam for every parameter this tape touched.
  void add_param_grads_to(ParamSet<T>& dst, T scale = T(1)) const;

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);        // b may be a 1 x cols row broadcast
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);        // elementwise
  Var mul_col(Var a, Var c);    // row i of a times c(i, 0)
  Var affine(Var a, T alpha, T beta);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var gelu(Var a);
  Var log(Var a);  // argument clamped below at 1e-30
  Var softmax_rows(Var a, bool causal = false);
  Var layer_norm(Var a, Var gain, Var bias);
  Var max_rows(Var a);  // coordinate-wise max over rows -> 1 x cols
  Var gather_rows(Var table, std::vector<int> ids);
  // Row k is the mean of rows groups[k] of a (zero row for an empty group).
  Var group_mean(Var a, std::vector<std::vector<int>> groups);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int count);
  Var slice_cols(Var a, int start, int count);
  Var sum(Var a);
  Var pick(Var a, std::vector<int> cols);  // n x 1 with entries a(i, cols[i])
  // out(i, j) = r(i, clip(j - i) + k) for an n x (2k+1) table r.
  Var relative_gather(Var r, int n, int k);
  // out(i, c) = sum over j with clip(j - i) + k == c of a(i, j).
  Var relative_scatter(Var a, int k);
  Var pad_cols(Var a, int extra);
  Var dropout(Var a, double rate, std::mt19937_64& rng);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;  // parameter storage
    int param = -1;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Var record(Matrix value, bool needs_grad);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  // Gradient buffer of v, zero-initialized on first use.
  Matrix& g(Var v);

  const ParamSet<T>* params_;
  std::deque<Node> nodes_;
  std::vector<int> param_nodes_;
  std::vector<Matrix> grads_;
  bool grad_enabled_ = true;
};

int relative_index(int i, int j, int k);

}  // namespace cast::nn
