#include "cast/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cast::nn {

int relative_index(int i, int j, int k) { return std::clamp(j - i, -k, k) + k; }

template <typename T>
Tape<T>::Tape(const ParamSet<T>* params) : params_(params) {
  if (params_) param_nodes_.assign(params_->size(), -1);
}

template <typename T>
Var Tape<T>::record(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::constant(Matrix m) {
  return record(std::move(m), false);
}

template <typename T>
Var Tape<T>::param(std::size_t index) {
  if (!params_ || index >= params_->size()) throw GraphError("parameter index out of range");
  int& slot = param_nodes_[index];
  if (slot >= 0) return Var{slot};
  Node n;
  n.external = &(*params_)[index].value;
  n.param = static_cast<int>(index);
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  slot = static_cast<int>(nodes_.size()) - 1;
  return Var{slot};
}

template <typename T>
Var Tape<T>::param(const std::string& name) {
  if (!params_) throw GraphError("tape has no parameter set");
  return param(params_->index(name));
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.external ? *n.external : n.value;
}

template <typename T>
T Tape<T>::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw GraphError("value is not a scalar");
  return m(0, 0);
}

template <typename T>
typename Tape<T>::Matrix& Tape<T>::g(Var v) {
  Matrix& gr = grads_[static_cast<std::size_t>(v.id)];
  if (gr.size() == 0) {
    const Matrix& val = value(v);
    gr = Matrix::Zero(val.rows(), val.cols());
  }
  return gr;
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::grad(Var v) const {
  return grads_.at(static_cast<std::size_t>(v.id));
}

template <typename T>
void Tape<T>::backward(Var loss) {
  const Matrix& l = value(loss);
  if (l.rows() != 1 || l.cols() != 1)
    throw GraphError("backward needs a scalar loss, got " + std::to_string(l.rows()) + "x" + std::to_string(l.cols()));
  grads_.assign(nodes_.size(), Matrix());
  g(loss)(0, 0) = T(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.back && grads_[static_cast<std::size_t>(id)].size() != 0) n.back();
  }
}

template <typename T>
void Tape<T>::add_param_grads_to(ParamSet<T>& dst, T scale) const {
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    int id = param_nodes_[i];
    if (id < 0 || static_cast<std::size_t>(id) >= grads_.size()) continue;
    const Matrix& gr = grads_[static_cast<std::size_t>(id)];
    if (gr.size() == 0) continue;
    dst[i].grad += scale * gr;
  }
}

// ---- primitives -----------------------------------------------------------

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

template <typename M>
std::string dims(const M& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols() == B.rows(), "matmul", dims(A) + " * " + dims(B));
  Var out = record(A * B, needs(a) || needs(b));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, b, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(a)) g(a).noalias() += G * value(b).transpose();
      if (needs(b)) g(b).noalias() += value(a).transpose() * G;
    };
  return out;
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols() == B.cols(), "matmul_nt", dims(A) + " * " + dims(B) + "^T");
  Var out = record(A * B.transpose(), needs(a) || needs(b));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, b, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(a)) g(a).noalias() += G * value(b);
      if (needs(b)) g(b).noalias() += G.transpose() * value(a);
    };
  return out;
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  bool broadcast = B.rows() == 1 && A.rows() != 1;
  require(A.cols() == B.cols() && (broadcast || A.rows() == B.rows()), "add", dims(A) + " + " + dims(B));
  Matrix v = broadcast ? Matrix(A.rowwise() + B.row(0)) : Matrix(A + B);
  Var out = record(std::move(v), needs(a) || needs(b));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, b, out, broadcast] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(a)) g(a) += G;
      if (needs(b)) {
        if (broadcast)
          g(b) += G.colwise().sum();
        else
          g(b) += G;
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "sub", dims(A) + " - " + dims(B));
  Var out = record(A - B, needs(a) || needs(b));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, b, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(a)) g(a) += G;
      if (needs(b)) g(b) -= G;
    };
  return out;
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mul", dims(A) + " .* " + dims(B));
  Var out = record(A.cwiseProduct(B), needs(a) || needs(b));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, b, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(a)) g(a) += G.cwiseProduct(value(b));
      if (needs(b)) g(b) += G.cwiseProduct(value(a));
    };
  return out;
}

template <typename T>
Var Tape<T>::mul_col(Var a, Var c) {
  const Matrix& A = value(a);
  const Matrix& C = value(c);
  require(C.cols() == 1 && C.rows() == A.rows(), "mul_col", dims(A) + " by " + dims(C));
  Matrix v = A;
  for (Eigen::Index i = 0; i < A.rows(); ++i) v.row(i) *= C(i, 0);
  Var out = record(std::move(v), needs(a) || needs(c));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, c, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      const Matrix& A = value(a);
      const Matrix& C = value(c);
      if (needs(a)) {
        Matrix& ga = g(a);
        for (Eigen::Index i = 0; i < G.rows(); ++i) ga.row(i) += C(i, 0) * G.row(i);
      }
      if (needs(c)) {
        Matrix& gc = g(c);
        for (Eigen::Index i = 0; i < G.rows(); ++i) gc(i, 0) += G.row(i).dot(A.row(i));
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::affine(Var a, T alpha, T beta) {
  Matrix v = (alpha * value(a)).array() + beta;
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, alpha] {
      g(a) += alpha * grads_[static_cast<std::size_t>(out.id)];
    };
  return out;
}

template <typename T>
Var Tape<T>::tanh(Var a) {
  Var out = record(value(a).array().tanh().matrix(), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out] {
      const Matrix& Y = value(out);
      g(a).array() += grads_[static_cast<std::size_t>(out.id)].array() * (T(1) - Y.array().square());
    };
  return out;
}

template <typename T>
Var Tape<T>::sigmoid(Var a) {
  Matrix v = (T(1) / (T(1) + (-value(a).array()).exp())).matrix();
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out] {
      const Matrix& Y = value(out);
      g(a).array() += grads_[static_cast<std::size_t>(out.id)].array() * Y.array() * (T(1) - Y.array());
    };
  return out;
}

template <typename T>
Var Tape<T>::gelu(Var a) {
  // tanh approximation; smooth everywhere, which keeps finite differences honest
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T k = static_cast<T>(0.044715);
  const Matrix& X = value(a);
  Matrix v(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    T x = X.data()[i];
    v.data()[i] = T(0.5) * x * (T(1) + std::tanh(c * (x + k * x * x * x)));
  }
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, c, k] {
      const Matrix& X = value(a);
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (Eigen::Index i = 0; i < X.size(); ++i) {
        T x = X.data()[i];
        T t = std::tanh(c * (x + k * x * x * x));
        T d = T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * k * x * x);
        ga.data()[i] += G.data()[i] * d;
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::log(Var a) {
  const T floor = static_cast<T>(1e-30);
  Matrix v = value(a).array().max(floor).log().matrix();
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, floor] {
      const Matrix& X = value(a);
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (Eigen::Index i = 0; i < X.size(); ++i)
        if (X.data()[i] > floor) ga.data()[i] += G.data()[i] / X.data()[i];
    };
  return out;
}

template <typename T>
Var Tape<T>::softmax_rows(Var a, bool causal) {
  const Matrix& X = value(a);
  require(!causal || X.rows() <= X.cols(), "softmax_rows", "causal mask needs rows <= cols");
  Matrix v = Matrix::Zero(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index n = causal ? i + 1 : X.cols();
    T mx = X.row(i).head(n).maxCoeff();
    // accumulate in double so rows stay normalized in single precision
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) total += std::exp(static_cast<double>(X(i, j) - mx));
    for (Eigen::Index j = 0; j < n; ++j) v(i, j) = static_cast<T>(std::exp(static_cast<double>(X(i, j) - mx)) / total);
  }
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out] {
      const Matrix& Y = value(out);
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        T dot = G.row(i).dot(Y.row(i));
        ga.row(i).array() += Y.row(i).array() * (G.row(i).array() - dot);
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::layer_norm(Var a, Var gain, Var bias) {
  const Matrix& X = value(a);
  const Matrix& Gn = value(gain);
  const Matrix& B = value(bias);
  require(Gn.rows() == 1 && B.rows() == 1 && Gn.cols() == X.cols() && B.cols() == X.cols(), "layer_norm",
          dims(X) + " with gain " + dims(Gn));
  const T eps = static_cast<T>(1e-5);
  const Eigen::Index n = X.rows(), d = X.cols();
  Matrix xhat(n, d);
  std::vector<T> inv(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    T mu = X.row(i).mean();
    T var = (X.row(i).array() - mu).square().mean();
    inv[static_cast<std::size_t>(i)] = T(1) / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv[static_cast<std::size_t>(i)];
  }
  Matrix v = (xhat.array().rowwise() * Gn.row(0).array()).rowwise() + B.row(0).array();
  Var out = record(std::move(v), needs(a) || needs(gain) || needs(bias));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, gain, bias, out, xhat = std::move(xhat),
                                                     inv = std::move(inv)] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      if (needs(gain)) g(gain) += G.cwiseProduct(xhat).colwise().sum();
      if (needs(bias)) g(bias) += G.colwise().sum();
      if (needs(a)) {
        const Matrix& Gn = value(gain);
        Matrix& ga = g(a);
        const T d = static_cast<T>(xhat.cols());
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
          Eigen::Array<T, 1, Eigen::Dynamic> dx = G.row(i).array() * Gn.row(0).array();
          T m1 = dx.sum() / d;
          T m2 = (dx * xhat.row(i).array()).sum() / d;
          ga.row(i).array() += inv[static_cast<std::size_t>(i)] * (dx - m1 - xhat.row(i).array() * m2);
        }
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::max_rows(Var a) {
  const Matrix& X = value(a);
  require(X.rows() >= 1, "max_rows", "empty input");
  Matrix v(1, X.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < X.rows(); ++i)
      if (X(i, j) > X(best, j)) best = i;
    arg[static_cast<std::size_t>(j)] = best;
    v(0, j) = X(best, j);
  }
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, arg = std::move(arg)] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (std::size_t j = 0; j < arg.size(); ++j)
        ga(arg[j], static_cast<Eigen::Index>(j)) += G(0, static_cast<Eigen::Index>(j));
    };
  return out;
}

template <typename T>
Var Tape<T>::gather_rows(Var table, std::vector<int> ids) {
  const Matrix& W = value(table);
  Matrix v(static_cast<Eigen::Index>(ids.size()), W.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < W.rows(), "gather_rows",
            "id " + std::to_string(ids[i]) + " outside table of " + std::to_string(W.rows()) + " rows");
    v.row(static_cast<Eigen::Index>(i)) = W.row(ids[i]);
  }
  Var out = record(std::move(v), needs(table));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, table, out, ids = std::move(ids)] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& gt = g(table);
      for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += G.row(static_cast<Eigen::Index>(i));
    };
  return out;
}

template <typename T>
Var Tape<T>::group_mean(Var a, std::vector<std::vector<int>> groups) {
  const Matrix& X = value(a);
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(groups.size()), X.cols());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (int r : groups[k]) {
      require(r >= 0 && r < X.rows(), "group_mean", "row index out of range");
      v.row(static_cast<Eigen::Index>(k)) += X.row(r);
    }
    if (!groups[k].empty()) v.row(static_cast<Eigen::Index>(k)) /= static_cast<T>(groups[k].size());
  }
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, groups = std::move(groups)] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        T w = T(1) / static_cast<T>(groups[k].size());
        for (int r : groups[k]) ga.row(r) += w * G.row(static_cast<Eigen::Index>(k));
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  Eigen::Index rows = 0, cols = value(parts[0]).cols();
  bool any = false;
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows", "column mismatch");
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    v.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  Var out = record(std::move(v), any);
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, parts, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Eigen::Index r = 0;
      for (Var p : parts) {
        Eigen::Index n = value(p).rows();
        if (needs(p)) g(p) += G.middleRows(r, n);
        r += n;
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Eigen::Index rows = value(parts[0]).rows(), cols = 0;
  bool any = false;
  for (Var p : parts) {
    require(value(p).rows() == rows, "concat_cols", "row mismatch");
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    v.middleCols(c, value(p).cols()) = value(p);
    c += value(p).cols();
  }
  Var out = record(std::move(v), any);
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, parts, out] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Eigen::Index c = 0;
      for (Var p : parts) {
        Eigen::Index n = value(p).cols();
        if (needs(p)) g(p) += G.middleCols(c, n);
        c += n;
      }
    };
  return out;
}

template <typename T>
Var Tape<T>::slice_rows(Var a, int start, int count) {
  const Matrix& X = value(a);
  require(start >= 0 && count >= 0 && start + count <= X.rows(), "slice_rows", "range outside " + dims(X));
  Var out = record(X.middleRows(start, count), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, start, count] {
      g(a).middleRows(start, count) += grads_[static_cast<std::size_t>(out.id)];
    };
  return out;
}

template <typename T>
Var Tape<T>::slice_cols(Var a, int start, int count) {
  const Matrix& X = value(a);
  require(start >= 0 && count >= 0 && start + count <= X.cols(), "slice_cols", "range outside " + dims(X));
  Var out = record(X.middleCols(start, count), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, start, count] {
      g(a).middleCols(start, count) += grads_[static_cast<std::size_t>(out.id)];
    };
  return out;
}

template <typename T>
Var Tape<T>::sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = value(a).sum();
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out] {
      g(a).array() += grads_[static_cast<std::size_t>(out.id)](0, 0);
    };
  return out;
}

template <typename T>
Var Tape<T>::pick(Var a, std::vector<int> cols) {
  const Matrix& X = value(a);
  require(static_cast<Eigen::Index>(cols.size()) == X.rows(), "pick", "one column per row expected");
  Matrix v(X.rows(), 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int c = cols[static_cast<std::size_t>(i)];
    require(c >= 0 && c < X.cols(), "pick", "column " + std::to_string(c) + " outside " + dims(X));
    v(i, 0) = X(i, c);
  }
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, cols = std::move(cols)] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (std::size_t i = 0; i < cols.size(); ++i) ga(static_cast<Eigen::Index>(i), cols[i]) += G(static_cast<Eigen::Index>(i), 0);
    };
  return out;
}

template <typename T>
Var Tape<T>::relative_gather(Var r, int n, int k) {
  const Matrix& R = value(r);
  require(R.rows() == n && R.cols() == 2 * k + 1, "relative_gather", dims(R) + " for n=" + std::to_string(n));
  Matrix v(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(i, j) = R(i, relative_index(i, j, k));
  Var out = record(std::move(v), needs(r));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, r, out, n, k] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& gr = g(r);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gr(i, relative_index(i, j, k)) += G(i, j);
    };
  return out;
}

template <typename T>
Var Tape<T>::relative_scatter(Var a, int k) {
  const Matrix& A = value(a);
  const int n = static_cast<int>(A.rows());
  require(A.cols() == n, "relative_scatter", "square input expected, got " + dims(A));
  Matrix v = Matrix::Zero(n, 2 * k + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(i, relative_index(i, j, k)) += A(i, j);
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out, n, k] {
      const Matrix& G = grads_[static_cast<std::size_t>(out.id)];
      Matrix& ga = g(a);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ga(i, j) += G(i, relative_index(i, j, k));
    };
  return out;
}

template <typename T>
Var Tape<T>::pad_cols(Var a, int extra) {
  const Matrix& X = value(a);
  Matrix v = Matrix::Zero(X.rows(), X.cols() + extra);
  v.leftCols(X.cols()) = X;
  Var out = record(std::move(v), needs(a));
  if (needs(out))
    nodes_[static_cast<std::size_t>(out.id)].back = [this, a, out] {
      Matrix& ga = g(a);
      ga += grads_[static_cast<std::size_t>(out.id)].leftCols(ga.cols());
    };
  return out;
}

template <typename T>
Var Tape<T>::dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  const Matrix& X = value(a);
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(X.rows(), X.cols());
  T s = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : T(0);
  return mul(a, constant(std::move(mask)));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace cast::nn
