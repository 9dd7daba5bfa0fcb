#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace cast::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Init { Xavier, Embedding, Zeros, Ones };

// A named, two-dimensional parameter with its gradient buffer.
template <typename T>
struct NamedTensor {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  std::vector<int> shape() const { return {static_cast<int>(value.rows()), static_cast<int>(value.cols())}; }
};

template <typename T>
class ParamSet {
 public:
  NamedTensor<T>& add(const std::string& name, int rows, int cols, Init init, std::mt19937_64& rng) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    NamedTensor<T> t;
    t.name = name;
    t.value = Mat<T>::Zero(rows, cols);
    t.grad = Mat<T>::Zero(rows, cols);
    double bound = 0.0;
    switch (init) {
      case Init::Xavier: bound = std::sqrt(6.0 / (rows + cols)); break;
      case Init::Embedding: bound = std::sqrt(3.0 / cols); break;  // std 1/sqrt(d)
      case Init::Zeros: break;
      case Init::Ones: t.value.setOnes(); break;
    }
    if (bound > 0.0) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = static_cast<T>(dist(rng));
    }
    index_.emplace(name, tensors_.size());
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }
  NamedTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const NamedTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  NamedTensor<T>& get(const std::string& name) { return tensors_[index(name)]; }
  const NamedTensor<T>& get(const std::string& name) const { return tensors_[index(name)]; }
  std::size_t size() const { return tensors_.size(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors_) {
      NamedTensor<U> u;
      u.name = t.name;
      u.value = t.value.template cast<U>();
      u.grad = Mat<U>::Zero(t.value.rows(), t.value.cols());
      out.push(std::move(u));
    }
    return out;
  }

  void push(NamedTensor<T> t) {
    if (index_.count(t.name)) throw std::invalid_argument("duplicate parameter '" + t.name + "'");
    index_.emplace(t.name, tensors_.size());
    tensors_.push_back(std::move(t));
  }

 private:
  std::vector<NamedTensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace cast::nn
