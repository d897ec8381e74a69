#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "smad/errors.hpp"

namespace smad::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Matrix<Scalar> value;
};

/// Ordered store of named parameter matrices. Layers keep indices into it, so
/// a gradient or velocity store with the same layout can be addressed the same way.
template <typename Scalar>
class Parameters {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    tensors_.push_back({std::move(name), Matrix<Scalar>::Zero(rows, cols)});
    return static_cast<int>(tensors_.size()) - 1;
  }

  Matrix<Scalar>& operator[](int i) { return tensors_[i].value; }
  const Matrix<Scalar>& operator[](int i) const { return tensors_[i].value; }
  const std::string& name(int i) const { return tensors_[i].name; }

  int index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (tensors_[i].name == name) return i;
    throw ContractError("no parameter named " + name);
  }
  int size() const { return static_cast<int>(tensors_.size()); }

  std::vector<NamedTensor<Scalar>>& tensors() { return tensors_; }
  const std::vector<NamedTensor<Scalar>>& tensors() const { return tensors_; }

  Parameters zeros_like() const {
    Parameters out;
    for (const auto& t : tensors_) out.add(t.name, t.value.rows(), t.value.cols());
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) t.value.setZero();
  }

  Eigen::Index count() const {
    Eigen::Index n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
  }

  /// Element `k` of the concatenation of all tensors (row-major within each).
  Scalar& flat(Eigen::Index k) {
    for (auto& t : tensors_) {
      if (k < t.value.size()) return t.value.data()[k];
      k -= t.value.size();
    }
    throw ContractError("Parameters::flat: index out of range");
  }

  bool same_layout(const Parameters& other) const {
    if (other.size() != size()) return false;
    for (int i = 0; i < size(); ++i)
      if (tensors_[i].value.rows() != other[i].rows() || tensors_[i].value.cols() != other[i].cols()) return false;
    return true;
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      if (!t.value.allFinite()) return false;
    return true;
  }

  template <typename Other>
  Parameters<Other> cast() const {
    Parameters<Other> out;
    for (const auto& t : tensors_) {
      const int i = out.add(t.name, t.value.rows(), t.value.cols());
      out[i] = t.value.template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<NamedTensor<Scalar>> tensors_;
};

}  // namespace smad::nn
