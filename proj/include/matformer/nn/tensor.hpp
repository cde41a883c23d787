#pragma once

#include <Eigen/Core>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace matformer::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Ordered collection of named 2-D tensors (vectors are 1 x n).
template <class T>
class ParamSet {
 public:
  Mat<T>& add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw std::invalid_argument("duplicate tensor " + name);
    index_[name] = static_cast<int>(values_.size());
    names_.push_back(name);
    values_.push_back(Mat<T>::Zero(rows, cols));
    return values_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no tensor named " + name);
    return it->second;
  }
  Mat<T>& at(const std::string& name) { return values_[index(name)]; }
  const Mat<T>& at(const std::string& name) const { return values_[index(name)]; }
  Mat<T>& at(int i) { return values_[i]; }
  const Mat<T>& at(int i) const { return values_[i]; }

  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  long total_elements() const {
    long n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  /// Same names and shapes, all zero.
  ParamSet zeros_like() const {
    ParamSet out;
    for (int i = 0; i < size(); ++i) out.add(names_[i], values_[i].rows(), values_[i].cols());
    return out;
  }

  void set_zero() {
    for (auto& v : values_) v.setZero();
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (int i = 0; i < size(); ++i) out.add(names_[i], values_[i].rows(), values_[i].cols()) = values_[i].template cast<U>();
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<T>> values_;
  std::unordered_map<std::string, int> index_;
};

/// Normal(0, std) fill used for embeddings and projections.
template <class T>
void fill_normal(Mat<T>& m, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

}  // namespace matformer::nn
