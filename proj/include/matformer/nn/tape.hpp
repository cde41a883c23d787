#pragma once

#include <functional>
#include <span>
#include <vector>

#include "matformer/nn/tensor.hpp"

namespace matformer::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Contiguous block of rows forming one independent sequence.
struct Segment {
  int start = 0;
  int length = 0;
};

/// Reverse-mode automatic differentiation over row-major matrices. Parameter
/// leaves reference a ParamSet; their gradients accumulate into a matching
/// gradient set. Constructed without a gradient set, the tape only evaluates.
template <class T>
class Tape {
 public:
  explicit Tape(const ParamSet<T>& params, ParamSet<T>* grads = nullptr) : params_(params), grads_(grads) {}

  bool recording() const { return grads_ != nullptr; }

  Var param(const std::string& name);
  Var constant(Mat<T> value);

  const Mat<T>& value(Var v) const;
  /// Scalar value of a 1 x 1 result.
  T scalar(Var v) const { return value(v)(0, 0); }

  /// Rows of `table` selected by `indices`.
  Var embed(Var table, std::span<const int> indices);
  Var add(Var a, Var b);
  Var scale(Var x, T s);
  /// x * w + b, with w stored as [in, out] and b as [1, out].
  Var linear(Var x, Var w, Var b);
  Var layer_norm(Var x, Var gain, Var bias);
  /// tanh-approximated GELU.
  Var gelu(Var x);
  /// Multi-head scaled dot-product attention on a fused [N, 3D] q|k|v matrix.
  /// Each segment attends only within itself.
  Var attention(Var qkv, int heads, std::span<const Segment> segments, bool causal);
  Var gather_rows(Var x, std::span<const int> rows);
  Var concat_rows(Var a, Var b);
  /// a * b^T.
  Var matmul_nt(Var a, Var b);
  /// Sum over rows of -log softmax(logits)[target]; rows with target < 0 are
  /// skipped. Returns a 1 x 1 value.
  Var cross_entropy(Var logits, std::span<const int> targets);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter.
  void backward(Var loss);

 private:
  struct Node {
    Mat<T> value;
    const Mat<T>* ref = nullptr;  // parameter leaves alias the ParamSet
    int param = -1;
    Mat<T> grad;
    std::function<void()> back;
  };

  Var push(Mat<T> value, std::function<void()> back = {});
  Mat<T>& grad(Var v);
  bool needs_grad(Var v) const;

  const ParamSet<T>& params_;
  ParamSet<T>* grads_;
  std::vector<Node> nodes_;
  std::vector<int> param_leaf_;  // param index -> node id
};

extern template class Tape<float>;
extern template class Tape<double>;

/// Softmax of a row vector (numerically stable).
template <class T>
RowVec<T> softmax(const RowVec<T>& logits);

}  // namespace matformer::nn
