#include "matformer/nn/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace matformer::nn {

template <class T>
RowVec<T> softmax(const RowVec<T>& logits) {
  const T mx = logits.maxCoeff();
  RowVec<T> e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

template RowVec<float> softmax(const RowVec<float>&);
template RowVec<double> softmax(const RowVec<double>&);

template <class T>
Var Tape<T>::push(Mat<T> value, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  if (recording()) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::param(const std::string& name) {
  const int idx = params_.index(name);
  if (param_leaf_.empty()) param_leaf_.assign(params_.size(), -1);
  if (param_leaf_[idx] >= 0) return Var{param_leaf_[idx]};
  Node n;
  n.ref = &params_.at(idx);
  n.param = idx;
  nodes_.push_back(std::move(n));
  param_leaf_[idx] = static_cast<int>(nodes_.size()) - 1;
  return Var{param_leaf_[idx]};
}

template <class T>
Var Tape<T>::constant(Mat<T> value) {
  return push(std::move(value));
}

template <class T>
const Mat<T>& Tape<T>::value(Var v) const {
  const auto& n = nodes_.at(v.id);
  return n.ref ? *n.ref : n.value;
}

template <class T>
bool Tape<T>::needs_grad(Var v) const {
  const auto& n = nodes_[v.id];
  return recording() && (n.param >= 0 || static_cast<bool>(n.back));
}

template <class T>
Mat<T>& Tape<T>::grad(Var v) {
  auto& n = nodes_[v.id];
  if (n.param >= 0) return grads_->at(n.param);
  if (n.grad.size() == 0) n.grad = Mat<T>::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

template <class T>
Var Tape<T>::embed(Var table, std::span<const int> indices) {
  const auto& t = value(table);
  Mat<T> out(static_cast<Eigen::Index>(indices.size()), t.cols());
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= t.rows()) {
      throw std::out_of_range("embedding index " + std::to_string(indices[r]) + " outside table of " +
                              std::to_string(t.rows()) + " rows");
    }
    out.row(r) = t.row(indices[r]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, table, idx = std::move(idx), out_var] {
    const auto& g = nodes_[out_var.id].grad;
    auto& gt = grad(table);
    for (size_t r = 0; r < idx.size(); ++r) gt.row(idx[r]) += g.row(r);
  });
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw std::invalid_argument("add: shape mismatch");
  Var out_var{static_cast<int>(nodes_.size())};
  return push(va + vb, [this, a, b, out_var] {
    const auto& g = nodes_[out_var.id].grad;
    if (needs_grad(a)) grad(a) += g;
    if (needs_grad(b)) grad(b) += g;
  });
}

template <class T>
Var Tape<T>::scale(Var x, T s) {
  Var out_var{static_cast<int>(nodes_.size())};
  return push(value(x) * s, [this, x, s, out_var] {
    if (needs_grad(x)) grad(x) += nodes_[out_var.id].grad * s;
  });
}

template <class T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const auto& vx = value(x);
  const auto& vw = value(w);
  const auto& vb = value(b);
  if (vx.cols() != vw.rows() || vb.cols() != vw.cols()) throw std::invalid_argument("linear: shape mismatch");
  Mat<T> out(vx.rows(), vw.cols());
  out.noalias() = vx * vw;
  out.rowwise() += vb.row(0);
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, x, w, b, out_var] {
    const auto& g = nodes_[out_var.id].grad;
    if (needs_grad(x)) grad(x).noalias() += g * value(w).transpose();
    if (needs_grad(w)) grad(w).noalias() += value(x).transpose() * g;
    if (needs_grad(b)) grad(b) += g.colwise().sum();
  });
}

template <class T>
Var Tape<T>::layer_norm(Var x, Var gain, Var bias) {
  constexpr T eps = T(1e-5);
  const auto& vx = value(x);
  const auto& g = value(gain);
  const auto& b = value(bias);
  const Eigen::Index n = vx.rows(), d = vx.cols();
  Mat<T> xhat(n, d);
  std::vector<T> rstd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mean = vx.row(r).mean();
    const T var = (vx.row(r).array() - mean).square().mean();
    rstd[r] = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (vx.row(r).array() - mean) * rstd[r];
  }
  Mat<T> out = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, x, gain, bias, out_var, xhat = std::move(xhat), rstd = std::move(rstd)] {
    const auto& gy = nodes_[out_var.id].grad;
    if (needs_grad(gain)) grad(gain) += (gy.array() * xhat.array()).colwise().sum().matrix();
    if (needs_grad(bias)) grad(bias) += gy.colwise().sum();
    if (needs_grad(x)) {
      const auto& gv = value(gain);
      auto& gx = grad(x);
      const T inv_d = T(1) / static_cast<T>(xhat.cols());
      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        const RowVec<T> dxhat = (gy.row(r).array() * gv.row(0).array()).matrix();
        const T m1 = dxhat.sum() * inv_d;
        const T m2 = dxhat.dot(xhat.row(r)) * inv_d;
        gx.row(r).array() += rstd[r] * (dxhat.array() - m1 - xhat.row(r).array() * m2);
      }
    }
  });
}

template <class T>
Var Tape<T>::gelu(Var x) {
  const T c = static_cast<T>(std::sqrt(2.0 / M_PI));
  const T k = T(0.044715);
  const auto& vx = value(x);
  Mat<T> out = vx.unaryExpr([c, k](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v))); });
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, x, c, k, out_var] {
    if (!needs_grad(x)) return;
    const auto& g = nodes_[out_var.id].grad;
    const auto& vx = value(x);
    auto& gx = grad(x);
    for (Eigen::Index i = 0; i < vx.size(); ++i) {
      const T v = vx.data()[i];
      const T t = std::tanh(c * (v + k * v * v * v));
      const T dt = (T(1) - t * t) * c * (T(1) + T(3) * k * v * v);
      gx.data()[i] += g.data()[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt);
    }
  });
}

template <class T>
Var Tape<T>::attention(Var qkv, int heads, std::span<const Segment> segments, bool causal) {
  const auto& m = value(qkv);
  if (m.cols() % 3 != 0 || (m.cols() / 3) % heads != 0) throw std::invalid_argument("attention: bad qkv width");
  const int d = static_cast<int>(m.cols() / 3);
  const int dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> out = Mat<T>::Zero(m.rows(), d);
  // Softmax matrices per (segment, head), kept for the backward pass.
  std::vector<Mat<T>> probs;
  if (recording()) probs.reserve(segments.size() * heads);
  for (const auto& seg : segments) {
    if (seg.start < 0 || seg.length <= 0 || seg.start + seg.length > m.rows()) {
      throw std::invalid_argument("attention: segment outside input");
    }
    for (int h = 0; h < heads; ++h) {
      const auto q = m.block(seg.start, h * dh, seg.length, dh);
      const auto kk = m.block(seg.start, d + h * dh, seg.length, dh);
      const auto v = m.block(seg.start, 2 * d + h * dh, seg.length, dh);
      Mat<T> s(seg.length, seg.length);
      s.noalias() = q * kk.transpose();
      s *= inv_sqrt;
      for (int i = 0; i < seg.length; ++i) {
        const int visible = causal ? i + 1 : seg.length;
        const T mx = s.row(i).head(visible).maxCoeff();
        T sum = 0;
        for (int j = 0; j < visible; ++j) {
          s(i, j) = std::exp(s(i, j) - mx);
          sum += s(i, j);
        }
        for (int j = 0; j < visible; ++j) s(i, j) /= sum;
        for (int j = visible; j < seg.length; ++j) s(i, j) = 0;
      }
      out.block(seg.start, h * dh, seg.length, dh).noalias() = s * v;
      if (recording()) probs.push_back(std::move(s));
    }
  }
  std::vector<Segment> segs(segments.begin(), segments.end());
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, qkv, heads, d, dh, inv_sqrt, out_var, segs = std::move(segs),
                               probs = std::move(probs)] {
    if (!needs_grad(qkv)) return;
    const auto& g = nodes_[out_var.id].grad;
    const auto& m = value(qkv);
    auto& gm = grad(qkv);
    size_t p = 0;
    for (const auto& seg : segs) {
      for (int h = 0; h < heads; ++h, ++p) {
        const auto& pr = probs[p];
        const auto q = m.block(seg.start, h * dh, seg.length, dh);
        const auto kk = m.block(seg.start, d + h * dh, seg.length, dh);
        const auto v = m.block(seg.start, 2 * d + h * dh, seg.length, dh);
        const auto go = g.block(seg.start, h * dh, seg.length, dh);
        gm.block(seg.start, 2 * d + h * dh, seg.length, dh).noalias() += pr.transpose() * go;
        Mat<T> dp(seg.length, seg.length);
        dp.noalias() = go * v.transpose();
        // softmax backward: ds = p * (dp - rowsum(dp * p))
        for (int i = 0; i < seg.length; ++i) {
          const T dot = dp.row(i).dot(pr.row(i));
          dp.row(i) = (pr.row(i).array() * (dp.row(i).array() - dot)).matrix();
        }
        dp *= inv_sqrt;
        gm.block(seg.start, h * dh, seg.length, dh).noalias() += dp * kk;
        gm.block(seg.start, d + h * dh, seg.length, dh).noalias() += dp.transpose() * q;
      }
    }
  });
}

template <class T>
Var Tape<T>::gather_rows(Var x, std::span<const int> rows) {
  const auto& vx = value(x);
  Mat<T> out(static_cast<Eigen::Index>(rows.size()), vx.cols());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= vx.rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(r) = vx.row(rows[r]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, x, idx = std::move(idx), out_var] {
    if (!needs_grad(x)) return;
    const auto& g = nodes_[out_var.id].grad;
    auto& gx = grad(x);
    for (size_t r = 0; r < idx.size(); ++r) gx.row(idx[r]) += g.row(r);
  });
}

template <class T>
Var Tape<T>::concat_rows(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.cols() != vb.cols()) throw std::invalid_argument("concat_rows: column mismatch");
  Mat<T> out(va.rows() + vb.rows(), va.cols());
  out.topRows(va.rows()) = va;
  out.bottomRows(vb.rows()) = vb;
  const Eigen::Index ra = va.rows(), rb = vb.rows();
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, a, b, ra, rb, out_var] {
    const auto& g = nodes_[out_var.id].grad;
    if (needs_grad(a)) grad(a) += g.topRows(ra);
    if (needs_grad(b)) grad(b) += g.bottomRows(rb);
  });
}

template <class T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const auto& va = value(a);
  const auto& vb = value(b);
  if (va.cols() != vb.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Mat<T> out(va.rows(), vb.rows());
  out.noalias() = va * vb.transpose();
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, a, b, out_var] {
    const auto& g = nodes_[out_var.id].grad;
    if (needs_grad(a)) grad(a).noalias() += g * value(b);
    if (needs_grad(b)) grad(b).noalias() += g.transpose() * value(a);
  });
}

template <class T>
Var Tape<T>::cross_entropy(Var logits, std::span<const int> targets) {
  const auto& vl = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != vl.rows()) {
    throw std::invalid_argument("cross_entropy: one target per row expected");
  }
  Mat<T> probs(vl.rows(), vl.cols());
  T loss = 0;
  for (Eigen::Index r = 0; r < vl.rows(); ++r) {
    const int t = targets[r];
    if (t < 0) {
      probs.row(r).setZero();
      continue;
    }
    if (t >= vl.cols()) throw std::out_of_range("cross_entropy: target outside vocabulary");
    const T mx = vl.row(r).maxCoeff();
    probs.row(r) = (vl.row(r).array() - mx).exp();
    const T sum = probs.row(r).sum();
    probs.row(r) /= sum;
    loss += -(vl(r, t) - mx - std::log(sum));
  }
  if (!std::isfinite(static_cast<double>(loss))) throw std::runtime_error("cross_entropy: non-finite loss");
  Mat<T> out(1, 1);
  out(0, 0) = loss;
  std::vector<int> tg(targets.begin(), targets.end());
  Var out_var{static_cast<int>(nodes_.size())};
  return push(std::move(out), [this, logits, out_var, probs = std::move(probs), tg = std::move(tg)] {
    if (!needs_grad(logits)) return;
    const T g = nodes_[out_var.id].grad(0, 0);
    auto& gl = grad(logits);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      if (tg[r] < 0) continue;
      gl.row(r) += g * probs.row(r);
      gl(r, tg[r]) -= g;
    }
  });
}

template <class T>
void Tape<T>::backward(Var loss) {
  if (!recording()) throw std::logic_error("backward on a tape without gradients");
  if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  grad(loss)(0, 0) += T(1);
  for (int i = loss.id; i >= 0; --i) {
    auto& n = nodes_[i];
    if (n.back && n.grad.size() > 0) n.back();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace matformer::nn
