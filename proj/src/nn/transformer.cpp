#include "matformer/nn/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace matformer::nn {

void TransformerConfig::check() const {
  if (layers <= 0 || heads <= 0 || dim <= 0 || ff_mult <= 0) throw std::invalid_argument("transformer: sizes must be positive");
  if (dim % heads != 0) throw std::invalid_argument("transformer: hidden dim must be divisible by heads");
  if (cond_dim < 0) throw std::invalid_argument("transformer: negative condition dim");
}

namespace {

std::string layer_name(const std::string& prefix, int i) { return prefix + "layer" + std::to_string(i) + "."; }

}  // namespace

template <class T>
void init_linear(ParamSet<T>& params, const std::string& name, int in, int out, std::mt19937_64& rng) {
  fill_normal(params.add(name + ".w", in, out), 0.02, rng);
  params.add(name + ".b", 1, out);
}

template <class T>
static void init_norm(ParamSet<T>& params, const std::string& name, int dim) {
  params.add(name + ".g", 1, dim).setOnes();
  params.add(name + ".b", 1, dim);
}

template <class T>
void init_transformer(ParamSet<T>& params, const std::string& prefix, const TransformerConfig& cfg,
                      std::mt19937_64& rng) {
  cfg.check();
  const int d = cfg.dim, f = cfg.dim * cfg.ff_mult;
  for (int i = 0; i < cfg.layers; ++i) {
    const auto p = layer_name(prefix, i);
    init_norm(params, p + "ln1", d);
    init_linear(params, p + "attn.qkv", d, 3 * d, rng);
    init_linear(params, p + "attn.out", d, d, rng);
    init_norm(params, p + "ln2", d);
    init_linear(params, p + "ff.fc", d, f, rng);
    init_linear(params, p + "ff.proj", f, d, rng);
    if (cfg.cond_dim > 0) {
      init_norm(params, p + "cond.ln", cfg.cond_dim);
      init_linear(params, p + "cond.fc", cfg.cond_dim, f, rng);
      init_linear(params, p + "cond.proj", f, d, rng);
    }
  }
  init_norm(params, prefix + "ln_f", d);
}

template <class T>
static Var norm(Tape<T>& tape, const std::string& name, Var x) {
  return tape.layer_norm(x, tape.param(name + ".g"), tape.param(name + ".b"));
}

template <class T>
Var transformer_forward(Tape<T>& tape, const std::string& prefix, const TransformerConfig& cfg, Var x,
                        std::span<const Segment> segments, Var cond) {
  if ((cfg.cond_dim > 0) != cond.valid()) throw std::invalid_argument("transformer: condition input mismatch");
  if (tape.value(x).cols() != cfg.dim) throw std::invalid_argument("transformer: input width mismatch");
  if (cond.valid() && (tape.value(cond).rows() != tape.value(x).rows() || tape.value(cond).cols() != cfg.cond_dim)) {
    throw std::invalid_argument("transformer: condition shape mismatch");
  }
  for (int i = 0; i < cfg.layers; ++i) {
    const auto p = layer_name(prefix, i);
    Var h = norm(tape, p + "ln1", x);
    h = linear(tape, p + "attn.qkv", h);
    h = tape.attention(h, cfg.heads, segments, cfg.causal);
    x = tape.add(x, linear(tape, p + "attn.out", h));

    Var f = norm(tape, p + "ln2", x);
    f = linear(tape, p + "ff.proj", tape.gelu(linear(tape, p + "ff.fc", f)));
    if (cond.valid()) {
      Var c = norm(tape, p + "cond.ln", cond);
      c = linear(tape, p + "cond.proj", tape.gelu(linear(tape, p + "cond.fc", c)));
      f = tape.add(f, c);
    }
    x = tape.add(x, f);
  }
  return norm(tape, prefix + "ln_f", x);
}

template <class T>
RowVec<T> layer_norm_row(const RowVec<T>& x, const Mat<T>& gain, const Mat<T>& bias) {
  const T mean = x.mean();
  const T var = (x.array() - mean).square().mean();
  const T rstd = T(1) / std::sqrt(var + T(1e-5));
  return (((x.array() - mean) * rstd) * gain.row(0).array() + bias.row(0).array()).matrix();
}

template <class T>
T gelu_scalar(T v) {
  const T c = static_cast<T>(std::sqrt(2.0 / M_PI));
  return T(0.5) * v * (T(1) + std::tanh(c * (v + T(0.044715) * v * v * v)));
}

template <class T>
TransformerRunner<T>::TransformerRunner(const ParamSet<T>& params, const std::string& prefix,
                                        const TransformerConfig& cfg)
    : cfg_(cfg) {
  cfg.check();
  if (!cfg.causal) throw std::invalid_argument("TransformerRunner needs a causal model");
  for (int i = 0; i < cfg.layers; ++i) {
    const auto p = layer_name(prefix, i);
    Layer l;
    l.ln1_g = &params.at(p + "ln1.g");
    l.ln1_b = &params.at(p + "ln1.b");
    l.qkv_w = &params.at(p + "attn.qkv.w");
    l.qkv_b = &params.at(p + "attn.qkv.b");
    l.out_w = &params.at(p + "attn.out.w");
    l.out_b = &params.at(p + "attn.out.b");
    l.ln2_g = &params.at(p + "ln2.g");
    l.ln2_b = &params.at(p + "ln2.b");
    l.fc_w = &params.at(p + "ff.fc.w");
    l.fc_b = &params.at(p + "ff.fc.b");
    l.proj_w = &params.at(p + "ff.proj.w");
    l.proj_b = &params.at(p + "ff.proj.b");
    if (cfg.cond_dim > 0) {
      l.cln_g = &params.at(p + "cond.ln.g");
      l.cln_b = &params.at(p + "cond.ln.b");
      l.cfc_w = &params.at(p + "cond.fc.w");
      l.cfc_b = &params.at(p + "cond.fc.b");
      l.cproj_w = &params.at(p + "cond.proj.w");
      l.cproj_b = &params.at(p + "cond.proj.b");
    }
    layers_.push_back(std::move(l));
  }
  lnf_g_ = &params.at(prefix + "ln_f.g");
  lnf_b_ = &params.at(prefix + "ln_f.b");
}

template <class T>
RowVec<T> TransformerRunner<T>::step(const RowVec<T>& input, const RowVec<T>* cond) {
  if ((cfg_.cond_dim > 0) != (cond != nullptr)) throw std::invalid_argument("transformer step: condition mismatch");
  const int d = cfg_.dim, dh = d / cfg_.heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  RowVec<T> x = input;
  const int t = length_;
  for (auto& l : layers_) {
    if (l.keys.rows() <= t) {
      const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * l.keys.rows());
      l.keys.conservativeResize(cap, d);
      l.values.conservativeResize(cap, d);
    }
    RowVec<T> h = layer_norm_row(x, *l.ln1_g, *l.ln1_b);
    RowVec<T> qkv = h * *l.qkv_w + *l.qkv_b;
    l.keys.row(t) = qkv.segment(d, d);
    l.values.row(t) = qkv.segment(2 * d, d);
    RowVec<T> att(d);
    for (int hd = 0; hd < cfg_.heads; ++hd) {
      const auto q = qkv.segment(hd * dh, dh);
      Eigen::Matrix<T, Eigen::Dynamic, 1> s = l.keys.block(0, hd * dh, t + 1, dh) * q.transpose() * inv_sqrt;
      const T mx = s.maxCoeff();
      s = (s.array() - mx).exp();
      s /= s.sum();
      att.segment(hd * dh, dh) = s.transpose() * l.values.block(0, hd * dh, t + 1, dh);
    }
    x += att * *l.out_w + *l.out_b;
    RowVec<T> f = layer_norm_row(x, *l.ln2_g, *l.ln2_b);
    f = (f * *l.fc_w + *l.fc_b).unaryExpr([](T v) { return gelu_scalar(v); });
    f = f * *l.proj_w + *l.proj_b;
    if (cond) {
      RowVec<T> c = layer_norm_row(*cond, *l.cln_g, *l.cln_b);
      c = (c * *l.cfc_w + *l.cfc_b).unaryExpr([](T v) { return gelu_scalar(v); });
      f += c * *l.cproj_w + *l.cproj_b;
    }
    x += f;
  }
  ++length_;
  return layer_norm_row(x, *lnf_g_, *lnf_b_);
}

template void init_linear(ParamSet<float>&, const std::string&, int, int, std::mt19937_64&);
template void init_linear(ParamSet<double>&, const std::string&, int, int, std::mt19937_64&);
template void init_transformer(ParamSet<float>&, const std::string&, const TransformerConfig&, std::mt19937_64&);
template void init_transformer(ParamSet<double>&, const std::string&, const TransformerConfig&, std::mt19937_64&);
template Var transformer_forward(Tape<float>&, const std::string&, const TransformerConfig&, Var,
                                 std::span<const Segment>, Var);
template Var transformer_forward(Tape<double>&, const std::string&, const TransformerConfig&, Var,
                                 std::span<const Segment>, Var);
template RowVec<float> layer_norm_row(const RowVec<float>&, const Mat<float>&, const Mat<float>&);
template RowVec<double> layer_norm_row(const RowVec<double>&, const Mat<double>&, const Mat<double>&);
template float gelu_scalar(float);
template double gelu_scalar(double);
template class TransformerRunner<float>;
template class TransformerRunner<double>;

}  // namespace matformer::nn
