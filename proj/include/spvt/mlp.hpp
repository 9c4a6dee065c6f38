#pragma once

// Fully connected networks: ordered affine layers with elementwise
// activations. Parameters live in autodiff tensors; the plain forward paths
// skip the tape entirely.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spvt/rng.hpp"
#include "spvt/tensor.hpp"

namespace spvt {

enum class Activation : uint8_t { kIdentity = 0, kRelu = 1, kTanh = 2 };

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    default: return x;
  }
}

struct Layer {
  Tensor w;  // {out, in}
  Tensor b;  // {out}
  Activation act = Activation::kIdentity;

  std::size_t in_dim() const { return w.cols(); }
  std::size_t out_dim() const { return w.rows(); }
};

enum class InitKind { kZero, kHe, kOrthogonal };

class MlpNetwork {
 public:
  MlpNetwork() = default;

  explicit MlpNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("MlpNetwork: at least one layer required");
    for (std::size_t i = 1; i < layers_.size(); ++i)
      if (layers_[i].in_dim() != layers_[i - 1].out_dim())
        throw ShapeError("MlpNetwork: layer dimensions are not chain-compatible");
  }

  // Builds a network from a dimension chain, e.g. dims={2,32,1} gives two
  // layers. acts must have dims.size()-1 entries.
  static MlpNetwork dense(const std::vector<std::size_t>& dims,
                          const std::vector<Activation>& acts, InitKind init, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw ShapeError("dense: dims/acts mismatch");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      std::size_t in = dims[l], out = dims[l + 1];
      std::vector<double> w(out * in, 0.0);
      switch (init) {
        case InitKind::kZero: break;
        case InitKind::kHe: {
          double s = std::sqrt(2.0 / static_cast<double>(in));
          for (double& v : w) v = rng.normal() * s;
          break;
        }
        case InitKind::kOrthogonal: {
          fill_orthogonal(w, out, in, rng);
          break;
        }
      }
      layers.push_back(Layer{Tensor::param(std::move(w), {out, in}),
                             Tensor::param(std::vector<double>(out, 0.0), {out}), acts[l]});
    }
    return MlpNetwork(std::move(layers));
  }

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> ps;
    for (const auto& l : layers_) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    return ps;
  }

  void set_trainable(bool trainable) {
    for (auto& l : layers_) {
      l.w.node()->requires_grad = trainable;
      l.b.node()->requires_grad = trainable;
    }
  }

  // Deep copy; the copy's parameters are fresh nodes.
  MlpNetwork clone() const {
    std::vector<Layer> ls;
    for (const auto& l : layers_) {
      Tensor w = Tensor::constant(l.w.data(), l.w.shape());
      Tensor b = Tensor::constant(l.b.data(), l.b.shape());
      w.node()->requires_grad = l.w.requires_grad();
      b.node()->requires_grad = l.b.requires_grad();
      ls.push_back(Layer{w, b, l.act});
    }
    return MlpNetwork(std::move(ls));
  }

  std::vector<double> forward(std::span<const double> x) const {
    if (x.size() != input_dim()) throw ShapeError("forward: input dimension mismatch");
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const auto& l : layers_) {
      std::size_t out = l.out_dim(), in = l.in_dim();
      next.assign(out, 0.0);
      Eigen::Map<const Mat> w(l.w.data().data(), out, in);
      Eigen::Map<const Vec> xin(cur.data(), in);
      Eigen::Map<Vec> y(next.data(), out);
      y.noalias() = w * xin;
      for (std::size_t i = 0; i < out; ++i) next[i] = apply_activation(l.act, next[i] + l.b.data()[i]);
      cur.swap(next);
    }
    return cur;
  }

  // Rows of X are samples.
  Mat forward_batch(const Mat& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim())
      throw ShapeError("forward_batch: input dimension mismatch");
    Mat cur = x;
    for (const auto& l : layers_) {
      Eigen::Map<const Mat> w(l.w.data().data(), l.out_dim(), l.in_dim());
      Eigen::Map<const Vec> b(l.b.data().data(), l.out_dim());
      Mat next = cur * w.transpose();
      next.rowwise() += b.transpose();
      switch (l.act) {
        case Activation::kRelu: next = next.cwiseMax(0.0); break;
        case Activation::kTanh: next = next.array().tanh().matrix(); break;
        default: break;
      }
      cur = std::move(next);
    }
    return cur;
  }

  // Tape-recorded forward. x is rank-1 (single sample) or rank-2 (batch rows).
  Tensor forward_t(const Tensor& x) const {
    Tensor cur = x;
    for (const auto& l : layers_) {
      if (cur.rank() == 1) {
        cur = add(matmul(l.w, cur), l.b);
      } else {
        cur = add_rowvec(matmul(cur, transpose(l.w)), l.b);
      }
      switch (l.act) {
        case Activation::kRelu: cur = relu(cur); break;
        case Activation::kTanh: cur = spvt::tanh(cur); break;
        default: break;
      }
    }
    return cur;
  }

 private:
  // Gram-Schmidt rows (or columns when out < in is violated) of a Gaussian
  // matrix; rows of the result are orthonormal up to the rank limit.
  static void fill_orthogonal(std::vector<double>& w, std::size_t out, std::size_t in, Rng& rng) {
    Mat g(out, in);
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j) g(i, j) = rng.normal();
    bool wide = out > in;
    Mat m = wide ? Mat(g.transpose()) : g;  // rows <= cols
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) m.row(i) -= m.row(i).dot(m.row(j)) * m.row(j);
      double norm = m.row(i).norm();
      if (norm < 1e-12) norm = 1.0;
      m.row(i) /= norm;
    }
    Mat q = wide ? Mat(m.transpose()) : m;
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in; ++j) w[i * in + j] = q(i, j);
  }

  std::vector<Layer> layers_;
};

}  // namespace spvt
