#pragma once

// Network bound propagation. Two routes:
//   - ibp_forward: layer-wise interval bounds; a tensor-graph variant makes
//     the output bounds differentiable w.r.t. the network parameters.
//   - crown_backward: backward substitution of linear activation relaxations
//     (intermediate pre-activation bounds come from IBP), concretized over
//     the input box.

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spvt/interval.hpp"
#include "spvt/mlp.hpp"
#include "spvt/tensor.hpp"

namespace spvt {

enum class BoundMethod { kIbp, kCrown };

inline const char* to_string(BoundMethod m) {
  return m == BoundMethod::kIbp ? "ibp" : "crown";
}

inline IntervalVec interval_activation(Activation act, const IntervalVec& box) {
  switch (act) {
    case Activation::kRelu: return interval_unary(UnaryFn::kRelu, box);
    case Activation::kTanh: return interval_unary(UnaryFn::kTanh, box);
    default: return box;
  }
}

inline IntervalVec ibp_forward(const MlpNetwork& net, const IntervalVec& box) {
  if (box.size() != net.input_dim()) throw ShapeError("ibp_forward: input dim mismatch");
  IntervalVec cur = box;
  for (const auto& l : net.layers()) {
    cur = interval_affine(l.w, l.b, cur);
    cur = interval_activation(l.act, cur);
  }
  return cur;
}

// Differentiable IBP. lb/ub are rank-1 tensors (graph nodes or constants);
// the returned bounds carry gradients w.r.t. any parameter reachable from
// them or from the network weights.
inline std::pair<Tensor, Tensor> ibp_forward_t(const MlpNetwork& net, Tensor lb, Tensor ub) {
  if (lb.numel() != net.input_dim() || ub.numel() != net.input_dim())
    throw ShapeError("ibp_forward_t: input dim mismatch");
  for (const auto& l : net.layers()) {
    Tensor c = scale(add(lb, ub), 0.5);
    Tensor r = scale(sub(ub, lb), 0.5);
    Tensor out_c = add(matmul(l.w, c), l.b);
    Tensor out_r = matmul(abs(l.w), r);
    lb = add_scalar(sub(out_c, out_r), -kIntervalPad);
    ub = add_scalar(add(out_c, out_r), kIntervalPad);
    switch (l.act) {
      case Activation::kRelu:
        lb = relu(lb);
        ub = relu(ub);
        break;
      case Activation::kTanh:
        lb = spvt::tanh(lb);
        ub = spvt::tanh(ub);
        break;
      default: break;
    }
  }
  return {lb, ub};
}

// Sound linear envelope of a network over input_box:
//   lower.a * x + lower.b <= net(x) <= upper.a * x + upper.b  elementwise.
struct LinearRelaxation {
  Mat lower_a, upper_a;
  Vec lower_b, upper_b;
  IntervalVec input_box;

  std::string debug_dump() const {
    std::ostringstream os;
    os << "LinearRelaxation over " << input_box.size() << " inputs, " << lower_a.rows()
       << " outputs\n";
    for (Eigen::Index i = 0; i < lower_a.rows(); ++i) {
      os << "  out[" << i << "] lower:";
      for (Eigen::Index j = 0; j < lower_a.cols(); ++j) os << " " << lower_a(i, j);
      os << " + " << lower_b(i) << "\n  out[" << i << "] upper:";
      for (Eigen::Index j = 0; j < upper_a.cols(); ++j) os << " " << upper_a(i, j);
      os << " + " << upper_b(i) << "\n";
    }
    return os.str();
  }
};

namespace detail {

struct RelaxLine {
  double a_l, c_l, a_u, c_u;  // slopes and intercepts, slopes always >= 0
};

inline RelaxLine relu_relax(double l, double u) {
  if (u <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  if (l >= 0.0) return {1.0, 0.0, 1.0, 0.0};
  double a_u = u / (u - l);
  double c_u = -a_u * l + kIntervalPad;
  double a_l = (std::fabs(l) >= std::fabs(u)) ? 0.0 : 1.0;
  return {a_l, 0.0, a_u, c_u};
}

// Tangent point d in [0, u] such that the tangent at d passes through
// (l, tanh(l)); exists when the chord from l is not already an upper bound.
inline double tanh_tangent_point(double l, double u) {
  auto g = [l](double d) {
    double t = std::tanh(d);
    return (1.0 - t * t) * (d - l) + std::tanh(l) - t;
  };
  double lo = 0.0, hi = u;
  for (int i = 0; i < 20; ++i) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return hi;  // g(hi) <= 0 keeps the line sound at x = l
}

inline RelaxLine tanh_relax(double l, double u) {
  auto f = [](double x) { return std::tanh(x); };
  auto fp = [](double x) {
    double t = std::tanh(x);
    return 1.0 - t * t;
  };
  RelaxLine r{};
  if (u - l < 1e-12) {
    double m = 0.5 * (l + u);
    double a = fp(m);
    r = {a, f(m) - a * m, a, f(m) - a * m};
  } else if (l >= 0.0) {
    // Concave region: chord below, tangent above.
    double a_l = (f(u) - f(l)) / (u - l);
    double m = 0.5 * (l + u);
    double a_u = fp(m);
    r = {a_l, f(l) - a_l * l, a_u, f(m) - a_u * m};
  } else if (u <= 0.0) {
    // Convex region: tangent below, chord above.
    double m = 0.5 * (l + u);
    double a_l = fp(m);
    double a_u = (f(u) - f(l)) / (u - l);
    r = {a_l, f(m) - a_l * m, a_u, f(l) - a_u * l};
  } else {
    // Mixed sign. Upper: tangent through (l, f(l)) at d >= 0, or the chord
    // when even the tangent at u stays above the left endpoint. Lower is the
    // mirror image (tanh is odd).
    double gu = fp(u) * (u - l) + f(l) - f(u);
    if (gu >= 0.0) {
      double a = (f(u) - f(l)) / (u - l);
      r.a_u = a;
      r.c_u = f(l) - a * l;
    } else {
      double d = tanh_tangent_point(l, u);
      r.a_u = fp(d);
      r.c_u = f(d) - r.a_u * d;
    }
    double gm = fp(-l) * (-l + u) + f(-u) - f(-l);
    if (gm >= 0.0) {
      double a = (f(u) - f(l)) / (u - l);
      r.a_l = a;
      r.c_l = f(u) - a * u;
    } else {
      double d = tanh_tangent_point(-u, -l);
      double a = fp(d);
      double c = f(d) - a * d;
      r.a_l = a;
      r.c_l = -c;
    }
  }
  r.c_u += kIntervalPad;
  r.c_l -= kIntervalPad;
  return r;
}

inline void activation_relax(Activation act, const IntervalVec& pre, std::vector<RelaxLine>& out) {
  out.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    switch (act) {
      case Activation::kRelu: out[i] = relu_relax(pre.lb[i], pre.ub[i]); break;
      case Activation::kTanh: out[i] = tanh_relax(pre.lb[i], pre.ub[i]); break;
      default: out[i] = {1.0, 0.0, 1.0, 0.0}; break;
    }
  }
}

}  // namespace detail

// Backward CROWN with IBP intermediate bounds. Supports Identity, ReLU and
// Tanh activations; throws on anything else by construction of Activation.
inline std::pair<LinearRelaxation, IntervalVec> crown_backward(const MlpNetwork& net,
                                                               const IntervalVec& box) {
  if (box.size() != net.input_dim()) throw ShapeError("crown_backward: input dim mismatch");
  const auto& layers = net.layers();
  std::size_t depth = layers.size();

  // Pre-activation boxes per layer, from IBP.
  std::vector<IntervalVec> pre(depth);
  {
    IntervalVec cur = box;
    for (std::size_t l = 0; l < depth; ++l) {
      pre[l] = interval_affine(layers[l].w, layers[l].b, cur);
      cur = interval_activation(layers[l].act, pre[l]);
    }
  }

  // Backward substitution for bounds on the last pre-activation.
  std::size_t out_dim = net.output_dim();
  Eigen::Map<const Mat> w_last(layers[depth - 1].w.data().data(), out_dim,
                               layers[depth - 1].in_dim());
  Eigen::Map<const Vec> b_last(layers[depth - 1].b.data().data(), out_dim);
  Mat au = w_last, al = w_last;
  Vec bu = b_last, bl = b_last;

  std::vector<detail::RelaxLine> lines;
  for (std::size_t l = depth - 1; l-- > 0;) {
    detail::activation_relax(layers[l].act, pre[l], lines);
    std::size_t width = lines.size();
    // Substitute z = act(zhat) through the relaxation lines, then zhat = Wx+b.
    Mat au_hat(out_dim, width), al_hat(out_dim, width);
    for (std::size_t i = 0; i < out_dim; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const auto& ln = lines[j];
        double cu = au(i, j), cl = al(i, j);
        if (cu >= 0.0) {
          au_hat(i, j) = cu * ln.a_u;
          bu(i) += cu * ln.c_u;
        } else {
          au_hat(i, j) = cu * ln.a_l;
          bu(i) += cu * ln.c_l;
        }
        if (cl >= 0.0) {
          al_hat(i, j) = cl * ln.a_l;
          bl(i) += cl * ln.c_l;
        } else {
          al_hat(i, j) = cl * ln.a_u;
          bl(i) += cl * ln.c_u;
        }
      }
    }
    Eigen::Map<const Mat> w(layers[l].w.data().data(), layers[l].out_dim(), layers[l].in_dim());
    Eigen::Map<const Vec> b(layers[l].b.data().data(), layers[l].out_dim());
    bu += au_hat * b;
    bl += al_hat * b;
    au = au_hat * w;
    al = al_hat * w;
  }

  // Concretize the pre-activation bounds over the input box.
  IntervalVec pre_out;
  pre_out.lb.resize(out_dim);
  pre_out.ub.resize(out_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    double hi = bu(i), lo = bl(i);
    for (std::size_t j = 0; j < box.size(); ++j) {
      hi += au(i, j) >= 0.0 ? au(i, j) * box.ub[j] : au(i, j) * box.lb[j];
      lo += al(i, j) >= 0.0 ? al(i, j) * box.lb[j] : al(i, j) * box.ub[j];
    }
    pre_out.lb[i] = lo - kIntervalPad;
    pre_out.ub[i] = std::max(hi + kIntervalPad, lo - kIntervalPad);
  }

  // Compose the final activation: monotone, slopes of its relaxation are
  // nonnegative, so lines compose directly and the box maps by endpoints.
  LinearRelaxation rel;
  rel.input_box = box;
  Activation last_act = layers[depth - 1].act;
  if (last_act == Activation::kIdentity) {
    rel.lower_a = al;
    rel.upper_a = au;
    rel.lower_b = bl;
    rel.upper_b = bu;
    return {std::move(rel), std::move(pre_out)};
  }
  detail::activation_relax(last_act, pre_out, lines);
  rel.lower_a = al;
  rel.upper_a = au;
  rel.lower_b = bl;
  rel.upper_b = bu;
  for (std::size_t i = 0; i < out_dim; ++i) {
    const auto& ln = lines[i];
    rel.upper_a.row(i) *= ln.a_u;
    rel.upper_b(i) = ln.a_u * bu(i) + ln.c_u;
    rel.lower_a.row(i) *= ln.a_l;
    rel.lower_b(i) = ln.a_l * bl(i) + ln.c_l;
  }
  IntervalVec out = interval_activation(last_act, pre_out);
  return {std::move(rel), std::move(out)};
}

// Unified entry point used by the reachability loop.
inline IntervalVec bound_network(const MlpNetwork& net, const IntervalVec& box, BoundMethod m) {
  if (m == BoundMethod::kIbp) return ibp_forward(net, box);
  return crown_backward(net, box).second;
}

}  // namespace spvt
