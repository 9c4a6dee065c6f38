#pragma once

// Reverse-mode automatic differentiation on dense 64-bit tensors (rank 1
// and rank 2, row-major). Operations record a tape; backward() walks it in
// reverse topological order. Constant subgraphs record nothing, so the same
// ops double as a fast evaluation path.

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spvt/errors.hpp"

namespace spvt {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

class Tensor {
 public:
  struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated on demand, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pulls this->grad into parents

    std::size_t numel() const { return data.size(); }
    void ensure_grad() {
      if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    n->shape = std::move(shape);
    n->data.assign(total, 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor constant(std::vector<double> values, std::vector<std::size_t> shape) {
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    if (total != values.size()) throw ShapeError("tensor data does not match shape");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    return Tensor(std::move(n));
  }

  static Tensor vector(std::vector<double> values) {
    std::size_t len = values.size();
    return constant(std::move(values), {len});
  }

  static Tensor scalar(double v) { return constant({v}, {1}); }

  static Tensor param(std::vector<double> values, std::vector<std::size_t> shape) {
    Tensor t = constant(std::move(values), std::move(shape));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return n_->shape; }
  std::size_t numel() const { return n_->data.size(); }
  std::size_t rank() const { return n_->shape.size(); }
  std::size_t rows() const { return n_->shape.at(0); }
  std::size_t cols() const { return rank() == 2 ? n_->shape[1] : 1; }
  bool requires_grad() const { return n_->requires_grad; }

  std::vector<double>& data() { return n_->data; }
  const std::vector<double>& data() const { return n_->data; }
  std::vector<double>& grad() { return n_->grad; }
  const std::vector<double>& grad() const { return n_->grad; }

  double value() const {
    if (numel() != 1) throw ContractError("value() requires a scalar tensor");
    return n_->data[0];
  }
  double at(std::size_t i) const { return n_->data.at(i); }

  void zero_grad() { n_->grad.assign(n_->data.size(), 0.0); }

  std::shared_ptr<Node> node() const { return n_; }

  // Seeds the (scalar) node with gradient one and propagates through the
  // recorded tape in reverse topological order.
  void backward() const {
    if (numel() != 1) throw ContractError("backward() seed must be scalar");
    if (!n_->requires_grad) return;
    std::vector<Node*> order;
    topo_sort(order);
    n_->ensure_grad();
    n_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backprop) node->backprop(*node);
    }
  }

 private:
  void topo_sort(std::vector<Node*>& order) const {
    // Iterative DFS; tube graphs get deep enough that recursion is unwise.
    enum : uint8_t { kOpen = 1, kDone = 2 };
    std::unordered_map<Node*, uint8_t> state;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    state[n_.get()] = kOpen;
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (p->requires_grad && !state.count(p)) {
          state[p] = kOpen;
          stack.emplace_back(p, 0);
        }
      } else {
        node->ensure_grad();
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node> n_;
};

namespace detail {

inline Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Tensor::Node&)> backprop) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  Tensor out = Tensor::constant(std::move(data), std::move(shape));
  if (needs) {
    out.node()->requires_grad = true;
    auto& ps = out.node()->parents;
    ps.reserve(parents.size());
    for (auto& p : parents) ps.push_back(p.node());
    out.node()->backprop = std::move(backprop);
  }
  return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(what) + ": shape mismatch");
}

using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

}  // namespace detail

// ---- elementwise binary ----------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](Tensor::Node& n) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](Tensor::Node& n) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](Tensor::Node& n) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->data[i];
    }
  });
}

// Elementwise max/min of two tensors. Ties route the gradient to the first
// argument.
inline Tensor maximum(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "maximum");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](Tensor::Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (an->data[i] >= bn->data[i]) {
        if (an->requires_grad) { an->ensure_grad(); an->grad[i] += n.grad[i]; }
      } else if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[i] += n.grad[i];
      }
    }
  });
}

inline Tensor minimum(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "minimum");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.data()[i], b.data()[i]);
  auto an = a.node(), bn = b.node();
  return detail::make_op(a.shape(), std::move(out), {a, b}, [an, bn](Tensor::Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      if (an->data[i] <= bn->data[i]) {
        if (an->requires_grad) { an->ensure_grad(); an->grad[i] += n.grad[i]; }
      } else if (bn->requires_grad) {
        bn->ensure_grad();
        bn->grad[i] += n.grad[i];
      }
    }
  });
}

// ---- scalar-argument ops ----------------------------------------------------

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, c](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * c;
  });
}

inline Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
  });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor max_const(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], c);
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, c](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (an->data[i] > c) an->grad[i] += n.grad[i];
  });
}

inline Tensor min_const(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.data()[i], c);
  auto an = a.node();
  return detail::make_op(a.shape(), std::move(out), {a}, [an, c](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (an->data[i] < c) an->grad[i] += n.grad[i];
  });
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
  return min_const(max_const(a, lo), hi);
}

// ---- elementwise unary -------------------------------------------------------

namespace detail {
inline Tensor unary(const Tensor& a, double (*f)(double), double (*df)(double)) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i]);
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, df](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * df(an->data[i]);
  });
}
}  // namespace detail

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

inline Tensor sin(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

inline Tensor cos(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

inline Tensor atan(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::atan(x); },
      [](double x) { return 1.0 / (1.0 + x * x); });
}

inline Tensor tan(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tan(x); },
      [](double x) {
        double c = std::cos(x);
        return 1.0 / (c * c);
      });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

inline Tensor abs(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::fabs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// Numerically stable log(1 + e^x); gradient is the logistic sigmoid.
inline Tensor softplus(const Tensor& a) {
  return detail::unary(
      a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x) {
        if (x > 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      });
}

// ---- reductions ----------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto an = a.node();
  return detail::make_op({1}, {s}, {a}, [an](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += n.grad[0];
  });
}

inline Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  double inv = 1.0 / static_cast<double>(a.numel());
  auto an = a.node();
  return detail::make_op({1}, {s * inv}, {a}, [an, inv](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += n.grad[0] * inv;
  });
}

// ---- structure ops ---------------------------------------------------------------

inline Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) throw ShapeError("concat: rank-1 tensors expected");
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  auto an = a.node(), bn = b.node();
  std::size_t na = a.numel();
  return detail::make_op({a.numel() + b.numel()}, std::move(out), {a, b},
                         [an, bn, na](Tensor::Node& n) {
                           if (an->requires_grad) {
                             an->ensure_grad();
                             for (std::size_t i = 0; i < na; ++i) an->grad[i] += n.grad[i];
                           }
                           if (bn->requires_grad) {
                             bn->ensure_grad();
                             for (std::size_t i = na; i < n.grad.size(); ++i)
                               bn->grad[i - na] += n.grad[i];
                           }
                         });
}

inline Tensor slice(const Tensor& a, std::size_t offset, std::size_t len) {
  if (a.rank() != 1) throw ShapeError("slice: rank-1 tensor expected");
  if (offset + len > a.numel()) throw ShapeError("slice: out of range");
  std::vector<double> out(a.data().begin() + offset, a.data().begin() + offset + len);
  auto an = a.node();
  return detail::make_op({len}, std::move(out), {a}, [an, offset](Tensor::Node& n) {
    an->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) an->grad[offset + i] += n.grad[i];
  });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor expected");
  std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.numel());
  detail::CMap src(a.data().data(), r, c);
  detail::MMap dst(out.data(), c, r);
  dst = src.transpose();
  auto an = a.node();
  return detail::make_op({c, r}, std::move(out), {a}, [an, r, c](Tensor::Node& n) {
    an->ensure_grad();
    detail::CMap g(n.grad.data(), c, r);
    detail::MMap pg(an->grad.data(), r, c);
    pg += g.transpose();
  });
}

// Matrix product. Accepts {m,k}x{k,n} -> {m,n} and {m,k}x{k} -> {m}.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) throw ShapeError("matmul: lhs must be rank-2");
  std::size_t m = a.rows(), k = a.cols();
  std::size_t k2 = b.rank() == 2 ? b.rows() : b.numel();
  std::size_t n = b.rank() == 2 ? b.cols() : 1;
  if (k != k2) throw ShapeError("matmul: inner dimensions disagree");
  std::vector<double> out(m * n);
  {
    detail::CMap am(a.data().data(), m, k);
    detail::CMap bm(b.data().data(), k, n);
    detail::MMap om(out.data(), m, n);
    om.noalias() = am * bm;
  }
  auto an = a.node(), bn = b.node();
  std::vector<std::size_t> out_shape = b.rank() == 2
                                           ? std::vector<std::size_t>{m, n}
                                           : std::vector<std::size_t>{m};
  return detail::make_op(std::move(out_shape), std::move(out), {a, b},
                         [an, bn, m, k, n](Tensor::Node& node) {
                           detail::CMap g(node.grad.data(), m, n);
                           detail::CMap am(an->data.data(), m, k);
                           detail::CMap bm(bn->data.data(), k, n);
                           if (an->requires_grad) {
                             an->ensure_grad();
                             detail::MMap ag(an->grad.data(), m, k);
                             ag.noalias() += g * bm.transpose();
                           }
                           if (bn->requires_grad) {
                             bn->ensure_grad();
                             detail::MMap bg(bn->grad.data(), k, n);
                             bg.noalias() += am.transpose() * g;
                           }
                         });
}

// Adds a length-n row vector to every row of an {m,n} matrix.
inline Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 1 || a.cols() != b.numel())
    throw ShapeError("add_rowvec: incompatible shapes");
  std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + b.data()[j];
  auto an = a.node(), bn = b.node();
  return detail::make_op({m, n}, std::move(out), {a, b}, [an, bn, m, n](Tensor::Node& node) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < node.grad.size(); ++i) an->grad[i] += node.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bn->grad[j] += node.grad[i * n + j];
    }
  });
}

}  // namespace spvt
