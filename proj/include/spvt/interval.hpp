#pragma once

// Sound interval arithmetic on vectors, including the transcendental
// functions the vehicle dynamics need. Outputs are padded outward by a few
// ulps' worth of absolute slack so that float rounding can never produce a
// containment violation.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "spvt/errors.hpp"
#include "spvt/mlp.hpp"

namespace spvt {

// Absolute outward slack applied by interval primitives.
inline constexpr double kIntervalPad = 1e-11;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct IntervalVec {
  std::vector<double> lb, ub;

  IntervalVec() = default;
  IntervalVec(std::vector<double> lo, std::vector<double> hi)
      : lb(std::move(lo)), ub(std::move(hi)) {
    validate();
  }

  static IntervalVec point(std::span<const double> x) {
    return IntervalVec(std::vector<double>(x.begin(), x.end()),
                       std::vector<double>(x.begin(), x.end()));
  }

  static IntervalVec uniform(std::size_t n, double lo, double hi) {
    return IntervalVec(std::vector<double>(n, lo), std::vector<double>(n, hi));
  }

  std::size_t size() const { return lb.size(); }

  void validate() const {
    if (lb.size() != ub.size()) throw ShapeError("IntervalVec: lb/ub length mismatch");
    for (std::size_t i = 0; i < lb.size(); ++i) {
      if (!(lb[i] <= ub[i])) throw ShapeError("IntervalVec: lb > ub");
      if (!std::isfinite(lb[i]) || !std::isfinite(ub[i]))
        throw NumericError("IntervalVec: non-finite bound");
    }
  }

  double width(std::size_t i) const { return ub[i] - lb[i]; }
  double total_width() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += width(i);
    return s;
  }
  double center(std::size_t i) const { return 0.5 * (lb[i] + ub[i]); }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    if (x.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (x[i] < lb[i] - tol || x[i] > ub[i] + tol) return false;
    return true;
  }

  bool subset_of(const IntervalVec& other, double tol = 0.0) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (lb[i] < other.lb[i] - tol || ub[i] > other.ub[i] + tol) return false;
    return true;
  }

  IntervalVec widened(double eps) const {
    IntervalVec out = *this;
    for (std::size_t i = 0; i < size(); ++i) {
      out.lb[i] -= eps;
      out.ub[i] += eps;
    }
    return out;
  }

  // Intersection with the box [lo, hi]^n. Caller guarantees non-emptiness.
  IntervalVec clamped(double lo, double hi) const {
    IntervalVec out = *this;
    for (std::size_t i = 0; i < size(); ++i) {
      out.lb[i] = std::max(out.lb[i], lo);
      out.ub[i] = std::min(out.ub[i], hi);
      if (out.lb[i] > out.ub[i]) throw DomainError("clamped: empty intersection");
    }
    return out;
  }

  IntervalVec concat(const IntervalVec& other) const {
    IntervalVec out = *this;
    out.lb.insert(out.lb.end(), other.lb.begin(), other.lb.end());
    out.ub.insert(out.ub.end(), other.ub.begin(), other.ub.end());
    return out;
  }

  IntervalVec slice(std::size_t off, std::size_t len) const {
    return IntervalVec(std::vector<double>(lb.begin() + off, lb.begin() + off + len),
                       std::vector<double>(ub.begin() + off, ub.begin() + off + len));
  }
};

// Affine image in center/radius form: c' = Wc + b, r' = |W| r.
inline IntervalVec interval_affine(std::span<const double> w, std::size_t out_dim,
                                   std::size_t in_dim, std::span<const double> b,
                                   const IntervalVec& box) {
  if (box.size() != in_dim || w.size() != out_dim * in_dim || b.size() != out_dim)
    throw ShapeError("interval_affine: shape mismatch");
  IntervalVec out;
  out.lb.resize(out_dim);
  out.ub.resize(out_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    double c = b[i], r = 0.0;
    const double* row = w.data() + i * in_dim;
    for (std::size_t j = 0; j < in_dim; ++j) {
      double cj = 0.5 * (box.lb[j] + box.ub[j]);
      double rj = 0.5 * (box.ub[j] - box.lb[j]);
      c += row[j] * cj;
      r += std::fabs(row[j]) * rj;
    }
    out.lb[i] = c - r - kIntervalPad;
    out.ub[i] = c + r + kIntervalPad;
  }
  return out;
}

inline IntervalVec interval_affine(const Tensor& w, const Tensor& b, const IntervalVec& box) {
  return interval_affine(w.data(), w.rows(), w.cols(), b.data(), box);
}

enum class UnaryFn { kRelu, kTanh, kSin, kCos, kAtan, kTan };

namespace detail {

// True when some point base + k*period lies in [lo, hi].
inline bool interval_hits(double lo, double hi, double base, double period) {
  double k_lo = std::ceil((lo - base) / period);
  return base + k_lo * period <= hi;
}

inline void sin_range(double lo, double hi, double& out_lo, double& out_hi) {
  out_lo = std::min(std::sin(lo), std::sin(hi));
  out_hi = std::max(std::sin(lo), std::sin(hi));
  if (interval_hits(lo, hi, 0.5 * kPi, 2.0 * kPi)) out_hi = 1.0;
  if (interval_hits(lo, hi, -0.5 * kPi, 2.0 * kPi)) out_lo = -1.0;
}

inline void cos_range(double lo, double hi, double& out_lo, double& out_hi) {
  out_lo = std::min(std::cos(lo), std::cos(hi));
  out_hi = std::max(std::cos(lo), std::cos(hi));
  if (interval_hits(lo, hi, 0.0, 2.0 * kPi)) out_hi = 1.0;
  if (interval_hits(lo, hi, kPi, 2.0 * kPi)) out_lo = -1.0;
}

}  // namespace detail

inline IntervalVec interval_unary(UnaryFn fn, const IntervalVec& box) {
  IntervalVec out;
  out.lb.resize(box.size());
  out.ub.resize(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) {
    double lo = box.lb[i], hi = box.ub[i], a = 0.0, b = 0.0;
    switch (fn) {
      case UnaryFn::kRelu:
        a = std::max(lo, 0.0);
        b = std::max(hi, 0.0);
        out.lb[i] = a;
        out.ub[i] = b;
        continue;  // exact in float arithmetic, no pad
      case UnaryFn::kTanh:
        a = std::tanh(lo);
        b = std::tanh(hi);
        break;
      case UnaryFn::kAtan:
        a = std::atan(lo);
        b = std::atan(hi);
        break;
      case UnaryFn::kTan:
        if (lo <= -0.5 * kPi + 1e-9 || hi >= 0.5 * kPi - 1e-9)
          throw DomainError("interval tan: box not strictly inside (-pi/2, pi/2)");
        a = std::tan(lo);
        b = std::tan(hi);
        break;
      case UnaryFn::kSin:
        detail::sin_range(lo, hi, a, b);
        break;
      case UnaryFn::kCos:
        detail::cos_range(lo, hi, a, b);
        break;
    }
    out.lb[i] = a - kIntervalPad;
    out.ub[i] = b + kIntervalPad;
  }
  return out;
}

}  // namespace spvt
