#pragma once

// Shared test oracles: an independent straight-line MLP forward pass,
// central-difference gradients, and small statistical helpers. These stay
// independent of the library paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spvt/mlp.hpp"
#include "spvt/rng.hpp"

namespace testutil {

// Straight-line re-implementation of an MLP forward pass (no Eigen, no
// shared code with MlpNetwork::forward).
inline std::vector<double> reference_forward(const spvt::MlpNetwork& net,
                                             const std::vector<double>& x) {
  std::vector<double> cur = x;
  for (const auto& layer : net.layers()) {
    std::size_t out = layer.out_dim(), in = layer.in_dim();
    std::vector<double> next(out, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = layer.b.data()[i];
      for (std::size_t j = 0; j < in; ++j) acc += layer.w.data()[i * in + j] * cur[j];
      switch (layer.act) {
        case spvt::Activation::kRelu: next[i] = acc > 0.0 ? acc : 0.0; break;
        case spvt::Activation::kTanh: next[i] = std::tanh(acc); break;
        default: next[i] = acc; break;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Central finite difference of f at x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

// Regularized upper incomplete gamma Q(a, x), series/continued-fraction
// split as in Numerical Recipes. Used for chi-square p-values.
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) return 0.0;
  if (x == 0.0) return 1.0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
    }
    double p = sum * std::exp(-x + a * std::log(x) - gln);
    return 1.0 - p;
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

// p-value for a chi-square statistic with dof degrees of freedom.
inline double chi2_pvalue(double stat, int dof) { return gamma_q(0.5 * dof, 0.5 * stat); }

// Two-sided Kolmogorov-Smirnov statistic of samples vs U(lo, hi).
inline double ks_uniform_stat(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double cdf = (xs[i] - lo) / (hi - lo);
    d = std::max(d, std::fabs((i + 1) / n - cdf));
    d = std::max(d, std::fabs(cdf - i / n));
  }
  return d;
}

// Random small MLP for fuzz tests.
inline spvt::MlpNetwork random_mlp(spvt::Rng& rng, std::size_t in_dim, std::size_t out_dim,
                                   int max_hidden_layers = 3, std::size_t max_width = 64,
                                   bool allow_tanh = true) {
  std::vector<std::size_t> dims{in_dim};
  int hidden = 1 + static_cast<int>(rng.next_below(max_hidden_layers));
  for (int i = 0; i < hidden; ++i) dims.push_back(2 + rng.next_below(max_width - 1));
  dims.push_back(out_dim);
  std::vector<spvt::Activation> acts;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    int pick = static_cast<int>(rng.next_below(allow_tanh ? 3 : 2));
    acts.push_back(pick == 0 ? spvt::Activation::kRelu
                             : (pick == 1 ? spvt::Activation::kIdentity : spvt::Activation::kTanh));
  }
  return spvt::MlpNetwork::dense(dims, acts, spvt::InitKind::kHe, rng);
}

}  // namespace testutil
