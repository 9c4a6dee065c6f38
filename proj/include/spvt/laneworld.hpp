#pragma once

// Synthetic lane-keeping environment: a procedural 8x16 grayscale renderer
// with latent environment variation, path-relative bicycle dynamics at
// constant speed, the lane-departure safety predicate, and closed-loop
// rollouts with the associated reward.

#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "spvt/errors.hpp"
#include "spvt/interval.hpp"
#include "spvt/rng.hpp"

namespace spvt {

inline constexpr int kImageRows = 8;
inline constexpr int kImageCols = 16;
inline constexpr int kImagePixels = kImageRows * kImageCols;

using Image = std::array<double, kImagePixels>;

struct LaneState {
  double d = 0.0;      // cross-track error, meters
  double theta = 0.0;  // heading error, radians
};

struct EnvLatent {
  double brightness = 0.0;     // [-0.2, 0.2]
  double lane_width = 0.12;    // rendered half-width parameter, [0.08, 0.16] m
  double texture_phase = 0.0;  // [0, 2*pi)
};

struct VehicleParams {
  double v = 2.0;          // m/s, constant
  double lf = 0.15;        // m
  double lr = 0.15;        // m
  double dt = 0.1;         // s
  double max_steer = 0.5;  // rad
};

struct SafetySpec {
  double beta = 1.0;  // |d| threshold, meters
  int horizon = 10;   // target K
};

struct InitialRanges {
  double d_max = 0.8;
  double theta_max = 0.15;
};

inline std::atomic<uint64_t>& steer_clamp_count() {
  static std::atomic<uint64_t> n{0};
  return n;
}

inline LaneState sample_initial(Rng& rng, const InitialRanges& r = {}) {
  return {rng.uniform(-r.d_max, r.d_max), rng.uniform(-r.theta_max, r.theta_max)};
}

inline EnvLatent sample_env(Rng& rng) {
  return {rng.uniform(-0.2, 0.2), rng.uniform(0.08, 0.16), rng.uniform(0.0, 2.0 * kPi)};
}

// Deterministic pinhole-ish lane view. Row r looks ahead L_r = 1 + 0.8 r
// meters; the lane center projects to column 7.5 + (-d - L tan(theta)) * 24/L.
inline Image render(const LaneState& s, const EnvLatent& w) {
  Image img{};
  double sw = 1.0 / (2.0 * (10.0 * w.lane_width) * (10.0 * w.lane_width));
  for (int r = 0; r < kImageRows; ++r) {
    double L = 1.0 + 0.8 * r;
    double lateral = -s.d - L * std::tan(s.theta);
    double cstar = 7.5 + lateral * (24.0 / L);
    for (int c = 0; c < kImageCols; ++c) {
      double dc = c - cstar;
      double v = -0.6 + w.brightness + 1.4 * std::exp(-dc * dc * sw) +
                 0.05 * std::sin(w.texture_phase + 3.0 * c + 5.0 * r);
      img[r * kImageCols + c] = std::clamp(v, -1.0, 1.0);
    }
  }
  return img;
}

// Path-relative discrete bicycle step: slip angle from the steering command,
// then cross-track and heading error updates at constant speed.
inline LaneState step(const LaneState& s, double u, const VehicleParams& p = {}) {
  if (u > p.max_steer || u < -p.max_steer) {
    steer_clamp_count()++;
    u = std::clamp(u, -p.max_steer, p.max_steer);
  }
  double slip = std::atan(p.lr / (p.lf + p.lr) * std::tan(u));
  LaneState out;
  out.d = s.d + p.v * p.dt * std::sin(s.theta + slip);
  out.theta = s.theta + (p.v / p.lr) * std::sin(slip) * p.dt;
  return out;
}

// Interval image of step() over a state box {d, theta} and steering box {u}.
inline IntervalVec step_interval(const IntervalVec& sbox, const IntervalVec& ubox,
                                 const VehicleParams& p = {}) {
  if (sbox.size() != 2 || ubox.size() != 1) throw ShapeError("step_interval: bad box sizes");
  IntervalVec u = ubox.clamped(-p.max_steer, p.max_steer);
  IntervalVec t = interval_unary(UnaryFn::kTan, u);
  double ratio = p.lr / (p.lf + p.lr);
  IntervalVec scaled{{t.lb[0] * ratio}, {t.ub[0] * ratio}};
  IntervalVec slip = interval_unary(UnaryFn::kAtan, scaled);
  IntervalVec theta = sbox.slice(1, 1);
  IntervalVec ang{{theta.lb[0] + slip.lb[0]}, {theta.ub[0] + slip.ub[0]}};
  IntervalVec s1 = interval_unary(UnaryFn::kSin, ang);
  IntervalVec s2 = interval_unary(UnaryFn::kSin, slip);
  double vdt = p.v * p.dt;
  double wrate = (p.v / p.lr) * p.dt;
  IntervalVec out;
  out.lb = {sbox.lb[0] + vdt * s1.lb[0], theta.lb[0] + wrate * s2.lb[0]};
  out.ub = {sbox.ub[0] + vdt * s1.ub[0], theta.ub[0] + wrate * s2.ub[0]};
  return out;
}

inline double lane_reward(double d, double beta) {
  return 1.0 - std::min(1.0, std::fabs(d) / beta);
}

struct RolloutResult {
  std::vector<LaneState> trajectory;  // length T+1, includes s0
  double total_reward = 0.0;
  std::optional<int> first_unsafe;  // step index t with |d_t| > beta, if any
};

using ImagePolicy = std::function<double(const Image&)>;
using StatePolicy = std::function<double(const LaneState&)>;

namespace detail {

template <typename PolicyFn>
RolloutResult rollout_impl(PolicyFn&& act, const LaneState& s0, int steps,
                           const VehicleParams& p, double beta) {
  RolloutResult res;
  res.trajectory.reserve(steps + 1);
  LaneState s = s0;
  res.trajectory.push_back(s);
  if (std::fabs(s.d) > beta) res.first_unsafe = 0;
  for (int t = 0; t < steps; ++t) {
    double u = act(s);
    if (!std::isfinite(u))
      throw NumericError("rollout aborted: non-finite policy output at step " +
                         std::to_string(t));
    s = step(s, std::clamp(u, -p.max_steer, p.max_steer), p);
    res.trajectory.push_back(s);
    res.total_reward += lane_reward(s.d, beta);
    if (!res.first_unsafe && std::fabs(s.d) > beta) res.first_unsafe = t + 1;
  }
  return res;
}

}  // namespace detail

// Closed loop through the renderer: s -> render -> policy -> clamp -> step.
inline RolloutResult rollout(const ImagePolicy& policy, const LaneState& s0, const EnvLatent& w,
                             int steps, const VehicleParams& p = {}, double beta = 1.0) {
  if (steps < 1) throw ContractError("rollout: steps must be >= 1");
  return detail::rollout_impl(
      [&](const LaneState& s) { return policy(render(s, w)); }, s0, steps, p, beta);
}

// State-feedback loop (no rendering); used for expert baselines.
inline RolloutResult rollout_state(const StatePolicy& policy, const LaneState& s0, int steps,
                                   const VehicleParams& p = {}, double beta = 1.0) {
  if (steps < 1) throw ContractError("rollout: steps must be >= 1");
  return detail::rollout_impl([&](const LaneState& s) { return policy(s); }, s0, steps, p, beta);
}

// Proportional lane-keeping law used as the imitation expert.
inline double anchor_policy_state(const LaneState& s, const VehicleParams& p = {}) {
  return std::clamp(-0.74 * s.d - 0.44 * s.theta, -p.max_steer, p.max_steer);
}

}  // namespace spvt
