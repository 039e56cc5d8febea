#pragma once

// Reference plants: a Hammerstein heater and a Bouc-Wen hysteretic actuator,
// the Bouc-Wen feedforward inverse, and test signal generators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "narxcomp/error.hpp"

namespace narxcomp {

// ---------------------------------------------------------------------------
// Heater: v(k) = p1 u(k)^2 + p2 u(k)
//         y(k) = b1 y(k-1) + b2 v(k-1) + b3 y(k-2) + b4 v(k-2)

struct HeaterParams {
  double b1 = 1.205445;
  double b2 = 8.985133e-2;
  double b3 = -3.0877507e-1;
  double b4 = 9.462358e-3;
  double p1 = 4.639331e-1;
  double p2 = 5.435865e-2;
};

class HammersteinHeater {
 public:
  explicit HammersteinHeater(HeaterParams params = {}) : p_(params) {}

  const HeaterParams& params() const noexcept { return p_; }

  // Output y(k) for input u(k); u is clamped to [0, 1].
  double step(double u) {
    if (u < 0.0 || u > 1.0) {
      ++clamp_count_;
      u = std::clamp(u, 0.0, 1.0);
    }
    const double y = p_.b1 * y1_ + p_.b2 * v1_ + p_.b3 * y2_ + p_.b4 * v2_;
    y2_ = y1_;
    y1_ = y;
    v2_ = v1_;
    v1_ = p_.p1 * u * u + p_.p2 * u;
    return y;
  }

  std::vector<double> simulate(std::span<const double> u) {
    std::vector<double> y;
    y.reserve(u.size());
    for (double v : u) y.push_back(step(v));
    return y;
  }

  void reset() { *this = HammersteinHeater(p_); }

  int clamp_count() const noexcept { return clamp_count_; }

  // Steady-state output for constant input.
  double static_output(double u) const {
    const double v = p_.p1 * u * u + p_.p2 * u;
    return v * (p_.b2 + p_.b4) / (1.0 - p_.b1 - p_.b3);
  }

  // Magnitudes of the roots of z^2 - b1 z - b3.
  std::pair<double, double> pole_magnitudes() const {
    const double disc = p_.b1 * p_.b1 + 4.0 * p_.b3;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      return {std::abs(0.5 * (p_.b1 + s)), std::abs(0.5 * (p_.b1 - s))};
    }
    const double mag = std::sqrt(-p_.b3);
    return {mag, mag};
  }

 private:
  HeaterParams p_;
  double y1_ = 0.0, y2_ = 0.0, v1_ = 0.0, v2_ = 0.0;
  int clamp_count_ = 0;
};

// ---------------------------------------------------------------------------
// Bouc-Wen: dh/dt = alpha du/dt - beta |du/dt| h - gamma du/dt |h|
//           y = nu u - h

struct BoucWenParams {
  double alpha = 0.9;   // um/V
  double beta = 0.008;  // 1/V
  double gamma = 0.008; // 1/V
  double nu = 1.6;      // um/V
  double dt = 0.005;    // s
};

inline constexpr double kValveInverseGain = 10.0 / 7.21;

// Classic fourth-order Runge-Kutta step for a scalar autonomous ODE.
template <typename F>
double rk4_step(F&& f, double x, double dt) {
  const double k1 = f(x);
  const double k2 = f(x + 0.5 * dt * k1);
  const double k3 = f(x + 0.5 * dt * k2);
  const double k4 = f(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Finite differences: forward at the start, central inside, backward at
// the end.
inline std::vector<double> sampled_derivative(std::span<const double> u, double dt) {
  const std::size_t n = u.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (u[1] - u[0]) / dt;
  d[n - 1] = (u[n - 1] - u[n - 2]) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (u[k + 1] - u[k - 1]) / (2.0 * dt);
  return d;
}

class BoucWenPlant {
 public:
  explicit BoucWenPlant(BoucWenParams params = {}) : p_(params) {
    if (!(p_.dt > 0.0)) throw PreconditionViolation("BoucWenPlant: dt must be positive");
  }

  const BoucWenParams& params() const noexcept { return p_; }
  double state() const noexcept { return h_; }
  void reset() noexcept { h_ = 0.0; }

  double hdot(double h, double udot) const noexcept {
    return p_.alpha * udot - p_.beta * std::abs(udot) * h - p_.gamma * udot * std::abs(h);
  }

  // Advances h by one step with du/dt held at udot.
  void advance(double udot) {
    h_ = rk4_step([&](double h) { return hdot(h, udot); }, h_, p_.dt);
  }

  double output(double u) const noexcept { return p_.nu * u - h_; }

  // Output for a series sampled at dt, starting from the current state.
  std::vector<double> simulate(std::span<const double> u) {
    const std::vector<double> udot = sampled_derivative(u, p_.dt);
    std::vector<double> y(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      y[k] = output(u[k]);
      if (k + 1 < u.size()) advance(udot[k]);
    }
    return y;
  }

 private:
  BoucWenParams p_;
  double h_ = 0.0;
};

inline std::vector<double> bouc_wen_simulate(const BoucWenParams& params, std::span<const double> u) {
  BoucWenPlant plant(params);
  return plant.simulate(u);
}

// Feedforward inverse m(k) = gain (r(k) + h(k)), with h integrated from m
// itself (du/dt by backward difference). gain defaults to 1 / nu.
inline std::vector<double> bouc_wen_inverse(std::span<const double> r, const BoucWenParams& params,
                                            std::optional<double> gain = std::nullopt) {
  BoucWenPlant internal(params);
  const double g = gain.value_or(1.0 / params.nu);
  std::vector<double> m(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    m[k] = g * (r[k] + internal.state());
    const double udot = k == 0 ? 0.0 : (m[k] - m[k - 1]) / params.dt;
    internal.advance(udot);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Signals

enum class SignalKind { sine, steps, sine_then_hold };

struct SignalSpec {
  SignalKind kind = SignalKind::sine;
  double amplitude = 1.0;
  double frequency = 1.0;  // cycles per time unit
  double phase = 0.0;      // rad
  double offset = 0.0;
  std::optional<long> hold_at;  // sine_then_hold
  int step_length = 100;        // steps: samples per level
  int step_count = 5;           // steps: levels from offset to offset + amplitude
};

// Sample k is taken at time k * ts.
inline std::vector<double> generate(const SignalSpec& spec, std::size_t n, double ts = 1.0) {
  if (n < 1) throw PreconditionViolation("generate: need at least one sample");
  if (spec.kind != SignalKind::steps && !(spec.frequency > 0.0)) {
    throw PreconditionViolation("generate: sine frequency must be positive");
  }
  if (spec.kind == SignalKind::steps && (spec.step_length < 1 || spec.step_count < 1)) {
    throw PreconditionViolation("generate: step_length and step_count must be positive");
  }
  const auto sine = [&](long k) {
    return spec.offset +
           spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency * static_cast<double>(k) * ts + spec.phase);
  };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long k = static_cast<long>(i);
    switch (spec.kind) {
      case SignalKind::sine: out[i] = sine(k); break;
      case SignalKind::sine_then_hold: out[i] = sine(spec.hold_at ? std::min(k, *spec.hold_at) : k); break;
      case SignalKind::steps: {
        const long level = (k / spec.step_length) % spec.step_count;
        const double frac = spec.step_count > 1 ? static_cast<double>(level) / (spec.step_count - 1) : 0.0;
        out[i] = spec.offset + spec.amplitude * frac;
        break;
      }
    }
  }
  return out;
}

}  // namespace narxcomp
