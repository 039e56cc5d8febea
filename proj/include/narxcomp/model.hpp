#pragma once

// NARX polynomial models: representation, free-run simulation and
// steady-state analysis.
//
// A model is a sum of terms, each a coefficient times a product of lagged
// factors. Besides the output y and input u, hysteretic models may use
//   phi1(k) = u(k) - u(k-1)   and   phi2(k) = sign(phi1(k)),  sign(0) = 0,
// so |u(k-1) - u(k-2)| is written phi1(k-1) * phi2(k-1).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "narxcomp/error.hpp"
#include "narxcomp/poly.hpp"

namespace narxcomp {

enum class Signal { output_y, input_u, phi1, phi2 };

struct Factor {
  Signal signal = Signal::output_y;
  int lag = 1;
  int power = 1;
};

struct Term {
  double coefficient = 0.0;
  std::vector<Factor> factors;  // empty: constant term

  int degree() const {
    int d = 0;
    for (const Factor& f : factors) d += f.power;
    return d;
  }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double span() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  Range widened(double fraction) const noexcept {
    const double pad = fraction * span();
    return {lo - pad, hi + pad};
  }
};

struct NarxModel {
  std::string name;
  std::vector<Term> terms;
  int n_y = 1;
  int n_u = 1;
  int tau_d = 1;
  int ell = 1;
  Range input_range{0.0, 1.0};
  Range output_range{0.0, 1.0};
  double sample_time = 1.0;

  bool is_hysteretic() const {
    for (const Term& t : terms)
      for (const Factor& f : t.factors)
        if (f.signal == Signal::phi1 || f.signal == Signal::phi2) return true;
    return false;
  }

  // Sum of coefficients of the plain linear output regressors y(k-i).
  double sigma_y() const {
    double s = 0.0;
    for (const Term& t : terms) {
      if (t.factors.size() == 1 && t.factors[0].signal == Signal::output_y && t.factors[0].power == 1) {
        s += t.coefficient;
      }
    }
    return s;
  }

  // Largest y lag actually referenced by a term.
  int output_depth() const {
    int d = 0;
    for (const Term& t : terms)
      for (const Factor& f : t.factors)
        if (f.signal == Signal::output_y) d = std::max(d, f.lag);
    return d;
  }

  // Number of past inputs needed to evaluate every factor; phi terms at lag j
  // read u(k-j) and u(k-j-1).
  int input_depth() const {
    int d = 0;
    for (const Term& t : terms) {
      for (const Factor& f : t.factors) {
        if (f.signal == Signal::input_u) d = std::max(d, f.lag);
        if (f.signal == Signal::phi1 || f.signal == Signal::phi2) d = std::max(d, f.lag + 1);
      }
    }
    return d;
  }
};

inline std::string to_string(Signal s) {
  switch (s) {
    case Signal::output_y: return "y";
    case Signal::input_u: return "u";
    case Signal::phi1: return "phi1";
    case Signal::phi2: return "phi2";
  }
  return "?";
}

// Every violated structural invariant, as readable messages. Empty means ok.
inline std::vector<std::string> validate(const NarxModel& model) {
  std::vector<std::string> out;
  if (model.tau_d < 1) out.push_back("tau_d must be >= 1");
  if (model.n_y < 1) out.push_back("n_y must be >= 1");
  if (model.n_u < model.tau_d) out.push_back("n_u must be >= tau_d");
  if (model.ell < 1) out.push_back("ell must be >= 1");
  if (!(model.input_range.lo < model.input_range.hi)) out.push_back("input_range must be increasing");
  if (!(model.output_range.lo < model.output_range.hi)) out.push_back("output_range must be increasing");
  if (!(model.sample_time > 0.0)) out.push_back("sample_time must be positive");

  for (std::size_t i = 0; i < model.terms.size(); ++i) {
    const Term& t = model.terms[i];
    const std::string where = "term " + std::to_string(i) + ": ";
    if (!std::isfinite(t.coefficient)) out.push_back(where + "coefficient is not finite");
    if (t.degree() > model.ell) {
      out.push_back(where + "degree " + std::to_string(t.degree()) + " exceeds ell " + std::to_string(model.ell));
    }
    for (const Factor& f : t.factors) {
      if (f.power < 1) out.push_back(where + "power must be >= 1");
      switch (f.signal) {
        case Signal::output_y:
          if (f.lag < 1 || f.lag > model.n_y) out.push_back(where + "output lag outside [1, n_y]");
          break;
        case Signal::input_u:
          if (f.lag < model.tau_d) out.push_back(where + "input lag below pure delay");
          if (f.lag > model.n_u) out.push_back(where + "input lag above n_u");
          break;
        case Signal::phi1:
        case Signal::phi2:
          if (f.lag < 1) out.push_back(where + to_string(f.signal) + " lag must be >= 1");
          break;
      }
    }
  }
  return out;
}

inline double sign_of(double x) noexcept { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

namespace detail {

template <typename T>
T raise(const T& base, int power) {
  T out = base;
  for (int i = 1; i < power; ++i) out = out * base;
  return out;
}

inline Polynomial raise(const Polynomial& base, int p) { return power(base, p); }

}  // namespace detail

// Sum over terms of coefficient * prod factor_value(f)^power. T is double or
// Polynomial; factor_value maps a Factor to a T.
template <typename T, typename FactorValue>
T accumulate_terms(const NarxModel& model, FactorValue&& factor_value) {
  T sum{0.0};
  for (const Term& term : model.terms) {
    T product{term.coefficient};
    for (const Factor& f : term.factors) product = product * detail::raise(factor_value(f), f.power);
    sum = sum + product;
  }
  return sum;
}

// Deterministic one-step prediction. y_at(i) returns y(k-i), u_at(j) returns
// u(k-j).
template <typename YAt, typename UAt>
double predict(const NarxModel& model, YAt&& y_at, UAt&& u_at) {
  return accumulate_terms<double>(model, [&](const Factor& f) -> double {
    switch (f.signal) {
      case Signal::output_y: return y_at(f.lag);
      case Signal::input_u: return u_at(f.lag);
      case Signal::phi1: return u_at(f.lag) - u_at(f.lag + 1);
      case Signal::phi2: return sign_of(u_at(f.lag) - u_at(f.lag + 1));
    }
    return 0.0;
  });
}

// y_hist[i] = y(k-1-i), u_hist[i] = u(k-1-i) (most recent first).
inline double one_step(const NarxModel& model, std::span<const double> y_hist, std::span<const double> u_hist) {
  if (y_hist.size() < static_cast<std::size_t>(model.output_depth()) ||
      u_hist.size() < static_cast<std::size_t>(model.input_depth())) {
    throw InsufficientHistory("one_step: need " + std::to_string(model.output_depth()) + " outputs and " +
                              std::to_string(model.input_depth()) + " inputs of history");
  }
  return predict(
      model, [&](int i) { return y_hist[static_cast<std::size_t>(i - 1)]; },
      [&](int j) { return u_hist[static_cast<std::size_t>(j - 1)]; });
}

// Free-run simulation. y_init[i] = y(-1-i) and must hold n_y values; inputs
// before the series start are taken as u_before (default: u_series[0]).
// Output index k is aligned with u_series index k.
inline std::vector<double> simulate_free_run(const NarxModel& model, std::span<const double> u_series,
                                             std::span<const double> y_init,
                                             std::optional<double> u_before = std::nullopt) {
  if (y_init.size() < static_cast<std::size_t>(std::max(model.n_y, model.output_depth()))) {
    throw InsufficientHistory("simulate_free_run: y_init needs n_y = " + std::to_string(model.n_y) + " values");
  }
  const std::size_t n = u_series.size();
  std::vector<double> y(n);
  if (n == 0) return y;
  const double u0 = u_before.value_or(u_series[0]);

  const auto u_at_time = [&](long t) { return t < 0 ? u0 : u_series[static_cast<std::size_t>(t)]; };
  const auto y_at_time = [&](long t) {
    return t < 0 ? y_init[static_cast<std::size_t>(-t - 1)] : y[static_cast<std::size_t>(t)];
  };

  for (std::size_t k = 0; k < n; ++k) {
    const long kk = static_cast<long>(k);
    const double value = predict(
        model, [&](int i) { return y_at_time(kk - i); }, [&](int j) { return u_at_time(kk - j); });
    if (!std::isfinite(value)) {
      throw NonFinite("simulate_free_run: output diverged at k = " + std::to_string(k));
    }
    y[k] = value;
  }
  return y;
}

inline std::vector<double> simulate_free_run(const NarxModel& model, std::span<const double> u_series,
                                             double y_init_value = 0.0) {
  const std::vector<double> init(static_cast<std::size_t>(std::max(model.n_y, model.output_depth())), y_init_value);
  return simulate_free_run(model, u_series, init);
}

// ---------------------------------------------------------------------------
// Steady state

struct FixedPoint {
  double u_bar = 0.0;
  double y_bar = 0.0;
  std::vector<double> eigen_mags;  // descending
  bool stable = false;
};

namespace detail {

// Factor value at steady state: y -> y_bar, u -> u_bar, phi1 -> 0,
// phi2 -> branch_sign.
inline double steady_value(const Factor& f, double u_bar, double y_bar, int branch_sign) {
  switch (f.signal) {
    case Signal::output_y: return y_bar;
    case Signal::input_u: return u_bar;
    case Signal::phi1: return 0.0;
    case Signal::phi2: return static_cast<double>(branch_sign);
  }
  return 0.0;
}

inline void check_branch_sign(int branch_sign) {
  if (branch_sign < -1 || branch_sign > 1) throw PreconditionViolation("branch_sign must be -1, 0 or +1");
}

}  // namespace detail

// c_y(u_bar) coefficients of  f(u_bar, y_bar) - y_bar = 0  as a polynomial in
// y_bar. For hysteretic models phi1 = 0 and phi2 = branch_sign.
inline Polynomial static_polynomial(const NarxModel& model, double u_bar, int branch_sign = 0) {
  detail::check_branch_sign(branch_sign);
  const Polynomial rhs = accumulate_terms<Polynomial>(model, [&](const Factor& f) -> Polynomial {
    if (f.signal == Signal::output_y) return Polynomial{0.0, 1.0};
    return Polynomial::constant(detail::steady_value(f, u_bar, 0.0, branch_sign));
  });
  return rhs - Polynomial{0.0, 1.0};
}

// Magnitudes of the eigenvalues of the output Jacobian at (u_bar, y_bar),
// descending. They are the roots of the companion characteristic polynomial
//   lambda^n - a_1 lambda^(n-1) - ... - a_n,  a_i = df/dy(k-i).
inline std::vector<double> jacobian_eigen(const NarxModel& model, double u_bar, double y_bar, int branch_sign = 0) {
  detail::check_branch_sign(branch_sign);
  const int n = model.output_depth();
  if (n == 0) return {};

  std::vector<double> partial(static_cast<std::size_t>(n) + 1, 0.0);
  for (const Term& term : model.terms) {
    for (std::size_t i = 0; i < term.factors.size(); ++i) {
      const Factor& fi = term.factors[i];
      if (fi.signal != Signal::output_y) continue;
      double d = term.coefficient * fi.power * std::pow(y_bar, fi.power - 1);
      for (std::size_t j = 0; j < term.factors.size(); ++j) {
        if (j == i) continue;
        d *= std::pow(detail::steady_value(term.factors[j], u_bar, y_bar, branch_sign), term.factors[j].power);
      }
      partial[static_cast<std::size_t>(fi.lag)] += d;
    }
  }

  std::vector<double> charpoly(static_cast<std::size_t>(n) + 1, 0.0);
  charpoly[static_cast<std::size_t>(n)] = 1.0;
  for (int i = 1; i <= n; ++i) charpoly[static_cast<std::size_t>(n - i)] = -partial[static_cast<std::size_t>(i)];

  const RootSet rs = solve_roots(Polynomial(charpoly));
  std::vector<double> mags;
  mags.reserve(rs.roots.size());
  for (const Complex& r : rs.roots) mags.push_back(std::abs(r));
  std::sort(mags.rbegin(), mags.rend());
  return mags;
}

// Real equilibria for u_bar inside the output range widened by 10% of its
// span, each tagged with its local stability.
inline std::vector<FixedPoint> fixed_points(const NarxModel& model, double u_bar, int branch_sign = 0) {
  const Polynomial p = static_polynomial(model, u_bar, branch_sign);
  const int d = p.degree();
  if (d < 0) throw DegenerateStatics("fixed_points: static relation is identically zero; every y_bar is an equilibrium");
  if (d == 0) return {};

  const Range band = model.output_range.widened(0.1);
  std::vector<FixedPoint> out;
  for (double y_bar : real_roots(solve_roots(p))) {
    if (!band.contains(y_bar)) continue;
    FixedPoint fp{u_bar, y_bar, jacobian_eigen(model, u_bar, y_bar, branch_sign), true};
    fp.stable = std::all_of(fp.eigen_mags.begin(), fp.eigen_mags.end(), [](double m) { return m < 1.0; });
    out.push_back(std::move(fp));
  }
  return out;
}

// Stable equilibrium for each grid value; the smallest |y_bar| wins ties.
inline std::vector<std::pair<double, double>> static_curve(const NarxModel& model, std::span<const double> u_grid) {
  std::vector<std::pair<double, double>> out;
  out.reserve(u_grid.size());
  for (double u_bar : u_grid) {
    std::optional<double> best;
    for (const FixedPoint& fp : fixed_points(model, u_bar)) {
      if (fp.stable && (!best || std::abs(fp.y_bar) < std::abs(*best))) best = fp.y_bar;
    }
    if (!best) throw NoStableFixedPoint("static_curve: no stable fixed point at u_bar = " + std::to_string(u_bar));
    out.emplace_back(u_bar, *best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hysteresis loops

enum class Regime { loading, unloading };

struct LoopPoint {
  double u = 0.0;
  double y = 0.0;
};

struct HysteresisLoop {
  std::vector<LoopPoint> loading;    // u ascending (minimum to maximum)
  std::vector<LoopPoint> unloading;  // u descending (maximum to minimum)
  int period = 0;                    // samples
};

struct LoopExcitation {
  double amplitude = 1.0;
  double f_min = 1.0;     // cycles per time unit
  double u_center = 0.0;
  double sample_time = 1.0;
  int transient_periods = 1;
};

// Drives u(k) = A sin(2 pi f_min k Ts) + u_center through the model, drops
// the transient periods and returns the next full cycle from input minimum
// to input minimum, split at the maximum.
inline HysteresisLoop hysteresis_loop(const NarxModel& model, const LoopExcitation& ex) {
  if (!model.is_hysteretic()) throw PreconditionViolation("hysteresis_loop: model has no phi regressors");
  if (!(ex.amplitude > 0.0)) throw PreconditionViolation("hysteresis_loop: amplitude must be positive");
  if (!(ex.f_min > 0.0) || !(ex.sample_time > 0.0)) {
    throw PreconditionViolation("hysteresis_loop: f_min and sample_time must be positive");
  }
  const int period = static_cast<int>(std::lround(1.0 / (ex.f_min * ex.sample_time)));
  if (period < 4) throw PreconditionViolation("hysteresis_loop: fewer than 4 samples per period");

  const int start = ex.transient_periods * period + (3 * period) / 4;
  const std::size_t n = static_cast<std::size_t>(start + period + 1);
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = ex.amplitude * std::sin(2.0 * std::numbers::pi * ex.f_min * static_cast<double>(k) * ex.sample_time) +
           ex.u_center;
  }
  const std::vector<double> y = simulate_free_run(model, u, 0.0);

  std::size_t top = static_cast<std::size_t>(start);
  for (std::size_t k = static_cast<std::size_t>(start); k < n; ++k) {
    if (u[k] > u[top]) top = k;
  }
  HysteresisLoop loop;
  loop.period = period;
  for (std::size_t k = static_cast<std::size_t>(start); k <= top; ++k) loop.loading.push_back({u[k], y[k]});
  for (std::size_t k = top; k < n; ++k) loop.unloading.push_back({u[k], y[k]});
  return loop;
}

// Input on the requested branch whose loop output equals y_target, by linear
// interpolation between neighbouring samples (first crossing along the
// branch).
inline double loop_inverse(const HysteresisLoop& loop, double y_target, Regime regime) {
  const auto& branch = regime == Regime::loading ? loop.loading : loop.unloading;
  if (branch.empty()) throw OutOfLoopRange("loop_inverse: empty branch");
  if (branch.size() == 1) {
    if (branch[0].y == y_target) return branch[0].u;
    throw OutOfLoopRange("loop_inverse: target outside single-point branch");
  }
  for (std::size_t i = 0; i + 1 < branch.size(); ++i) {
    const LoopPoint& a = branch[i];
    const LoopPoint& b = branch[i + 1];
    if (y_target == a.y) return a.u;
    if (y_target == b.y) return b.u;
    const double lo = std::min(a.y, b.y), hi = std::max(a.y, b.y);
    if (y_target > lo && y_target < hi) {
      const double t = (y_target - a.y) / (b.y - a.y);
      return a.u + t * (b.u - a.u);
    }
  }
  throw OutOfLoopRange("loop_inverse: y = " + std::to_string(y_target) + " outside the branch output span");
}

}  // namespace narxcomp
