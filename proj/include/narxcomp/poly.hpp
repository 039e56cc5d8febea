#pragma once

// Univariate real-coefficient polynomials and their roots.
//
// Coefficients are stored lowest order first: {a0, a1, ..., an}. Degrees up
// to three are solved in closed form; higher degrees go through a
// simultaneous (Aberth-Ehrlich) iteration.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "narxcomp/error.hpp"

namespace narxcomp {

using Complex = std::complex<double>;

// Coefficients with |a_i| <= kLeadingZeroTol * max_j |a_j| do not count
// towards the degree.
inline constexpr double kLeadingZeroTol = 1e-12;
inline constexpr double kDefaultImagTol = 1e-9;

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}
  Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) {}

  static Polynomial constant(double c) { return Polynomial{c}; }

  // c * x^power
  static Polynomial monomial(double c, int power) {
    std::vector<double> a(static_cast<std::size_t>(power) + 1, 0.0);
    a.back() = c;
    return Polynomial(std::move(a));
  }

  const std::vector<double>& coeffs() const noexcept { return coeffs_; }
  std::size_t size() const noexcept { return coeffs_.size(); }

  // Coefficient of x^i; zero past the stored length.
  double operator[](std::size_t i) const noexcept {
    return i < coeffs_.size() ? coeffs_[i] : 0.0;
  }

  double max_abs_coeff() const noexcept {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  // Largest i with |a_i| above the leading-zero tolerance; -1 for the zero
  // polynomial.
  int degree() const noexcept {
    const double scale = max_abs_coeff();
    if (scale == 0.0) return -1;
    for (std::size_t i = coeffs_.size(); i-- > 0;) {
      if (std::abs(coeffs_[i]) > kLeadingZeroTol * scale) return static_cast<int>(i);
    }
    return -1;
  }

  bool is_zero() const noexcept { return degree() < 0; }

  // Same values, numerically vanishing leading terms dropped.
  Polynomial trimmed() const {
    const int d = degree();
    if (d < 0) return Polynomial{};
    return Polynomial(std::vector<double>(coeffs_.begin(), coeffs_.begin() + d + 1));
  }

 private:
  std::vector<double> coeffs_;
};

template <typename T>
T evaluate(const Polynomial& p, T x) {
  T acc{0.0};
  const auto& a = p.coeffs();
  for (std::size_t i = a.size(); i-- > 0;) acc = acc * x + a[i];
  return acc;
}

// Value and first derivative in one Horner pass.
inline std::pair<Complex, Complex> evaluate_with_derivative(const Polynomial& p, Complex x) {
  Complex value{0.0}, slope{0.0};
  const auto& a = p.coeffs();
  for (std::size_t i = a.size(); i-- > 0;) {
    slope = slope * x + value;
    value = value * x + a[i];
  }
  return {value, slope};
}

inline Polynomial add(const Polynomial& p, const Polynomial& q) {
  std::vector<double> out(std::max(p.size(), q.size()), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] + q[i];
  return Polynomial(std::move(out));
}

inline Polynomial scale(const Polynomial& p, double c) {
  std::vector<double> out(p.coeffs());
  for (double& v : out) v *= c;
  return Polynomial(std::move(out));
}

inline Polynomial mul(const Polynomial& p, const Polynomial& q) {
  if (p.size() == 0 || q.size() == 0) return Polynomial{};
  std::vector<double> out(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  return Polynomial(std::move(out));
}

inline Polynomial power(const Polynomial& p, int n) {
  Polynomial out{1.0};
  for (int i = 0; i < n; ++i) out = mul(out, p);
  return out;
}

inline Polynomial operator+(const Polynomial& p, const Polynomial& q) { return add(p, q); }
inline Polynomial operator-(const Polynomial& p, const Polynomial& q) { return add(p, scale(q, -1.0)); }
inline Polynomial operator*(const Polynomial& p, const Polynomial& q) { return mul(p, q); }
inline Polynomial operator*(double c, const Polynomial& p) { return scale(p, c); }

enum class RootMethod { analytic, iterative };

struct RootSet {
  std::vector<Complex> roots;
  RootMethod method = RootMethod::analytic;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, RootSet best) : Error(what), best_(std::move(best)) {}
  const RootSet& best_iterate() const noexcept { return best_; }

 private:
  RootSet best_;
};

namespace detail {

inline Polynomial require_degree(const Polynomial& p, int expected, const char* who) {
  const int d = p.degree();
  if (d != expected) {
    throw DegreeMismatch(std::string(who) + ": expected degree " + std::to_string(expected) +
                         ", got " + std::to_string(d));
  }
  return p.trimmed();
}

// A few Newton steps, each kept only if it lowers |p|.
inline Complex polish(const Polynomial& p, Complex z) {
  for (int it = 0; it < 3; ++it) {
    auto [value, slope] = evaluate_with_derivative(p, z);
    if (value == Complex{0.0} || slope == Complex{0.0}) break;
    const Complex next = z - value / slope;
    if (std::abs(evaluate(p, next)) >= std::abs(value)) break;
    z = next;
  }
  return z;
}

}  // namespace detail

inline RootSet solve_linear(const Polynomial& p) {
  const Polynomial q = detail::require_degree(p, 1, "solve_linear");
  return {{Complex{-q[0] / q[1], 0.0}}, RootMethod::analytic};
}

inline RootSet solve_quadratic(const Polynomial& p) {
  const Polynomial q = detail::require_degree(p, 2, "solve_quadratic");
  const double a0 = q[0], a1 = q[1], a2 = q[2];
  const double disc = a1 * a1 - 4.0 * a2 * a0;
  RootSet out{{}, RootMethod::analytic};
  if (disc >= 0.0) {
    // Cancellation-free form: one root from q, the other from Vieta.
    const double s = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
    if (s == 0.0) {
      out.roots = {Complex{0.0}, Complex{0.0}};
    } else {
      out.roots = {Complex{s / a2}, Complex{a0 / s}};
    }
  } else {
    const double re = -a1 / (2.0 * a2);
    const double im = std::sqrt(-disc) / (2.0 * std::abs(a2));
    out.roots = {Complex{re, im}, Complex{re, -im}};
  }
  return out;
}

inline RootSet solve_cubic(const Polynomial& p) {
  const Polynomial q = detail::require_degree(p, 3, "solve_cubic");
  const double a0 = q[0], a1 = q[1], a2 = q[2], a3 = q[3];
  const double d0 = a2 * a2 - 3.0 * a3 * a1;
  const double d1 = 2.0 * a2 * a2 * a2 - 9.0 * a3 * a2 * a1 + 27.0 * a3 * a3 * a0;

  RootSet out{{}, RootMethod::analytic};
  if (d0 == 0.0 && d1 == 0.0) {
    const Complex triple{-a2 / (3.0 * a3)};
    out.roots = {triple, triple, triple};
    return out;
  }

  const Complex root_term = std::sqrt(Complex{d1 * d1 - 4.0 * d0 * d0 * d0});
  const Complex plus = 0.5 * (d1 + root_term);
  const Complex minus = 0.5 * (d1 - root_term);
  // The sign giving the larger radicand keeps C away from zero.
  const Complex c = std::pow(std::abs(plus) >= std::abs(minus) ? plus : minus, 1.0 / 3.0);
  const Complex xi{-0.5, 0.5 * std::numbers::sqrt3};

  Complex xi_pow{1.0};
  for (int i = 0; i < 3; ++i) {
    const Complex ci = xi_pow * c;
    const Complex x = -(a2 + ci + d0 / ci) / (3.0 * a3);
    out.roots.push_back(detail::polish(q, x));
    xi_pow *= xi;
  }
  return out;
}

struct IterationOptions {
  double tolerance = 1e-12;
  int max_iterations = 500;
};

// Aberth-Ehrlich simultaneous iteration for any degree >= 1.
inline RootSet solve_iterative(const Polynomial& p, IterationOptions opts = {}) {
  const int n = p.degree();
  if (n < 1) throw DegreeMismatch("solve_iterative: degree must be >= 1, got " + std::to_string(n));
  const Polynomial q = p.trimmed();
  const double lead = q[static_cast<std::size_t>(n)];

  double radius = 0.0;
  for (int i = 0; i < n; ++i) radius = std::max(radius, std::abs(q[static_cast<std::size_t>(i)] / lead));
  radius += 1.0;

  // Irrational offset keeps the start points off any symmetry axis of the roots.
  constexpr double kOffset = std::numbers::phi - 1.0;
  std::vector<Complex> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    z[static_cast<std::size_t>(i)] = std::polar(radius, 2.0 * std::numbers::pi * i / n + kOffset);
  }

  // A root is done once its step is below tolerance or |p(z)| is within the
  // rounding error of evaluating p at z.
  const auto rounding_bound = [&](Complex x) {
    double acc = 0.0;
    const double ax = std::abs(x);
    for (std::size_t i = q.size(); i-- > 0;) acc = acc * ax + std::abs(q[i]);
    return std::numeric_limits<double>::epsilon() * acc;
  };
  std::vector<bool> done(z.size(), false);
  for (int it = 0; it < opts.max_iterations; ++it) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (done[i]) continue;
      auto [value, slope] = evaluate_with_derivative(q, z[i]);
      if (std::abs(value) <= rounding_bound(z[i])) {
        done[i] = true;
        continue;
      }
      if (slope == Complex{0.0}) slope = Complex{1e-300};
      const Complex ratio = value / slope;
      Complex repulsion{0.0};
      for (std::size_t j = 0; j < z.size(); ++j) {
        if (j != i) repulsion += 1.0 / (z[i] - z[j]);
      }
      const Complex step = ratio / (1.0 - ratio * repulsion);
      z[i] -= step;
      if (std::abs(step) < opts.tolerance * std::max(1.0, std::abs(z[i]))) done[i] = true;
    }
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) return {std::move(z), RootMethod::iterative};
  }
  throw NoConvergence("solve_iterative: no convergence within " + std::to_string(opts.max_iterations) +
                          " iterations",
                      RootSet{std::move(z), RootMethod::iterative});
}

// Closed form up to degree three, iteration above.
inline RootSet solve_roots(const Polynomial& p) {
  switch (p.degree()) {
    case 1: return solve_linear(p);
    case 2: return solve_quadratic(p);
    case 3: return solve_cubic(p);
    default: break;
  }
  if (p.degree() < 1) throw DegreeMismatch("solve_roots: degree must be >= 1, got " + std::to_string(p.degree()));
  return solve_iterative(p);
}

// Real parts of the (numerically) real roots, ascending.
inline std::vector<double> real_roots(const RootSet& rs, double im_tol = kDefaultImagTol) {
  std::vector<double> out;
  for (const Complex& r : rs.roots) {
    if (std::abs(r.imag()) <= im_tol * std::max(1.0, std::abs(r.real()))) out.push_back(r.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// a_n * prod (x - r_i), real parts only.
inline Polynomial from_roots(std::span<const Complex> roots, double lead = 1.0) {
  std::vector<Complex> acc{Complex{lead}};
  for (const Complex& r : roots) {
    std::vector<Complex> next(acc.size() + 1, Complex{0.0});
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i + 1] += acc[i];
      next[i] -= acc[i] * r;
    }
    acc = std::move(next);
  }
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = acc[i].real();
  return Polynomial(std::move(out));
}

}  // namespace narxcomp
