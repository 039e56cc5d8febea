#pragma once

// Per-step compensation polynomials and root selection.
//
// At step k the model equation is shifted by tau_d, outputs are replaced by
// the reference and inputs by the compensation signal m. Everything is known
// except m(k), so the model becomes a polynomial in m(k) whose admissible
// roots are the candidate inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "narxcomp/error.hpp"
#include "narxcomp/model.hpp"
#include "narxcomp/poly.hpp"

namespace narxcomp {

struct Selection {
  double value = 0.0;
  bool hold = false;  // no admissible root: value repeats m(k-1)
};

struct BranchPolynomials {
  Polynomial loading;    // valid for m(k) > pivot
  Polynomial unloading;  // valid for m(k) < pivot
  double pivot = 0.0;    // m(k-1)
};

namespace detail {

// Inputs are admitted on the closed bound interval; this slack absorbs
// rounding of roots that sit exactly on a bound.
inline constexpr double kBoundSlack = 1e-12;

inline std::optional<double> within_bounds(double x, const Range& bounds) {
  const double slack = kBoundSlack * std::max(1.0, bounds.span());
  if (x < bounds.lo - slack || x > bounds.hi + slack) return std::nullopt;
  return std::clamp(x, bounds.lo, bounds.hi);
}

}  // namespace detail

// Candidates that are real, inside bounds and, for a branch, on the right
// side of the pivot.
inline std::vector<double> admissible_roots(const RootSet& candidates, double m_prev, const Range& bounds,
                                            std::optional<Regime> branch = std::nullopt,
                                            double im_tol = kDefaultImagTol) {
  std::vector<double> out;
  for (double x : real_roots(candidates, im_tol)) {
    const auto in = detail::within_bounds(x, bounds);
    if (!in) continue;
    if (branch == Regime::loading && !(*in > m_prev)) continue;
    if (branch == Regime::unloading && !(*in < m_prev)) continue;
    out.push_back(*in);
  }
  return out;
}

// Closest admissible value to m_prev, or HOLD.
inline Selection closest(std::span<const double> admissible, double m_prev) {
  if (admissible.empty()) return {m_prev, true};
  double best = admissible[0];
  for (double x : admissible) {
    if (std::abs(x - m_prev) < std::abs(best - m_prev)) best = x;
  }
  return {best, false};
}

inline Selection select_root(const RootSet& candidates, double m_prev, const Range& bounds,
                             std::optional<Regime> branch = std::nullopt, double im_tol = kDefaultImagTol) {
  const auto adm = admissible_roots(candidates, m_prev, bounds, branch, im_tol);
  return closest(adm, m_prev);
}

// ---------------------------------------------------------------------------
// Static compensation

// Steady-state relation with y_bar = r_bar as a polynomial in m_bar.
inline Polynomial static_comp_poly(const NarxModel& model, double r_bar) {
  if (model.is_hysteretic()) {
    throw PreconditionViolation("static_comp_poly: hysteretic models are inverted through their loop");
  }
  const Polynomial x{0.0, 1.0};
  Polynomial p = accumulate_terms<Polynomial>(model, [&](const Factor& f) -> Polynomial {
    if (f.signal == Signal::input_u) return x;
    return Polynomial::constant(r_bar);
  });
  p = p - Polynomial::constant(r_bar);
  if (p.is_zero()) throw IdenticallyZero("static_comp_poly: every coefficient vanishes at r_bar = " + std::to_string(r_bar));
  return p;
}

// Real in-range root whose equilibrium is stable and reproduces r_bar; the
// smallest magnitude wins.
inline double solve_static(const NarxModel& model, double r_bar) {
  const Polynomial p = static_comp_poly(model, r_bar);
  if (p.degree() < 1) throw NoFeasibleRoot("solve_static: no input reaches r_bar = " + std::to_string(r_bar));

  const double tol = 1e-6 * model.output_range.span();
  std::optional<double> best;
  for (double root : real_roots(solve_roots(p))) {
    const auto m_bar = detail::within_bounds(root, model.input_range);
    if (!m_bar) continue;
    bool reproduces = false;
    for (const FixedPoint& fp : fixed_points(model, *m_bar)) {
      if (fp.stable && std::abs(fp.y_bar - r_bar) < tol) reproduces = true;
    }
    if (reproduces && (!best || std::abs(*m_bar) < std::abs(*best))) best = *m_bar;
  }
  if (!best) throw NoFeasibleRoot("solve_static: no real, bounded, stable root for r_bar = " + std::to_string(r_bar));
  return *best;
}

// ---------------------------------------------------------------------------
// Dynamic and hysteretic compensation

// Number of past compensation inputs m(k-1), m(k-2), ... the per-step
// polynomial reads.
inline int required_m_history(const NarxModel& model) {
  int depth = 0;
  for (const Term& t : model.terms) {
    for (const Factor& f : t.factors) {
      if (f.signal == Signal::input_u) depth = std::max(depth, f.lag - model.tau_d);
      if (f.signal == Signal::phi1 || f.signal == Signal::phi2) depth = std::max(depth, f.lag + 1 - model.tau_d);
    }
  }
  return std::max(depth, 1);
}

class CompensationSession {
 public:
  // seed[i] = m(-1-i); slots deeper than the seed repeat its last value.
  CompensationSession(NarxModel model, std::vector<double> reference, std::vector<double> seed)
      : model_(std::move(model)), reference_(std::move(reference)), seed_(std::move(seed)) {
    bounds_ = model_.input_range;
    if (reference_.empty()) throw PreconditionViolation("CompensationSession: empty reference");
    if (seed_.empty()) throw PreconditionViolation("CompensationSession: empty seed");
    for (double s : seed_) {
      if (!detail::within_bounds(s, bounds_)) {
        throw PreconditionViolation("CompensationSession: seed " + std::to_string(s) + " outside input bounds");
      }
    }
  }

  const NarxModel& model() const noexcept { return model_; }
  const Range& bounds() const noexcept { return bounds_; }
  std::size_t length() const noexcept { return reference_.size(); }
  long step() const noexcept { return static_cast<long>(m_.size()); }
  std::optional<Regime> last_regime() const noexcept { return last_regime_; }
  const std::vector<double>& inputs() const noexcept { return m_; }

  // Reference at time t; indices before the start or after the end repeat the
  // first or last sample.
  double r(long t) const noexcept {
    const long last = static_cast<long>(reference_.size()) - 1;
    return reference_[static_cast<std::size_t>(std::clamp(t, 0L, last))];
  }

  // Applied input at a past time t < step().
  double m(long t) const {
    if (t >= step()) throw UnknownFutureInput("m(" + std::to_string(t) + ") is not known yet");
    if (t >= 0) return m_[static_cast<std::size_t>(t)];
    const std::size_t i = static_cast<std::size_t>(-t - 1);
    return i < seed_.size() ? seed_[i] : seed_.back();
  }

  double m_prev() const { return m(step() - 1); }

  void push(double value, std::optional<Regime> regime = std::nullopt) {
    m_.push_back(value);
    if (regime) last_regime_ = regime;
  }

 private:
  NarxModel model_;
  std::vector<double> reference_;
  std::vector<double> seed_;
  std::vector<double> m_;
  Range bounds_;
  std::optional<Regime> last_regime_;
};

namespace detail {

// Polynomial in m(k) at the session's current step. branch_sign is the value
// taken by phi2 at the unknown step (+1 loading, -1 unloading); without it a
// phi factor on the unknown input is unsupported.
inline Polynomial step_polynomial(const CompensationSession& s, std::optional<int> branch_sign) {
  const NarxModel& model = s.model();
  const long k = s.step();
  const Polynomial x{0.0, 1.0};
  const auto time_of = [&](const Factor& f) { return k + model.tau_d - f.lag; };

  Polynomial p = accumulate_terms<Polynomial>(model, [&](const Factor& f) -> Polynomial {
    const long t = time_of(f);
    if (f.signal == Signal::output_y) return Polynomial::constant(s.r(t));
    if (t > k) {
      throw UnknownFutureInput("factor " + to_string(f.signal) + " at lag " + std::to_string(f.lag) +
                               " needs m(k+" + std::to_string(t - k) + ")");
    }
    if (t < k) {
      const double d = s.m(t) - (f.signal == Signal::input_u ? 0.0 : s.m(t - 1));
      switch (f.signal) {
        case Signal::input_u: return Polynomial::constant(s.m(t));
        case Signal::phi1: return Polynomial::constant(d);
        case Signal::phi2: return Polynomial::constant(sign_of(d));
        case Signal::output_y: break;
      }
    }
    if (f.signal == Signal::input_u) return x;
    if (!branch_sign) {
      throw UnsupportedStructure("factor " + to_string(f.signal) +
                                 " on the unknown input needs the hysteretic (branch) compensator");
    }
    if (f.signal == Signal::phi1) return x - Polynomial::constant(s.m(k - 1));
    return Polynomial::constant(static_cast<double>(*branch_sign));
  });
  return p - Polynomial::constant(s.r(k + model.tau_d));
}

}  // namespace detail

inline Polynomial dynamic_comp_poly(const CompensationSession& session) {
  return detail::step_polynomial(session, std::nullopt);
}

// Loading and unloading polynomials: the phi1 at the unknown step becomes
// m(k) - m(k-1) and its sign is fixed by the branch, so |m(k) - m(k-1)|
// resolves to +(m(k) - m(k-1)) on loading and -(m(k) - m(k-1)) on unloading.
inline BranchPolynomials hysteresis_comp_polys(const CompensationSession& session) {
  if (!session.model().is_hysteretic()) {
    throw PreconditionViolation("hysteresis_comp_polys: model has no phi regressors");
  }
  return {detail::step_polynomial(session, +1), detail::step_polynomial(session, -1), session.m_prev()};
}

// ---------------------------------------------------------------------------
// Initialization

// Past inputs set to the static inverse of r_at_start.
inline std::vector<double> init_dynamic(const NarxModel& model, double r_at_start) {
  const double m_bar = solve_static(model, r_at_start);
  return std::vector<double>(static_cast<std::size_t>(required_m_history(model)), m_bar);
}

struct HysteresisSeed {
  std::vector<double> seed;
  Regime regime = Regime::loading;
};

// Regime from the reference slope (a tie counts as loading); the seed is the
// loop input on that branch at output r1.
inline HysteresisSeed init_hysteresis(const NarxModel& model, const HysteresisLoop& loop, double r0, double r1) {
  const Regime regime = r1 - r0 >= 0.0 ? Regime::loading : Regime::unloading;
  const double m0 = loop_inverse(loop, r1, regime);
  return {std::vector<double>(static_cast<std::size_t>(required_m_history(model)), m0), regime};
}

// ---------------------------------------------------------------------------
// Full run

struct CompensationRun {
  std::vector<double> m;
  std::vector<bool> hold;
  std::vector<std::optional<Regime>> regime;  // branch of the chosen root
  int hold_count = 0;
  double max_residual = 0.0;  // max |p(m(k))| / (1 + max |c_j|) over non-HOLD steps
};

namespace detail {

inline double normalized_residual(const Polynomial& p, double x) {
  return std::abs(evaluate(p, x)) / (1.0 + p.max_abs_coeff());
}

}  // namespace detail

// Compensation inputs for every reference sample. m[k] acts on the plant
// output at k + tau_d.
inline CompensationRun run(CompensationSession& session, double im_tol = kDefaultImagTol) {
  CompensationRun out;
  const bool hysteretic = session.model().is_hysteretic();
  const std::size_t n = session.length();
  out.m.reserve(n);
  out.hold.reserve(n);
  out.regime.reserve(n);

  while (session.step() < static_cast<long>(n)) {
    const double m_prev = session.m_prev();
    Selection sel;
    std::optional<Regime> regime;
    double residual = 0.0;

    if (hysteretic) {
      const BranchPolynomials bp = hysteresis_comp_polys(session);
      const auto load = bp.loading.degree() >= 1
                            ? admissible_roots(solve_roots(bp.loading), m_prev, session.bounds(), Regime::loading, im_tol)
                            : std::vector<double>{};
      const auto unload =
          bp.unloading.degree() >= 1
              ? admissible_roots(solve_roots(bp.unloading), m_prev, session.bounds(), Regime::unloading, im_tol)
              : std::vector<double>{};
      std::vector<double> pooled = load;
      pooled.insert(pooled.end(), unload.begin(), unload.end());
      sel = closest(pooled, m_prev);
      if (!sel.hold) {
        regime = sel.value > m_prev ? Regime::loading : Regime::unloading;
        residual = detail::normalized_residual(*regime == Regime::loading ? bp.loading : bp.unloading, sel.value);
      }
    } else {
      const Polynomial p = dynamic_comp_poly(session);
      sel = p.degree() >= 1 ? select_root(solve_roots(p), m_prev, session.bounds(), std::nullopt, im_tol)
                            : Selection{m_prev, true};
      if (!sel.hold) residual = detail::normalized_residual(p, sel.value);
    }

    session.push(sel.value, regime);
    out.m.push_back(sel.value);
    out.hold.push_back(sel.hold);
    out.regime.push_back(regime);
    if (sel.hold) ++out.hold_count;
    out.max_residual = std::max(out.max_residual, residual);
  }
  return out;
}

}  // namespace narxcomp
