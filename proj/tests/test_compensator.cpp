#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "narxcomp/compensator.hpp"
#include "narxcomp/model_io.hpp"
#include "test_support.hpp"

using namespace narxcomp;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double t1 = 8.958185e-1, t2 = 6.393347e-2, t3 = -1.746750e-2;

NarxModel heater() { return load_model(test::model_path("heater.json")); }
NarxModel model(const char* file) { return load_model(test::model_path(file)); }

double heater_static(double u) { return t2 * u * u / (1.0 - t1 - t3); }

// Coefficient-wise distance, padding the shorter polynomial with zeros.
double coeff_distance(const Polynomial& p, std::vector<double> want) {
  const std::size_t n = std::max(p.size(), want.size());
  want.resize(n, 0.0);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs((i < p.size() ? p[i] : 0.0) - want[i]));
  return d;
}

std::vector<double> sine(std::size_t n, double amplitude, double cycles_per_sample, double phase, double offset) {
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    r[k] = amplitude * std::sin(2.0 * std::numbers::pi * cycles_per_sample * static_cast<double>(k) + phase) + offset;
  }
  return r;
}

// Session advanced to step k with the given applied inputs.
CompensationSession at_step(const NarxModel& m, std::vector<double> r, std::vector<double> seed,
                            const std::vector<double>& applied) {
  CompensationSession s(m, std::move(r), std::move(seed));
  for (double v : applied) s.push(v);
  return s;
}

}  // namespace

TEST_CASE("static compensator polynomial", "[compensator]") {
  const double th[] = {0.5, 0.3, 0.1, 0.2, 0.05};
  const NarxModel ex = test::cubic_example(th[0], th[1], th[2], th[3], th[4]);
  const double rb = 1.7;
  CHECK(coeff_distance(static_comp_poly(ex, rb), {(th[0] - 1.0) * rb, th[1], th[2] + th[3], th[4]}) < 1e-15);

  const double r = 0.25;
  CHECK(coeff_distance(static_comp_poly(heater(), r), {(t1 + t3 - 1.0) * r, 0.0, t2}) < 1e-15);

  const RootSet zero = solve_roots(static_comp_poly(heater(), 0.0));
  CHECK(test::same_roots(zero.roots, {0.0, 0.0}) == 0.0);

  CHECK_THROWS_AS(static_comp_poly(model("bw.json"), 1.0), PreconditionViolation);
  NarxModel pure_y;
  pure_y.terms = {{1.0, {test::y(1)}}};
  CHECK_THROWS_AS(static_comp_poly(pure_y, 0.3), IdenticallyZero);
}

TEST_CASE("static inverse of the heater", "[compensator]") {
  CHECK_THAT(solve_static(heater(), heater_static(0.5)), WithinAbs(0.5, 1e-12));
  CHECK(solve_static(heater(), 0.0) == 0.0);
  CHECK_THAT(solve_static(heater(), heater_static(1.0)), WithinAbs(1.0, 1e-12));
  CHECK_THAT(heater_static(1.0), WithinAbs(0.5256, 5e-5));
  for (double rb : {0.01, 0.1, 0.3, 0.5}) {
    CHECK_THAT(solve_static(heater(), rb), WithinAbs(std::sqrt((1.0 - t1 - t3) * rb / t2), 1e-12));
  }
  // Negative targets have no real root; targets above the static maximum need
  // an input beyond the bounds.
  CHECK_THROWS_AS(solve_static(heater(), -0.1), NoFeasibleRoot);
  CHECK_THROWS_AS(solve_static(heater(), 0.6), NoFeasibleRoot);
}

TEST_CASE("history depth the compensator reads", "[compensator]") {
  CHECK(required_m_history(heater()) == 1);
  CHECK(required_m_history(test::cubic_example(0.5, 0.3, 0.1, 0.2, 0.05)) == 1);
  CHECK(required_m_history(model("bw.json")) == 1);
  CHECK(required_m_history(model("valve.json")) == 1);
  NarxModel deep = test::cubic_example(0.5, 0.3, 0.1, 0.2, 0.05);
  deep.terms.push_back({0.1, {test::u(4)}});
  deep.n_u = 4;
  CHECK(required_m_history(deep) == 3);
}

TEST_CASE("dynamic compensator polynomial", "[compensator]") {
  const double th[] = {0.5, 0.3, 0.1, 0.2, 0.05};
  const NarxModel ex = test::cubic_example(th[0], th[1], th[2], th[3], th[4]);
  const std::vector<double> r{0.2, 0.4, 0.9, 1.1, 0.7};
  const double seed = 0.6;
  const auto s = at_step(ex, r, {seed}, {0.65, 0.8});
  const long k = 2;
  const double mp = 0.8;
  CHECK(coeff_distance(dynamic_comp_poly(s), {th[0] * r[k] - r[k + 1], th[1] + th[2] * mp, th[3], th[4]}) < 1e-15);

  // First step reads the seed as m(-1).
  const CompensationSession s0(ex, r, {seed});
  CHECK(coeff_distance(dynamic_comp_poly(s0), {th[0] * r[0] - r[1], th[1] + th[2] * seed, th[3], th[4]}) < 1e-15);

  // The heater input enters with a pure delay of two samples, so the shift is
  // k -> k + 2.
  const std::vector<double> rh{0.10, 0.12, 0.15, 0.13, 0.11};
  const auto sh = at_step(heater(), rh, {0.5}, {0.52});
  CHECK(coeff_distance(dynamic_comp_poly(sh), {t1 * rh[2] + t3 * rh[1] - rh[3], 0.0, t2}) < 1e-16);
}

TEST_CASE("steady reference reproduces the held input", "[compensator]") {
  const double rb = heater_static(0.5);
  const CompensationSession s(heater(), std::vector<double>(10, rb), init_dynamic(heater(), rb));
  const RootSet rs = solve_roots(dynamic_comp_poly(s));
  const Selection sel = select_root(rs, s.m_prev(), s.bounds());
  CHECK_FALSE(sel.hold);
  CHECK_THAT(sel.value, WithinAbs(0.5, 1e-12));

  CompensationSession full(heater(), std::vector<double>(200, rb), init_dynamic(heater(), rb));
  const CompensationRun out = run(full);
  CHECK(out.hold_count == 0);
  for (double v : out.m) CHECK_THAT(v, WithinAbs(0.5, 1e-12));
}

TEST_CASE("root selection", "[compensator]") {
  const Range unit{0.0, 1.0};
  const RootSet two{{Complex{0.4}, Complex{0.9}}};
  Selection s = select_root(two, 0.5, unit);
  CHECK_FALSE(s.hold);
  CHECK(s.value == 0.4);

  s = select_root(RootSet{{Complex{0, 1}, Complex{0, -1}}}, 0.3, unit);
  CHECK(s.hold);
  CHECK(s.value == 0.3);

  s = select_root(two, 0.5, unit, Regime::loading);
  CHECK(s.value == 0.9);
  s = select_root(two, 0.5, unit, Regime::unloading);
  CHECK(s.value == 0.4);
  CHECK(select_root(two, 0.9, unit, Regime::loading).hold);

  // Bounds are closed; a root that overshoots by rounding is clamped.
  CHECK(select_root(RootSet{{Complex{1.0}}}, 0.5, unit).value == 1.0);
  CHECK(select_root(RootSet{{Complex{1.0 + 1e-14}}}, 0.5, unit).value == 1.0);
  CHECK(select_root(RootSet{{Complex{1.0 + 1e-6}}}, 0.5, unit).hold);
  // Equal to the pivot satisfies neither strict branch inequality.
  CHECK(select_root(RootSet{{Complex{0.5}}}, 0.5, unit, Regime::loading).hold);
  CHECK(select_root(RootSet{{Complex{0.5}}}, 0.5, unit, Regime::unloading).hold);
}

TEST_CASE("dynamic initialization", "[compensator]") {
  auto seed = init_dynamic(heater(), heater_static(0.5));
  REQUIRE(seed.size() == 1);
  CHECK_THAT(seed[0], WithinAbs(0.5, 1e-12));
  CHECK(init_dynamic(heater(), 0.0) == std::vector<double>{0.0});

  const NarxModel ex = test::cubic_example(0.5, 0.3, 0.1, 0.2, 0.05);
  const double ub = 0.7;
  const double yb = (0.05 * ub * ub * ub + (0.1 + 0.2) * ub * ub + 0.3 * ub) / (1.0 - 0.5);
  seed = init_dynamic(ex, yb);
  REQUIRE(seed.size() == 1);
  CHECK_THAT(seed[0], WithinAbs(ub, 1e-12));
}

TEST_CASE("branch polynomials of the small hysteretic model", "[compensator][hysteresis]") {
  const NarxModel ex5 = model("example5.json");
  const double th[] = {0.8, 0.4, 0.2, 0.1};
  const std::vector<double> r{2.0, 2.3, 2.9, 2.5};
  const auto s = at_step(ex5, r, {1.0}, {1.1});
  const double mp = 1.1, rk = r[1], rn = r[2];
  const BranchPolynomials bp = hysteresis_comp_polys(s);
  CHECK(bp.pivot == mp);
  CHECK(coeff_distance(bp.loading, {th[0] * rk - th[3] * mp * rk - rn, -th[2] * mp + th[3] * rk, th[2], th[1]}) < 1e-12);
  CHECK(coeff_distance(bp.unloading, {th[0] * rk + th[3] * mp * rk - rn, th[2] * mp - th[3] * rk, -th[2], th[1]}) < 1e-12);
}

TEST_CASE("branch polynomials of the Bouc-Wen model", "[compensator][hysteresis]") {
  const double th[] = {1.000099, 6.630567e-3, -6.247018e-3, 0.7892915};
  const std::vector<double> r{10.0, 12.0, 13.5};
  const auto s = at_step(model("bw.json"), r, {-4.0}, {-2.5});
  const double mp = -2.5, rk = r[1], rn = r[2];
  const BranchPolynomials bp = hysteresis_comp_polys(s);
  CHECK(coeff_distance(bp.loading, {th[0] * rk - th[2] * mp * rk - th[3] * mp - rn, -th[1] * mp + th[2] * rk + th[3], th[1]}) <
        1e-12);
  // The signed phi1 term keeps its sign on the falling branch; only the
  // |phi1| products flip.
  CHECK(coeff_distance(bp.unloading, {th[0] * rk + th[2] * mp * rk - th[3] * mp - rn, th[1] * mp - th[2] * rk + th[3], -th[1]}) <
        1e-12);
}

TEST_CASE("branch polynomials of the valve model", "[compensator][hysteresis]") {
  const double th[] = {0.976, 0.024, 0.119, 3.76, -4.73};
  const std::vector<double> r{2.8, 2.9, 3.05, 3.1};
  const auto s = at_step(model("valve.json"), r, {3.6}, {3.7, 3.75});
  const double mp = 3.75, rk = r[2], rkm = r[1], rn = r[3];
  const BranchPolynomials bp = hysteresis_comp_polys(s);
  REQUIRE(bp.loading.degree() == 2);
  CHECK_THAT(bp.loading[2], WithinAbs(th[3], 1e-15));
  CHECK(coeff_distance(bp.loading, {th[0] * rk + th[1] * rkm - th[2] * mp - th[4] * rkm * mp - rn,
                                    th[2] - th[3] * mp + th[4] * rkm, th[3]}) < 1e-12);
  CHECK(coeff_distance(bp.unloading, {th[0] * rk + th[1] * rkm - th[2] * mp + th[4] * rkm * mp - rn,
                                      th[2] + th[3] * mp - th[4] * rkm, -th[3]}) < 1e-12);
}

TEST_CASE("branch polynomials agree with the unsplit expression", "[compensator][hysteresis][property]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> offset(1e-3, 1.0);
  for (const char* file : {"example5.json", "bw.json", "valve.json"}) {
    INFO(file);
    const NarxModel m = model(file);
    const double lo = m.input_range.lo, span = m.input_range.span();
    std::uniform_real_distribution<double> in(lo + 0.25 * span, lo + 0.75 * span);
    std::uniform_real_distribution<double> out(m.output_range.lo, m.output_range.hi);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<double> r{out(rng), out(rng), out(rng), out(rng)};
      const double m2 = in(rng), m1 = in(rng);
      const auto s = at_step(m, r, {m2}, {m1});
      const BranchPolynomials bp = hysteresis_comp_polys(s);
      for (int side : {+1, -1}) {
        const double x = m1 + side * offset(rng) * 0.2 * span;
        // Model one step ahead with outputs replaced by the reference.
        const long k = s.step();
        std::vector<double> yh, uh{x, m1, m2};
        for (int i = 0; i < m.n_y; ++i) yh.push_back(s.r(k + m.tau_d - 1 - i));
        const double direct = one_step(m, yh, uh) - s.r(k + m.tau_d);
        const double split = evaluate(side > 0 ? bp.loading : bp.unloading, x);
        REQUIRE_THAT(split, WithinAbs(direct, 1e-10 * (1.0 + std::abs(direct))));
      }
    }
  }
}

TEST_CASE("hysteresis initialization from the loop", "[compensator][hysteresis]") {
  const NarxModel ex5 = model("example5.json");
  LoopExcitation ex;
  ex.amplitude = 1.0;
  ex.f_min = 1.0;
  ex.u_center = 1.0;
  ex.sample_time = ex5.sample_time;
  const HysteresisLoop loop = hysteresis_loop(ex5, ex);

  HysteresisSeed hs = init_hysteresis(ex5, loop, 1.5, 2.0);
  CHECK(hs.regime == Regime::loading);
  REQUIRE(hs.seed.size() == 1);
  CHECK(hs.seed[0] == loop_inverse(loop, 2.0, Regime::loading));

  hs = init_hysteresis(ex5, loop, 2.5, 2.0);
  CHECK(hs.regime == Regime::unloading);
  CHECK(hs.seed[0] == loop_inverse(loop, 2.0, Regime::unloading));
  CHECK(hs.seed[0] < init_hysteresis(ex5, loop, 1.5, 2.0).seed[0]);

  CHECK(init_hysteresis(ex5, loop, 2.0, 2.0).regime == Regime::loading);

  const double top = loop.loading.back().y;
  CHECK(init_hysteresis(ex5, loop, top - 0.1, top).seed[0] == loop.loading.back().u);
  CHECK_THROWS_AS(init_hysteresis(ex5, loop, 0.0, top + 1.0), OutOfLoopRange);
}

TEST_CASE("structural errors", "[compensator]") {
  // Input lag shorter than the declared delay needs an input not chosen yet.
  NarxModel early = test::cubic_example(0.5, 0.3, 0.1, 0.2, 0.05);
  early.tau_d = 2;
  early.terms.push_back({0.1, {test::u(2)}});
  const CompensationSession s(early, {0.1, 0.2, 0.3}, {0.0, 0.0});
  CHECK_THROWS_AS(dynamic_comp_poly(s), UnknownFutureInput);

  const CompensationSession h(model("bw.json"), {0.0, 1.0}, {0.0});
  CHECK_THROWS_AS(dynamic_comp_poly(h), UnsupportedStructure);
  const CompensationSession d(heater(), {0.1, 0.1}, {0.5});
  CHECK_THROWS_AS(hysteresis_comp_polys(d), PreconditionViolation);

  CHECK_THROWS_AS(CompensationSession(heater(), {0.1}, {2.0}), PreconditionViolation);
  CHECK_THROWS_AS(CompensationSession(heater(), {}, {0.5}), PreconditionViolation);
  CHECK_THROWS_AS(d.m(0), UnknownFutureInput);
}

TEST_CASE("run properties on the hysteretic models", "[compensator][property]") {
  struct Case {
    const char* file;
    std::vector<double> r;
    LoopExcitation ex;
  };
  std::vector<Case> cases;
  {
    LoopExcitation e{50.0, 0.2, 0.0, 0.005};
    cases.push_back({"bw.json", sine(800, 30.0, 1.0 * 0.005, std::numbers::pi / 2, 0.0), e});
    cases.push_back({"bw_cns.json", sine(800, 20.0, 2.0 * 0.005, 0.3, 0.0), e});
  }
  {
    LoopExcitation e{2.0, 0.1, 3.0, 0.01};
    cases.push_back({"valve.json", sine(2000, 0.34, 0.1 * 0.01, 0.0, 3.0), e});
  }

  for (const Case& c : cases) {
    INFO(c.file);
    const NarxModel m = model(c.file);
    const HysteresisLoop loop = hysteresis_loop(m, c.ex);
    const HysteresisSeed hs = init_hysteresis(m, loop, c.r[m.tau_d - 1], c.r[m.tau_d]);

    // Re-derive every step independently and compare with the run.
    CompensationSession replay(m, c.r, hs.seed);
    CompensationSession live(m, c.r, hs.seed);
    const CompensationRun out = run(live);
    CHECK(out.m.size() == c.r.size());
    CHECK(out.max_residual < 1e-9);
    for (std::size_t k = 0; k < c.r.size(); ++k) {
      const double mp = replay.m_prev();
      const BranchPolynomials bp = hysteresis_comp_polys(replay);
      auto load = admissible_roots(solve_roots(bp.loading), mp, replay.bounds(), Regime::loading);
      auto unload = admissible_roots(solve_roots(bp.unloading), mp, replay.bounds(), Regime::unloading);
      for (double v : load) REQUIRE(v > mp);
      for (double v : unload) REQUIRE(v < mp);
      load.insert(load.end(), unload.begin(), unload.end());
      if (out.hold[k]) {
        REQUIRE(load.empty());
        REQUIRE(out.m[k] == mp);
      } else {
        REQUIRE(out.m[k] >= m.input_range.lo);
        REQUIRE(out.m[k] <= m.input_range.hi);
        for (double v : load) REQUIRE(std::abs(v - mp) >= std::abs(out.m[k] - mp));
        REQUIRE(out.regime[k].has_value());
        REQUIRE((*out.regime[k] == Regime::loading) == (out.m[k] > mp));
      }
      replay.push(out.m[k]);
    }

    // Model as plant with the reference as output history: every step lands
    // on the reference.
    for (std::size_t k = 0; k + m.tau_d < c.r.size(); ++k) {
      if (out.hold[k]) continue;
      const long t = static_cast<long>(k);
      std::vector<double> yh, uh;
      for (int i = 0; i < m.n_y; ++i) yh.push_back(replay.r(t + m.tau_d - 1 - i));
      for (int i = 0; i < m.input_depth(); ++i) uh.push_back(replay.m(t + m.tau_d - 1 - i));
      REQUIRE_THAT(one_step(m, yh, uh), WithinAbs(c.r[k + m.tau_d], 1e-8));
    }
  }
}

TEST_CASE("heater run is exact against its own model", "[compensator][property]") {
  const NarxModel m = heater();
  const auto r = sine(3000, 0.1, 0.001, std::numbers::pi / 2, 0.15);
  CompensationSession s(m, r, init_dynamic(m, r[m.tau_d]));
  const CompensationRun out = run(s);
  CHECK(out.hold_count == 0);
  CHECK(out.max_residual < 1e-9);
  for (std::size_t k = 0; k + 2 < r.size(); ++k) {
    const long t = static_cast<long>(k);
    const double yh[] = {s.r(t + 1), s.r(t)};
    const double uh[] = {s.m(t + 1), s.m(t)};
    REQUIRE_THAT(one_step(m, yh, uh), WithinAbs(r[k + 2], 1e-8));
  }
}
