#pragma once

// Metrics, Monte Carlo bands and the experiment harnesses behind the
// benchmark tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "narxcomp/benchmarks.hpp"
#include "narxcomp/compensator.hpp"
#include "narxcomp/error.hpp"
#include "narxcomp/model.hpp"

namespace narxcomp {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Metrics

// Mean absolute error normalized by the target range, in percent.
inline double mape(std::span<const double> target, std::span<const double> actual) {
  if (target.size() != actual.size()) throw PreconditionViolation("mape: series lengths differ");
  if (target.size() < 2) throw PreconditionViolation("mape: need at least two samples");
  const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
  const double range = std::abs(*hi - *lo);
  if (range == 0.0) throw DegenerateRange("mape: target series is constant");
  double sum = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) sum += std::abs(target[k] - actual[k]);
  return 100.0 * sum / (static_cast<double>(target.size()) * range);
}

struct Effort {
  double energy = 0.0;  // sum of dm^2 over the window
  double std_dev = 0.0; // population standard deviation of dm
};

// dm(k) = |m(k) - r(k)| over the last n0 samples.
inline Effort effort(std::span<const double> m, std::span<const double> r, std::size_t n0) {
  if (m.size() != r.size()) throw PreconditionViolation("effort: series lengths differ");
  if (n0 < 1 || n0 > m.size()) throw PreconditionViolation("effort: window must satisfy 1 <= N0 <= N");
  const std::size_t start = m.size() - n0;
  double energy = 0.0, sum = 0.0;
  for (std::size_t k = start; k < m.size(); ++k) {
    const double d = std::abs(m[k] - r[k]);
    energy += d * d;
    sum += d;
  }
  const double mean = sum / static_cast<double>(n0);
  const double var = std::max(0.0, energy / static_cast<double>(n0) - mean * mean);
  return {energy, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// Plants and compensated runs

using PlantFn = std::function<std::vector<double>(std::span<const double>)>;

inline PlantFn heater_plant(HeaterParams params = {}) {
  return [params](std::span<const double> u) {
    HammersteinHeater h(params);
    return h.simulate(u);
  };
}

inline PlantFn bouc_wen_plant(BoucWenParams params = {}) {
  return [params](std::span<const double> u) { return bouc_wen_simulate(params, u); };
}

// Model used as the plant, started in agreement with the reference: outputs
// before tau_d equal r, inputs before the start equal the compensator seed.
inline std::vector<double> model_plant_response(const NarxModel& model, std::span<const double> m,
                                                std::span<const double> r, std::span<const double> seed) {
  const long n = static_cast<long>(m.size());
  std::vector<double> y(m.size());
  const auto r_at = [&](long t) { return r[static_cast<std::size_t>(std::clamp(t, 0L, static_cast<long>(r.size()) - 1))]; };
  const auto u_at = [&](long t) {
    if (t >= 0) return m[static_cast<std::size_t>(t)];
    const std::size_t i = static_cast<std::size_t>(-t - 1);
    return i < seed.size() ? seed[i] : seed.back();
  };
  for (long t = 0; t < n; ++t) {
    if (t < model.tau_d) {
      y[static_cast<std::size_t>(t)] = r_at(t);
      continue;
    }
    y[static_cast<std::size_t>(t)] = predict(
        model, [&](int i) { return t - i < 0 ? r_at(0) : y[static_cast<std::size_t>(t - i)]; },
        [&](int j) { return u_at(t - j); });
  }
  return y;
}

// Default loop excitation spans the model input range.
inline LoopExcitation default_loop_excitation(const NarxModel& model, double f_min) {
  LoopExcitation ex;
  ex.u_center = 0.5 * (model.input_range.lo + model.input_range.hi);
  ex.amplitude = model.input_range.hi - ex.u_center;
  ex.f_min = f_min;
  ex.sample_time = model.sample_time;
  return ex;
}

struct CompensatedRun {
  CompensationRun run;
  std::vector<double> seed;
};

// Seeds and runs the compensator over r. Hysteretic models are seeded from
// their loop under ex; others from the static inverse of r(tau_d).
inline CompensatedRun compensate(const NarxModel& model, std::span<const double> r,
                                 std::optional<LoopExcitation> ex = std::nullopt) {
  if (r.empty()) throw PreconditionViolation("compensate: empty reference");
  const auto r_at = [&](long t) { return r[static_cast<std::size_t>(std::clamp(t, 0L, static_cast<long>(r.size()) - 1))]; };
  std::vector<double> seed;
  if (model.is_hysteretic()) {
    if (!ex) throw PreconditionViolation("compensate: hysteretic model needs a loop excitation");
    const HysteresisLoop loop = hysteresis_loop(model, *ex);
    seed = init_hysteresis(model, loop, r_at(model.tau_d - 1), r_at(model.tau_d)).seed;
  } else {
    seed = init_dynamic(model, r_at(model.tau_d));
  }
  CompensationSession session(model, std::vector<double>(r.begin(), r.end()), seed);
  return {run(session), seed};
}

struct ExperimentReport {
  std::vector<double> r, m, y_c, y_u;
  double mape_comp = kNaN;
  double mape_uncomp = kNaN;
  double effort_energy = kNaN;
  double effort_std = kNaN;
  double hold_rate = 0.0;
};

// Evaluation window in samples: [begin, end).
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline std::span<const double> slice(std::span<const double> s, Window w) { return s.subspan(w.begin, w.end - w.begin); }

// Compensated and uncompensated responses of plant to r. y_c comes from the
// compensator inputs, y_u from applying r directly.
inline ExperimentReport compensation_experiment(const NarxModel& model, const PlantFn& plant,
                                                std::span<const double> r, Window w,
                                                std::optional<LoopExcitation> ex = std::nullopt,
                                                std::optional<std::size_t> effort_window = std::nullopt) {
  ExperimentReport rep;
  rep.r.assign(r.begin(), r.end());
  const CompensatedRun cr = compensate(model, r, ex);
  rep.m = cr.run.m;
  rep.y_c = plant ? plant(rep.m) : model_plant_response(model, rep.m, r, cr.seed);
  rep.y_u = plant ? plant(r) : model_plant_response(model, r, r, std::vector<double>{r.front()});
  rep.mape_comp = mape(slice(rep.r, w), slice(rep.y_c, w));
  rep.mape_uncomp = mape(slice(rep.r, w), slice(rep.y_u, w));
  rep.hold_rate = static_cast<double>(cr.run.hold_count) / static_cast<double>(r.size());
  if (effort_window) {
    const Effort e = effort(rep.m, rep.r, *effort_window);
    rep.effort_energy = e.energy;
    rep.effort_std = e.std_dev;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Tables

struct WindowPolicy {
  int transient_periods = 1;
  int eval_periods = 2;

  std::size_t samples(int period) const { return static_cast<std::size_t>((transient_periods + eval_periods) * period); }
  Window window(int period) const {
    return {static_cast<std::size_t>(transient_periods * period), samples(period)};
  }
};

struct TableCell {
  double f = 0.0;
  double amplitude = 0.0;
  double mape_comp = kNaN;    // validation tables: model MAPE
  double mape_uncomp = kNaN;  // validation tables: unused
  int holds = 0;
};

inline int period_samples(double f, double ts) {
  const int p = static_cast<int>(std::lround(1.0 / (f * ts)));
  if (p < 2) throw PreconditionViolation("period shorter than two samples");
  return p;
}

// Runs cell(f, a) over the grid; numeric failures become NaN cells.
template <typename Cell>
std::vector<TableCell> table_experiment(std::span<const double> freqs, std::span<const double> amps, Cell&& cell) {
  std::vector<TableCell> out;
  for (double f : freqs) {
    for (double a : amps) {
      TableCell c{f, a};
      try {
        c = cell(f, a);
      } catch (const Error&) {
        c = TableCell{f, a};
      }
      out.push_back(c);
    }
  }
  return out;
}

inline TableCell find_cell(std::span<const TableCell> table, double f, double a) {
  for (const TableCell& c : table) {
    if (std::abs(c.f - f) <= 1e-12 * std::max(1.0, std::abs(f)) && std::abs(c.amplitude - a) <= 1e-12 * std::max(1.0, std::abs(a))) {
      return c;
    }
  }
  throw PreconditionViolation("find_cell: no such cell");
}

// Heater validation: u = u0 + 0.2 sin(2 pi f k), free-run model vs plant.
inline TableCell heater_validation_cell(const NarxModel& model, double f, double u0, WindowPolicy wp = {}) {
  const int period = period_samples(f, 1.0);
  const auto u = generate({SignalKind::sine, 0.2, f, 0.0, u0}, wp.samples(period));
  const auto ys = heater_plant()(u);
  const std::vector<double> y_init(static_cast<std::size_t>(model.n_y), 0.0);
  const auto ym = simulate_free_run(model, u, y_init, 0.0);
  const Window w = wp.window(period);
  return {f, u0, mape(slice(ys, w), slice(ym, w)), kNaN, 0};
}

// Heater compensation: r = r0 sin(2 pi f k + pi/2) + r0.
inline ExperimentReport heater_compensation_run(const NarxModel& model, double f, double r0, WindowPolicy wp = {}) {
  const int period = period_samples(f, 1.0);
  const auto r = generate({SignalKind::sine, r0, f, std::numbers::pi / 2.0, r0}, wp.samples(period));
  return compensation_experiment(model, heater_plant(), r, wp.window(period));
}

inline TableCell heater_compensation_cell(const NarxModel& model, double f, double r0, WindowPolicy wp = {}) {
  const ExperimentReport rep = heater_compensation_run(model, f, r0, wp);
  return {f, r0, rep.mape_comp, rep.mape_uncomp,
          static_cast<int>(std::lround(rep.hold_rate * static_cast<double>(rep.r.size())))};
}

// Bouc-Wen validation: u = G sin(2 pi f t), free-run model vs plant.
inline TableCell bouc_wen_validation_cell(const NarxModel& model, double f, double g, WindowPolicy wp = {}) {
  const BoucWenParams params;
  const int period = period_samples(f, params.dt);
  const auto u = generate({SignalKind::sine, g, f, 0.0, 0.0}, wp.samples(period), params.dt);
  const auto ys = bouc_wen_simulate(params, u);
  const std::vector<double> y_init(static_cast<std::size_t>(model.n_y), 0.0);
  const auto ym = simulate_free_run(model, u, y_init, 0.0);
  const Window w = wp.window(period);
  return {f, g, mape(slice(ys, w), slice(ym, w)), kNaN, 0};
}

// Loop used to seed the Bouc-Wen compensator: 50 sin(2 pi 0.2 t).
inline LoopExcitation bouc_wen_loop_excitation() {
  LoopExcitation ex;
  ex.amplitude = 50.0;
  ex.f_min = 0.2;
  ex.u_center = 0.0;
  ex.sample_time = BoucWenParams{}.dt;
  return ex;
}

inline constexpr WindowPolicy kBoucWenCompensationWindow{5, 2};

// Bouc-Wen compensation: r = G0 sin(2 pi f t + pi/2).
inline ExperimentReport bouc_wen_compensation_run(const NarxModel& model, double f, double g0,
                                                  WindowPolicy wp = kBoucWenCompensationWindow) {
  const BoucWenParams params;
  const int period = period_samples(f, params.dt);
  const auto r = generate({SignalKind::sine, g0, f, std::numbers::pi / 2.0, 0.0}, wp.samples(period), params.dt);
  return compensation_experiment(model, bouc_wen_plant(params), r, wp.window(period), bouc_wen_loop_excitation());
}

inline TableCell bouc_wen_compensation_cell(const NarxModel& model, double f, double g0,
                                            WindowPolicy wp = kBoucWenCompensationWindow) {
  const ExperimentReport rep = bouc_wen_compensation_run(model, f, g0, wp);
  return {f, g0, rep.mape_comp, rep.mape_uncomp,
          static_cast<int>(std::lround(rep.hold_rate * static_cast<double>(rep.r.size())))};
}

inline std::vector<TableCell> heater_validation_table(const NarxModel& model, WindowPolicy wp = {}) {
  const double f[] = {0.0005, 0.001, 0.002};
  const double u0[] = {0.3, 0.5, 0.7};
  return table_experiment(f, u0, [&](double a, double b) { return heater_validation_cell(model, a, b, wp); });
}

inline std::vector<TableCell> heater_compensation_table(const NarxModel& model, WindowPolicy wp = {}) {
  const double f[] = {0.0005, 0.001, 0.002, 0.004};
  const double r0[] = {0.05, 0.1, 0.2};
  return table_experiment(f, r0, [&](double a, double b) { return heater_compensation_cell(model, a, b, wp); });
}

inline std::vector<TableCell> bouc_wen_validation_table(const NarxModel& model, WindowPolicy wp = {}) {
  const double f[] = {0.2, 1.0, 5.0};
  const double g[] = {10.0, 30.0, 50.0};
  return table_experiment(f, g, [&](double a, double b) { return bouc_wen_validation_cell(model, a, b, wp); });
}

inline std::vector<TableCell> bouc_wen_compensation_table(const NarxModel& model,
                                                          WindowPolicy wp = kBoucWenCompensationWindow) {
  const double f[] = {0.2, 1.0, 2.0, 5.0};
  const double g0[] = {20.0, 30.0, 40.0};
  return table_experiment(f, g0, [&](double a, double b) { return bouc_wen_compensation_cell(model, a, b, wp); });
}

// ---------------------------------------------------------------------------
// Steady-state divergence under a held input

struct HoldResponse {
  std::vector<double> u;
  std::vector<double> y;
  long hold_at = 0;
};

// u = G sin(2 pi f t) frozen from hold_at on, free run from rest.
inline HoldResponse held_sine_response(const NarxModel& model, double g = 30.0, double f = 2.0, long hold_at = 920,
                                       std::size_t n = 10000) {
  SignalSpec spec{SignalKind::sine_then_hold, g, f, 0.0, 0.0};
  spec.hold_at = hold_at;
  HoldResponse out;
  out.hold_at = hold_at;
  out.u = generate(spec, n, model.sample_time);
  const std::vector<double> y_init(static_cast<std::size_t>(model.n_y), 0.0);
  out.y = simulate_free_run(model, out.u, y_init, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct MonteCarloBand {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> std_dev;  // population
  std::vector<int> samples;     // runs contributing to each grid point
  int runs = 0;
  int skipped = 0;              // runs aborted by a numeric failure

  double lower(std::size_t i) const { return mean[i] - 2.0 * std_dev[i]; }
  double upper(std::size_t i) const { return mean[i] + 2.0 * std_dev[i]; }
  double skip_rate() const { return runs > 0 ? static_cast<double>(skipped) / runs : 0.0; }
};

// Each coefficient scaled by (1 + rel_std * N(0, 1)).
inline NarxModel perturb(const NarxModel& model, double rel_std, std::mt19937_64& rng) {
  NarxModel out = model;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Term& t : out.terms) t.coefficient += rel_std * std::abs(t.coefficient) * normal(rng);
  return out;
}

inline unsigned monte_carlo_threads(int n_runs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NARX_COMP_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, std::min(n, static_cast<unsigned>(std::max(1, n_runs))));
}

// experiment(perturbed_model) returns one value per grid point (NaN where the
// point is infeasible); a thrown Error skips the whole run. Run i draws from
// its own generator seeded with (seed, i), so results do not depend on the
// thread count.
template <typename Experiment>
MonteCarloBand monte_carlo(const NarxModel& model, double rel_std, int n_runs, std::vector<double> grid,
                           Experiment&& experiment, std::uint64_t seed) {
  if (!(rel_std >= 0.0)) throw PreconditionViolation("monte_carlo: rel_std must be >= 0");
  if (n_runs < 1) throw PreconditionViolation("monte_carlo: n_runs must be >= 1");

  std::vector<std::optional<std::vector<double>>> results(static_cast<std::size_t>(n_runs));
  const auto worker = [&](unsigned first, unsigned stride) {
    for (std::size_t i = first; i < results.size(); i += stride) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      try {
        std::vector<double> values = experiment(perturb(model, rel_std, rng));
        if (values.size() != grid.size()) throw PreconditionViolation("monte_carlo: experiment/grid size mismatch");
        results[i] = std::move(values);
      } catch (const Error&) {
        results[i].reset();
      }
    }
  };
  const unsigned threads = monte_carlo_threads(n_runs);
  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (auto& th : pool) th.join();
  }

  MonteCarloBand band;
  band.grid = std::move(grid);
  band.runs = n_runs;
  const std::size_t g = band.grid.size();
  band.mean.assign(g, 0.0);
  band.std_dev.assign(g, 0.0);
  band.samples.assign(g, 0);
  // Sums are taken relative to the first contributing value, so identical
  // runs give an exact mean and a zero spread.
  std::vector<double> pivot(g, kNaN);
  for (const auto& res : results) {
    if (!res) {
      ++band.skipped;
      continue;
    }
    for (std::size_t j = 0; j < g; ++j) {
      const double v = (*res)[j];
      if (std::isnan(v)) continue;
      if (std::isnan(pivot[j])) pivot[j] = v;
      band.mean[j] += v - pivot[j];
      ++band.samples[j];
    }
  }
  for (std::size_t j = 0; j < g; ++j) {
    band.mean[j] = band.samples[j] > 0 ? pivot[j] + band.mean[j] / band.samples[j] : kNaN;
  }
  for (const auto& res : results) {
    if (!res) continue;
    for (std::size_t j = 0; j < g; ++j) {
      if (std::isnan((*res)[j])) continue;
      const double d = (*res)[j] - band.mean[j];
      band.std_dev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < g; ++j) {
    band.std_dev[j] = band.samples[j] > 0 ? std::sqrt(band.std_dev[j] / band.samples[j]) : kNaN;
  }
  return band;
}

// Static compensation of the heater under model perturbation: for each r_bar
// the perturbed static inverse is applied to the true plant at steady state.
inline MonteCarloBand heater_static_monte_carlo(const NarxModel& model, double rel_std, int n_runs,
                                                std::vector<double> r_grid, std::uint64_t seed) {
  const HammersteinHeater plant;
  const auto experiment = [&](const NarxModel& perturbed) {
    std::vector<double> y(r_grid.size(), kNaN);
    for (std::size_t j = 0; j < r_grid.size(); ++j) {
      try {
        y[j] = plant.static_output(solve_static(perturbed, r_grid[j]));
      } catch (const NoFeasibleRoot&) {
      }
    }
    return y;
  };
  return monte_carlo(model, rel_std, n_runs, r_grid, experiment, seed);
}

// Bouc-Wen tracking under model perturbation: band over time of the
// compensated plant output for r = g0 sin(2 pi f t + pi/2).
inline MonteCarloBand bouc_wen_tracking_monte_carlo(const NarxModel& model, double rel_std, int n_runs, double g0,
                                                    double f, int cycles, std::uint64_t seed) {
  const BoucWenParams params;
  const int period = period_samples(f, params.dt);
  const auto r = generate({SignalKind::sine, g0, f, std::numbers::pi / 2.0, 0.0},
                          static_cast<std::size_t>(cycles * period), params.dt);
  std::vector<double> grid(r.size());
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k);
  const auto experiment = [&](const NarxModel& perturbed) {
    const CompensatedRun cr = compensate(perturbed, r, bouc_wen_loop_excitation());
    return bouc_wen_simulate(params, cr.run.m);
  };
  return monte_carlo(model, rel_std, n_runs, grid, experiment, seed);
}

}  // namespace narxcomp
