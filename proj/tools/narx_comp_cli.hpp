#pragma once

// Command-line front end. Exit codes: 0 success, 2 configuration error,
// 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "narxcomp/benchmarks.hpp"
#include "narxcomp/compensator.hpp"
#include "narxcomp/evaluation.hpp"
#include "narxcomp/model.hpp"
#include "narxcomp/model_io.hpp"

namespace narxcomp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Row of CSV fields.
class Csv {
 public:
  explicit Csv(std::ostream& os) : os_(os) {}

  template <typename... T>
  void row(const T&... fields) {
    bool first = true;
    ((os_ << (first ? "" : ",") << field(fields), first = false), ...);
    os_ << '\n';
  }

 private:
  static std::string field(double v) { return fmt(v); }
  static std::string field(int v) { return std::to_string(v); }
  static std::string field(long v) { return std::to_string(v); }
  static std::string field(std::size_t v) { return std::to_string(v); }
  static std::string field(const std::string& s) { return s; }
  static std::string field(const char* s) { return s; }

  std::ostream& os_;
};

// Writes to path via a temporary file renamed on success, or to fallback when
// path is empty. A failed body leaves no output file behind.
template <typename Body>
void write_output(const std::string& path, std::ostream& fallback, Body&& body) {
  if (path.empty()) {
    body(fallback);
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".partial";
  try {
    {
      std::ofstream os(tmp);
      if (!os) throw ConfigError("output: cannot open '" + path + "' for writing");
      body(os);
      if (!os) throw ConfigError("output: write to '" + path + "' failed");
    }
    std::filesystem::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

// "sine:A=30,f=2,phase=1.5708,offset=0", "hold:A=30,f=2,at=920",
// "steps:A=0.4,offset=0.05,len=200,count=5".
inline SignalSpec parse_signal(const std::string& text) {
  SignalSpec spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "sine") {
    spec.kind = SignalKind::sine;
  } else if (kind == "hold") {
    spec.kind = SignalKind::sine_then_hold;
  } else if (kind == "steps") {
    spec.kind = SignalKind::steps;
  } else {
    throw ConfigError("signal: unknown kind '" + kind + "' (expected sine, hold or steps)");
  }
  if (colon == std::string::npos) return spec;

  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("signal: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError("signal: key '" + key + "' needs a number");
    }
    if (key == "A" || key == "G" || key == "G0" || key == "amplitude") {
      spec.amplitude = value;
    } else if (key == "f" || key == "frequency") {
      spec.frequency = value;
    } else if (key == "phase") {
      spec.phase = value;
    } else if (key == "offset") {
      spec.offset = value;
    } else if (key == "at") {
      spec.hold_at = static_cast<long>(value);
    } else if (key == "len") {
      spec.step_length = static_cast<int>(value);
    } else if (key == "count") {
      spec.step_count = static_cast<int>(value);
    } else {
      throw ConfigError("signal: unknown key '" + key + "'");
    }
  }
  return spec;
}

inline PlantFn make_plant(const std::string& name) {
  if (name == "heater") return heater_plant();
  if (name == "bouc_wen") return bouc_wen_plant();
  if (name == "model") return PlantFn{};
  throw ConfigError("plant: unknown plant '" + name + "' (expected heater, bouc_wen or model)");
}

inline NarxModel model_in(const std::string& dir, const char* file) {
  return load_model(std::filesystem::path(dir) / file);
}

inline void table_csv(std::ostream& os, const std::vector<TableCell>& table) {
  Csv csv(os);
  csv.row("f", "amplitude", "mape_comp", "mape_uncomp");
  for (const TableCell& c : table) csv.row(c.f, c.amplitude, c.mape_comp, c.mape_uncomp);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"NARX polynomial model compensation toolkit", "narx-comp"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);

  std::string model_path, output, signal_text = "sine:A=1,f=1", plant_name = "model", mode = "dynamic";
  std::size_t n = 1000;
  std::optional<double> ts, loop_amplitude, loop_center;
  double loop_f = 0.2;

  auto* sim = app.add_subcommand("simulate", "Free-run simulation of a model");
  sim->add_option("--model", model_path, "Model JSON file")->required();
  sim->add_option("--signal", signal_text, "Input signal, e.g. sine:A=0.2,f=0.001,offset=0.5");
  sim->add_option("--n", n, "Number of samples");
  sim->add_option("--ts", ts, "Sample time (defaults to the model's)");
  sim->add_option("--output", output, "CSV output file (stdout if omitted)");

  double u_bar = 0.0;
  int branch = 0;
  auto* fp = app.add_subcommand("fixed-points", "Equilibria and their stability for a constant input");
  fp->add_option("--model", model_path, "Model JSON file")->required();
  fp->add_option("--u", u_bar, "Constant input")->required();
  fp->add_option("--branch", branch, "phi2 value at steady state (-1, 0, 1)");
  fp->add_option("--output", output, "CSV output file");

  int transient = 1;
  auto* lp = app.add_subcommand("loop", "Hysteresis loop under a slow sine");
  lp->add_option("--model", model_path, "Model JSON file")->required();
  lp->add_option("--amplitude", loop_amplitude, "Excitation amplitude (defaults to half the input range)");
  lp->add_option("--center", loop_center, "Excitation center (defaults to the input range midpoint)");
  lp->add_option("--f-min", loop_f, "Excitation frequency");
  lp->add_option("--transient", transient, "Periods discarded before the loop");
  lp->add_option("--output", output, "CSV output file");

  auto* comp = app.add_subcommand("compensate", "Compensate a reference and apply the inputs to a plant");
  comp->add_option("--model", model_path, "Model JSON file")->required();
  comp->add_option("--mode", mode, "static, dynamic or hysteresis")->check(CLI::IsMember({"static", "dynamic", "hysteresis"}));
  comp->add_option("--signal", signal_text, "Reference signal");
  comp->add_option("--n", n, "Number of samples");
  comp->add_option("--ts", ts, "Sample time (defaults to the model's)");
  comp->add_option("--plant", plant_name, "heater, bouc_wen or model");
  comp->add_option("--loop-amplitude", loop_amplitude, "Initialization loop amplitude");
  comp->add_option("--loop-center", loop_center, "Initialization loop center");
  comp->add_option("--loop-f", loop_f, "Initialization loop frequency");
  comp->add_option("--output", output, "CSV output file");

  double rel_std = 0.005, r_start = 0.02, r_stop = 0.5, r_step = 0.02;
  int runs = 1000;
  std::uint64_t seed = 1;
  std::string experiment = "static";
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo band under parameter perturbation");
  mc->add_option("--model", model_path, "Model JSON file")->required();
  mc->add_option("--experiment", experiment, "static (heater sweep) or bw-tracking")
      ->check(CLI::IsMember({"static", "bw-tracking"}));
  mc->add_option("--rel-std", rel_std, "Relative standard deviation of each parameter");
  mc->add_option("--runs", runs, "Number of runs");
  mc->add_option("--seed", seed, "Random seed");
  mc->add_option("--r-start", r_start, "Static sweep: first reference value");
  mc->add_option("--r-stop", r_stop, "Static sweep: last reference value");
  mc->add_option("--r-step", r_step, "Static sweep: grid step");
  mc->add_option("--output", output, "CSV output file");

  std::string target, models_dir = "models";
  auto* rep = app.add_subcommand("reproduce", "Regenerate a benchmark table or experiment");
  rep->add_option("target", target, "table1, table3, table-bw-model, table-bw-comp or fig8")
      ->required()
      ->check(CLI::IsMember({"table1", "table3", "table-bw-model", "table-bw-comp", "fig8"}));
  rep->add_option("--models-dir", models_dir, "Directory holding the bundled model files");
  rep->add_option("--output", output, "CSV output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) {
      const NarxModel model = load_model(model_path);
      const auto u = generate(parse_signal(signal_text), n, ts.value_or(model.sample_time));
      const auto y = simulate_free_run(model, u, 0.0);
      write_output(output, out, [&](std::ostream& os) {
        Csv csv(os);
        csv.row("k", "u", "y");
        for (std::size_t k = 0; k < u.size(); ++k) csv.row(k, u[k], y[k]);
      });
    } else if (*fp) {
      const NarxModel model = load_model(model_path);
      const auto points = fixed_points(model, u_bar, branch);
      write_output(output, out, [&](std::ostream& os) {
        Csv csv(os);
        std::size_t n_eig = 0;
        for (const auto& p : points) n_eig = std::max(n_eig, p.eigen_mags.size());
        os << "u_bar,y_bar";
        for (std::size_t i = 0; i < n_eig; ++i) os << ",eig_" << i + 1;
        os << ",stability\n";
        for (const auto& p : points) {
          os << fmt(p.u_bar) << ',' << fmt(p.y_bar);
          for (std::size_t i = 0; i < n_eig; ++i) os << ',' << (i < p.eigen_mags.size() ? fmt(p.eigen_mags[i]) : "");
          os << ',' << (p.stable ? "stable" : "unstable") << '\n';
        }
      });
    } else if (*lp) {
      const NarxModel model = load_model(model_path);
      LoopExcitation ex = default_loop_excitation(model, loop_f);
      if (loop_amplitude) ex.amplitude = *loop_amplitude;
      if (loop_center) ex.u_center = *loop_center;
      ex.transient_periods = transient;
      const HysteresisLoop loop = hysteresis_loop(model, ex);
      write_output(output, out, [&](std::ostream& os) {
        Csv csv(os);
        csv.row("branch", "u", "y");
        for (const auto& p : loop.loading) csv.row("loading", p.u, p.y);
        for (const auto& p : loop.unloading) csv.row("unloading", p.u, p.y);
      });
    } else if (*comp) {
      const NarxModel model = load_model(model_path);
      const PlantFn plant = make_plant(plant_name);
      const auto r = generate(parse_signal(signal_text), n, ts.value_or(model.sample_time));
      std::vector<double> m;
      std::vector<double> seed_values;
      if (mode == "static") {
        for (double v : r) m.push_back(solve_static(model, v));
        seed_values = {m.front()};
      } else {
        if ((mode == "hysteresis") != model.is_hysteretic()) {
          throw ConfigError("mode: '" + mode + "' does not match the model (" +
                            (model.is_hysteretic() ? "hysteretic" : "not hysteretic") + ")");
        }
        std::optional<LoopExcitation> ex;
        if (model.is_hysteretic()) {
          ex = default_loop_excitation(model, loop_f);
          if (loop_amplitude) ex->amplitude = *loop_amplitude;
          if (loop_center) ex->u_center = *loop_center;
        }
        CompensatedRun cr = compensate(model, r, ex);
        m = std::move(cr.run.m);
        seed_values = std::move(cr.seed);
      }
      const auto y_c = plant ? plant(m) : model_plant_response(model, m, r, seed_values);
      const auto y_u = plant ? plant(r) : model_plant_response(model, r, r, std::vector<double>{r.front()});
      write_output(output, out, [&](std::ostream& os) {
        Csv csv(os);
        csv.row("k", "r", "m", "y_c", "y_u");
        for (std::size_t k = 0; k < r.size(); ++k) csv.row(k, r[k], m[k], y_c[k], y_u[k]);
      });
    } else if (*mc) {
      const NarxModel model = load_model(model_path);
      MonteCarloBand band;
      if (experiment == "static") {
        if (!(r_step > 0.0) || r_stop < r_start) throw ConfigError("r-step: grid must be increasing");
        std::vector<double> grid;
        for (long i = 0;; ++i) {
          const double v = r_start + static_cast<double>(i) * r_step;
          if (v > r_stop + 1e-12 * std::max(1.0, std::abs(r_stop))) break;
          grid.push_back(v);
        }
        band = heater_static_monte_carlo(model, rel_std, runs, grid, seed);
      } else {
        band = bouc_wen_tracking_monte_carlo(model, rel_std, runs, 20.0, 2.0, 5, seed);
      }
      write_output(output, out, [&](std::ostream& os) {
        Csv csv(os);
        csv.row("grid", "mean", "std", "lower", "upper", "samples");
        for (std::size_t j = 0; j < band.grid.size(); ++j) {
          csv.row(band.grid[j], band.mean[j], band.std_dev[j], band.lower(j), band.upper(j), band.samples[j]);
        }
      });
      err << "runs " << band.runs << ", skipped " << band.skipped << '\n';
    } else if (*rep) {
      if (target == "table1") {
        const auto t = heater_validation_table(model_in(models_dir, "heater.json"));
        write_output(output, out, [&](std::ostream& os) { table_csv(os, t); });
      } else if (target == "table3") {
        const auto t = heater_compensation_table(model_in(models_dir, "heater.json"));
        write_output(output, out, [&](std::ostream& os) { table_csv(os, t); });
      } else if (target == "table-bw-model") {
        const auto t = bouc_wen_validation_table(model_in(models_dir, "bw.json"));
        write_output(output, out, [&](std::ostream& os) { table_csv(os, t); });
      } else if (target == "table-bw-comp") {
        const auto t = bouc_wen_compensation_table(model_in(models_dir, "bw.json"));
        write_output(output, out, [&](std::ostream& os) { table_csv(os, t); });
      } else {
        const auto h = held_sine_response(model_in(models_dir, "bw.json"));
        const auto c = held_sine_response(model_in(models_dir, "bw_cns.json"));
        write_output(output, out, [&](std::ostream& os) {
          Csv csv(os);
          csv.row("k", "u", "y_h", "y_cns");
          for (std::size_t k = 0; k < h.u.size(); ++k) csv.row(k, h.u[k], h.y[k], c.y[k]);
        });
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PreconditionViolation& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace narxcomp::cli
