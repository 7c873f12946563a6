#pragma once

#include "donorsim/fitting.hpp"
#include "donorsim/gates.hpp"

namespace donorsim {

struct CalibrationOptions {
  int target = 2;            // nucleus probed with the π/2 pair (N3)
  std::vector<int> config;   // addressed ESR line over the active nuclei; empty = all down
  double rabi = 0;           // ESR Rabi frequency; 0 = crosstalk-aware choice
  RunOptions run;
  GateOptions gates;
};

struct CalibrationSweep {
  int repetitions = 1;
  std::vector<double> durations;
  std::vector<double> p_up;
  FitResult fit;
  double rabi = 0;
  double best_duration = 0;  // fitted maximum nearest the sweep centre
};

// π/2 on the target, m ESR pulses of length d on one line, -π/2 on the target.
// Noiseless on resonance: P(up) = sin^4(m π f_R d / 2).
inline Circuit cccz_calibration_circuit(const SpinSystemSpec& spec, int m, double d, const CalibrationOptions& o,
                                        double* rabi_used = nullptr) {
  const auto active = spec.active_nuclei();
  std::vector<int> config = o.config.empty() ? std::vector<int>(active.size(), 0) : o.config;
  Circuit c;
  c.name = "cccz_calibration";
  c.add(CircuitOp::y_rotation(o.target, kPi / 2));
  for (int k = 0; k < m; ++k) c.add(CircuitOp::conditional_2pi(config, o.rabi));
  c.add(CircuitOp::y_rotation(o.target, -kPi / 2));
  compile(c, spec, o.gates);
  for (auto& op : c.ops)
    if (op.kind == OpKind::kConditional2Pi) {
      if (rabi_used) *rabi_used = op.segments.front().rabi;
      op.segments.front().duration = d;
    }
  return c;
}

inline CalibrationSweep cccz_calibration_sweep(const SpinSystemSpec& spec, int m, const std::vector<double>& durations,
                                               const CalibrationOptions& o = {}) {
  if (m < 1 || m % 2 == 0) throw std::invalid_argument("cccz_calibration_sweep: m must be odd and positive");
  if (durations.size() < 8) throw std::invalid_argument("cccz_calibration_sweep: need at least 8 durations");
  const int qt = spec.qubit_of(o.target);
  if (qt < 0) throw std::invalid_argument("cccz_calibration_sweep: target is not active");
  const auto active = spec.active_nuclei();
  std::vector<int> config = o.config.empty() ? std::vector<int>(active.size(), 0) : o.config;
  // other nuclei sit in the addressed configuration
  std::map<int, int> bits;
  for (std::size_t k = 0; k < active.size(); ++k)
    if (active[k] != o.target) bits[active[k]] = config[k];
  const Matrix rho0 = register_basis_state(spec, bits);
  const int n = spec.num_qubits();

  RunOptions run = o.run;
  run.electron_tolerance = std::numeric_limits<double>::infinity();  // the electron is left excited on purpose

  CalibrationSweep out;
  out.repetitions = m;
  out.durations = durations;
  out.p_up.resize(durations.size());
  parallel_for(durations.size(), [&](std::size_t i) {
    double rabi = 0;
    const auto c = cccz_calibration_circuit(spec, m, durations[i], o, &rabi);
    const auto r = run_circuit(c, spec, rho0, run);
    const Matrix red = partial_trace_keep(r.rho, {qt}, n);
    out.p_up[i] = red(1, 1).real();
    if (i == 0) out.rabi = rabi;
  });
  FitData d{durations, out.p_up};
  out.fit = fit_sine(d);
  const double f = out.fit.params[1], phi = out.fit.params[2];
  const double centre = 0.5 * (durations.front() + durations.back());
  // maxima at 2π f t + φ = 2π k
  const double k = std::round(centre * f + phi / kTwoPi);
  out.best_duration = (k - phi / kTwoPi) / f;
  return out;
}

// Evenly spaced sweep around the nominal 2π time covering `periods` fringes of the m-pulse pattern.
inline std::vector<double> calibration_durations(double rabi, int m, int points, double periods = 1.0) {
  if (points < 2) throw std::invalid_argument("calibration_durations: need at least 2 points");
  const double t0 = 1 / rabi, fringe = 2 / (m * rabi);
  std::vector<double> d(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    d[i] = std::max(0.0, t0 + periods * fringe * (static_cast<double>(i) / (points - 1) - 0.5));
  return d;
}

}  // namespace donorsim
