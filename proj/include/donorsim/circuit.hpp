#pragma once

#include "donorsim/dynamics.hpp"

#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace donorsim {

enum class OpKind { kXRotation, kVirtualZ, kConditional2Pi, kMeasure, kWait, kInjectError };

struct ErrorAxis {
  double nx = 0, ny = 0, nz = 1;
  std::string name;  // "x", "y", "z", "phi=..." or "n=..."

  static ErrorAxis named(char c) {
    switch (c) {
      case 'x': case 'X': return {1, 0, 0, "x"};
      case 'y': case 'Y': return {0, 1, 0, "y"};
      case 'z': case 'Z': return {0, 0, 1, "z"};
    }
    throw std::invalid_argument(std::string("unknown error axis ") + c);
  }

  static ErrorAxis in_plane(double phi) {
    std::ostringstream s;
    s << std::setprecision(17) << "phi=" << phi;
    return {std::cos(phi), std::sin(phi), 0, s.str()};
  }
};

struct CircuitOp {
  OpKind kind = OpKind::kWait;
  int target = -1;  // spec nucleus index
  double angle = 0;
  double phase = 0;
  std::vector<int> config;  // conditional_2pi_esr: bits over the active nuclei
  char basis = 'Z';
  double duration = 0;
  ErrorAxis axis;
  double rabi = 0;  // 0 = choose at compile time
  std::vector<PulseSegment> segments;

  static CircuitOp x_rotation(int target, double angle, double phase = 0) {
    CircuitOp op;
    op.kind = OpKind::kXRotation;
    op.target = target;
    op.angle = angle;
    op.phase = phase;
    return op;
  }
  static CircuitOp y_rotation(int target, double angle) { return x_rotation(target, angle, kPi / 2); }
  static CircuitOp virtual_z(int target, double angle) {
    CircuitOp op;
    op.kind = OpKind::kVirtualZ;
    op.target = target;
    op.angle = angle;
    return op;
  }
  static CircuitOp conditional_2pi(std::vector<int> config, double rabi = 0) {
    CircuitOp op;
    op.kind = OpKind::kConditional2Pi;
    op.config = std::move(config);
    op.rabi = rabi;
    return op;
  }
  static CircuitOp measure(int target, char basis = 'Z') {
    CircuitOp op;
    op.kind = OpKind::kMeasure;
    op.target = target;
    op.basis = basis;
    return op;
  }
  static CircuitOp wait(double duration) {
    CircuitOp op;
    op.kind = OpKind::kWait;
    op.duration = duration;
    return op;
  }
  static CircuitOp inject_error(int target, double theta, ErrorAxis axis) {
    if (std::abs(theta) > kPi + 1e-12) throw std::invalid_argument("inject_error: |theta| must be <= pi");
    CircuitOp op;
    op.kind = OpKind::kInjectError;
    op.target = target;
    op.angle = theta;
    op.axis = std::move(axis);
    return op;
  }

  // 2x2 unitary for instantaneous ops.
  Matrix instant_unitary() const {
    if (kind == OpKind::kVirtualZ) return rotation_z(angle);
    if (kind == OpKind::kInjectError) return rotation_axis(angle, axis.nx, axis.ny, axis.nz);
    if (kind == OpKind::kXRotation) return rotation_xy(angle, phase);
    throw std::logic_error("op has no single-qubit unitary");
  }
};

struct Circuit {
  std::string name;
  std::vector<CircuitOp> ops;

  Circuit& add(CircuitOp op) {
    ops.push_back(std::move(op));
    return *this;
  }
  Circuit& add(const std::vector<CircuitOp>& more) {
    ops.insert(ops.end(), more.begin(), more.end());
    return *this;
  }
  Circuit& add(const Circuit& more) { return add(more.ops); }

  int count(OpKind k) const {
    int c = 0;
    for (const auto& op : ops) c += op.kind == k;
    return c;
  }
};

struct GateOptions {
  double esr_rabi = 0;         // Hz, 0 = crosstalk-aware automatic choice
  int crosstalk_k = 1;
  double near_line = 5e6;      // Hz, lines closer than this constrain the ESR Rabi frequency
  double default_nmr_rabi = 10e3;
};

// f_R = A / sqrt(4k² - 1): the line detuned by A nutates 2k full turns during one resonant 2π.
inline double crosstalk_optimal_rabi(double a, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (!(a > 0)) throw std::invalid_argument("A must be > 0");
  return a / std::sqrt(4.0 * k * k - 1.0);
}

// Closest other ESR line of the register, seen from `config`.
inline double nearest_line_spacing(const SpinSystemSpec& spec, const std::vector<int>& config) {
  const double f0 = esr_frequency(spec, config);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : esr_transition_table(spec)) {
    if (line.config.nuclear_bits == config) continue;
    best = std::min(best, std::abs(line.frequency - f0));
  }
  return best;
}

inline double esr_rabi_for(const SpinSystemSpec& spec, const std::vector<int>& config, const GateOptions& g) {
  if (g.esr_rabi > 0) return g.esr_rabi;
  const double spacing = nearest_line_spacing(spec, config);
  if (spacing < g.near_line) return crosstalk_optimal_rabi(spacing, g.crosstalk_k);
  return spec.esr_rabi;
}

inline double nmr_rabi_for(const SpinSystemSpec& spec, int nucleus, const GateOptions& g) {
  const double r = spec.nuclei.at(static_cast<std::size_t>(nucleus)).nmr_rabi;
  return r > 0 ? r : g.default_nmr_rabi;
}

// Attaches pulse segments to every op.
inline void compile(Circuit& c, const SpinSystemSpec& spec, const GateOptions& g = {}) {
  const auto active = spec.active_nuclei();
  for (auto& op : c.ops) {
    op.segments.clear();
    switch (op.kind) {
      case OpKind::kXRotation: {
        if (spec.qubit_of(op.target) < 0) throw std::invalid_argument("x_rotation target is not an active nucleus");
        if (!std::isfinite(op.angle)) throw std::invalid_argument("non-finite rotation angle");
        if (op.angle == 0) break;
        PulseSegment s;
        s.channel = Channel::kNmr;
        s.nucleus = op.target;
        s.drive_frequency = nmr_frequency(spec, op.target, 0);
        s.rabi = op.rabi > 0 ? op.rabi : nmr_rabi_for(spec, op.target, g);
        s.phase = op.angle < 0 ? op.phase + kPi : op.phase;
        s.duration = std::abs(op.angle) / (kTwoPi * s.rabi);
        s.label = "nmr " + spec.nuclei[op.target].label;
        op.segments.push_back(s);
        break;
      }
      case OpKind::kConditional2Pi: {
        if (op.config.size() != active.size())
          throw std::invalid_argument("conditional_2pi_esr must name every active nucleus");
        PulseSegment s;
        s.channel = Channel::kEsr;
        s.drive_frequency = esr_frequency(spec, op.config);
        s.rabi = op.rabi > 0 ? op.rabi : esr_rabi_for(spec, op.config, g);
        s.duration = 1.0 / s.rabi;
        std::string bits;
        for (int b : op.config) bits += b ? '1' : '0';
        s.label = "esr 2pi " + bits;
        op.segments.push_back(s);
        break;
      }
      case OpKind::kWait:
        if (op.duration < 0) throw std::invalid_argument("wait duration must be >= 0");
        if (op.duration > 0) op.segments.push_back(PulseSegment::wait(op.duration));
        break;
      case OpKind::kVirtualZ:
      case OpKind::kInjectError:
      case OpKind::kMeasure:
        if (spec.qubit_of(op.target) < 0) throw std::invalid_argument("op target is not an active nucleus");
        break;
    }
  }
}

inline double circuit_duration(const Circuit& c) {
  double t = 0;
  for (const auto& op : c.ops)
    for (const auto& s : op.segments) t += s.duration;
  return t;
}

struct RunOptions {
  NoiseModel noise;  // empty = noiseless
  DriveModel drive;
  IntegratorOptions integrator;
  double electron_tolerance = 1e-6;
};

struct RunResult {
  Matrix rho;
  double duration = 0;
  double max_electron_up_at_esr = 0;  // precondition monitor for the conditional 2π gates
  std::vector<int> measured;          // nuclei with a measure op, in order
};

inline double electron_up_population(const Matrix& rho, int num_qubits) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  const std::size_t mask = qubit_mask(0, num_qubits);
  double p = 0;
  for (std::size_t a = 0; a < dim; ++a)
    if (a & mask) p += rho(a, a).real();
  return p;
}

// Runs a compiled circuit from the density matrix `rho0` over the full register.
inline RunResult run_circuit(const Circuit& c, const SpinSystemSpec& spec, const Matrix& rho0,
                             const RunOptions& opts = {}) {
  Evolver ev(spec, opts.noise, opts.drive, opts.integrator);
  const int n = ev.num_qubits();
  RunResult out;
  out.rho = rho0;
  for (const auto& op : c.ops) {
    switch (op.kind) {
      case OpKind::kVirtualZ:
      case OpKind::kInjectError: {
        const Matrix u = embed(op.instant_unitary(), spec.qubit_of(op.target), n);
        out.rho = u * out.rho * u.adjoint();
        break;
      }
      case OpKind::kMeasure:
        out.measured.push_back(op.target);
        break;
      case OpKind::kConditional2Pi: {
        if (op.segments.empty()) throw std::logic_error("circuit must be compiled before running");
        const double up = electron_up_population(out.rho, n);
        out.max_electron_up_at_esr = std::max(out.max_electron_up_at_esr, up);
        if (up > opts.electron_tolerance && !opts.noise.any())
          log::warn("conditional 2pi gate entered with electron-up population " + std::to_string(up));
        for (const auto& s : op.segments) ev.apply(out.rho, s);
        break;
      }
      case OpKind::kXRotation:
      case OpKind::kWait:
        if (op.segments.empty() && (op.angle != 0 || op.duration != 0))
          throw std::logic_error("circuit must be compiled before running");
        for (const auto& s : op.segments) ev.apply(out.rho, s);
        break;
    }
  }
  out.duration = ev.time();
  return out;
}

// Noiseless propagator of a compiled circuit over the full register.
inline Matrix circuit_unitary(const Circuit& c, const SpinSystemSpec& spec, const DriveModel& drive = {}) {
  Evolver ev(spec, {}, drive);
  const int n = ev.num_qubits();
  Matrix u = Matrix::Identity(std::size_t{1} << n, std::size_t{1} << n);
  for (const auto& op : c.ops) {
    if (op.kind == OpKind::kVirtualZ || op.kind == OpKind::kInjectError) {
      u = embed(op.instant_unitary(), spec.qubit_of(op.target), n) * u;
      continue;
    }
    for (const auto& s : op.segments) ev.apply_unitary(u, s);
  }
  return u;
}

// Restriction of a full-register operator to the electron-|↓> nuclear block.
inline Matrix nuclear_block(const Matrix& u, int num_qubits) {
  const std::size_t half = std::size_t{1} << (num_qubits - 1);
  return u.topLeftCorner(half, half);
}

// One op per line: kind, target label, then key=value parameters.
inline std::string dump_circuit(const Circuit& c, const SpinSystemSpec& spec) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# circuit " << (c.name.empty() ? "unnamed" : c.name) << " ops=" << c.ops.size() << '\n';
  auto label = [&](int t) { return t >= 0 ? spec.nuclei.at(static_cast<std::size_t>(t)).label : std::string("e"); };
  for (const auto& op : c.ops) {
    switch (op.kind) {
      case OpKind::kXRotation:
        out << "x_rotation " << label(op.target) << " angle=" << op.angle << " phase=" << op.phase;
        break;
      case OpKind::kVirtualZ:
        out << "virtual_z " << label(op.target) << " angle=" << op.angle;
        break;
      case OpKind::kConditional2Pi: {
        out << "conditional_2pi_esr config=";
        for (int b : op.config) out << b;
        break;
      }
      case OpKind::kMeasure:
        out << "measure " << label(op.target) << " basis=" << op.basis;
        break;
      case OpKind::kWait:
        out << "wait duration=" << op.duration;
        break;
      case OpKind::kInjectError:
        out << "inject_error " << label(op.target) << " theta=" << op.angle << " axis=" << op.axis.name;
        break;
    }
    for (const auto& s : op.segments) {
      out << " | seg";
      if (s.channel == Channel::kEsr) out << " esr";
      if (s.channel == Channel::kNmr) out << " nmr";
      if (s.channel == Channel::kNone) out << " free";
      out << " f=" << s.drive_frequency << " rabi=" << s.rabi << " phase=" << s.phase << " t=" << s.duration;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace donorsim
