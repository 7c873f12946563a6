#pragma once

#include "donorsim/core.hpp"
#include "donorsim/log.hpp"
#include "donorsim/spin_system.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace donorsim {

// ---------------------------------------------------------------------------
// State

struct DensityMatrix {
  Matrix rho;
  int num_qubits = 0;

  static DensityMatrix from_ket(const Vector& psi) {
    DensityMatrix out;
    out.num_qubits = static_cast<int>(std::lround(std::log2(static_cast<double>(psi.size()))));
    if ((std::size_t{1} << out.num_qubits) != static_cast<std::size_t>(psi.size()))
      throw std::invalid_argument("state vector length must be a power of two");
    out.rho = projector(psi.normalized());
    return out;
  }

  static DensityMatrix basis(std::size_t index, int num_qubits) {
    return from_ket(basis_ket(index, std::size_t{1} << num_qubits));
  }

  static DensityMatrix from_matrix(Matrix m) {
    DensityMatrix out;
    out.num_qubits = static_cast<int>(std::lround(std::log2(static_cast<double>(m.rows()))));
    out.rho = std::move(m);
    return out;
  }

  std::size_t dim() const { return static_cast<std::size_t>(rho.rows()); }

  double trace() const { return rho.trace().real(); }

  double population(std::size_t index) const { return rho(index, index).real(); }

  void validate(double herm_tol = 1e-10, double trace_tol = 1e-9, double eig_tol = 1e-8) const {
    if (rho.rows() != rho.cols() || static_cast<std::size_t>(rho.rows()) != (std::size_t{1} << num_qubits))
      throw std::invalid_argument("density matrix has wrong shape");
    if (!is_hermitian(rho, herm_tol)) throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(rho.trace() - cplx{1.0}) > trace_tol) throw std::invalid_argument("density matrix trace != 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho);
    if (es.eigenvalues().minCoeff() < -eig_tol) throw std::invalid_argument("density matrix is not PSD");
  }
};

inline double state_fidelity(const Matrix& rho, const Vector& psi) {
  if (rho.rows() != psi.size()) throw std::invalid_argument("state_fidelity: dimension mismatch");
  return (psi.adjoint() * rho * psi)(0, 0).real();
}

inline double state_fidelity(const DensityMatrix& rho, const Vector& psi) { return state_fidelity(rho.rho, psi); }

// ---------------------------------------------------------------------------
// Drives and frames

enum class Channel { kNone, kEsr, kNmr };

struct PulseSegment {
  Channel channel = Channel::kNone;
  int nucleus = -1;            // spec index for NMR segments
  double drive_frequency = 0;  // Hz
  double rabi = 0;             // Hz, full nutation cycles per second on resonance
  double phase = 0;            // rad, rotation axis angle in the xy plane
  double duration = 0;         // s
  double frame = std::numeric_limits<double>::quiet_NaN();  // NaN = drive frequency
  std::string label;

  double frame_frequency() const { return std::isnan(frame) ? drive_frequency : frame; }

  void validate() const {
    if (!(duration >= 0)) throw std::invalid_argument("segment duration must be >= 0");
    if (!(rabi >= 0)) throw std::invalid_argument("segment rabi amplitude must be >= 0");
    if (channel == Channel::kNmr && nucleus < 0) throw std::invalid_argument("NMR segment needs a nucleus");
  }

  static PulseSegment wait(double duration) {
    PulseSegment s;
    s.duration = duration;
    s.label = "wait";
    return s;
  }
};

enum class DriveSelectivity {
  kAllLines,      // the drive couples every transition of the driven spin
  kWindowed,      // only transitions within `window` of the drive
  kResonantOnly,  // only transitions within `resonance_tol` (ideal selectivity)
};

struct DriveModel {
  DriveSelectivity selectivity = DriveSelectivity::kAllLines;
  double window = 1e6;          // Hz
  double resonance_tol = 1.0;   // Hz
  double capture_window = 5e6;  // Hz, a drive further than this from every line is logged
};

// Rotating-frame reference per spin. Electron: subtracts F_e on |↑>. Nucleus: subtracts F_i on |⇓>.
struct Frames {
  double electron = 0;
  std::vector<double> nuclear;  // indexed by register qubit - 1
};

inline Frames default_frames(const SpinSystemSpec& spec) {
  Frames f;
  const auto active = spec.active_nuclei();
  f.electron = esr_frequency(spec, std::vector<int>(active.size(), 0));
  for (int i : active) f.nuclear.push_back(nmr_frequency(spec, i, 0));
  return f;
}

namespace detail {

// Diagonal of the frame-transformed secular Hamiltonian. Electron-down states of an
// unshifted frame sit at zero; see the derivation in the README.
inline RealVector rotating_diagonal(const SpinSystemSpec& spec, const Frames& frames) {
  const auto active = spec.active_nuclei();
  const int n = 1 + static_cast<int>(active.size());
  const std::size_t dim = std::size_t{1} << n;
  double base = spec.electron_gamma * spec.b_field - frames.electron;
  for (int i = 0; i < static_cast<int>(spec.nuclei.size()); ++i) {
    const auto& nuc = spec.nuclei[i];
    base += spec.is_active(i) ? nuc.hyperfine / 2 : nuc.hyperfine * detail::m_of_bit(nuc.frozen_bit);
  }
  RealVector diag(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    const int e = bit_of(a, 0, n);
    double value = 0, esr = base;
    for (int k = 0; k < static_cast<int>(active.size()); ++k) {
      const auto& nuc = spec.nuclei[active[k]];
      const int down = 1 - bit_of(a, k + 1, n);
      esr -= nuc.hyperfine * down;
      value += down * (nuc.gamma * spec.b_field + nuc.hyperfine / 2 - frames.nuclear[k]);
    }
    diag(a) = value + e * esr;
  }
  return diag;
}

}  // namespace detail

// Frame-transformed Hamiltonian (Hz) for one segment at time t. Off-diagonal couplings
// are (f_R/2) e^{∓iφ} so that a resonant line nutates at f_R.
inline Matrix rotating_frame_hamiltonian(const SpinSystemSpec& spec, const Frames& frames,
                                         const PulseSegment& seg, double t = 0,
                                         const DriveModel& drive = {}) {
  seg.validate();
  const int n = spec.num_qubits();
  const std::size_t dim = std::size_t{1} << n;
  const RealVector diag = detail::rotating_diagonal(spec, frames);
  Matrix h = Matrix::Zero(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) h(a, a) = diag(a);
  if (seg.channel == Channel::kNone || seg.rabi == 0) return h;

  int q = 0;
  double frame = frames.electron;
  if (seg.channel == Channel::kNmr) {
    q = spec.qubit_of(seg.nucleus);
    if (q < 0) throw std::invalid_argument("NMR segment targets an inactive nucleus");
    frame = frames.nuclear[q - 1];
  }
  // A drive detuned from the frame rotates in it; NMR frames subtract on bit 0 so the sense flips.
  const double sense = seg.channel == Channel::kEsr ? 1.0 : -1.0;
  const double phase = seg.phase + sense * kTwoPi * (seg.drive_frequency - frame) * t;
  const cplx up = 0.5 * seg.rabi * std::exp(-kI * phase);
  const std::size_t mask = qubit_mask(q, n);
  bool captured = false;
  for (std::size_t a = 0; a < dim; ++a) {
    if (a & mask) continue;
    const std::size_t b = a | mask;
    const double detuning = std::abs(diag(b) - diag(a) + sense * (frame - seg.drive_frequency));
    captured = captured || detuning <= drive.capture_window;
    bool on = true;
    if (drive.selectivity == DriveSelectivity::kWindowed) on = detuning <= drive.window;
    if (drive.selectivity == DriveSelectivity::kResonantOnly) on = detuning <= drive.resonance_tol;
    if (!on) continue;
    h(a, b) = up;
    h(b, a) = std::conj(up);
  }
  if (!captured)
    log::debug("drive at " + std::to_string(seg.drive_frequency) + " Hz is outside every capture window");
  return h;
}

// exp(-i 2π H τ) for Hermitian H in Hz.
inline Matrix unitary_propagator(const Matrix& h, double tau) {
  if (!is_hermitian(h, 1e-9 * std::max(1.0, max_abs(h))))
    throw std::invalid_argument("Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
  const RealVector& ev = es.eigenvalues();
  Vector phases(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) phases(k) = std::exp(-kI * kTwoPi * ev(k) * tau);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Noise

enum class DephasingRate {
  kCalibrated,  // γ(t) = t/Tφ², coherence exp(-(t/Tφ)²)
  kLiteral,     // γ(t) = 2t/Tφ², coherence exp(-2(t/Tφ)²)
};

enum class ClockOrigin {
  kCircuitStart,  // one clock per execution
  kSegmentStart,  // reset at every segment boundary
  kPulseStart,    // reset whenever this spin is driven
};

struct SpinNoise {
  double t1 = std::numeric_limits<double>::infinity();
  double t_phi = std::numeric_limits<double>::infinity();
  bool relaxation = false;
  bool dephasing = false;
  ClockOrigin clock = ClockOrigin::kCircuitStart;
};

struct NoiseModel {
  std::vector<SpinNoise> spins;  // one per register qubit
  DephasingRate rate = DephasingRate::kCalibrated;
  double clock_offset = 0;  // s, added to every spin's elapsed time

  bool any() const {
    return std::any_of(spins.begin(), spins.end(), [](const SpinNoise& s) { return s.relaxation || s.dephasing; });
  }

  // γ(t) slope: γ_q(t) = slope_q * elapsed_q
  double dephasing_slope(int q) const {
    const auto& s = spins.at(static_cast<std::size_t>(q));
    if (!s.dephasing) return 0.0;
    const double k = rate == DephasingRate::kCalibrated ? 1.0 : 2.0;
    return k / (s.t_phi * s.t_phi);
  }

  void validate(int num_qubits) const {
    if (spins.empty()) return;
    if (static_cast<int>(spins.size()) != num_qubits) throw std::invalid_argument("noise model size != register size");
    for (const auto& s : spins) {
      if (s.dephasing && !(s.t_phi > 0)) throw std::invalid_argument("T_phi must be > 0");
      if (s.relaxation && !(s.t1 > 0)) throw std::invalid_argument("T1 must be > 0");
    }
  }
};

inline NoiseModel noiseless(int num_qubits) {
  NoiseModel m;
  m.spins.assign(static_cast<std::size_t>(num_qubits), SpinNoise{});
  return m;
}

// Device coherence times: dephasing on every spin, nuclear relaxation, electron relaxation only
// when the device gives an electron T1. The electron clock restarts with each ESR pulse because
// the electron is returned to |↓> between gates.
inline NoiseModel device_noise(const SpinSystemSpec& spec, bool dephasing = true, bool relaxation = true) {
  NoiseModel m;
  SpinNoise e;
  e.t_phi = spec.electron_t2_star;
  e.dephasing = dephasing && std::isfinite(spec.electron_t2_star);
  e.t1 = spec.electron_t1;
  e.relaxation = relaxation && std::isfinite(spec.electron_t1);
  e.clock = ClockOrigin::kPulseStart;
  m.spins.push_back(e);
  for (int i : spec.active_nuclei()) {
    SpinNoise s;
    s.t_phi = spec.nuclei[i].t2_star;
    s.t1 = spec.nuclei[i].t1;
    s.dephasing = dephasing;
    s.relaxation = relaxation;
    m.spins.push_back(s);
  }
  return m;
}

struct CollapseOperator {
  Matrix op;  // already scaled by the square root of its rate
  std::string label;
};

// Collapse operators at per-spin elapsed clock times.
inline std::vector<CollapseOperator> make_collapse_operators(const NoiseModel& noise, int num_qubits,
                                                            const std::vector<double>& elapsed) {
  std::vector<CollapseOperator> out;
  for (int q = 0; q < static_cast<int>(noise.spins.size()); ++q) {
    const auto& s = noise.spins[q];
    if (s.relaxation)
      out.push_back({embed(pauli::lower(), q, num_qubits) / std::sqrt(s.t1), "relax" + std::to_string(q)});
    if (s.dephasing) {
      const double gamma = noise.dephasing_slope(q) * std::max(0.0, elapsed.at(q) + noise.clock_offset);
      out.push_back({std::sqrt(gamma) * embed(pauli::Z(), q, num_qubits), "dephase" + std::to_string(q)});
    }
  }
  return out;
}

inline std::vector<CollapseOperator> make_collapse_operators(const NoiseModel& noise, int num_qubits, double t) {
  return make_collapse_operators(noise, num_qubits, std::vector<double>(noise.spins.size(), t));
}

inline Matrix lindblad_rhs(const Matrix& h, const std::vector<CollapseOperator>& ops, const Matrix& rho) {
  Matrix out = -kI * kTwoPi * (h * rho - rho * h);
  for (const auto& c : ops) {
    const Matrix ld = c.op.adjoint();
    const Matrix ldl = ld * c.op;
    out += c.op * rho * ld - 0.5 * (ldl * rho + rho * ldl);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integration

enum class Integrator {
  kBlockExponential,  // exact per-block exponentials, Magnus-4 in the time-dependent rates
  kRk4,               // classical fixed-step RK4 on the full matrix
};

struct IntegratorOptions {
  Integrator method = Integrator::kBlockExponential;
  double max_step = 1e-6;       // s
  double tphi_fraction = 0.01;  // substep <= fraction * min T_phi
  double trace_tol = 1e-6;      // abort threshold on |tr ρ - 1|
  int max_block = 8;            // larger coupled blocks fall back to RK4
};

namespace detail {

inline std::vector<std::vector<int>> coupled_blocks(const Matrix& h) {
  const int dim = static_cast<int>(h.rows());
  std::vector<int> parent(dim);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      if (h(i, j) != cplx{} || h(j, i) != cplx{}) parent[find(i)] = find(j);
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(dim, -1);
  for (int i = 0; i < dim; ++i) {
    const int r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(i);
  }
  return blocks;
}

}  // namespace detail

// Runs segments on a register, keeping frames, time and dephasing clocks between calls.
class Evolver {
 public:
  Evolver(SpinSystemSpec spec, NoiseModel noise = {}, DriveModel drive = {}, IntegratorOptions opts = {})
      : spec_(std::move(spec)), noise_(std::move(noise)), drive_(drive), opts_(opts) {
    spec_.validate();
    n_ = spec_.num_qubits();
    if (noise_.spins.empty()) noise_ = noiseless(n_);
    noise_.validate(n_);
    frames_ = default_frames(spec_);
    origin_.assign(static_cast<std::size_t>(n_), 0.0);
  }

  const SpinSystemSpec& spec() const { return spec_; }
  const NoiseModel& noise() const { return noise_; }
  const DriveModel& drive() const { return drive_; }
  const Frames& frames() const { return frames_; }
  int num_qubits() const { return n_; }
  double time() const { return time_; }

  void set_drive(const DriveModel& d) { drive_ = d; }

  // Propagates ρ through one segment (Lindblad when noise is on).
  void apply(Matrix& rho, const PulseSegment& seg) {
    seg.validate();
    shift_frames(&rho, nullptr, seg);
    update_clocks(seg);
    const Matrix h = rotating_frame_hamiltonian(spec_, frames_, seg, time_, drive_);
    if (!noise_.any()) {
      const Matrix u = unitary_propagator(h, seg.duration);
      rho = u * rho * u.adjoint();
    } else if (opts_.method == Integrator::kRk4) {
      integrate_rk4(rho, h, seg.duration);
    } else {
      const auto blocks = detail::coupled_blocks(h);
      std::size_t largest = 0;
      for (const auto& b : blocks) largest = std::max(largest, b.size());
      if (static_cast<int>(largest) > opts_.max_block)
        integrate_rk4(rho, h, seg.duration);
      else
        integrate_blocks(rho, h, blocks, seg.duration);
    }
    rho = 0.5 * (rho + rho.adjoint());
    time_ += seg.duration;
    const double drift = std::abs(rho.trace().real() - 1.0);
    if (drift > opts_.trace_tol)
      throw SimulationError("trace drift " + std::to_string(drift) + " after segment '" + seg.label +
                            "'; reduce integrator.max_step");
  }

  // Closed-system propagator of one segment, composed onto `u`.
  void apply_unitary(Matrix& u, const PulseSegment& seg) {
    seg.validate();
    shift_frames(nullptr, &u, seg);
    update_clocks(seg);
    const Matrix h = rotating_frame_hamiltonian(spec_, frames_, seg, time_, drive_);
    u = unitary_propagator(h, seg.duration) * u;
    time_ += seg.duration;
  }

  void reset() {
    time_ = 0;
    frames_ = default_frames(spec_);
    origin_.assign(static_cast<std::size_t>(n_), 0.0);
  }

  std::vector<double> elapsed() const {
    std::vector<double> out(origin_.size());
    for (std::size_t q = 0; q < origin_.size(); ++q) out[q] = time_ - origin_[q];
    return out;
  }

 private:
  void shift_frames(Matrix* rho, Matrix* u, const PulseSegment& seg) {
    if (seg.channel == Channel::kNone) return;
    int q = 0;
    double* frame = &frames_.electron;
    if (seg.channel == Channel::kNmr) {
      q = spec_.qubit_of(seg.nucleus);
      if (q < 0) throw std::invalid_argument("NMR segment targets an inactive nucleus");
      frame = &frames_.nuclear[q - 1];
    }
    const double target = seg.frame_frequency();
    if (target == *frame) return;
    // Amplitudes on the frame-shifted level pick up exp(i 2π ΔF t).
    const int shifted_bit = q == 0 ? 1 : 0;
    const cplx ph = std::exp(kI * kTwoPi * (target - *frame) * time_);
    const std::size_t dim = std::size_t{1} << n_;
    Vector d(dim);
    for (std::size_t a = 0; a < dim; ++a) d(a) = bit_of(a, q, n_) == shifted_bit ? ph : cplx{1.0};
    if (rho) *rho = d.asDiagonal() * (*rho) * d.conjugate().asDiagonal();
    if (u) *u = d.asDiagonal() * (*u);
    *frame = target;
  }

  void update_clocks(const PulseSegment& seg) {
    const int driven = seg.channel == Channel::kEsr   ? 0
                       : seg.channel == Channel::kNmr ? spec_.qubit_of(seg.nucleus)
                                                      : -1;
    for (int q = 0; q < n_; ++q) {
      const auto clock = noise_.spins[q].clock;
      if (clock == ClockOrigin::kSegmentStart || (clock == ClockOrigin::kPulseStart && q == driven))
        origin_[q] = time_;
    }
  }

  double substep(double duration) const {
    double h = std::min(duration, opts_.max_step);
    for (const auto& s : noise_.spins)
      if (s.dephasing) h = std::min(h, opts_.tphi_fraction * s.t_phi);
    if (h <= 0) return duration;
    const double steps = std::ceil(duration / h - 1e-9);
    return duration / std::max(1.0, steps);
  }

  // Elementwise decay rate of ρ_ab at absolute time t (dephasing + relaxation anticommutator).
  void rate_tables(std::vector<double>& slope, std::vector<double>& offset, std::vector<double>& anti) const {
    slope.assign(static_cast<std::size_t>(n_), 0.0);
    offset.assign(static_cast<std::size_t>(n_), 0.0);
    anti.assign(static_cast<std::size_t>(n_), 0.0);
    for (int q = 0; q < n_; ++q) {
      slope[q] = 2.0 * noise_.dephasing_slope(q);
      offset[q] = origin_[q] - noise_.clock_offset;
      if (noise_.spins[q].relaxation) anti[q] = 1.0 / noise_.spins[q].t1;
    }
  }

  // Relaxation jump term exp(h J) = Π_q (1 + h J_q) since J_q² = 0.
  void apply_jumps(Matrix& rho, double h) const {
    for (int q = 0; q < n_; ++q) {
      if (!noise_.spins[q].relaxation) continue;
      const double w = h / noise_.spins[q].t1;
      const std::size_t mask = qubit_mask(q, n_);
      const std::size_t dim = std::size_t{1} << n_;
      for (std::size_t a = 0; a < dim; ++a) {
        if (!(a & mask)) continue;
        for (std::size_t b = 0; b < dim; ++b) {
          if (!(b & mask)) continue;
          rho(a & ~mask, b & ~mask) += w * rho(a, b);
        }
      }
    }
  }

  bool has_relaxation() const {
    return std::any_of(noise_.spins.begin(), noise_.spins.end(), [](const SpinNoise& s) { return s.relaxation; });
  }

  void integrate_blocks(Matrix& rho, const Matrix& h, const std::vector<std::vector<int>>& blocks, double duration) {
    std::vector<double> slope, offset, anti;
    rate_tables(slope, offset, anti);
    const std::size_t dim = std::size_t{1} << n_;
    // Per-element rate c_ab(t) = c0_ab + c1_ab * t, with t measured from the segment start.
    const double t_start = time_;
    auto rate_coeffs = [&](std::size_t a, std::size_t b, double& c0, double& c1) {
      c0 = 0;
      c1 = 0;
      for (int q = 0; q < n_; ++q) {
        const std::size_t m = qubit_mask(q, n_);
        if (slope[q] != 0 && ((a ^ b) & m)) {
          c0 += slope[q] * (t_start - offset[q]);
          c1 += slope[q];
        }
        if (anti[q] != 0) c0 += 0.5 * anti[q] * (((a & m) ? 1 : 0) + ((b & m) ? 1 : 0));
      }
    };
    const bool jumps = has_relaxation();
    const bool diagonal = std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.size() == 1; });

    if (diagonal) {
      const double step = jumps ? substep(duration) : duration;
      const int steps = step > 0 ? static_cast<int>(std::lround(duration / step)) : 0;
      for (int s = 0; s < std::max(steps, 0); ++s) {
        const double t0 = s * step, t1 = t0 + step;
        if (jumps) apply_jumps(rho, step / 2);
        for (std::size_t a = 0; a < dim; ++a)
          for (std::size_t b = 0; b < dim; ++b) {
            double c0, c1;
            rate_coeffs(a, b, c0, c1);
            const double integral = c0 * step + 0.5 * c1 * (t1 * t1 - t0 * t0);
            const double dphase = kTwoPi * (h(a, a).real() - h(b, b).real()) * step;
            rho(a, b) *= std::exp(-integral) * std::exp(-kI * dphase);
          }
        if (jumps) apply_jumps(rho, step / 2);
        rho = 0.5 * (rho + rho.adjoint());
      }
      return;
    }

    const double step = substep(duration);
    const int steps = step > 0 ? static_cast<int>(std::lround(duration / step)) : 0;
    const double g1 = 0.5 - std::sqrt(3.0) / 6.0, g2 = 0.5 + std::sqrt(3.0) / 6.0;
    const std::size_t nb = blocks.size();

    struct Pair {
      std::size_t i, j;
      Matrix coherent;  // constant part of the vectorized generator
      RealVector c0, c1;
    };
    std::vector<Pair> pairs;
    pairs.reserve(nb * (nb + 1) / 2);
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = i; j < nb; ++j) {
        const auto& bi = blocks[i];
        const auto& bj = blocks[j];
        const int ki = static_cast<int>(bi.size()), kj = static_cast<int>(bj.size());
        Matrix hi(ki, ki), hj(kj, kj);
        for (int r = 0; r < ki; ++r)
          for (int c = 0; c < ki; ++c) hi(r, c) = h(bi[r], bi[c]);
        for (int r = 0; r < kj; ++r)
          for (int c = 0; c < kj; ++c) hj(r, c) = h(bj[r], bj[c]);
        Pair p{i, j, -kI * kTwoPi * (kron(Matrix(Matrix::Identity(kj, kj)), hi) - kron(Matrix(hj.transpose()), Matrix(Matrix::Identity(ki, ki)))),
               RealVector(ki * kj), RealVector(ki * kj)};
        for (int c = 0; c < kj; ++c)
          for (int r = 0; r < ki; ++r) {
            double c0, c1;
            rate_coeffs(static_cast<std::size_t>(bi[r]), static_cast<std::size_t>(bj[c]), c0, c1);
            p.c0(c * ki + r) = c0;
            p.c1(c * ki + r) = c1;
          }
        pairs.push_back(std::move(p));
      }

    for (int s = 0; s < steps; ++s) {
      const double t0 = s * step;
      if (jumps) apply_jumps(rho, step / 2);
      for (const auto& p : pairs) {
        const auto& bi = blocks[p.i];
        const auto& bj = blocks[p.j];
        const int ki = static_cast<int>(bi.size()), kj = static_cast<int>(bj.size());
        Vector x(ki * kj);
        for (int c = 0; c < kj; ++c)
          for (int r = 0; r < ki; ++r) x(c * ki + r) = rho(bi[r], bj[c]);
        const double ta = t0 + g1 * step, tb = t0 + g2 * step;
        Matrix ga = p.coherent, gb = p.coherent;
        ga.diagonal() -= (p.c0 + ta * p.c1).cast<cplx>();
        gb.diagonal() -= (p.c0 + tb * p.c1).cast<cplx>();
        Matrix omega = 0.5 * step * (ga + gb) + (std::sqrt(3.0) / 12.0) * step * step * (gb * ga - ga * gb);
        x = omega.exp() * x;
        for (int c = 0; c < kj; ++c)
          for (int r = 0; r < ki; ++r) {
            rho(bi[r], bj[c]) = x(c * ki + r);
            if (p.i != p.j) rho(bj[c], bi[r]) = std::conj(x(c * ki + r));
          }
      }
      if (jumps) apply_jumps(rho, step / 2);
      rho = 0.5 * (rho + rho.adjoint());
    }
  }

  void integrate_rk4(Matrix& rho, const Matrix& h, double duration) {
    double step = std::min(opts_.max_step, duration);
    const double hmax = max_abs(h);
    if (hmax > 0) step = std::min(step, 1.0 / (50.0 * hmax));
    for (const auto& s : noise_.spins)
      if (s.dephasing) step = std::min(step, opts_.tphi_fraction * s.t_phi);
    if (step <= 0) return;
    const int steps = static_cast<int>(std::ceil(duration / step - 1e-9));
    step = duration / steps;
    const double t_start = time_;
    auto ops_at = [&](double t) {
      std::vector<double> el(origin_.size());
      for (std::size_t q = 0; q < el.size(); ++q) el[q] = t - origin_[q];
      return make_collapse_operators(noise_, n_, el);
    };
    for (int s = 0; s < steps; ++s) {
      const double t = t_start + s * step;
      const auto o0 = ops_at(t);
      const auto om = ops_at(t + step / 2);
      const auto o1 = ops_at(t + step);
      const Matrix k1 = lindblad_rhs(h, o0, rho);
      const Matrix k2 = lindblad_rhs(h, om, rho + 0.5 * step * k1);
      const Matrix k3 = lindblad_rhs(h, om, rho + 0.5 * step * k2);
      const Matrix k4 = lindblad_rhs(h, o1, rho + step * k3);
      rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      rho = 0.5 * (rho + rho.adjoint());
    }
  }

  SpinSystemSpec spec_;
  NoiseModel noise_;
  DriveModel drive_;
  IntegratorOptions opts_;
  Frames frames_;
  int n_ = 0;
  double time_ = 0;
  std::vector<double> origin_;
};

inline DensityMatrix evolve_unitary(const SpinSystemSpec& spec, const DensityMatrix& state,
                                    const std::vector<PulseSegment>& segments, const DriveModel& drive = {}) {
  state.validate();
  Evolver ev(spec, {}, drive);
  Matrix u = Matrix::Identity(state.dim(), state.dim());
  for (const auto& s : segments) ev.apply_unitary(u, s);
  DensityMatrix out = state;
  out.rho = u * state.rho * u.adjoint();
  return out;
}

// Piecewise-constant Hamiltonians given directly as (H in Hz, duration).
inline DensityMatrix evolve_unitary(const DensityMatrix& state, const std::vector<std::pair<Matrix, double>>& pieces) {
  state.validate();
  DensityMatrix out = state;
  for (const auto& [h, tau] : pieces) {
    const Matrix u = unitary_propagator(h, tau);
    out.rho = u * out.rho * u.adjoint();
  }
  return out;
}

inline DensityMatrix evolve_lindblad(const SpinSystemSpec& spec, const DensityMatrix& state,
                                     const std::vector<PulseSegment>& segments, const NoiseModel& noise,
                                     const DriveModel& drive = {}, const IntegratorOptions& opts = {}) {
  state.validate();
  Evolver ev(spec, noise, drive, opts);
  DensityMatrix out = state;
  for (const auto& s : segments) ev.apply(out.rho, s);
  return out;
}

}  // namespace donorsim
