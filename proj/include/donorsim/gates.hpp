#pragma once

#include "donorsim/circuit.hpp"

#include <map>
#include <string>
#include <vector>

namespace donorsim {

// Spectator bits known to hold whenever the gate's condition is met (prunes ESR pulses).
using Hints = std::map<int, int>;

inline std::vector<CircuitOp> cccz(const SpinSystemSpec& spec, const std::vector<int>& config, double rabi = 0) {
  if (config.size() != spec.active_nuclei().size())
    throw std::invalid_argument("cccz: configuration must name every active nucleus");
  for (int b : config)
    if (b != 0 && b != 1) throw std::invalid_argument("cccz: bits must be 0 or 1");
  return {CircuitOp::conditional_2pi(config, rabi)};
}

// Phase -1 on every register configuration where `nuclei` match `pattern`.
inline std::vector<CircuitOp> controlled_phase(const SpinSystemSpec& spec, const std::vector<int>& nuclei,
                                               const std::vector<int>& pattern, const Hints& hints = {}) {
  if (nuclei.size() != pattern.size()) throw std::invalid_argument("controlled_phase: pattern size mismatch");
  const auto active = spec.active_nuclei();
  std::vector<int> fixed(active.size(), -1);
  for (std::size_t k = 0; k < nuclei.size(); ++k) {
    const int q = spec.qubit_of(nuclei[k]);
    if (q < 0) throw std::invalid_argument("controlled_phase: inactive nucleus");
    if (fixed[q - 1] >= 0) throw std::invalid_argument("controlled_phase: repeated nucleus");
    fixed[q - 1] = pattern[k];
  }
  for (const auto& [nuc, bit] : hints) {
    const int q = spec.qubit_of(nuc);
    if (q < 0) throw std::invalid_argument("controlled_phase: hint on inactive nucleus");
    if (fixed[q - 1] < 0) fixed[q - 1] = bit;
  }
  std::vector<int> free;
  for (std::size_t k = 0; k < fixed.size(); ++k)
    if (fixed[k] < 0) free.push_back(static_cast<int>(k));
  std::vector<CircuitOp> out;
  for (std::size_t m = 0; m < (std::size_t{1} << free.size()); ++m) {
    std::vector<int> config = fixed;
    for (std::size_t f = 0; f < free.size(); ++f) config[free[f]] = static_cast<int>((m >> (free.size() - 1 - f)) & 1u);
    out.push_back(CircuitOp::conditional_2pi(config));
  }
  return out;
}

// X on `target` where `controls` match `pattern`: Ry(π/2), phase on target |⇓>, Ry(-π/2).
inline std::vector<CircuitOp> controlled_x(const SpinSystemSpec& spec, const std::vector<int>& controls,
                                           const std::vector<int>& pattern, int target, const Hints& hints = {}) {
  for (int c : controls)
    if (c == target) throw std::invalid_argument("control and target must differ");
  std::vector<int> nuclei = controls, bits = pattern;
  nuclei.push_back(target);
  bits.push_back(0);
  std::vector<CircuitOp> out{CircuitOp::y_rotation(target, kPi / 2)};
  const auto phase = controlled_phase(spec, nuclei, bits, hints);
  out.insert(out.end(), phase.begin(), phase.end());
  out.push_back(CircuitOp::y_rotation(target, -kPi / 2));
  return out;
}

inline std::vector<CircuitOp> cnot_geometric(const SpinSystemSpec& spec, int control, int target, const Hints& hints = {}) {
  if (control == target) throw std::invalid_argument("cnot: control and target must differ");
  return controlled_x(spec, {control}, {1}, target, hints);
}

inline std::vector<CircuitOp> cz_gate(const SpinSystemSpec& spec, int a, int b, const Hints& hints = {}) {
  if (a == b) throw std::invalid_argument("cz: qubits must differ");
  return controlled_phase(spec, {a, b}, {1, 1}, hints);
}

inline Circuit toffoli_circuit(const SpinSystemSpec& spec, const std::vector<int>& controls, int target) {
  if (controls.size() != 3) throw std::invalid_argument("toffoli needs three controls");
  std::vector<int> all = controls;
  all.push_back(target);
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end())
    throw std::invalid_argument("toffoli needs four distinct nuclei");
  Circuit c;
  c.name = "toffoli";
  c.add(controlled_x(spec, controls, {1, 1, 1}, target));
  return c;
}

enum class BellState { kPhiPlus, kPhiMinus, kPsiPlus, kPsiMinus };

inline BellState parse_bell(const std::string& s) {
  if (s == "phi+" || s == "Phi+") return BellState::kPhiPlus;
  if (s == "phi-" || s == "Phi-") return BellState::kPhiMinus;
  if (s == "psi+" || s == "Psi+") return BellState::kPsiPlus;
  if (s == "psi-" || s == "Psi-") return BellState::kPsiMinus;
  throw std::invalid_argument("unknown Bell label " + s);
}

inline std::string bell_name(BellState b) {
  switch (b) {
    case BellState::kPhiPlus: return "phi+";
    case BellState::kPhiMinus: return "phi-";
    case BellState::kPsiPlus: return "psi+";
    case BellState::kPsiMinus: return "psi-";
  }
  return "?";
}

// Φ± = (|00> ± |11>)/√2, Ψ± = (|01> ± |10>)/√2 with the first listed qubit most significant.
inline Vector bell_vector(BellState b) {
  Vector v = Vector::Zero(4);
  const double s = 1.0 / std::sqrt(2.0);
  switch (b) {
    case BellState::kPhiPlus: v(0) = s; v(3) = s; break;
    case BellState::kPhiMinus: v(0) = s; v(3) = -s; break;
    case BellState::kPsiPlus: v(1) = s; v(2) = s; break;
    case BellState::kPsiMinus: v(1) = s; v(2) = -s; break;
  }
  return v;
}

// Other active nuclei are assumed |⇓>.
inline Circuit bell_prep_circuit(const SpinSystemSpec& spec, int a, int b, BellState which) {
  if (a == b) throw std::invalid_argument("bell pair must be two distinct nuclei");
  if (spec.qubit_of(a) < 0 || spec.qubit_of(b) < 0) throw std::invalid_argument("bell pair must be active");
  Hints idle;
  for (int i : spec.active_nuclei())
    if (i != a && i != b) idle[i] = 0;
  Circuit c;
  c.name = "bell_" + bell_name(which);
  c.add(CircuitOp::y_rotation(a, kPi / 2));
  c.add(cnot_geometric(spec, a, b, idle));
  if (which == BellState::kPsiPlus || which == BellState::kPsiMinus) c.add(CircuitOp::x_rotation(b, kPi));
  if (which == BellState::kPhiMinus || which == BellState::kPsiMinus) c.add(CircuitOp::virtual_z(a, kPi));
  return c;
}

// GHZ over the listed nuclei (default all active), fanning out from the first.
inline Circuit ghz_prep_circuit(const SpinSystemSpec& spec, std::vector<int> nuclei = {}) {
  if (nuclei.empty()) nuclei = spec.active_nuclei();
  if (nuclei.size() < 2) throw std::invalid_argument("ghz needs at least two nuclei");
  Circuit c;
  c.name = "ghz";
  c.add(CircuitOp::y_rotation(nuclei[0], kPi / 2));
  for (std::size_t k = 1; k < nuclei.size(); ++k) {
    Hints h;
    for (int i : spec.active_nuclei()) {
      const auto pos = std::find(nuclei.begin(), nuclei.end(), i) - nuclei.begin();
      if (i == nuclei[0] || i == nuclei[k]) continue;
      // Already entangled nuclei follow the control; untouched ones are still |⇓>.
      h[i] = (pos < static_cast<long>(k)) ? 1 : 0;
    }
    c.add(cnot_geometric(spec, nuclei[0], nuclei[k], h));
  }
  return c;
}

inline Vector ghz_vector(int num_qubits) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  Vector v = Vector::Zero(dim);
  v(0) = v(dim - 1) = 1.0 / std::sqrt(2.0);
  return v;
}

// ---------------------------------------------------------------------------
// Register helpers

// Product state with the given nuclear bits (spec index -> bit), others |⇓>, electron |↓>.
inline Matrix register_basis_state(const SpinSystemSpec& spec, const std::map<int, int>& bits = {}) {
  const int n = spec.num_qubits();
  std::size_t idx = 0;
  for (const auto& [nuc, bit] : bits) {
    const int q = spec.qubit_of(nuc);
    if (q < 0) throw std::invalid_argument("register_basis_state: inactive nucleus");
    if (bit) idx |= qubit_mask(q, n);
  }
  return projector(basis_ket(idx, std::size_t{1} << n));
}

inline Matrix reduce_to_nuclei(const Matrix& rho, const SpinSystemSpec& spec, const std::vector<int>& nuclei) {
  std::vector<int> keep;
  for (int i : nuclei) {
    const int q = spec.qubit_of(i);
    if (q < 0) throw std::invalid_argument("reduce_to_nuclei: inactive nucleus");
    keep.push_back(q);
  }
  return partial_trace_keep(rho, keep, spec.num_qubits());
}

// Embed a nuclear-register index (over `nuclei`, first most significant) into the full register.
inline std::size_t register_index(const SpinSystemSpec& spec, const std::vector<int>& nuclei, std::size_t local) {
  const int n = spec.num_qubits();
  const int k = static_cast<int>(nuclei.size());
  std::size_t idx = 0;
  for (int i = 0; i < k; ++i)
    if ((local >> (k - 1 - i)) & 1u) idx |= qubit_mask(spec.qubit_of(nuclei[i]), n);
  return idx;
}

// P[out][in] over `nuclei` for every computational input (other nuclei |⇓>, electron |↓>).
inline RealMatrix truth_table(const Circuit& c, const SpinSystemSpec& spec, const std::vector<int>& nuclei,
                              const RunOptions& opts = {}) {
  const int k = static_cast<int>(nuclei.size());
  const std::size_t dim = std::size_t{1} << k;
  RealMatrix table = RealMatrix::Zero(dim, dim);
  const int n = spec.num_qubits();
  const std::size_t full = std::size_t{1} << n;
  if (!opts.noise.any()) {
    const Matrix u = circuit_unitary(c, spec, opts.drive);
    for (std::size_t in = 0; in < dim; ++in) {
      const Vector psi = u.col(register_index(spec, nuclei, in));
      Matrix rho = projector(psi);
      const Matrix red = reduce_to_nuclei(rho, spec, nuclei);
      for (std::size_t out = 0; out < dim; ++out) table(out, in) = red(out, out).real();
    }
    return table;
  }
  for (std::size_t in = 0; in < dim; ++in) {
    Matrix rho = projector(basis_ket(register_index(spec, nuclei, in), full));
    const auto res = run_circuit(c, spec, rho, opts);
    const Matrix red = reduce_to_nuclei(res.rho, spec, nuclei);
    for (std::size_t out = 0; out < dim; ++out) table(out, in) = red(out, out).real();
  }
  return table;
}

inline RealMatrix toffoli_ideal(int num_qubits, int target_position) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  RealMatrix p = RealMatrix::Zero(dim, dim);
  const std::size_t tmask = std::size_t{1} << (num_qubits - 1 - target_position);
  const std::size_t controls = (dim - 1) & ~tmask;
  for (std::size_t in = 0; in < dim; ++in) {
    const std::size_t out = (in & controls) == controls ? in ^ tmask : in;
    p(out, in) = 1;
  }
  return p;
}

inline double truth_table_fidelity(const RealMatrix& u_exp, const RealMatrix& u_ideal) {
  if (u_exp.rows() != u_ideal.rows() || u_exp.cols() != u_ideal.cols() || u_exp.rows() != u_exp.cols())
    throw std::invalid_argument("truth_table_fidelity: dimension mismatch");
  return (u_exp * u_ideal).trace() / static_cast<double>(u_exp.rows());
}

}  // namespace donorsim
