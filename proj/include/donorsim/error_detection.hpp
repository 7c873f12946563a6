#pragma once

#include "donorsim/gates.hpp"

#include <array>
#include <optional>

namespace donorsim {

// Fixed roles: code qubits N2, N3; S^X ancilla N1; S^Z ancilla N4 (spec indices).
struct DetectionRoles {
  int code_a = 1, code_b = 2;
  int ancilla_x = 0, ancilla_z = 3;

  void validate(const SpinSystemSpec& spec) const {
    const std::array<int, 4> all{code_a, code_b, ancilla_x, ancilla_z};
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (spec.qubit_of(all[i]) < 0) throw std::invalid_argument("detection role on an inactive nucleus");
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (all[i] == all[j]) throw std::invalid_argument("detection roles clash");
    }
    if (spec.active_nuclei().size() != 4) throw std::invalid_argument("error detection expects exactly four active nuclei");
  }
};

// Stabilizer eigenvalues (as bits) of a codeword; uniform inputs are referenced to phi+.
struct CodewordInfo {
  std::string label;
  int sx = 0, sz = 0;
  std::optional<Vector> target;  // pure code-qubit state when it is a stabilizer eigenstate
};

inline const std::vector<std::string>& codeword_labels() {
  static const std::vector<std::string> labels{"phi+", "phi-", "psi+", "psi-", "uniform", "00", "01",
                                               "10",   "11",   "++",   "+-",   "-+",     "--"};
  return labels;
}

inline CodewordInfo codeword_info(const std::string& label) {
  CodewordInfo info;
  info.label = label;
  if (label == "uniform") return info;
  if (label.size() == 2 && (label[0] == '0' || label[0] == '1') && (label[1] == '0' || label[1] == '1')) {
    info.sz = (label[0] - '0') ^ (label[1] - '0');
    Vector v = Vector::Zero(4);
    v((label[0] - '0') * 2 + (label[1] - '0')) = 1;
    info.target = v;
    return info;
  }
  if (label.size() == 2 && (label[0] == '+' || label[0] == '-') && (label[1] == '+' || label[1] == '-')) {
    info.sx = (label[0] == '-') ^ (label[1] == '-');
    const double s = 1 / std::sqrt(2.0);
    Vector a(2), b(2);
    a << s, label[0] == '+' ? s : -s;
    b << s, label[1] == '+' ? s : -s;
    info.target = Vector(kron(Matrix(a), Matrix(b)));
    return info;
  }
  const BellState bs = parse_bell(label);
  info.sx = (bs == BellState::kPhiMinus || bs == BellState::kPsiMinus);
  info.sz = (bs == BellState::kPsiPlus || bs == BellState::kPsiMinus);
  info.target = bell_vector(bs);
  return info;
}

inline std::vector<CircuitOp> codeword_prep(const SpinSystemSpec& spec, const std::string& label,
                                            const DetectionRoles& r = {}) {
  std::vector<CircuitOp> ops;
  if (label == "uniform") {
    ops.push_back(CircuitOp::y_rotation(r.code_b, kPi / 2));
    return ops;
  }
  if (label.size() == 2 && (label[0] == '0' || label[0] == '1')) {
    if (label[0] == '1') ops.push_back(CircuitOp::x_rotation(r.code_a, kPi));
    if (label[1] == '1') ops.push_back(CircuitOp::x_rotation(r.code_b, kPi));
    return ops;
  }
  if (label.size() == 2 && (label[0] == '+' || label[0] == '-')) {
    ops.push_back(CircuitOp::y_rotation(r.code_a, label[0] == '+' ? kPi / 2 : -kPi / 2));
    ops.push_back(CircuitOp::y_rotation(r.code_b, label[1] == '+' ? kPi / 2 : -kPi / 2));
    return ops;
  }
  return bell_prep_circuit(spec, r.code_a, r.code_b, parse_bell(label)).ops;
}

struct InjectedError {
  int target = 2;  // spec index; default N3
  double theta = 0;
  ErrorAxis axis;
};

// Phase -1 where the code pair has odd parity and `anc` is |⇑>.
inline std::vector<CircuitOp> parity_phase(const SpinSystemSpec& spec, int anc, const DetectionRoles& r,
                                           const Hints& hints) {
  std::vector<CircuitOp> ops;
  for (const auto& p : {std::array<int, 2>{0, 1}, std::array<int, 2>{1, 0}}) {
    const auto more = controlled_phase(spec, {anc, r.code_a, r.code_b}, {1, p[0], p[1]}, hints);
    ops.insert(ops.end(), more.begin(), more.end());
  }
  return ops;
}

inline std::vector<CircuitOp> measure_sx(const SpinSystemSpec& spec, const DetectionRoles& r = {}) {
  std::vector<CircuitOp> ops{CircuitOp::y_rotation(r.code_a, -kPi / 2), CircuitOp::y_rotation(r.code_b, -kPi / 2),
                             CircuitOp::y_rotation(r.ancilla_x, kPi / 2)};
  const auto ph = parity_phase(spec, r.ancilla_x, r, {{r.ancilla_z, 0}});
  ops.insert(ops.end(), ph.begin(), ph.end());
  ops.push_back(CircuitOp::y_rotation(r.ancilla_x, -kPi / 2));
  ops.push_back(CircuitOp::y_rotation(r.code_a, kPi / 2));
  ops.push_back(CircuitOp::y_rotation(r.code_b, kPi / 2));
  return ops;
}

inline std::vector<CircuitOp> measure_sz(const SpinSystemSpec& spec, const DetectionRoles& r = {}) {
  std::vector<CircuitOp> ops{CircuitOp::y_rotation(r.ancilla_z, kPi / 2)};
  const auto ph = parity_phase(spec, r.ancilla_z, r, {});
  ops.insert(ops.end(), ph.begin(), ph.end());
  ops.push_back(CircuitOp::y_rotation(r.ancilla_z, -kPi / 2));
  return ops;
}

// prep -> wait -> error -> S^X (N1) -> S^Z (N4) -> measure ancillas. Returns an uncompiled circuit.
inline Circuit error_detection_circuit(const SpinSystemSpec& spec, const std::string& codeword,
                                       const std::optional<InjectedError>& error = std::nullopt, double t_wait = 0,
                                       const DetectionRoles& r = {}) {
  r.validate(spec);
  if (t_wait < 0) throw std::invalid_argument("t_wait must be >= 0");
  Circuit c;
  c.name = "error_detection_" + codeword;
  c.add(codeword_prep(spec, codeword, r));
  if (t_wait > 0) c.add(CircuitOp::wait(t_wait));
  if (error) {
    if (error->target != r.code_a && error->target != r.code_b)
      throw std::invalid_argument("errors are injected on code qubits");
    c.add(CircuitOp::inject_error(error->target, error->theta, error->axis));
  }
  c.add(measure_sx(spec, r));
  c.add(measure_sz(spec, r));
  c.add(CircuitOp::measure(r.ancilla_x));
  c.add(CircuitOp::measure(r.ancilla_z));
  return c;
}

struct SyndromeRecord {
  int sx = 0, sz = 0;
  double probability = 0;
  Matrix code_state;  // conditional 4x4 state of the code pair (zero if probability is 0)

  std::string label() const { return std::to_string(sz) + std::to_string(sx); }
};

// Classical confusion of each ancilla readout.
struct AncillaReadout {
  double p1_given0 = 0;
  double p0_given1 = 0;
};

inline std::vector<SyndromeRecord> extract_syndrome(const RunResult& run, const SpinSystemSpec& spec,
                                                    const DetectionRoles& r = {},
                                                    const std::optional<AncillaReadout>& readout = std::nullopt) {
  auto has = [&](int t) { return std::find(run.measured.begin(), run.measured.end(), t) != run.measured.end(); };
  if (!has(r.ancilla_x) || !has(r.ancilla_z)) throw std::invalid_argument("circuit lacks ancilla measurements");
  const int n = spec.num_qubits();
  const std::size_t dim = std::size_t{1} << n;
  const std::size_t mx = qubit_mask(spec.qubit_of(r.ancilla_x), n);
  const std::size_t mz = qubit_mask(spec.qubit_of(r.ancilla_z), n);
  std::vector<SyndromeRecord> ideal;
  for (int sz = 0; sz < 2; ++sz)
    for (int sx = 0; sx < 2; ++sx) {
      Matrix proj = Matrix::Zero(dim, dim);
      for (std::size_t a = 0; a < dim; ++a)
        if ((((a & mx) != 0) == (sx == 1)) && (((a & mz) != 0) == (sz == 1))) proj(a, a) = 1;
      const Matrix branch = proj * run.rho * proj;
      SyndromeRecord rec;
      rec.sx = sx;
      rec.sz = sz;
      rec.probability = std::max(0.0, branch.trace().real());
      rec.code_state = reduce_to_nuclei(branch, spec, {r.code_a, r.code_b});
      ideal.push_back(rec);
    }
  if (!readout) {
    for (auto& rec : ideal)
      if (rec.probability > 0) rec.code_state /= rec.probability;
    return ideal;
  }
  auto p = [](int seen, int truth, const AncillaReadout& ro) {
    if (truth == 0) return seen ? ro.p1_given0 : 1 - ro.p1_given0;
    return seen ? 1 - ro.p0_given1 : ro.p0_given1;
  };
  std::vector<SyndromeRecord> seen;
  for (int sz = 0; sz < 2; ++sz)
    for (int sx = 0; sx < 2; ++sx) {
      SyndromeRecord rec;
      rec.sx = sx;
      rec.sz = sz;
      rec.code_state = Matrix::Zero(4, 4);
      for (const auto& t : ideal) {
        const double w = p(sx, t.sx, *readout) * p(sz, t.sz, *readout);
        rec.probability += w * t.probability;
        rec.code_state += w * t.code_state;  // still unnormalized here
      }
      if (rec.probability > 0) rec.code_state /= rec.probability;
      seen.push_back(rec);
    }
  return seen;
}

// Correction on the second code qubit given the syndrome relative to the codeword's own eigenvalues.
inline Matrix pfu_correction(int sx, int sz, const CodewordInfo& ref) {
  const int ex = sz ^ ref.sz;  // bit-flip detected by S^Z
  const int ez = sx ^ ref.sx;  // phase-flip detected by S^X
  Matrix p = pauli::I();
  if (ex && ez) p = pauli::Y();
  else if (ex) p = pauli::X();
  else if (ez) p = pauli::Z();
  return kron(pauli::I(), p);
}

inline Matrix pauli_frame_update(const std::vector<SyndromeRecord>& branches, const std::string& input_label) {
  const auto ref = codeword_info(input_label);
  double total = 0;
  Matrix out = Matrix::Zero(4, 4);
  for (const auto& b : branches) {
    total += b.probability;
    if (b.probability <= 0) continue;
    const Matrix u = pfu_correction(b.sx, b.sz, ref);
    out += b.probability * u * b.code_state * u.adjoint();
  }
  if (std::abs(total - 1) > 1e-9) throw std::invalid_argument("branch probabilities must sum to 1");
  return out;
}

// Only phase flips are corrected.
inline Matrix pauli_frame_update_z(const std::vector<SyndromeRecord>& branches, const std::string& input_label) {
  const auto ref = codeword_info(input_label);
  double total = 0;
  Matrix out = Matrix::Zero(4, 4);
  const Matrix z = kron(pauli::I(), pauli::Z());
  for (const auto& b : branches) {
    total += b.probability;
    if (b.probability <= 0) continue;
    if (b.sx != ref.sx) out += b.probability * z * b.code_state * z;
    else out += b.probability * b.code_state;
  }
  if (std::abs(total - 1) > 1e-9) throw std::invalid_argument("branch probabilities must sum to 1");
  return out;
}

// Code-pair state before stabilizer extraction, ensemble-averaged over branches.
inline Matrix uncorrected_state(const std::vector<SyndromeRecord>& branches) {
  Matrix out = Matrix::Zero(4, 4);
  for (const auto& b : branches)
    if (b.probability > 0) out += b.probability * b.code_state;
  return out;
}

// Full run: compile, simulate from |0...0>, split into syndrome branches.
struct DetectionRun {
  Circuit circuit;
  RunResult run;
  std::vector<SyndromeRecord> branches;
};

inline DetectionRun run_error_detection(const SpinSystemSpec& spec, const std::string& codeword,
                                        const std::optional<InjectedError>& error, double t_wait,
                                        const RunOptions& opts = {}, const GateOptions& g = {},
                                        const std::optional<AncillaReadout>& readout = std::nullopt) {
  DetectionRun out;
  out.circuit = error_detection_circuit(spec, codeword, error, t_wait);
  compile(out.circuit, spec, g);
  out.run = run_circuit(out.circuit, spec, register_basis_state(spec), opts);
  out.branches = extract_syndrome(out.run, spec, {}, readout);
  return out;
}

inline const SyndromeRecord& branch(const std::vector<SyndromeRecord>& b, int sz, int sx) {
  for (const auto& r : b)
    if (r.sx == sx && r.sz == sz) return r;
  throw std::logic_error("missing syndrome branch");
}

}  // namespace donorsim
