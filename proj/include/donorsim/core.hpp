#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace donorsim {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr cplx kI{0.0, 1.0};

// Raised when a numerical run has to be abandoned (trace drift, bad state).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace pauli {

inline Matrix I() { return Matrix::Identity(2, 2); }

inline Matrix X() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix Y() {
  Matrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

inline Matrix Z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

// |0><1| : lowers bit 1 -> bit 0
inline Matrix lower() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1;
  return m;
}

inline Matrix by_index(int k) {
  switch (k) {
    case 0: return I();
    case 1: return X();
    case 2: return Y();
    case 3: return Z();
  }
  throw std::invalid_argument("pauli index out of range");
}

inline int index_of(char c) {
  switch (c) {
    case 'I': return 0;
    case 'X': return 1;
    case 'Y': return 2;
    case 'Z': return 3;
  }
  throw std::invalid_argument(std::string("bad pauli letter ") + c);
}

}  // namespace pauli

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline RealMatrix kron(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline int bit_of(std::size_t index, int qubit, int num_qubits) {
  return static_cast<int>((index >> (num_qubits - 1 - qubit)) & 1u);
}

inline std::size_t qubit_mask(int qubit, int num_qubits) {
  return std::size_t{1} << (num_qubits - 1 - qubit);
}

// Single-qubit operator acting on `qubit` of an n-qubit register (qubit 0 most significant).
inline Matrix embed(const Matrix& op, int qubit, int num_qubits) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  const std::size_t mask = qubit_mask(qubit, num_qubits);
  Matrix out = Matrix::Zero(dim, dim);
  for (std::size_t col = 0; col < dim; ++col) {
    const int b = (col & mask) ? 1 : 0;
    for (int a = 0; a < 2; ++a) {
      const cplx v = op(a, b);
      if (v == cplx{}) continue;
      const std::size_t row = a ? (col | mask) : (col & ~mask);
      out(row, col) += v;
    }
  }
  return out;
}

inline Matrix pauli_string(const std::string& label) {
  Matrix out = Matrix::Identity(1, 1);
  for (char c : label) out = kron(out, pauli::by_index(pauli::index_of(c)));
  return out;
}

inline std::string pauli_label(std::size_t index, int num_qubits) {
  static const char letters[] = {'I', 'X', 'Y', 'Z'};
  std::string s(num_qubits, 'I');
  for (int q = num_qubits - 1; q >= 0; --q) {
    s[q] = letters[index % 4];
    index /= 4;
  }
  return s;
}

// exp(-i theta (cos(phi) X + sin(phi) Y) / 2)
inline Matrix rotation_xy(double theta, double phi) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  Matrix m(2, 2);
  m << c, -kI * s * std::exp(-kI * phi), -kI * s * std::exp(kI * phi), c;
  return m;
}

// exp(-i theta Z / 2)
inline Matrix rotation_z(double theta) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = std::exp(-kI * theta / 2.0);
  m(1, 1) = std::exp(kI * theta / 2.0);
  return m;
}

// exp(-i theta n.sigma / 2) for a unit axis n
inline Matrix rotation_axis(double theta, double nx, double ny, double nz) {
  const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
  if (norm == 0.0) throw std::invalid_argument("zero rotation axis");
  nx /= norm;
  ny /= norm;
  nz /= norm;
  Matrix gen = nx * pauli::X() + ny * pauli::Y() + nz * pauli::Z();
  return std::cos(theta / 2) * pauli::I() - kI * std::sin(theta / 2) * gen;
}

inline Matrix projector(const Vector& psi) { return psi * psi.adjoint(); }

inline Vector basis_ket(std::size_t index, std::size_t dim) {
  Vector v = Vector::Zero(dim);
  v(index) = 1;
  return v;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Matrix& m, double tol) {
  return m.rows() == m.cols() && max_abs(m - m.adjoint()) <= tol;
}

// Operator-norm distance between unitaries after removing the best global phase.
inline double phase_insensitive_distance(const Matrix& u, const Matrix& v) {
  const cplx overlap = (v.adjoint() * u).trace();
  const cplx phase = std::abs(overlap) > 0 ? overlap / std::abs(overlap) : cplx{1.0};
  Eigen::JacobiSVD<Matrix> svd(u - phase * v);
  return svd.singularValues()(0);
}

// Partial trace keeping the listed qubits in the given order.
inline Matrix partial_trace_keep(const Matrix& rho, const std::vector<int>& keep, int num_qubits) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  const int k = static_cast<int>(keep.size());
  const std::size_t out_dim = std::size_t{1} << k;
  std::vector<int> traced;
  for (int q = 0; q < num_qubits; ++q) {
    bool kept = false;
    for (int kq : keep) kept = kept || kq == q;
    if (!kept) traced.push_back(q);
  }
  auto compose = [&](std::size_t kept_bits, std::size_t traced_bits) {
    std::size_t idx = 0;
    for (int i = 0; i < k; ++i)
      if ((kept_bits >> (k - 1 - i)) & 1u) idx |= qubit_mask(keep[i], num_qubits);
    const int t = static_cast<int>(traced.size());
    for (int i = 0; i < t; ++i)
      if ((traced_bits >> (t - 1 - i)) & 1u) idx |= qubit_mask(traced[i], num_qubits);
    return idx;
  };
  Matrix out = Matrix::Zero(out_dim, out_dim);
  const std::size_t traced_dim = dim / out_dim;
  for (std::size_t a = 0; a < out_dim; ++a)
    for (std::size_t b = 0; b < out_dim; ++b) {
      cplx acc = 0;
      for (std::size_t r = 0; r < traced_dim; ++r) acc += rho(compose(a, r), compose(b, r));
      out(a, b) = acc;
    }
  return out;
}

inline std::string bits_to_string(std::size_t index, int width) {
  std::string s(width, '0');
  for (int i = 0; i < width; ++i)
    if ((index >> (width - 1 - i)) & 1u) s[i] = '1';
  return s;
}

}  // namespace donorsim
