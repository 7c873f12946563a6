#pragma once

#include "donorsim/core.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/NonLinearOptimization>

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace donorsim {

// ---------------------------------------------------------------------------
// Linear inversion

// ⟨P⟩ for every Pauli string on n qubits, indexed as pauli_label.
inline RealVector pauli_expectations(const Matrix& rho, int n) {
  const std::size_t count = std::size_t{1} << (2 * n);
  RealVector e(count);
  for (std::size_t k = 0; k < count; ++k) e(k) = (pauli_string(pauli_label(k, n)) * rho).trace().real();
  return e;
}

inline Matrix linear_inversion(const RealVector& expectations, int n) {
  const std::size_t count = std::size_t{1} << (2 * n);
  if (static_cast<std::size_t>(expectations.size()) != count) throw std::invalid_argument("linear_inversion: need 4^n expectations");
  const std::size_t dim = std::size_t{1} << n;
  Matrix rho = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < count; ++k) rho += expectations(k) * pauli_string(pauli_label(k, n));
  return rho / static_cast<double>(dim);
}

inline Matrix linear_inversion(const std::map<std::string, double>& expectations, int n) {
  const std::size_t count = std::size_t{1} << (2 * n);
  RealVector e(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto label = pauli_label(k, n);
    const auto it = expectations.find(label);
    if (it == expectations.end()) {
      if (label == std::string(n, 'I')) {
        e(k) = 1;
        continue;
      }
      throw std::invalid_argument("linear_inversion: missing expectation " + label);
    }
    e(k) = it->second;
  }
  return linear_inversion(e, n);
}

// ---------------------------------------------------------------------------
// Measurement data

struct BasisData {
  std::string label;            // e.g. "XZ": measured Pauli axis per qubit
  std::vector<Matrix> effects;  // one per outcome, summing to identity
  std::vector<double> freqs;
  double shots = 0;             // 0 = exact frequencies
};

using TomographyDataset = std::vector<BasisData>;

// Outcome bit 0 is the +1 eigenvalue of each axis.
inline std::vector<Matrix> pauli_basis_effects(const std::string& axes) {
  const int n = static_cast<int>(axes.size());
  const std::size_t dim = std::size_t{1} << n;
  std::vector<Matrix> out;
  for (std::size_t j = 0; j < dim; ++j) {
    Matrix e = Matrix::Ones(1, 1);
    for (int q = 0; q < n; ++q) {
      const Matrix p = pauli::by_index(pauli::index_of(axes[q]));
      const double sign = bit_of(j, q, n) ? -1.0 : 1.0;
      e = kron(e, Matrix(0.5 * (pauli::I() + sign * p)));
    }
    out.push_back(e);
  }
  return out;
}

inline std::vector<std::string> product_bases(int n) {
  std::vector<std::string> out{""};
  for (int q = 0; q < n; ++q) {
    std::vector<std::string> next;
    for (const auto& s : out)
      for (char c : {'X', 'Y', 'Z'}) next.push_back(s + c);
    out = next;
  }
  return out;
}

// shots = 0 gives exact Born frequencies; otherwise multinomial samples.
template <typename Rng>
TomographyDataset simulate_tomography(const Matrix& rho, int n, int shots, Rng& rng) {
  TomographyDataset data;
  for (const auto& axes : product_bases(n)) {
    BasisData b;
    b.label = axes;
    b.effects = pauli_basis_effects(axes);
    std::vector<double> p;
    for (const auto& e : b.effects) p.push_back(std::max(0.0, (rho * e).trace().real()));
    if (shots > 0) {
      std::discrete_distribution<int> pick(p.begin(), p.end());
      std::vector<double> counts(p.size(), 0);
      for (int s = 0; s < shots; ++s) counts[pick(rng)] += 1;
      for (auto& c : counts) c /= shots;
      b.freqs = counts;
      b.shots = shots;
    } else {
      double total = 0;
      for (double x : p) total += x;
      for (auto& x : p) x /= total;
      b.freqs = p;
    }
    data.push_back(std::move(b));
  }
  return data;
}

inline TomographyDataset exact_tomography(const Matrix& rho, int n) {
  std::mt19937_64 unused(0);
  return simulate_tomography(rho, n, 0, unused);
}

// ⟨P⟩ estimates from product-basis data (each Pauli read from any basis that measures its axes).
inline RealVector expectations_from_data(const TomographyDataset& data, int n) {
  const std::size_t count = std::size_t{1} << (2 * n);
  RealVector sum = RealVector::Zero(count), hits = RealVector::Zero(count);
  for (const auto& b : data) {
    const std::size_t dim = std::size_t{1} << n;
    // every subset of qubits gives one Pauli string
    for (std::size_t sub = 0; sub < dim; ++sub) {
      std::string label;
      for (int q = 0; q < n; ++q) label += bit_of(sub, q, n) ? b.label[q] : 'I';
      double e = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        int parity = 0;
        for (int q = 0; q < n; ++q) parity ^= bit_of(sub, q, n) & bit_of(j, q, n);
        e += (parity ? -1.0 : 1.0) * b.freqs[j];
      }
      std::size_t idx = 0;
      for (char c : label) idx = idx * 4 + static_cast<std::size_t>(pauli::index_of(c));
      sum(idx) += e;
      hits(idx) += 1;
    }
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (hits(k) == 0) throw std::invalid_argument("dataset does not determine " + pauli_label(k, n));
    sum(k) /= hits(k);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Maximum likelihood (RρR)

inline double log_likelihood(const Matrix& rho, const TomographyDataset& data, double eps = 1e-12) {
  double ll = 0;
  for (const auto& b : data)
    for (std::size_t j = 0; j < b.effects.size(); ++j) {
      if (b.freqs[j] <= 0) continue;
      ll += b.freqs[j] * std::log(std::max((rho * b.effects[j]).trace().real(), eps));
    }
  return ll;
}

struct MleOptions {
  double tol = 1e-10;  // stop on log-likelihood gain below this
  int max_iters = 10000;
  double eps = 1e-12;
  bool momentum = true;          // extrapolate the square-root factor between RρR steps
  double polish_purity = 0.999;  // top eigenvalue above this triggers a pure-state refinement (> 1 disables)
};

struct MleResult {
  Matrix rho;
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
  int regularized = 0;  // probabilities clamped to eps
  bool polished = false;
  std::vector<double> log_likelihood;
};

namespace detail {

inline Matrix r_operator(const Matrix& rho, const TomographyDataset& data, double eps, int* clamped) {
  const Eigen::Index dim = rho.rows();
  Matrix rop = Matrix::Zero(dim, dim);
  for (const auto& b : data)
    for (std::size_t j = 0; j < b.effects.size(); ++j) {
      if (b.freqs[j] <= 0) continue;
      double p = (rho * b.effects[j]).trace().real();
      if (p < eps) {
        p = eps;
        if (clamped) ++*clamped;
      }
      rop += (b.freqs[j] / p) * b.effects[j];
    }
  return rop / (rop.trace().real() / static_cast<double>(dim));  // R = I at an interior fixed point
}

inline Matrix state_of(const Matrix& a) {
  Matrix r = a * a.adjoint();
  r /= r.trace().real();
  return 0.5 * (r + r.adjoint());
}

// Weighted least squares of Born probabilities over normalized pure states, started from `psi`.
struct PureFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::vector<const Matrix*> effects;
  std::vector<double> freqs, weights;
  int dim = 0;

  int inputs() const { return 2 * dim; }
  int values() const { return static_cast<int>(freqs.size()); }

  Vector ket(const Eigen::VectorXd& x) const {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = cplx(x(i), x(dim + i));
    return v / v.norm();
  }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    const Vector v = ket(x);
    for (std::size_t j = 0; j < freqs.size(); ++j)
      r(j) = ((v.adjoint() * (*effects[j]) * v)(0, 0).real() - freqs[j]) * weights[j];
    return 0;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    Eigen::VectorXd r0(values()), r1(values());
    for (int k = 0; k < inputs(); ++k) {
      Eigen::VectorXd up = x, dn = x;
      up(k) += 1e-7;
      dn(k) -= 1e-7;
      (*this)(up, r1);
      (*this)(dn, r0);
      jac.col(k) = (r1 - r0) / 2e-7;
    }
    return 0;
  }
};

inline Matrix polish_pure(const Vector& psi, const TomographyDataset& data) {
  PureFunctor f;
  f.dim = static_cast<int>(psi.size());
  for (const auto& b : data)
    for (std::size_t j = 0; j < b.effects.size(); ++j) {
      f.effects.push_back(&b.effects[j]);
      f.freqs.push_back(b.freqs[j]);
      f.weights.push_back(1.0 / std::sqrt(std::max(b.freqs[j], 1e-3)));
    }
  Eigen::VectorXd x(2 * f.dim);
  for (int i = 0; i < f.dim; ++i) {
    x(i) = psi(i).real();
    x(f.dim + i) = psi(i).imag();
  }
  Eigen::LevenbergMarquardt<PureFunctor> lm(f);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.minimize(x);
  return projector(f.ket(x));
}

}  // namespace detail

// ρ = AA†/tr; the RρR step is A -> R(ρ)A. Optional momentum (restarted whenever it would lower the
// likelihood) and diluted steps (I + εR)A as a last resort keep the likelihood non-decreasing.
inline MleResult mle_rhorr(const TomographyDataset& data, const Matrix& init = Matrix(), const MleOptions& opt = {}) {
  if (data.empty()) throw std::invalid_argument("mle_rhorr: empty dataset");
  const Eigen::Index dim = data.front().effects.front().rows();
  MleResult r;
  Matrix rho0 = init.size() ? init : Matrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho0 + rho0.adjoint()));
  Matrix a = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cast<cplx>().asDiagonal();
  Matrix a_prev = a;
  double ll = log_likelihood(detail::state_of(a), data, opt.eps);
  r.log_likelihood.push_back(ll);
  double t = 1;
  const double slack = 1e-13 * std::max(1.0, std::abs(ll));
  for (int it = 0; it < opt.max_iters; ++it) {
    const Matrix rho = detail::state_of(a);
    const Matrix rop = detail::r_operator(rho, data, opt.eps, &r.regularized);
    Matrix next;
    double next_ll = -std::numeric_limits<double>::infinity();
    double t_next = 1;
    if (opt.momentum) {
      t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
      const Matrix b = a + ((t - 1) / t_next) * (a - a_prev);
      Matrix cand = detail::r_operator(detail::state_of(b), data, opt.eps, nullptr) * b;
      cand /= std::sqrt((cand * cand.adjoint()).trace().real());
      const double cand_ll = log_likelihood(detail::state_of(cand), data, opt.eps);
      if (cand_ll >= ll - slack) {
        next = cand;
        next_ll = cand_ll;
      }
    }
    if (!next.size()) {
      t_next = 1;
      for (double e : {std::numeric_limits<double>::infinity(), 4.0, 1.0, 0.25, 0.0625, 1.0 / 64, 1.0 / 256}) {
        Matrix cand = (std::isinf(e) ? rop : Matrix(Matrix::Identity(dim, dim) + e * rop)) * a;
        cand /= std::sqrt((cand * cand.adjoint()).trace().real());
        const double cand_ll = log_likelihood(detail::state_of(cand), data, opt.eps);
        if (cand_ll >= ll - slack) {
          next = cand;
          next_ll = cand_ll;
          break;
        }
      }
    }
    r.iterations = it + 1;
    if (!next.size()) {
      r.converged = true;  // no ascent step left at this resolution
      break;
    }
    if (next_ll < ll - slack) r.monotone = false;
    const double gain = next_ll - ll;
    a_prev = a;
    a = next;
    t = t_next;
    ll = next_ll;
    r.log_likelihood.push_back(ll);
    if (gain < opt.tol) {
      r.converged = true;
      break;
    }
  }
  r.rho = detail::state_of(a);
  if (opt.polish_purity <= 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> top(r.rho);
    if (top.eigenvalues()(dim - 1) > opt.polish_purity) {
      const Matrix cand = detail::polish_pure(top.eigenvectors().col(dim - 1), data);
      const double cand_ll = log_likelihood(cand, data, opt.eps);
      if (cand_ll > ll) {
        r.rho = cand;
        r.polished = true;
        r.log_likelihood.push_back(cand_ll);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// GHZ witness

struct WitnessResult {
  double witness = 0;
  double fidelity = 0;
};

// M_k = cos(kπ/N)σx + sin(kπ/N)σy.
inline Matrix witness_axis(int k, int n) {
  const double th = k * kPi / n;
  return std::cos(th) * pauli::X() + std::sin(th) * pauli::Y();
}

inline WitnessResult ghz_witness(double p_all_down, double p_all_up, const std::vector<double>& mk_expectations) {
  const int n = static_cast<int>(mk_expectations.size());
  if (n < 2) throw std::invalid_argument("ghz_witness: missing coherence bases");
  double coh = 0;
  for (int k = 0; k < n; ++k) coh += (k % 2 ? -1.0 : 1.0) * mk_expectations[k];
  WitnessResult w;
  w.fidelity = 0.5 * (p_all_down + p_all_up) + coh / (2.0 * n);
  w.witness = 0.5 - w.fidelity;
  return w;
}

inline WitnessResult ghz_witness_from_state(const Matrix& rho, int n) {
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> mk;
  for (int k = 0; k < n; ++k) {
    Matrix op = Matrix::Ones(1, 1);
    for (int q = 0; q < n; ++q) op = kron(op, witness_axis(k, n));
    mk.push_back((op * rho).trace().real());
  }
  return ghz_witness(rho(0, 0).real(), rho(dim - 1, dim - 1).real(), mk);
}

// ---------------------------------------------------------------------------
// Scalar analyses

inline double correlation_factor(double t2_a, double t2_b, double t2_phi, double t2_psi) {
  if (!(t2_a > 0 && t2_b > 0 && t2_phi > 0 && t2_psi > 0)) throw std::invalid_argument("times must be > 0");
  return t2_a * t2_b / 4.0 * (1.0 / (t2_phi * t2_phi) - 1.0 / (t2_psi * t2_psi));
}

struct BiasResult {
  double e_z = 0, e_x = 0, e_y = 0, ratio = 0;
};

inline BiasResult bias_ratio(const Matrix& rho, const Vector& target) {
  if (rho.rows() != 4 || target.size() != 4) throw std::invalid_argument("bias_ratio expects a two-qubit state");
  auto pop = [&](const Matrix& p) {
    const Vector v = kron(pauli::I(), p) * target;
    return std::max(0.0, (v.adjoint() * rho * v)(0, 0).real());
  };
  BiasResult b;
  b.e_z = pop(pauli::Z());
  b.e_x = pop(pauli::X());
  b.e_y = pop(pauli::Y());
  b.ratio = b.e_x > 0 ? b.e_z / b.e_x : std::numeric_limits<double>::infinity();
  return b;
}

// ---------------------------------------------------------------------------
// Pauli transfer matrices

using Channel1 = std::function<Matrix(const Matrix&)>;

inline RealMatrix ptm_of_channel(const Channel1& ch, int n) {
  const std::size_t count = std::size_t{1} << (2 * n);
  const double dim = static_cast<double>(std::size_t{1} << n);
  std::vector<Matrix> p;
  for (std::size_t k = 0; k < count; ++k) p.push_back(pauli_string(pauli_label(k, n)));
  RealMatrix r(count, count);
  for (std::size_t j = 0; j < count; ++j) {
    const Matrix out = ch(p[j]);
    for (std::size_t i = 0; i < count; ++i) r(i, j) = (p[i] * out).trace().real() / dim;
  }
  return r;
}

inline RealMatrix ptm_of_unitary(const Matrix& u) {
  int n = 0;
  while ((Eigen::Index{1} << n) < u.rows()) ++n;
  return ptm_of_channel([&](const Matrix& x) { return Matrix(u * x * u.adjoint()); }, n);
}

inline Channel1 depolarizing_channel(double p, int n) {
  const double dim = static_cast<double>(std::size_t{1} << n);
  return [p, dim](const Matrix& x) {
    return Matrix((1 - p) * x + p * x.trace() / dim * Matrix::Identity(x.rows(), x.cols()));
  };
}

struct ErrorGenerator {
  RealMatrix generator;
  bool near_branch_cut = false;  // an eigenvalue of M_exp M_ideal^-1 sits near the negative real axis
};

inline ErrorGenerator error_generator(const RealMatrix& m_exp, const RealMatrix& m_ideal, double cut_tol = 1e-6) {
  if (m_exp.rows() != m_ideal.rows() || m_exp.cols() != m_ideal.cols()) throw std::invalid_argument("PTM size mismatch");
  Eigen::FullPivLU<RealMatrix> lu(m_ideal);
  if (!lu.isInvertible()) throw std::invalid_argument("ideal PTM is singular");
  const RealMatrix rel = m_exp * lu.inverse();
  ErrorGenerator g;
  Eigen::ComplexEigenSolver<Matrix> es(rel.cast<cplx>());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx lam = es.eigenvalues()(i);
    if (lam.real() < 0 && std::abs(lam.imag()) < cut_tol) g.near_branch_cut = true;
  }
  const Matrix l = rel.cast<cplx>().log();
  g.generator = l.real();
  return g;
}

}  // namespace donorsim
