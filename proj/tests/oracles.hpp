#pragma once
// Independent reference computations. Nothing here calls into the library's physics code;
// the only shared pieces are the Eigen typedefs.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double pi = 3.14159265358979323846;
inline const cplx I{0, 1};

inline Mat id2() { return Mat::Identity(2, 2); }
inline Mat sx() { Mat m(2, 2); m << 0, 1, 1, 0; return m; }
inline Mat sy() { Mat m(2, 2); m << 0, -I, I, 0; return m; }
inline Mat sz() { Mat m(2, 2); m << 1, 0, 0, -1; return m; }

// Spin operators with |down> = index 0.
inline Mat Sz() { Mat m(2, 2); m << -0.5, 0, 0, 0.5; return m; }
inline Mat Sx() { return 0.5 * sx(); }
inline Mat Sy() { Mat m(2, 2); m << 0, 0.5 * I, -0.5 * I, 0; return m; }  // real-space S_y in the flipped basis

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat on(const Mat& op, int q, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int k = 0; k < n; ++k) out = kron(out, k == q ? op : id2());
  return out;
}

inline Mat proj(const Vec& v) { return v * v.adjoint(); }

inline Vec ket(std::initializer_list<cplx> amps) {
  Vec v(static_cast<Eigen::Index>(amps.size()));
  Eigen::Index i = 0;
  for (auto a : amps) v(i++) = a;
  return v.normalized();
}

inline Vec basis(std::size_t idx, std::size_t dim) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(idx)) = 1;
  return v;
}

// exp(-i θ/2 n·σ) written out explicitly.
inline Mat rot(double theta, double nx, double ny, double nz) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  Mat m(2, 2);
  m << cplx(c, -s * nz), cplx(-s * ny, -s * nx), cplx(s * ny, -s * nx), cplx(c, s * nz);
  return m;
}

// Lab-frame Hamiltonian of one electron and k nuclei (Hz). Electron first, |down> = 0.
inline Mat donor_hamiltonian(double b, double gamma_e, const std::vector<double>& gamma_n, const std::vector<double>& a,
                             bool full) {
  const int n = 1 + static_cast<int>(a.size());
  Mat h = gamma_e * b * on(Sz(), 0, n);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const int q = static_cast<int>(k) + 1;
    h -= gamma_n[k] * b * on(Sz(), q, n);
    h += a[k] * on(Sz(), 0, n) * on(Sz(), q, n);
    if (full) {
      h += a[k] * on(Sx(), 0, n) * on(Sx(), q, n);
      h += a[k] * on(Sy(), 0, n) * on(Sy(), q, n);
    }
  }
  return h;
}

inline std::vector<double> eigenvalues(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return v;
}

inline Mat expm_hz(const Mat& h, double t) { return Mat((-I * 2.0 * pi * t * h).exp()); }

// Vectorised (column-stacked) Lindblad generator, H in Hz, collapse ops pre-scaled.
inline Mat liouvillian(const Mat& h, const std::vector<Mat>& ls) {
  const Eigen::Index d = h.rows();
  const Mat id = Mat::Identity(d, d);
  Mat gen = -I * 2.0 * pi * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& l : ls) {
    const Mat ld = l.adjoint();
    const Mat ldl = ld * l;
    gen += kron(l.conjugate(), l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id);
  }
  return gen;
}

inline Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
inline Mat unvec(const Vec& v, Eigen::Index d) { return Eigen::Map<const Mat>(v.data(), d, d); }

// Midpoint-rule superoperator exponentials for time-dependent collapse operators.
inline Mat lindblad_evolve(const Mat& rho0, const std::function<Mat(double)>& h,
                           const std::function<std::vector<Mat>(double)>& ls, double t0, double t1, int steps) {
  const Eigen::Index d = rho0.rows();
  Vec x = vec(rho0);
  const double dt = (t1 - t0) / steps;
  for (int s = 0; s < steps; ++s) {
    const double tm = t0 + (s + 0.5) * dt;
    x = Mat((liouvillian(h(tm), ls(tm)) * dt).exp()) * x;
  }
  return unvec(x, d);
}

inline double fidelity(const Mat& rho, const Vec& psi) { return (psi.adjoint() * rho * psi)(0, 0).real(); }

// Partial trace keeping the listed qubits (order preserved), qubit 0 most significant.
inline Mat keep(const Mat& rho, const std::vector<int>& qs, int n) {
  const std::size_t dim = std::size_t{1} << n, kd = std::size_t{1} << qs.size();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(kd), static_cast<Eigen::Index>(kd));
  auto bit = [n](std::size_t x, int q) { return static_cast<int>((x >> (n - 1 - q)) & 1u); };
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < dim; ++b) {
      bool same = true;
      for (int q = 0; q < n && same; ++q)
        if (std::find(qs.begin(), qs.end(), q) == qs.end() && bit(a, q) != bit(b, q)) same = false;
      if (!same) continue;
      std::size_t ra = 0, rb = 0;
      for (int q : qs) {
        ra = ra * 2 + bit(a, q);
        rb = rb * 2 + bit(b, q);
      }
      out(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(rb)) += rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  return out;
}

// Syndrome probabilities of a two-qubit code state: P(sz, sx) = <ψ|Π_sz Π_sx|ψ>.
// S^X = XX, S^Z = ZZ; eigenvalue +1 -> bit 0.
inline double syndrome_probability(const Mat& rho, int sz_bit, int sx_bit) {
  const Mat xx = kron(sx(), sx()), zz = kron(sz(), sz());
  const Mat id = Mat::Identity(4, 4);
  const Mat px = 0.5 * (id + (sx_bit ? -1.0 : 1.0) * xx);
  const Mat pz = 0.5 * (id + (sz_bit ? -1.0 : 1.0) * zz);
  return (pz * px * rho * px * pz).trace().real();
}

inline double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// P(X >= k) for X ~ Binomial(n, p).
inline double binomial_upper(int n, double p, int k) {
  double s = 0;
  for (int j = k; j <= n; ++j) s += std::exp(log_choose(n, j) + j * std::log(p) + (n - j) * std::log1p(-p));
  return s;
}

}  // namespace oracle
