#include "donorsim/fitting.hpp"
#include "donorsim/tomography.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace donorsim;

namespace {

Vector random_pure(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = cplx(g(rng), g(rng));
  return v.normalized();
}

Matrix random_mixed(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = cplx(g(rng), g(rng));
  Matrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

Vector phi_plus() { return oracle::ket({1, 0, 0, 1}); }

FitData sample(const std::function<double(double)>& f, double x0, double x1, int n) {
  FitData d;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * i / (n - 1);
    d.x.push_back(x);
    d.y.push_back(f(x));
  }
  return d;
}

void expect_rel(double got, double want, double rel, const char* what) {
  EXPECT_NEAR(got, want, rel * std::abs(want)) << what;
}

}  // namespace

TEST(Tomography, LinearInversionRoundTrip) {
  std::mt19937_64 rng(1);
  for (int n : {1, 2, 3}) {
    const Matrix rho = random_mixed(1 << n, rng);
    const RealVector e = pauli_expectations(rho, n);
    EXPECT_LT(max_abs(linear_inversion(e, n) - rho), 1e-13);
    std::map<std::string, double> m;
    for (std::size_t k = 1; k < static_cast<std::size_t>(e.size()); ++k) m[pauli_label(k, n)] = e(k);
    EXPECT_LT(max_abs(linear_inversion(m, n) - rho), 1e-13);
    EXPECT_LT((expectations_from_data(exact_tomography(rho, n), n) - e).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_THROW(linear_inversion(RealVector::Zero(5), 1), std::invalid_argument);
  EXPECT_THROW(linear_inversion(std::map<std::string, double>{{"X", 0.0}}, 1), std::invalid_argument);
}

TEST(Tomography, BasisEffectsAreProjectiveMeasurements) {
  for (const auto& axes : product_bases(2)) {
    const auto eff = pauli_basis_effects(axes);
    ASSERT_EQ(eff.size(), 4u);
    Matrix sum = Matrix::Zero(4, 4);
    for (const auto& e : eff) {
      sum += e;
      EXPECT_LT(max_abs(e * e - e), 1e-14);
    }
    EXPECT_LT(max_abs(sum - Matrix::Identity(4, 4)), 1e-14);
  }
  EXPECT_EQ(product_bases(3).size(), 27u);
  // outcome 0 is the +1 eigenvector
  const auto zx = pauli_basis_effects("ZX");
  EXPECT_NEAR((zx[0] * oracle::proj(oracle::ket({1, 1, 0, 0}))).trace().real(), 1.0, 1e-14);
}

TEST(Tomography, MleOnExactPureDataIsNearlyExact) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector psi = random_pure(4, rng);
    const auto r = mle_rhorr(exact_tomography(projector(psi), 2));
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.monotone);
    EXPECT_GT(oracle::fidelity(r.rho, psi), 1 - 1e-6) << trial;
    EXPECT_NEAR(r.rho.trace().real(), 1.0, 1e-12);
    EXPECT_TRUE(is_hermitian(r.rho, 1e-12));
  }
}

TEST(Tomography, MleLikelihoodNeverDecreases) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix rho = random_mixed(4, rng);
    const auto data = simulate_tomography(rho, 2, 300, rng);
    const auto r = mle_rhorr(data);
    const auto& ll = r.log_likelihood;
    for (std::size_t i = 1; i < ll.size(); ++i) ASSERT_GE(ll[i], ll[i - 1] - 1e-12 * std::abs(ll[i - 1])) << i;
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.rho);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
    // the MLE beats the truth on its own data
    EXPECT_GE(log_likelihood(r.rho, data), log_likelihood(rho, data) - 1e-9);
  }
  EXPECT_THROW(mle_rhorr({}), std::invalid_argument);
}

TEST(Tomography, FiniteShotBellFidelity) {
  std::mt19937_64 rng(4);
  const Vector psi = phi_plus();
  int good = 0;
  for (int run = 0; run < 100; ++run) {
    const auto r = mle_rhorr(simulate_tomography(projector(psi), 2, 1000, rng));
    good += oracle::fidelity(r.rho, psi) > 0.98;
  }
  EXPECT_GE(good, 95);
}

TEST(Witness, ReferenceStates) {
  for (int n : {2, 3, 4}) {
    const std::size_t dim = std::size_t{1} << n;
    Vector ghz = Vector::Zero(dim);
    ghz(0) = ghz(dim - 1) = 1 / std::sqrt(2.0);
    const auto w = ghz_witness_from_state(projector(ghz), n);
    EXPECT_NEAR(w.witness, -0.5, 1e-12) << n;
    EXPECT_NEAR(w.fidelity, 1.0, 1e-12) << n;
    const auto mixed = ghz_witness_from_state(Matrix::Identity(dim, dim) / static_cast<double>(dim), n);
    EXPECT_NEAR(mixed.witness, 0.5 - 1.0 / dim, 1e-12) << n;
  }
  EXPECT_NEAR(ghz_witness_from_state(Matrix::Identity(16, 16) / 16.0, 4).witness, 0.4375, 1e-12);
  EXPECT_THROW(ghz_witness(0.5, 0.5, {1.0}), std::invalid_argument);
}

TEST(Witness, DecompositionEqualsProjector) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    const int dim = 1 << n;
    const Matrix rho = random_mixed(dim, rng);
    oracle::Vec ghz = oracle::Vec::Zero(dim);
    ghz(0) = ghz(dim - 1) = 1 / std::sqrt(2.0);
    const double ref = 0.5 - oracle::fidelity(rho, ghz);
    ASSERT_NEAR(ghz_witness_from_state(rho, n).witness, ref, 1e-9) << trial;
  }
}

TEST(Witness, AxisIsUnitPauli) {
  for (int k = 0; k < 4; ++k) {
    const Matrix m = witness_axis(k, 4);
    EXPECT_LT(max_abs(m * m - Matrix::Identity(2, 2)), 1e-14);
    EXPECT_NEAR(m.trace().real(), 0.0, 1e-15);
  }
  EXPECT_LT(max_abs(witness_axis(0, 3) - pauli::X()), 1e-15);
  EXPECT_LT(max_abs(witness_axis(2, 4) - pauli::Y()), 1e-15);
}

TEST(Scalar, CorrelationFactor) {
  const double c = correlation_factor(349, 788, 262, 265);
  EXPECT_NEAR(c, 0.023, 0.001);
  EXPECT_NEAR(c, 349.0 * 788.0 / 4 * (1 / (262.0 * 262.0) - 1 / (265.0 * 265.0)), 1e-15);
  // equal Bell lifetimes: no correlated dephasing
  EXPECT_EQ(correlation_factor(1, 2, 3, 3), 0.0);
  EXPECT_THROW(correlation_factor(0, 1, 1, 1), std::invalid_argument);
}

TEST(Scalar, BiasRatio) {
  const Vector t = phi_plus();
  const Vector ez = oracle::kron(oracle::id2(), oracle::sz()) * t;
  const Vector ex = oracle::kron(oracle::id2(), oracle::sx()) * t;
  const Vector ey = oracle::kron(oracle::id2(), oracle::sy()) * t;
  const Matrix rho = 0.9 * projector(t) + 0.07 * projector(ez) + 0.01 * projector(ex) + 0.02 * projector(ey);
  const auto b = bias_ratio(rho, t);
  EXPECT_NEAR(b.e_z, 0.07, 1e-14);
  EXPECT_NEAR(b.e_x, 0.01, 1e-14);
  EXPECT_NEAR(b.e_y, 0.02, 1e-14);
  EXPECT_NEAR(b.ratio, 7.0, 1e-10);
  EXPECT_TRUE(std::isinf(bias_ratio(0.9 * projector(t) + 0.1 * projector(ez), t).ratio));
  EXPECT_THROW(bias_ratio(Matrix::Identity(2, 2), t), std::invalid_argument);
}

TEST(Scalar, FidelityConversions) {
  EXPECT_NEAR(irb_fidelity(1.0, 0.9), 0.925, 1e-15);
  EXPECT_NEAR(irb_fidelity(0.95, 0.95 * 0.9), 0.925, 1e-15);
  EXPECT_DOUBLE_EQ(irb_fidelity(0.9, 0.9), 1.0);
  EXPECT_NEAR(clifford_fidelity_1q(0.98), 0.99, 1e-15);
  EXPECT_THROW(irb_fidelity(0, 0.5), std::invalid_argument);
  EXPECT_THROW(irb_fidelity(0.5, 1.2), std::invalid_argument);
}

TEST(Ptm, DepolarizingAndUnitaries) {
  for (int n : {1, 2}) {
    const int count = 1 << (2 * n);
    const auto r = ptm_of_channel(depolarizing_channel(0.1, n), n);
    RealMatrix ref = RealMatrix::Identity(count, count) * 0.9;
    ref(0, 0) = 1;
    EXPECT_LT((r - ref).cwiseAbs().maxCoeff(), 1e-14);
  }
  RealMatrix x(4, 4);
  x.setZero();
  x.diagonal() << 1, 1, -1, -1;
  EXPECT_LT((ptm_of_unitary(pauli::X()) - x).cwiseAbs().maxCoeff(), 1e-14);
  // Hadamard swaps X and Z
  Matrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const auto rh = ptm_of_unitary(h);
  EXPECT_NEAR(rh(3, 1), 1.0, 1e-14);
  EXPECT_NEAR(rh(1, 3), 1.0, 1e-14);
  EXPECT_NEAR(rh(2, 2), -1.0, 1e-14);
  // unitary PTMs are orthogonal
  const Matrix u = oracle::rot(0.7, 0.2, -0.5, std::sqrt(0.71));
  const auto ru = ptm_of_unitary(u);
  EXPECT_LT((ru * ru.transpose() - RealMatrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Ptm, ErrorGenerator) {
  const Matrix u = oracle::rot(oracle::pi / 2, 1, 0, 0);
  const auto ideal = ptm_of_unitary(u);
  const RealMatrix noisy = ptm_of_channel(depolarizing_channel(0.05, 1), 1) * ideal;
  const auto g = error_generator(noisy, ideal);
  RealMatrix ref = RealMatrix::Zero(4, 4);
  ref.diagonal() << 0, std::log(0.95), std::log(0.95), std::log(0.95);
  EXPECT_LT((g.generator - ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE(g.near_branch_cut);

  // small over-rotation about z: antisymmetric generator in the XY block
  const double eps = 0.01;
  const auto gz = error_generator(ptm_of_unitary(oracle::rot(eps, 0, 0, 1)), RealMatrix::Identity(4, 4));
  EXPECT_NEAR(gz.generator(2, 1), eps, 1e-12);
  EXPECT_NEAR(gz.generator(1, 2), -eps, 1e-12);
  EXPECT_NEAR(gz.generator(3, 3), 0.0, 1e-12);

  // a π error puts eigenvalues on the cut
  const auto gpi = error_generator(ptm_of_unitary(pauli::Z()), RealMatrix::Identity(4, 4));
  EXPECT_TRUE(gpi.near_branch_cut);
  EXPECT_THROW(error_generator(RealMatrix::Identity(4, 4), RealMatrix::Zero(4, 4)), std::invalid_argument);
  EXPECT_THROW(error_generator(RealMatrix::Identity(4, 4), RealMatrix::Identity(2, 2)), std::invalid_argument);
}

TEST(Fits, RecoverNoiselessParameters) {
  {
    const double a = 0.4, t2 = 20e-6, det = 200e3, ph = 0.3, b = 0.5;
    const auto d = sample(
        [&](double t) { return a * std::exp(-std::pow(t / t2, 2)) * std::cos(oracle::pi * 2 * det * t + ph) + b; }, 0,
        40e-6, 200);
    const auto r = fit_ramsey(d);
    expect_rel(r.get("A"), a, 1e-3, "A");
    expect_rel(r.get("T2star"), t2, 1e-3, "T2star");
    expect_rel(r.get("detuning"), det, 1e-3, "detuning");
    expect_rel(r.get("phase"), ph, 1e-3, "phase");
    expect_rel(r.get("B"), b, 1e-3, "B");
  }
  {
    const double a = 0.8, t2 = 1e-3, alpha = 1.7, b = 0.1;
    const auto d = sample([&](double t) { return a * std::exp(-std::pow(t / t2, alpha)) + b; }, 0, 3e-3, 60);
    const auto r = fit_stretched(d);
    expect_rel(r.get("A"), a, 1e-3, "A");
    expect_rel(r.get("T2"), t2, 1e-3, "T2");
    expect_rel(r.get("alpha"), alpha, 1e-3, "alpha");
    expect_rel(r.get("B"), b, 1e-3, "B");
    EXPECT_FALSE(r.degenerate);
  }
  {
    const double a = -0.9, t1 = 120, b = 0.95;
    const auto r = fit_t1(sample([&](double t) { return a * std::exp(-t / t1) + b; }, 0, 500, 30));
    expect_rel(r.get("A"), a, 1e-3, "A");
    expect_rel(r.get("T1"), t1, 1e-3, "T1");
    expect_rel(r.get("B"), b, 1e-3, "B");
  }
  {
    const double a = 0.5, p = 0.985, b = 0.5;
    FitData d;
    for (int m : {1, 5, 10, 20, 40, 70, 100, 150, 200, 300}) {
      d.x.push_back(m);
      d.y.push_back(a * std::pow(p, m) + b);
    }
    const auto r = fit_rb(d);
    expect_rel(r.get("A"), a, 1e-3, "A");
    expect_rel(r.get("p"), p, 1e-5, "p");
    expect_rel(r.get("B"), b, 1e-3, "B");
  }
  {
    const double a = 0.45, f = 3.3e3, ph = -1.1, b = 0.52;
    const auto r = fit_sine(sample([&](double t) { return a * std::cos(oracle::pi * 2 * f * t + ph) + b; }, 0, 2e-3, 80));
    expect_rel(r.get("A"), a, 1e-3, "A");
    expect_rel(r.get("frequency"), f, 1e-3, "frequency");
    expect_rel(r.get("phase"), ph, 1e-3, "phase");
    expect_rel(r.get("B"), b, 1e-3, "B");
  }
}

TEST(Fits, StretchedRespectsBounds) {
  FitOptions o;
  o.alpha_min = 1;
  o.alpha_max = 2;
  o.b_lower = 0;
  const auto d = sample([](double t) { return 0.6 * std::exp(-std::pow(t, 3.0)) + 0.2; }, 0, 3, 50);
  const auto r = fit_stretched(d, o);
  EXPECT_GE(r.get("alpha"), 1.0);
  EXPECT_LE(r.get("alpha"), 2.0);
  EXPECT_GE(r.get("B"), 0.0);
}

TEST(Fits, ConstantDataIsDegenerate) {
  FitData d;
  for (int i = 0; i < 20; ++i) {
    d.x.push_back(i);
    d.y.push_back(0.5);
  }
  const auto s = fit_stretched(d);
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(std::isnan(s.get("T2")));
  EXPECT_EQ(s.get("B"), 0.5);
  EXPECT_TRUE(fit_t1(d).degenerate);
  const auto rb = fit_rb(d);
  EXPECT_TRUE(rb.degenerate);
  EXPECT_EQ(rb.get("p"), 1.0);
  EXPECT_THROW(fit_sine(d), std::runtime_error);
}

TEST(Fits, RejectsTooFewPoints) {
  FitData d{{0, 1, 2, 3, 4}, {1, 0.5, 0.3, 0.2, 0.1}};
  EXPECT_THROW(fit_ramsey(d), std::invalid_argument);
  EXPECT_THROW(fit_t1(FitData{{0, 1}, {1}}), std::invalid_argument);
  EXPECT_THROW(static_cast<void>(fit_t1(FitData{{0, 1, 2, 3, 4, 5}, {1, 0.6, 0.4, 0.3, 0.25, 0.2}}).get("nope")), std::out_of_range);
}

TEST(Bootstrap, MeanIntervalMatchesStandardError) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(2.0, 1.0);
  std::vector<double> s(400);
  for (auto& x : s) x = g(rng);
  auto mean = [](const std::vector<double>& v) {
    double t = 0;
    for (double x : v) t += x;
    return t / v.size();
  };
  const auto iv = bootstrap_ci(s, mean, 2000, 11);
  double sd = 0;
  const double m = mean(s);
  for (double x : s) sd += (x - m) * (x - m);
  sd = std::sqrt(sd / (s.size() - 1));
  const double se = sd / std::sqrt(static_cast<double>(s.size()));
  EXPECT_NEAR(iv.center, m, 1e-15);
  EXPECT_NEAR(0.5 * (iv.hi - iv.lo), se, 0.1 * se);
  EXPECT_LT(iv.lo, m);
  EXPECT_GT(iv.hi, m);
  // same seed, same interval
  const auto again = bootstrap_ci(s, mean, 2000, 11);
  EXPECT_EQ(iv.lo, again.lo);
  EXPECT_EQ(iv.hi, again.hi);
  EXPECT_THROW(bootstrap_ci({}, mean, 200, 1), std::invalid_argument);
  EXPECT_THROW(bootstrap_ci(s, mean, 10, 1), std::invalid_argument);
}

TEST(Bootstrap, FitIntervalCoversTruth) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0, 0.01);
  const double t1 = 50;
  auto d = sample([&](double t) { return 0.8 * std::exp(-t / t1) + 0.1; }, 0, 200, 40);
  for (auto& y : d.y) y += noise(rng);
  const auto r = bootstrap_fit(d, fit_t1, 300, 3);
  const auto [lo, hi] = r.ci("T1");
  EXPECT_LT(lo, r.get("T1"));
  EXPECT_GT(hi, r.get("T1"));
  EXPECT_LT(hi - lo, 0.2 * t1);
  EXPECT_NEAR(r.get("T1"), t1, 3 * (hi - lo));
}

TEST(Percentile, InterpolatesOrderStatistics) {
  std::vector<double> v(101);
  for (int i = 0; i <= 100; ++i) v[i] = 100 - i;
  const auto iv = percentile_interval(v, 50);
  EXPECT_NEAR(iv.lo, 15.865, 1e-9);
  EXPECT_NEAR(iv.hi, 84.135, 1e-9);
}
