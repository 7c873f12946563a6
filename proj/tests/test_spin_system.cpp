#include "donorsim/device_io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace donorsim;

namespace {

SpinSystemSpec one_p(double a, double b = 1.35) {
  SpinSystemSpec s;
  s.b_field = b;
  s.electron_gamma = 27.92991e9;
  NucleusSpec n;
  n.label = "N1";
  n.gamma = 17.23e6;
  n.hyperfine = a;
  n.t2_star = 1e-3;
  n.t1 = 100;
  s.nuclei = {n};
  return s;
}

SpinSystemSpec four_active() {
  auto s = default_device();
  s.nuclei.resize(4);
  s.active_mask.clear();
  return s;
}

std::vector<double> sorted_diag(const Matrix& h) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < h.rows(); ++i) v.push_back(h(i, i).real());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(SpinSystem, HamiltonianIsHermitian) {
  const auto spec = default_device();
  for (auto form : {HamiltonianForm::kSecular, HamiltonianForm::kFull}) {
    const Matrix h = build_static_hamiltonian(spec, form);
    EXPECT_LT(max_abs(h - h.adjoint()), 1e-12 * max_abs(h));
  }
}

TEST(SpinSystem, SecularHamiltonianMatchesDenseOracle) {
  const auto spec = four_active();
  std::vector<double> gn, a;
  for (const auto& n : spec.nuclei) {
    gn.push_back(n.gamma);
    a.push_back(n.hyperfine);
  }
  const auto ref = oracle::donor_hamiltonian(spec.b_field, spec.electron_gamma, gn, a, false);
  const Matrix h = build_static_hamiltonian(spec);
  EXPECT_LT((h - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
  // secular form: eigenvalues are the diagonal
  const auto ev = oracle::eigenvalues(h);
  const auto dg = sorted_diag(h);
  for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], dg[i], 1e-12 * std::abs(dg.back()));
}

TEST(SpinSystem, FullHamiltonianEigenvaluesMatchOracle) {
  const auto spec = one_p(28.6e6);
  const auto ref = oracle::eigenvalues(oracle::donor_hamiltonian(1.35, spec.electron_gamma, {17.23e6}, {28.6e6}, true));
  const auto got = oracle::eigenvalues(build_static_hamiltonian(spec, HamiltonianForm::kFull));
  ASSERT_EQ(ref.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], ref[i], 1e-9 * std::abs(ref[i]));
}

TEST(SpinSystem, FlipFlopCorrectionShrinksWithField) {
  auto gap = [](double b) {
    const auto s = one_p(28.6e6, b);
    const auto full = oracle::eigenvalues(build_static_hamiltonian(s, HamiltonianForm::kFull));
    const auto sec = sorted_diag(build_static_hamiltonian(s, HamiltonianForm::kSecular));
    double worst = 0;
    for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(full[i] - sec[i]));
    return worst;
  };
  const double g1 = gap(1.35), g100 = gap(135.0);
  EXPECT_GT(g1, 0);
  // second-order shift ~ A^2 / (γ_e B): a 100x field cuts it ~100x
  EXPECT_NEAR(g1 / g100, 100.0, 5.0);
}

TEST(SpinSystem, EsrSplittingEqualsHyperfine) {
  const auto s = one_p(28.6e6);
  EXPECT_NEAR(esr_frequency(s, {1}) - esr_frequency(s, {0}), 28.6e6, 1e-6);
}

TEST(SpinSystem, DecoupledLimitIsZeemanSum) {
  auto s = one_p(0.0);
  const auto ev = oracle::eigenvalues(build_static_hamiltonian(s));
  const double ez = 0.5 * s.electron_gamma * s.b_field, nz = 0.5 * s.nuclei[0].gamma * s.b_field;
  std::vector<double> expect{-ez - nz, -ez + nz, ez - nz, ez + nz};
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], expect[i], 1e-6);
}

TEST(SpinSystem, TransitionTableSixNuclei) {
  auto spec = default_device();
  spec.active_mask.clear();
  const auto table = esr_transition_table(spec);
  EXPECT_EQ(table.size(), 64u);
  double sum_a = 0;
  for (const auto& n : spec.nuclei) sum_a += n.hyperfine;
  EXPECT_NEAR(table.back().frequency - table.front().frequency, sum_a, 1e-3);
  // flipping N1, N2, N3 moves the line by A1, A2, A3: the eight coarse groups
  for (int k = 0; k < 3; ++k) {
    std::vector<int> lo(6, 0), hi(6, 0);
    hi[k] = 1;
    EXPECT_NEAR(esr_frequency(spec, hi) - esr_frequency(spec, lo), spec.nuclei[k].hyperfine, 1e-3);
  }
  EXPECT_DOUBLE_EQ(spec.nuclei[0].hyperfine, 28.6e6);
  EXPECT_DOUBLE_EQ(spec.nuclei[1].hyperfine, 73.7e6);
  EXPECT_DOUBLE_EQ(spec.nuclei[2].hyperfine, 137.0e6);
}

TEST(SpinSystem, TransitionTableMatchesEigenvalueDifferences) {
  const auto spec = four_active();
  std::vector<double> gn, a;
  for (const auto& n : spec.nuclei) {
    gn.push_back(n.gamma);
    a.push_back(n.hyperfine);
  }
  const auto h = oracle::donor_hamiltonian(spec.b_field, spec.electron_gamma, gn, a, false);
  const int n = 5;
  const std::size_t half = std::size_t{1} << (n - 1);
  for (const auto& line : esr_transition_table(spec)) {
    std::size_t idx = 0;
    for (int b : line.config.nuclear_bits) idx = idx * 2 + b;
    const double f = h(idx + half, idx + half).real() - h(idx, idx).real();
    EXPECT_NEAR(line.frequency, f, 1e-9 * f);
  }
}

TEST(SpinSystem, NmrFrequencyMatchesOracleAndTable) {
  const auto spec = four_active();
  std::vector<double> gn, a;
  for (const auto& nn : spec.nuclei) {
    gn.push_back(nn.gamma);
    a.push_back(nn.hyperfine);
  }
  const auto h = oracle::donor_hamiltonian(spec.b_field, spec.electron_gamma, gn, a, false);
  // measured NMR lines with the electron down (MHz)
  const double table[4] = {37.68e6, 60.03e6, 91.75e6, 23.36e6};
  for (int i = 0; i < 4; ++i) {
    for (int e = 0; e < 2; ++e) {
      const std::size_t base = e ? 16 : 0;
      const std::size_t up = base | (std::size_t{1} << (3 - i));
      const double f = h(base, base).real() - h(up, up).real();
      EXPECT_NEAR(nmr_frequency(spec, i, e), f, 1e-6 * std::abs(f) + 1e-6);
    }
    EXPECT_NEAR(std::abs(nmr_frequency(spec, i, 1) - nmr_frequency(spec, i, 0)), spec.nuclei[i].hyperfine, 1e-6);
    EXPECT_NEAR(nmr_frequency(spec, i, 0), table[i], 0.15e6) << spec.nuclei[i].label;
  }
  EXPECT_NEAR(nmr_frequency(one_p(0.0), 0, 0), 17.23e6 * 1.35, 1e-6);
  EXPECT_NEAR(nmr_frequency(one_p(0.0), 0, 1), 17.23e6 * 1.35, 1e-6);
}

TEST(SpinSystem, NmrCrosstalkDriveStrength) {
  EXPECT_NEAR(nmr_crosstalk_drive_strength(std::sqrt(15.0) * 1e3, 1), 1e3, 1e-9);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 50; ++k) {
    const double df = 37e3, f = nmr_crosstalk_drive_strength(df, k);
    // the detuned line nutates 2k full turns during the π pulse of length 1/(2f)
    EXPECT_NEAR(std::sqrt(f * f + df * df) / (2 * f), 2.0 * k, 1e-12 * 2 * k);
    EXPECT_LT(f, prev);
    prev = f;
  }
  EXPECT_LT(prev, 37e3 / 190);
  EXPECT_THROW(nmr_crosstalk_drive_strength(1e3, 0), std::invalid_argument);
}

TEST(SpinSystem, DonorSamplingPigeonhole) {
  const auto r = sample_feasible_donor_count(0.6e6, 304e6, 400e6, 2000, 3);
  EXPECT_EQ(r.min, 2);
  EXPECT_EQ(r.max, 2);
  DonorSamplingOptions o;
  o.count = DonorCount::kBeforeViolation;
  EXPECT_EQ(sample_feasible_donor_count(0.6e6, 304e6, 400e6, 500, 3, o).max, 1);
}

TEST(SpinSystem, DonorSamplingUnboundedAtZeroThreshold) {
  DonorSamplingOptions o;
  o.cap = 20;
  const auto r = sample_feasible_donor_count(0.6e6, 304e6, 1e-9, 200, 5, o);
  EXPECT_EQ(r.min, 20);
  EXPECT_EQ(r.max, 20);
  o.sampling = DonorSampling::kSequential;
  EXPECT_EQ(sample_feasible_donor_count(0.6e6, 304e6, 1e-9, 200, 5, o).min, 20);
}

TEST(SpinSystem, DonorSamplingDeterministic) {
  const auto a = sample_feasible_donor_count(0.6e6, 304e6, 10e6, 5000, 42);
  const auto b = sample_feasible_donor_count(0.6e6, 304e6, 10e6, 5000, 42);
  EXPECT_EQ(a.histogram, b.histogram);
  EXPECT_EQ(a.mean, b.mean);
  const auto c = sample_feasible_donor_count(0.6e6, 304e6, 10e6, 5000, 43);
  EXPECT_NE(a.histogram, c.histogram);
}

TEST(SpinSystem, DonorSamplingConventionsOrdered) {
  // counting the crowded donor adds exactly one to every trial
  DonorSamplingOptions before;
  before.count = DonorCount::kBeforeViolation;
  const auto v = sample_feasible_donor_count(0.6e6, 304e6, 10e6, 3000, 9);
  const auto b = sample_feasible_donor_count(0.6e6, 304e6, 10e6, 3000, 9, before);
  EXPECT_NEAR(v.mean - b.mean, 1.0, 1e-12);
}

TEST(SpinSystem, ValidationRejectsBadSpecs) {
  auto s = default_device();
  s.b_field = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = default_device();
  s.nuclei.push_back(s.nuclei[0]);
  s.active_mask.clear();
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = default_device();
  s.nuclei[0].t2_star = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(SpinSystem, ActiveMaskAndQubitIndex) {
  const auto s = default_device();
  EXPECT_EQ(s.num_qubits(), 5);
  EXPECT_EQ(s.qubit_of(0), 1);
  EXPECT_EQ(s.qubit_of(3), 4);
  EXPECT_EQ(s.qubit_of(4), -1);
  const auto one = s.with_active({2});
  EXPECT_EQ(one.num_qubits(), 2);
  EXPECT_EQ(one.qubit_of(2), 1);
  EXPECT_NEAR(esr_frequency(one, {1}) - esr_frequency(one, {0}), 137.0e6, 1e-3);
  // inactive nuclei still shift the ESR line through their frozen state
  double frozen = 0;
  for (int i : {0, 1, 3, 4, 5}) frozen += 0.5 * s.nuclei[i].hyperfine;
  EXPECT_NEAR(esr_frequency(one, {0}), s.electron_gamma * s.b_field + frozen - 0.5 * 137.0e6, 1e-3);
  const Matrix h = build_static_hamiltonian(one);
  EXPECT_NEAR(h(2, 2).real() - h(0, 0).real(), esr_frequency(one, {0}), 1e-3);
}

TEST(DeviceIo, BundledFileMatchesBuiltin) {
  const auto file = load_device(std::string(DONORSIM_SOURCE_DIR) + "/configs/device_default.json");
  EXPECT_EQ(device_to_json(file), device_to_json(default_device()));
}

TEST(DeviceIo, RoundTrip) {
  auto s = default_device();
  s.nuclei[2].frozen_bit = 0;
  s.electron_t1 = 1.5;
  const auto back = device_from_json(device_to_json(s));
  EXPECT_EQ(device_to_json(back), device_to_json(s));
  EXPECT_EQ(back.nuclei[2].frozen_bit, 0);
  EXPECT_DOUBLE_EQ(back.electron_t1, 1.5);
}

TEST(DeviceIo, ErrorsAreConfigErrors) {
  EXPECT_THROW(device_from_json(json::parse(R"({"b_field_T": 1.35})")), ConfigError);
  EXPECT_THROW(device_from_json(json::parse(R"({"b_field_T": 1.35, "electron_gamma_Hz_per_T": 2.8e10,
    "nuclei": [{"gamma_Hz_per_T": "x", "A_Hz": 1, "T2_star_s": 1, "T1_s": 1}]})")),
               ConfigError);
  EXPECT_THROW(device_from_json(json::parse(R"({"b_field_T": -1, "electron_gamma_Hz_per_T": 2.8e10, "nuclei": []})")),
               ConfigError);
  const auto path = std::filesystem::temp_directory_path() / "donorsim_bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_device(path.string()), ConfigError);
  EXPECT_THROW(load_device("/nonexistent/device.json"), ConfigError);
}
