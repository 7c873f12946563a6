#include "donorsim/readout.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace donorsim;

namespace {

double up_blip_rate(const ElzermanParams& p, int shots, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int n = 0;
  for (int i = 0; i < shots; ++i) n += elzerman_single_shot(true, p, rng).blip;
  return static_cast<double>(n) / shots;
}

ReadoutAnalysis analyse(const ElzermanParams& p, int shots, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> up, down;
  for (int i = 0; i < shots; ++i) {
    up.push_back(elzerman_single_shot(true, p, rng).max_signal);
    down.push_back(elzerman_single_shot(false, p, rng).max_signal);
  }
  return readout_fidelity_analysis(up, down);
}

}  // namespace

TEST(Elzerman, NoiselessBlipProbabilityMatchesClosedForm) {
  // blip needs a dwell longer than ln2/bandwidth before refill or window end
  for (double bw : {20e3, 50e3, 200e3}) {
    ElzermanParams p;
    p.noise = 0;
    p.bandwidth = bw;
    const double ell = std::log(2.0) / bw;
    const double ref = std::exp(-ell / p.tunnel_in_down) * (1 - std::exp(-(p.window - ell) / p.tunnel_out_up));
    const int shots = 40000;
    const double got = up_blip_rate(p, shots, 11);
    EXPECT_NEAR(got, ref, 4 * std::sqrt(ref * (1 - ref) / shots)) << bw;
  }
}

TEST(Elzerman, IdealDetectorHasUnitVisibility) {
  ElzermanParams p;
  p.noise = 0;
  p.tunnel_out_up = 1e-9;
  p.tunnel_in_down = 1.0;
  p.bandwidth = 1e12;
  const auto a = analyse(p, 2000, 3);
  EXPECT_DOUBLE_EQ(a.visibility, 1.0);
  EXPECT_DOUBLE_EQ(a.f_up, 1.0);
  EXPECT_DOUBLE_EQ(a.f_down, 1.0);
}

TEST(Elzerman, NoTunnellingMeansNoContrast) {
  ElzermanParams p;
  p.tunnel_out_up = 1e6;
  const auto a = analyse(p, 5000, 5);
  EXPECT_LT(a.visibility, 0.05);
}

TEST(Elzerman, VisibilityFallsWithNoise) {
  double prev = 2;
  for (double noise : {0.05, 0.2, 0.4, 0.8}) {
    ElzermanParams p;
    p.noise = noise;
    const double v = analyse(p, 8000, 9).visibility;
    EXPECT_LT(v, prev) << noise;
    prev = v;
  }
}

TEST(Elzerman, IdenticalPopulationsGiveZeroVisibility) {
  std::vector<double> s{0.1, 0.4, 0.2, 0.9, 0.3};
  EXPECT_NEAR(readout_fidelity_analysis(s, s).visibility, 0.0, 1e-15);
  EXPECT_THROW(readout_fidelity_analysis({}, s), std::invalid_argument);
}

TEST(Elzerman, FalseBlipsOnlyAffectDown) {
  ElzermanParams p;
  p.noise = 0;
  p.false_blip = 0.25;
  std::mt19937_64 rng(1);
  int n = 0;
  const int shots = 20000;
  for (int i = 0; i < shots; ++i) n += elzerman_single_shot(false, p, rng).blip;
  EXPECT_NEAR(static_cast<double>(n) / shots, 0.25, 4 * std::sqrt(0.25 * 0.75 / shots));
  p.false_blip = 2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Qnd, MajorityErrorMatchesBinomialTails) {
  const double f = 0.8145;
  const auto e = ElectronReadout::symmetric(f);
  for (int reps : {1, 5, 11, 25, 40}) {
    const auto [up, down] = qnd_majority_error(reps, e);
    // nucleus up is misread when at most half of the shots flip the electron
    const double up_ref = oracle::binomial_upper(reps, 1 - f, reps - reps / 2);
    const double down_ref = oracle::binomial_upper(reps, 1 - f, reps / 2 + 1);
    EXPECT_NEAR(up, up_ref, 1e-12 * std::max(1.0, up_ref)) << reps;
    EXPECT_NEAR(down, down_ref, 1e-12 * std::max(1.0, down_ref)) << reps;
  }
  const auto [u40, d40] = qnd_majority_error(40, e);
  EXPECT_LT(u40, 1e-3);
  EXPECT_LT(d40, 1e-3);
  EXPECT_NEAR(qnd_majority_error(1, e).first, 1 - f, 1e-15);
}

TEST(Qnd, OutcomesFollowBornRule) {
  Matrix rho = Matrix::Zero(4, 4);
  rho(0, 0) = 0.7;
  rho(1, 1) = 0.3;
  rho(0, 1) = rho(1, 0) = std::sqrt(0.21);
  std::mt19937_64 rng(21);
  const int trials = 20000;
  int ones = 0;
  for (int i = 0; i < trials; ++i) {
    const auto r = qnd_nuclear_readout(rho, 1, 2, 5, ElectronReadout{}, 0.0, rng);
    ones += r.true_bit;
    ASSERT_EQ(r.outcome, r.true_bit);
    ASSERT_EQ(r.flips, 0);
    ASSERT_NEAR(r.post_state(r.true_bit, r.true_bit).real(), 1.0, 1e-12);
  }
  EXPECT_NEAR(static_cast<double>(ones) / trials, 0.3, 4 * std::sqrt(0.21 / trials));
}

TEST(Qnd, SimulatedVoteErrorMatchesAnalytic) {
  const auto e = ElectronReadout::symmetric(0.8);
  const int reps = 5, trials = 30000;
  std::mt19937_64 rng(4);
  const Matrix up = projector(basis_ket(1, 2));
  int wrong = 0;
  for (int i = 0; i < trials; ++i) wrong += qnd_nuclear_readout(up, 0, 1, reps, e, 0.0, rng).outcome != 1;
  const double ref = qnd_majority_error(reps, e).first;
  EXPECT_NEAR(static_cast<double>(wrong) / trials, ref, 4 * std::sqrt(ref * (1 - ref) / trials));
}

TEST(Est, RoundSuccessEnumeration) {
  for (double p : {0.0, 0.05, 0.2})
    for (int n : {1, 2, 4}) {
      // enumerate both pulses of every nucleus
      double s = 0;
      for (int mask = 0; mask < (1 << (2 * n)); ++mask) {
        double w = 1;
        bool ok = true;
        for (int k = 0; k < n; ++k) {
          const int a = (mask >> (2 * k)) & 1, b = (mask >> (2 * k + 1)) & 1;
          w *= (a ? p : 1 - p) * (b ? p : 1 - p);
          ok = ok && a == b;
        }
        if (ok) s += w;
      }
      EXPECT_NEAR(est_round_success(p, n), s, 1e-14);
    }
}

TEST(Est, RoundsAreGeometric) {
  const double p = 0.1;
  const int n = 4, trials = 20000;
  const double s = est_round_success(p, n);
  std::mt19937_64 rng(8);
  double sum = 0;
  int firsts = 0;
  for (int i = 0; i < trials; ++i) {
    const auto r = est_initialize({1, 0, 1, 1}, {0, 0, 0, 0}, p, rng);
    ASSERT_TRUE(r.success);
    ASSERT_EQ(r.bits, (std::vector<int>{0, 0, 0, 0}));
    ASSERT_EQ(r.retries, r.rounds - 1);
    sum += r.rounds;
    firsts += r.rounds == 1;
  }
  EXPECT_NEAR(sum / trials, 1 / s, 4 * std::sqrt(1 - s) / s / std::sqrt(trials));
  EXPECT_NEAR(static_cast<double>(firsts) / trials, s, 4 * std::sqrt(s * (1 - s) / trials));
  const auto done = est_initialize({0, 1}, {0, 1}, p, rng);
  EXPECT_EQ(done.rounds, 0);
  EXPECT_THROW(est_initialize({0}, {0}, 0.5, rng), std::invalid_argument);
  EXPECT_LT(max_abs(est_initialize_state(3, 5) - projector(basis_ket(5, 8))), 1e-15);
}

TEST(Shock, FlipCountsAreBinomial) {
  const double rate = 1.08e-5;
  const long long n = 9600000;
  std::mt19937_64 rng(10);
  double sum = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    const auto r = apply_ionization_shock(projector(basis_ket(0, 2)), 1, {rate}, n, rng);
    sum += static_cast<double>(r.flips[0]);
    ASSERT_NEAR(r.rho(r.flips[0] % 2, r.flips[0] % 2).real(), 1.0, 1e-12);
  }
  const double mean = rate * n;
  EXPECT_NEAR(mean, 103.68, 1e-9);
  EXPECT_NEAR(sum / trials, mean, 4 * std::sqrt(mean / trials));
}

TEST(Shock, ChannelUsesOddEventProbability) {
  const double r = 0.1;
  const int n = 7;
  double odd = 0;
  for (int k = 1; k <= n; k += 2) odd += std::exp(oracle::log_choose(n, k)) * std::pow(r, k) * std::pow(1 - r, n - k);
  Matrix rho = Matrix::Zero(4, 4);
  rho(0, 0) = 1;
  const Matrix out = ionization_shock_channel(rho, 2, {r, 0.0}, n);
  EXPECT_NEAR(out(2, 2).real(), odd, 1e-14);
  EXPECT_NEAR(out(0, 0).real(), 1 - odd, 1e-14);
  EXPECT_NEAR(out(1, 1).real(), 0.0, 1e-15);
}

TEST(Spam, ProductHasZeroResidual) {
  const auto s = product_spam({{0.02, 0.05}, {0.1, 0.03}, {0.0, 0.2}});
  EXPECT_NO_THROW(s.validate());
  const auto m01 = marginalize(s, {0, 1});
  const auto m0 = marginalize(s, {0});
  const auto m1 = marginalize(s, {1});
  EXPECT_LT(tensor_residual(m01, m0, m1), 1e-14);
  RealMatrix q0(2, 2);
  q0 << 0.98, 0.05, 0.02, 0.95;
  EXPECT_LT((m0.m - q0).norm(), 1e-14);
  EXPECT_EQ(s.labels().front(), "000");
  EXPECT_EQ(s.labels().back(), "111");
}

TEST(Spam, CorrelatedErrorsLeaveResidual) {
  RealMatrix counts = RealMatrix::Zero(4, 4);
  // prepared 11 is sometimes read as 00: a correlated error
  counts << 100, 0, 0, 10, 0, 100, 0, 0, 0, 0, 100, 0, 0, 0, 0, 90;
  const auto s = build_spam(counts);
  EXPECT_NO_THROW(s.validate());
  EXPECT_NEAR(s.m(0, 3), 0.1, 1e-15);
  const auto m0 = marginalize(s, {0}), m1 = marginalize(s, {1});
  EXPECT_NO_THROW(m0.validate());
  EXPECT_NO_THROW(m1.validate());
  EXPECT_GT(tensor_residual(s, m0, m1), 1e-3);
  EXPECT_THROW(build_spam(RealMatrix::Ones(3, 3)), std::invalid_argument);
  EXPECT_THROW(marginalize(s, {2}), std::invalid_argument);
}
