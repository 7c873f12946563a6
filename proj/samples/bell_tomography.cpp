// Prepare Phi+ on N2-N3 under device dephasing, sample 1000 shots per Pauli
// basis and reconstruct the state with RρR maximum likelihood.
#include "donorsim/device_io.hpp"
#include "donorsim/gates.hpp"
#include "donorsim/tomography.hpp"

#include <cstdio>
#include <random>

using namespace donorsim;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const auto spec = default_device();
  Circuit c = bell_prep_circuit(spec, 1, 2, BellState::kPhiPlus);
  compile(c, spec);

  RunOptions o;
  o.drive.selectivity = DriveSelectivity::kResonantOnly;
  o.noise = device_noise(spec);
  const auto run = run_circuit(c, spec, register_basis_state(spec), o);
  const Matrix pair = reduce_to_nuclei(run.rho, spec, {1, 2});

  std::mt19937_64 rng(seed);
  const auto data = simulate_tomography(pair, 2, 1000, rng);
  const auto mle = mle_rhorr(data);
  const Vector phi = bell_vector(BellState::kPhiPlus);
  std::printf("circuit %.1f us\n", run.duration * 1e6);
  std::printf("simulated fidelity   %.6f\n", state_fidelity(pair, phi));
  std::printf("linear inversion     %.6f\n", state_fidelity(linear_inversion(expectations_from_data(data, 2), 2), phi));
  std::printf("MLE (%d iterations)  %.6f\n", mle.iterations, state_fidelity(mle.rho, phi));
}
