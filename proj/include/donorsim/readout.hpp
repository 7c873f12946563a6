#pragma once

#include "donorsim/core.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace donorsim {

// ---------------------------------------------------------------------------
// Electron single-shot readout (energy-selective tunnelling)

struct ElzermanParams {
  double tunnel_out_up = 50e-6;   // s, mean time for |↑> to tunnel out
  double tunnel_in_down = 100e-6; // s, mean time for a |↓> electron to refill
  double window = 500e-6;         // s
  double bandwidth = 50e3;        // Hz, detector bandwidth
  double signal = 1.0;            // blip amplitude at full bandwidth
  double noise = 0.2;             // Gaussian sigma on the trace maximum
  double threshold = 0.5;
  double false_blip = 0;          // probability a |↓> shot shows a spurious blip

  void validate() const {
    if (!(tunnel_out_up > 0) || !(tunnel_in_down > 0) || !(window > 0))
      throw std::invalid_argument("Elzerman times must be > 0");
    if (!(bandwidth > 0) || noise < 0 || false_blip < 0 || false_blip > 1)
      throw std::invalid_argument("bad Elzerman detector parameters");
  }
};

struct ShotResult {
  bool blip = false;      // max_signal above threshold
  bool tunneled = false;  // a real charge event happened in the window
  double max_signal = 0;
};

template <typename Rng>
ShotResult elzerman_single_shot(bool spin_up, const ElzermanParams& p, Rng& rng) {
  p.validate();
  ShotResult r;
  double height = 0;
  if (spin_up) {
    std::exponential_distribution<double> out(1.0 / p.tunnel_out_up), in(1.0 / p.tunnel_in_down);
    const double t_out = out(rng);
    if (t_out < p.window) {
      r.tunneled = true;
      const double length = std::min(in(rng), p.window - t_out);
      height = p.signal * (1 - std::exp(-length * p.bandwidth));
    }
  } else if (p.false_blip > 0) {
    std::bernoulli_distribution fb(p.false_blip);
    if (fb(rng)) height = p.signal;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  r.max_signal = height + (p.noise > 0 ? p.noise * noise(rng) : 0.0);
  r.blip = r.max_signal > p.threshold;
  return r;
}

struct ReadoutAnalysis {
  double f_up = 0, f_down = 0, visibility = 0, best_threshold = 0;
  std::vector<double> thresholds, f_up_curve, f_down_curve;
};

// Sweeps the threshold over the pooled signal values (midpoints), maximising F_up + F_down - 1.
inline ReadoutAnalysis readout_fidelity_analysis(std::vector<double> up, std::vector<double> down,
                                                 std::size_t max_points = 512) {
  if (up.empty() || down.empty()) throw std::invalid_argument("readout analysis needs shots of both states");
  std::sort(up.begin(), up.end());
  std::sort(down.begin(), down.end());
  std::vector<double> pooled = up;
  pooled.insert(pooled.end(), down.begin(), down.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> cand;
  cand.push_back(pooled.front() - 1e-12);
  const std::size_t stride = std::max<std::size_t>(1, pooled.size() / max_points);
  for (std::size_t i = 0; i + 1 < pooled.size(); i += stride) cand.push_back(0.5 * (pooled[i] + pooled[i + 1]));
  cand.push_back(pooled.back());
  ReadoutAnalysis a;
  a.visibility = -2;
  for (double t : cand) {
    const double fu = static_cast<double>(up.end() - std::upper_bound(up.begin(), up.end(), t)) / up.size();
    const double fd = static_cast<double>(std::upper_bound(down.begin(), down.end(), t) - down.begin()) / down.size();
    a.thresholds.push_back(t);
    a.f_up_curve.push_back(fu);
    a.f_down_curve.push_back(fd);
    if (fu + fd - 1 > a.visibility + 1e-15) {
      a.visibility = fu + fd - 1;
      a.f_up = fu;
      a.f_down = fd;
      a.best_threshold = t;
    }
  }
  return a;
}

// Two-parameter electron readout error channel.
struct ElectronReadout {
  double p_down_given_up = 0;  // reads ↓ when ↑
  double p_up_given_down = 0;  // reads ↑ when ↓

  static ElectronReadout symmetric(double fidelity) { return {1 - fidelity, 1 - fidelity}; }
};

// ---------------------------------------------------------------------------
// Repeated QND readout of one nucleus

struct QndResult {
  int outcome = 0;     // majority vote
  int true_bit = 0;    // nuclear state after the readout
  int up_counts = 0;
  int flips = 0;       // ionisation-shock flips during the repetitions
  Matrix post_state;
};

// `rho` over k qubits, `qubit` the measured one (0 = most significant).
template <typename Rng>
QndResult qnd_nuclear_readout(const Matrix& rho, int qubit, int num_qubits, int repetitions, const ElectronReadout& e,
                              double shock_rate, Rng& rng) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  const std::size_t dim = std::size_t{1} << num_qubits;
  const std::size_t mask = qubit_mask(qubit, num_qubits);
  double p1 = 0;
  for (std::size_t a = 0; a < dim; ++a)
    if (a & mask) p1 += rho(a, a).real();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QndResult r;
  int bit = u(rng) < std::clamp(p1, 0.0, 1.0) ? 1 : 0;
  Matrix proj = Matrix::Zero(dim, dim);
  for (std::size_t a = 0; a < dim; ++a)
    if (((a & mask) != 0) == (bit == 1)) proj(a, a) = 1;
  r.post_state = proj * rho * proj;
  const double norm = r.post_state.trace().real();
  if (norm > 0) r.post_state /= norm;
  for (int k = 0; k < repetitions; ++k) {
    // electron flipped iff nucleus ⇑, then read and reloaded
    const bool up = bit == 1;
    const bool read_up = up ? u(rng) >= e.p_down_given_up : u(rng) < e.p_up_given_down;
    r.up_counts += read_up;
    if (shock_rate > 0 && u(rng) < shock_rate) {
      bit ^= 1;
      ++r.flips;
    }
  }
  if (r.flips % 2) {
    const Matrix x = embed(pauli::X(), qubit, num_qubits);
    r.post_state = x * r.post_state * x;
  }
  r.true_bit = bit;
  r.outcome = 2 * r.up_counts > repetitions ? 1 : 0;
  return r;
}

// P(majority vote wrong) for a nucleus in ⇑ (ties read as ⇓) and in ⇓.
inline std::pair<double, double> qnd_majority_error(int repetitions, const ElectronReadout& e) {
  auto binom_tail = [&](double p, bool at_most_half) {
    double total = 0;
    for (int k = 0; k <= repetitions; ++k) {
      const bool wrong = at_most_half ? 2 * k <= repetitions : 2 * k > repetitions;
      if (!wrong) continue;
      const double logc = std::lgamma(repetitions + 1.0) - std::lgamma(k + 1.0) - std::lgamma(repetitions - k + 1.0);
      total += std::exp(logc + k * std::log(p) + (repetitions - k) * std::log1p(-p));
    }
    return total;
  };
  return {binom_tail(1 - e.p_down_given_up, true), binom_tail(e.p_up_given_down, false)};
}

// ---------------------------------------------------------------------------
// EST initialisation

struct EstResult {
  std::vector<int> bits;
  int rounds = 0;
  int retries = 0;
  bool success = false;
};

// Per nucleus: conditional ESR π shelving followed by a conditional NMR π. Each pulse misfires with
// probability p; two misfires cancel. Failed verification repeats the full round.
template <typename Rng>
EstResult est_initialize(std::vector<int> bits, const std::vector<int>& target, double pulse_error, Rng& rng,
                         int max_rounds = 1000) {
  if (bits.size() != target.size()) throw std::invalid_argument("EST: configuration size mismatch");
  if (pulse_error < 0 || pulse_error >= 0.5) throw std::invalid_argument("EST: pulse error must be in [0, 0.5)");
  EstResult r;
  std::bernoulli_distribution miss(pulse_error);
  if (bits == target) {
    r.bits = bits;
    r.success = true;
    return r;
  }
  while (r.rounds < max_rounds) {
    ++r.rounds;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      const bool e1 = pulse_error > 0 && miss(rng);
      const bool e2 = pulse_error > 0 && miss(rng);
      bits[i] = (e1 != e2) ? 1 - target[i] : target[i];
    }
    if (bits == target) {
      r.success = true;
      break;
    }
  }
  r.retries = r.rounds - 1;
  r.bits = bits;
  return r;
}

inline double est_round_success(double pulse_error, int num_nuclei) {
  const double s = (1 - pulse_error) * (1 - pulse_error) + pulse_error * pulse_error;
  return std::pow(s, num_nuclei);
}

// Noiseless density-matrix action: any input ends in |target> (electron |↓> is bit 0 of `target` too).
inline Matrix est_initialize_state(int num_qubits, std::size_t target_index) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  if (target_index >= dim) throw std::invalid_argument("EST target out of range");
  return projector(basis_ket(target_index, dim));
}

// ---------------------------------------------------------------------------
// Ionisation shock

struct ShockResult {
  Matrix rho;
  std::vector<long long> flips;  // per qubit flip count
};

// `rates[q]` for each qubit of `rho` (0 for qubits that are not affected).
template <typename Rng>
ShockResult apply_ionization_shock(const Matrix& rho, int num_qubits, const std::vector<double>& rates,
                                   long long ionizations, Rng& rng) {
  if (static_cast<int>(rates.size()) != num_qubits) throw std::invalid_argument("one shock rate per qubit");
  ShockResult r;
  r.rho = rho;
  r.flips.assign(rates.size(), 0);
  for (int q = 0; q < num_qubits; ++q) {
    if (rates[q] < 0 || rates[q] > 1) throw std::invalid_argument("shock rate must be in [0,1]");
    if (rates[q] == 0 || ionizations <= 0) continue;
    std::binomial_distribution<long long> flips(ionizations, rates[q]);
    r.flips[q] = flips(rng);
    if (r.flips[q] % 2) {
      const Matrix x = embed(pauli::X(), q, num_qubits);
      r.rho = x * r.rho * x;
    }
  }
  return r;
}

// Ensemble-averaged version: flip with probability of an odd number of events.
inline Matrix ionization_shock_channel(const Matrix& rho, int num_qubits, const std::vector<double>& rates,
                                       long long ionizations) {
  Matrix out = rho;
  for (int q = 0; q < num_qubits; ++q) {
    const double p = 0.5 * (1 - std::pow(1 - 2 * rates.at(q), static_cast<double>(ionizations)));
    const Matrix x = embed(pauli::X(), q, num_qubits);
    out = (1 - p) * out + p * x * out * x;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SPAM matrices

struct SpamMatrix {
  RealMatrix m;  // m(i, j) = P(measure i | prepared j)
  int num_qubits = 0;

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < static_cast<std::size_t>(m.cols()); ++j) out.push_back(bits_to_string(j, num_qubits));
    return out;
  }

  void validate(double tol = 1e-9) const {
    if (m.rows() != m.cols() || m.rows() != (Eigen::Index{1} << num_qubits)) throw std::invalid_argument("SPAM shape");
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m.col(j).sum() - 1) > tol) throw std::invalid_argument("SPAM column does not sum to 1");
      if (m.col(j).minCoeff() < -tol || m.col(j).maxCoeff() > 1 + tol) throw std::invalid_argument("SPAM entry out of [0,1]");
    }
  }
};

// counts(i, j) = shots of prepared j read as i.
inline SpamMatrix build_spam(const RealMatrix& counts) {
  if (counts.rows() != counts.cols() || counts.rows() == 0) throw std::invalid_argument("SPAM counts must be square");
  int k = 0;
  while ((Eigen::Index{1} << k) < counts.rows()) ++k;
  if ((Eigen::Index{1} << k) != counts.rows()) throw std::invalid_argument("SPAM dimension must be a power of two");
  SpamMatrix s;
  s.num_qubits = k;
  s.m = counts;
  for (Eigen::Index j = 0; j < counts.cols(); ++j) {
    const double total = counts.col(j).sum();
    if (!(total > 0)) throw std::invalid_argument("SPAM column without shots");
    s.m.col(j) /= total;
  }
  return s;
}

// Product of independent per-qubit prep/readout flips; useful for synthetic data.
inline SpamMatrix product_spam(const std::vector<std::pair<double, double>>& flip) {
  RealMatrix m = RealMatrix::Ones(1, 1);
  for (const auto& [p10, p01] : flip) {
    RealMatrix q(2, 2);
    q << 1 - p10, p01, p10, 1 - p01;
    m = kron(m, q);
  }
  SpamMatrix s;
  s.m = m;
  s.num_qubits = static_cast<int>(flip.size());
  return s;
}

// Keeps `keep` qubits (positions in the register, most significant first). Outcomes of traced qubits
// are summed; traced preparations are averaged.
inline SpamMatrix marginalize(const SpamMatrix& s, const std::vector<int>& keep) {
  const int n = s.num_qubits;
  for (int q : keep)
    if (q < 0 || q >= n) throw std::invalid_argument("marginalize: qubit out of range");
  const int k = static_cast<int>(keep.size());
  const std::size_t dim = std::size_t{1} << n, kd = std::size_t{1} << k;
  auto reduce = [&](std::size_t idx) {
    std::size_t out = 0;
    for (int i = 0; i < k; ++i)
      if (bit_of(idx, keep[i], n)) out |= std::size_t{1} << (k - 1 - i);
    return out;
  };
  RealMatrix m = RealMatrix::Zero(kd, kd);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) m(reduce(i), reduce(j)) += s.m(i, j);
  for (std::size_t j = 0; j < kd; ++j) m.col(j) /= m.col(j).sum();
  SpamMatrix out;
  out.m = m;
  out.num_qubits = k;
  return out;
}

inline double tensor_residual(const SpamMatrix& mij, const SpamMatrix& mi, const SpamMatrix& mj) {
  const RealMatrix prod = kron(mi.m, mj.m);
  if (prod.rows() != mij.m.rows()) throw std::invalid_argument("tensor_residual: dimension mismatch");
  return (mij.m - prod).norm();
}

}  // namespace donorsim
