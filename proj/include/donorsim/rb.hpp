#pragma once

#include "donorsim/clifford.hpp"
#include "donorsim/fitting.hpp"
#include "donorsim/parallel.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <optional>
#include <random>

namespace donorsim {

struct RbSequence {
  std::vector<int> cliffords;
  std::optional<Matrix> interleaved;  // inserted after each Clifford
  int recovery = 0;
};

inline Matrix sequence_unitary(const RbSequence& s, const CliffordGroup& g, bool with_recovery = true) {
  const std::size_t dim = std::size_t{1} << g.num_qubits;
  Matrix u = Matrix::Identity(dim, dim);
  for (int c : s.cliffords) {
    u = g.elements[static_cast<std::size_t>(c)].unitary * u;
    if (s.interleaved) u = *s.interleaved * u;
  }
  if (with_recovery) u = g.elements[static_cast<std::size_t>(s.recovery)].unitary * u;
  return u;
}

template <typename Rng>
RbSequence rb_sequence(int n, const CliffordGroup& g, Rng& rng) {
  if (n < 1) throw std::invalid_argument("rb_sequence: n must be >= 1");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g.size()) - 1);
  RbSequence s;
  s.cliffords.resize(static_cast<std::size_t>(n));
  for (auto& c : s.cliffords) c = pick(rng);
  s.recovery = g.inverse_of(sequence_unitary(s, g, false));
  return s;
}

template <typename Rng>
RbSequence irb_sequence(int n, const CliffordGroup& g, const Matrix& gate, Rng& rng) {
  if (g.find(gate) < 0) throw std::invalid_argument("irb_sequence: interleaved gate is not a Clifford");
  RbSequence s = rb_sequence(n, g, rng);
  s.interleaved = gate;
  s.recovery = g.inverse_of(sequence_unitary(s, g, false));
  return s;
}

// Gate-level noise. Depolarizing parameters p act as rho -> p rho + (1-p) I/d; p = 1 is noiseless.
struct RbNoise {
  double clifford_depolarizing = 1;     // whole register, after every Clifford (including recovery)
  double interleaved_depolarizing = 1;  // whole register, after every interleaved gate
  double x90_depolarizing = 1;          // on the pulsed qubit, per X90
  double x90_dephasing = 0;             // Z flip probability on the pulsed qubit, per X90
  double cz_depolarizing = 1;           // two-qubit, per CZ primitive

  bool primitive_level() const { return x90_depolarizing != 1 || x90_dephasing != 0 || cz_depolarizing != 1; }
};

namespace detail {

inline void depolarize_all(Matrix& rho, double p) {
  if (p == 1) return;
  const auto d = rho.rows();
  const cplx tr = rho.trace();
  rho = p * rho + (1 - p) * tr / static_cast<double>(d) * Matrix::Identity(d, d);
}

inline void depolarize_qubit(Matrix& rho, int q, int n, double p) {
  if (p == 1) return;
  Matrix acc = Matrix::Zero(rho.rows(), rho.cols());
  for (int k = 1; k < 4; ++k) {
    const Matrix pk = embed(pauli::by_index(k), q, n);
    acc += pk * rho * pk;
  }
  rho = (1 + 3 * p) / 4 * rho + (1 - p) / 4 * acc;
}

inline void dephase_qubit(Matrix& rho, int q, int n, double prob) {
  if (prob == 0) return;
  const Matrix z = embed(pauli::Z(), q, n);
  rho = (1 - prob) * rho + prob * z * rho * z;
}

inline void apply_clifford(Matrix& rho, const CliffordElement& c, int n, const RbNoise& noise) {
  if (!noise.primitive_level()) {
    rho = c.unitary * rho * c.unitary.adjoint();
  } else {
    for (const auto& p : c.decomposition) {
      const Matrix u = prim_unitary(p, n);
      rho = u * rho * u.adjoint();
      if (p.kind == Prim::kX90) {
        depolarize_qubit(rho, p.qubit, n, noise.x90_depolarizing);
        dephase_qubit(rho, p.qubit, n, noise.x90_dephasing);
      } else if (p.kind == Prim::kCZ && noise.cz_depolarizing != 1) {
        depolarize_all(rho, noise.cz_depolarizing);
      }
    }
  }
  depolarize_all(rho, noise.clifford_depolarizing);
}

}  // namespace detail

// Probability of returning to |0...0>.
inline double simulate_sequence(const RbSequence& s, const CliffordGroup& g, const RbNoise& noise) {
  const int n = g.num_qubits;
  const std::size_t dim = std::size_t{1} << n;
  Matrix rho = Matrix::Zero(dim, dim);
  rho(0, 0) = 1;
  for (int c : s.cliffords) {
    detail::apply_clifford(rho, g.elements[static_cast<std::size_t>(c)], n, noise);
    if (s.interleaved) {
      rho = *s.interleaved * rho * s.interleaved->adjoint();
      detail::depolarize_all(rho, noise.interleaved_depolarizing);
    }
  }
  detail::apply_clifford(rho, g.elements[static_cast<std::size_t>(s.recovery)], n, noise);
  return std::clamp(rho(0, 0).real(), 0.0, 1.0);
}

struct RbExperiment {
  int num_qubits = 1;
  std::vector<int> lengths;
  int sequences = 9;
  int shots = 100;  // 0: exact probabilities
  std::uint64_t seed = 0;
  RbNoise noise;
  std::optional<Matrix> interleaved;
  Synthesis synthesis = Synthesis::kStructured;
};

struct DecayRow {
  int length = 0;
  double mean_p = 0;
  double stderr_p = 0;
  int n_sequences = 0;
  std::vector<double> per_sequence;
};

struct RbResult {
  std::vector<DecayRow> rows;

  FitData data() const {
    FitData d;
    for (const auto& r : rows) {
      d.x.push_back(r.length);
      d.y.push_back(r.mean_p);
    }
    return d;
  }
};

inline const CliffordGroup& group_for(const RbExperiment& e) {
  return e.num_qubits == 2 ? clifford_group_2q(e.synthesis) : clifford_group(e.num_qubits);
}

inline RbResult run_rb_experiment(const RbExperiment& e) {
  if (e.lengths.empty() || e.sequences < 1 || e.shots < 0) throw std::invalid_argument("run_rb_experiment: bad settings");
  const auto& g = group_for(e);
  const std::size_t nl = e.lengths.size(), ns = static_cast<std::size_t>(e.sequences);
  std::vector<double> p(nl * ns);
  parallel_for(nl * ns, [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(e.seed, k));
    const int len = e.lengths[k / ns];
    const auto s = e.interleaved ? irb_sequence(len, g, *e.interleaved, rng) : rb_sequence(len, g, rng);
    double v = simulate_sequence(s, g, e.noise);
    if (e.shots > 0) {
      std::binomial_distribution<int> b(e.shots, v);
      v = static_cast<double>(b(rng)) / e.shots;
    }
    p[k] = v;
  });
  RbResult out;
  for (std::size_t i = 0; i < nl; ++i) {
    DecayRow r;
    r.length = e.lengths[i];
    r.n_sequences = e.sequences;
    r.per_sequence.assign(p.begin() + static_cast<std::ptrdiff_t>(i * ns), p.begin() + static_cast<std::ptrdiff_t>((i + 1) * ns));
    double s = 0, s2 = 0;
    for (double v : r.per_sequence) s += v;
    r.mean_p = s / ns;
    for (double v : r.per_sequence) s2 += (v - r.mean_p) * (v - r.mean_p);
    r.stderr_p = ns > 1 ? std::sqrt(s2 / (ns - 1) / ns) : 0.0;
    out.rows.push_back(std::move(r));
  }
  return out;
}

namespace detail {

// Same lengths, means recomputed from sequences drawn with replacement.
template <typename Rng>
RbResult resample_sequences(const RbResult& r, Rng& rng) {
  RbResult b = r;
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    const auto& src = r.rows[i].per_sequence;
    std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
    double s = 0;
    for (std::size_t j = 0; j < src.size(); ++j) s += src[pick(rng)];
    b.rows[i].mean_p = s / src.size();
  }
  return b;
}

inline void attach_bands(FitResult& base, const std::vector<std::vector<double>>& draws) {
  for (std::size_t i = 0; i < base.params.size(); ++i) {
    std::vector<double> v;
    for (const auto& d : draws)
      if (d.size() == base.params.size() && std::isfinite(d[i])) v.push_back(d[i]);
    if (v.empty()) continue;
    const auto iv = percentile_interval(v, base.params[i]);
    base.ci_lo[i] = iv.lo;
    base.ci_hi[i] = iv.hi;
  }
}

}  // namespace detail

// Fit of the mean decay with a bootstrap over sequences (resampled within each length).
inline FitResult fit_rb_bootstrap(const RbResult& r, int resamples, std::uint64_t seed) {
  if (resamples < 100) throw std::invalid_argument("fit_rb_bootstrap: need at least 100 resamples");
  FitResult base = fit_rb(r.data());
  std::vector<std::vector<double>> draws(static_cast<std::size_t>(resamples));
  parallel_for(draws.size(), [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    try {
      draws[k] = fit_rb(detail::resample_sequences(r, rng).data()).params;
    } catch (const std::exception&) {
      draws[k].clear();
    }
  });
  detail::attach_bands(base, draws);
  return base;
}

struct IrbEstimate {
  FitResult reference, interleaved;
  double fidelity = 0;
  Interval fidelity_ci;
};

// Reference and interleaved decays resampled together; F = (1 + 3 p_int / p_ref) / 4 per draw.
inline IrbEstimate irb_bootstrap(const RbResult& ref, const RbResult& inter, int resamples, std::uint64_t seed) {
  if (resamples < 100) throw std::invalid_argument("irb_bootstrap: need at least 100 resamples");
  IrbEstimate out;
  out.reference = fit_rb(ref.data());
  out.interleaved = fit_rb(inter.data());
  out.fidelity = irb_fidelity(out.reference.params[1], out.interleaved.params[1]);
  std::vector<std::vector<double>> dr(static_cast<std::size_t>(resamples)), di(dr.size());
  std::vector<double> f(dr.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(dr.size(), [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    try {
      dr[k] = fit_rb(detail::resample_sequences(ref, rng).data()).params;
      di[k] = fit_rb(detail::resample_sequences(inter, rng).data()).params;
      f[k] = irb_fidelity(dr[k][1], di[k][1]);
    } catch (const std::exception&) {
      dr[k].clear();
      di[k].clear();
    }
  });
  detail::attach_bands(out.reference, dr);
  detail::attach_bands(out.interleaved, di);
  std::vector<double> ok;
  for (double v : f)
    if (std::isfinite(v)) ok.push_back(v);
  out.fidelity_ci = ok.empty() ? Interval{out.fidelity, out.fidelity, out.fidelity} : percentile_interval(ok, out.fidelity);
  return out;
}

struct ChiSquare {
  double statistic = 0;
  int dof = 0;
  double p_value = 0;
};

inline ChiSquare chi_square_uniform(const std::vector<long>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("chi_square_uniform: need at least two bins");
  long total = 0;
  for (long c : counts) total += c;
  const double expected = static_cast<double>(total) / counts.size();
  ChiSquare out;
  for (long c : counts) out.statistic += (c - expected) * (c - expected) / expected;
  out.dof = static_cast<int>(counts.size()) - 1;
  out.p_value = boost::math::gamma_q(out.dof / 2.0, out.statistic / 2);
  return out;
}

inline std::vector<long> clifford_draw_counts(const CliffordGroup& g, long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(g.size()) - 1);
  std::vector<long> counts(g.size(), 0);
  for (long i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(pick(rng))];
  return counts;
}

}  // namespace donorsim
