#pragma once

#include "donorsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace donorsim {

struct NucleusSpec {
  std::string label;
  double gamma = 0;      // Hz/T
  double hyperfine = 0;  // Hz
  double t2_star = 0;    // s
  double t1 = 0;         // s
  int frozen_bit = 1;    // state held when the nucleus is not in the register
  double nmr_rabi = 0;   // Hz, 0 = unset

  void validate() const {
    if (!(gamma > 0)) throw std::invalid_argument("nucleus " + label + ": gamma must be > 0");
    if (!(hyperfine >= 0)) throw std::invalid_argument("nucleus " + label + ": hyperfine must be >= 0");
    if (!(t2_star > 0)) throw std::invalid_argument("nucleus " + label + ": t2_star must be > 0");
    if (!(t1 > 0)) throw std::invalid_argument("nucleus " + label + ": t1 must be > 0");
    if (frozen_bit != 0 && frozen_bit != 1) throw std::invalid_argument("frozen_bit must be 0 or 1");
  }
};

struct SpinSystemSpec {
  double b_field = 0;         // T
  double electron_gamma = 0;  // Hz/T
  double electron_t2_star = std::numeric_limits<double>::infinity();
  double electron_t1 = std::numeric_limits<double>::infinity();
  double esr_rabi = 250e3;  // Hz, default electron drive when no crosstalk constraint applies
  std::vector<NucleusSpec> nuclei;
  std::vector<bool> active_mask;  // empty = all active

  static constexpr int kMaxNuclei = 6;
  static constexpr int kMaxQubits = 7;

  bool is_active(int nucleus) const {
    return active_mask.empty() || active_mask.at(static_cast<std::size_t>(nucleus));
  }

  std::vector<int> active_nuclei() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nuclei.size()); ++i)
      if (is_active(i)) out.push_back(i);
    return out;
  }

  int num_qubits() const { return 1 + static_cast<int>(active_nuclei().size()); }

  // Register index of a nucleus; -1 when inactive.
  int qubit_of(int nucleus) const {
    int q = 1;
    for (int i = 0; i < static_cast<int>(nuclei.size()); ++i) {
      if (!is_active(i)) continue;
      if (i == nucleus) return q;
      ++q;
    }
    return -1;
  }

  int nucleus_index(const std::string& label) const {
    for (int i = 0; i < static_cast<int>(nuclei.size()); ++i)
      if (nuclei[i].label == label) return i;
    throw std::invalid_argument("unknown nucleus label " + label);
  }

  void validate() const {
    if (!(b_field > 0)) throw std::invalid_argument("b_field must be > 0");
    if (!(electron_gamma > 0)) throw std::invalid_argument("electron_gamma must be > 0");
    if (nuclei.size() > kMaxNuclei) throw std::invalid_argument("at most 6 nuclei are supported");
    if (!active_mask.empty() && active_mask.size() != nuclei.size())
      throw std::invalid_argument("active_mask length must match nuclei");
    for (const auto& n : nuclei) n.validate();
    if (num_qubits() > kMaxQubits)
      throw std::invalid_argument("register of " + std::to_string(num_qubits()) +
                                  " spins exceeds the 7-spin limit");
  }

  SpinSystemSpec with_active(const std::vector<int>& nuclei_on) const {
    SpinSystemSpec out = *this;
    out.active_mask.assign(nuclei.size(), false);
    for (int i : nuclei_on) out.active_mask.at(static_cast<std::size_t>(i)) = true;
    return out;
  }
};

// Bits over the active nuclei (|⇓> = 0, |⇑> = 1), electron optional.
struct SpinConfiguration {
  std::vector<int> nuclear_bits;
  int electron_bit = -1;

  std::string to_string() const {
    std::string s;
    for (int b : nuclear_bits) s += b ? '1' : '0';
    return s;
  }
};

enum class HamiltonianForm { kSecular, kFull };

namespace detail {

// Spin-1/2 operators in the (bit0 = down, bit1 = up) ordering.
inline Matrix spin_x() { return 0.5 * pauli::X(); }
inline Matrix spin_y() { return -0.5 * pauli::Y(); }
inline Matrix spin_z() { return -0.5 * pauli::Z(); }

inline double m_of_bit(int bit) { return bit ? 0.5 : -0.5; }

}  // namespace detail

inline Matrix build_static_hamiltonian(const SpinSystemSpec& spec,
                                       HamiltonianForm form = HamiltonianForm::kSecular) {
  const int n = spec.num_qubits();
  if (n > SpinSystemSpec::kMaxQubits)
    throw std::invalid_argument("register of " + std::to_string(n) +
                                " spins exceeds the 7-spin limit (2^7 x 2^7 operators)");
  spec.validate();
  const auto active = spec.active_nuclei();

  // Inactive nuclei shift the electron Zeeman term through their frozen m.
  double frozen_shift = 0;
  for (int i = 0; i < static_cast<int>(spec.nuclei.size()); ++i)
    if (!spec.is_active(i))
      frozen_shift += spec.nuclei[i].hyperfine * detail::m_of_bit(spec.nuclei[i].frozen_bit);

  const Matrix sz = embed(detail::spin_z(), 0, n);
  Matrix h = (spec.electron_gamma * spec.b_field + frozen_shift) * sz;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto& nuc = spec.nuclei[active[k]];
    const int q = static_cast<int>(k) + 1;
    const Matrix iz = embed(detail::spin_z(), q, n);
    h -= nuc.gamma * spec.b_field * iz;
    h += nuc.hyperfine * sz * iz;
    if (form == HamiltonianForm::kFull) {
      h += nuc.hyperfine * embed(detail::spin_x(), 0, n) * embed(detail::spin_x(), q, n);
      h += nuc.hyperfine * embed(detail::spin_y(), 0, n) * embed(detail::spin_y(), q, n);
    }
  }
  return 0.5 * (h + h.adjoint());
}

// Electron flip frequency for a configuration of the active nuclei.
inline double esr_frequency(const SpinSystemSpec& spec, const std::vector<int>& active_bits) {
  const auto active = spec.active_nuclei();
  if (active_bits.size() != active.size())
    throw std::invalid_argument("configuration must name every active nucleus");
  double f = spec.electron_gamma * spec.b_field;
  std::size_t k = 0;
  for (int i = 0; i < static_cast<int>(spec.nuclei.size()); ++i) {
    const int bit = spec.is_active(i) ? active_bits[k++] : spec.nuclei[i].frozen_bit;
    f += spec.nuclei[i].hyperfine * detail::m_of_bit(bit);
  }
  return f;
}

struct EsrLine {
  SpinConfiguration config;
  double frequency = 0;
};

inline std::vector<EsrLine> esr_transition_table(const SpinSystemSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(spec.active_nuclei().size());
  std::vector<EsrLine> out;
  for (std::size_t idx = 0; idx < (std::size_t{1} << n); ++idx) {
    EsrLine line;
    for (int k = 0; k < n; ++k) line.config.nuclear_bits.push_back(static_cast<int>((idx >> (n - 1 - k)) & 1u));
    line.frequency = esr_frequency(spec, line.config.nuclear_bits);
    out.push_back(std::move(line));
  }
  return out;
}

// E(⇓) - E(⇑) of nucleus i with the electron in the given state; negative values are kept.
inline double nmr_frequency(const SpinSystemSpec& spec, int nucleus, int electron_bit) {
  if (nucleus < 0 || nucleus >= static_cast<int>(spec.nuclei.size()) || !spec.is_active(nucleus))
    throw std::invalid_argument("nmr_frequency: nucleus " + std::to_string(nucleus) + " is not active");
  const auto& nuc = spec.nuclei[nucleus];
  const double larmor = nuc.gamma * spec.b_field;
  return electron_bit ? larmor - nuc.hyperfine / 2 : larmor + nuc.hyperfine / 2;
}

inline double nmr_crosstalk_drive_strength(double delta_f, int k) {
  if (k < 1) throw std::invalid_argument("k must be a positive integer");
  if (!(delta_f > 0)) throw std::invalid_argument("delta_f must be > 0");
  return delta_f / std::sqrt(16.0 * k * k - 1.0);
}

enum class DonorSampling {
  kResamplePerSize,  // fresh set of n values for n = 2, 3, ... until a set is crowded
  kSequential,       // add one donor at a time to a growing set
};

enum class DonorCount {
  kViolatingSetSize,   // size of the first crowded set
  kBeforeViolation,    // donors accepted before the crowded one
};

struct DonorSamplingOptions {
  DonorSampling sampling = DonorSampling::kResamplePerSize;
  DonorCount count = DonorCount::kViolatingSetSize;
  int cap = 64;
};

struct DonorCountSummary {
  double mean = 0;
  double std = 0;
  int min = 0;
  int max = 0;
  std::map<int, std::uint64_t> histogram;
  std::uint64_t trials = 0;
};

namespace detail {

inline bool crowded(std::vector<double> values, double threshold) {
  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] - values[i - 1] < threshold) return true;
  return false;
}

}  // namespace detail

inline DonorCountSummary sample_feasible_donor_count(double min_a, double max_a, double threshold,
                                                     std::uint64_t trials, std::uint64_t seed,
                                                     const DonorSamplingOptions& opts = {}) {
  if (trials == 0) throw std::invalid_argument("trials must be > 0");
  if (!(min_a < max_a)) throw std::invalid_argument("min_A must be < max_A");
  if (!(threshold > 0)) throw std::invalid_argument("threshold must be > 0");
  if (opts.cap < 2) throw std::invalid_argument("cap must be >= 2");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(min_a, max_a);
  DonorCountSummary out;
  out.trials = trials;
  out.min = std::numeric_limits<int>::max();
  double sum = 0, sum_sq = 0;
  std::vector<double> set;

  for (std::uint64_t t = 0; t < trials; ++t) {
    int count = opts.cap;
    if (opts.sampling == DonorSampling::kResamplePerSize) {
      for (int n = 2; n <= opts.cap; ++n) {
        set.clear();
        for (int k = 0; k < n; ++k) set.push_back(draw(rng));
        if (detail::crowded(set, threshold)) {
          count = opts.count == DonorCount::kViolatingSetSize ? n : n - 1;
          break;
        }
      }
    } else {
      set.clear();
      set.push_back(draw(rng));
      while (static_cast<int>(set.size()) < opts.cap) {
        const double v = draw(rng);
        bool clash = false;
        for (double s : set) clash = clash || std::abs(s - v) < threshold;
        if (clash) break;
        set.push_back(v);
      }
      const int accepted = static_cast<int>(set.size());
      count = accepted >= opts.cap ? opts.cap
              : opts.count == DonorCount::kViolatingSetSize ? accepted + 1
                                                            : accepted;
    }
    sum += count;
    sum_sq += static_cast<double>(count) * count;
    out.min = std::min(out.min, count);
    out.max = std::max(out.max, count);
    ++out.histogram[count];
  }
  const double n = static_cast<double>(trials);
  out.mean = sum / n;
  out.std = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1))) : 0.0;
  return out;
}

}  // namespace donorsim
