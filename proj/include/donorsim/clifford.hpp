#pragma once

#include "donorsim/core.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace donorsim {

// Native primitives: X_{π/2} pulse, virtual Z_{π/2}, and CZ.
enum class Prim { kX90, kZ90, kCZ };

struct PrimOp {
  Prim kind;
  int qubit = 0;  // ignored for CZ

  bool operator==(const PrimOp& o) const { return kind == o.kind && qubit == o.qubit; }
};

inline Matrix x90() { return rotation_xy(kPi / 2, 0); }
inline Matrix z90() { return rotation_z(kPi / 2); }

inline Matrix cz_matrix() {
  Matrix m = Matrix::Identity(4, 4);
  m(3, 3) = -1;
  return m;
}

inline Matrix prim_unitary(const PrimOp& p, int num_qubits) {
  if (p.kind == Prim::kCZ) {
    if (num_qubits != 2) throw std::invalid_argument("CZ needs two qubits");
    return cz_matrix();
  }
  const Matrix g = p.kind == Prim::kX90 ? x90() : z90();
  return num_qubits == 1 ? g : embed(g, p.qubit, num_qubits);
}

// Time-ordered product of a primitive list.
inline Matrix compose(const std::vector<PrimOp>& ops, int num_qubits) {
  const std::size_t dim = std::size_t{1} << num_qubits;
  Matrix u = Matrix::Identity(dim, dim);
  for (const auto& p : ops) u = prim_unitary(p, num_qubits) * u;
  return u;
}

// Global-phase-free key: divide by the phase of the first non-negligible entry and round.
inline std::string unitary_key(const Matrix& u) {
  cplx ref(0, 0);
  for (Eigen::Index j = 0; j < u.cols() && ref == cplx(0, 0); ++j)
    for (Eigen::Index i = 0; i < u.rows(); ++i)
      if (std::abs(u(i, j)) > 1e-6) {
        ref = u(i, j) / std::abs(u(i, j));
        break;
      }
  std::string key;
  key.reserve(static_cast<std::size_t>(u.size()) * 8);
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const cplx v = u(i, j) / ref;
      key += std::to_string(std::lround(v.real() * 1e5)) + ',' + std::to_string(std::lround(v.imag() * 1e5)) + ';';
    }
  return key;
}

struct CliffordElement {
  Matrix unitary;
  std::vector<PrimOp> decomposition;
  int x90_count = 0;
  int cz_count = 0;
};

class CliffordGroup {
 public:
  int num_qubits = 0;
  std::vector<CliffordElement> elements;

  std::size_t size() const { return elements.size(); }

  int find(const Matrix& u) const {
    const auto it = index_.find(unitary_key(u));
    return it == index_.end() ? -1 : it->second;
  }

  int inverse_of(const Matrix& u) const {
    const int k = find(u.adjoint());
    if (k < 0) throw std::logic_error("inverse is not in the Clifford group");
    return k;
  }

  void add(CliffordElement e) {
    const auto key = unitary_key(e.unitary);
    if (index_.count(key)) throw std::logic_error("duplicate Clifford element");
    index_[key] = static_cast<int>(elements.size());
    elements.push_back(std::move(e));
  }

  double mean_x90() const {
    double s = 0;
    for (const auto& e : elements) s += e.x90_count;
    return s / elements.size();
  }
  double mean_cz() const {
    double s = 0;
    for (const auto& e : elements) s += e.cz_count;
    return s / elements.size();
  }

 private:
  std::unordered_map<std::string, int> index_;
};

// Uniform-cost search: fewest X90 pulses first, then fewest virtual Z.
inline const CliffordGroup& clifford_group_1q() {
  static const CliffordGroup group = [] {
    CliffordGroup g;
    g.num_qubits = 1;
    struct Node {
      Matrix u;
      std::vector<PrimOp> seq;
      int x, z;
    };
    std::map<std::pair<int, int>, std::deque<Node>> frontier;
    frontier[{0, 0}].push_back({Matrix::Identity(2, 2), {}, 0, 0});
    std::unordered_map<std::string, bool> seen;
    while (!frontier.empty()) {
      auto it = frontier.begin();
      Node n = it->second.front();
      it->second.pop_front();
      if (it->second.empty()) frontier.erase(it);
      const auto key = unitary_key(n.u);
      if (seen.count(key)) continue;
      seen[key] = true;
      CliffordElement e;
      e.unitary = n.u;
      e.decomposition = n.seq;
      e.x90_count = n.x;
      g.add(e);
      if (g.size() == 24) break;
      for (Prim p : {Prim::kX90, Prim::kZ90}) {
        Node m{prim_unitary({p, 0}, 1) * n.u, n.seq, n.x + (p == Prim::kX90), n.z + (p == Prim::kZ90)};
        m.seq.push_back({p, 0});
        if (!seen.count(unitary_key(m.u))) frontier[{m.x, m.z}].push_back(std::move(m));
      }
    }
    if (g.size() != 24) throw std::logic_error("single-qubit Clifford closure failed");
    return g;
  }();
  return group;
}

namespace detail {

inline std::vector<PrimOp> on_qubit(const std::vector<PrimOp>& ops, int q) {
  std::vector<PrimOp> out = ops;
  for (auto& p : out) p.qubit = q;
  return out;
}

// Per-qubit gate lists between CZs; each listed 1Q Clifford is decomposed on its own.
struct Layered {
  std::vector<std::array<std::vector<int>, 2>> layers;  // layers.size() = cz + 1
};

inline CliffordElement realize(const Layered& l) {
  const auto& c1 = clifford_group_1q();
  CliffordElement e;
  for (std::size_t k = 0; k < l.layers.size(); ++k) {
    if (k > 0) e.decomposition.push_back({Prim::kCZ, 0});
    for (int q = 0; q < 2; ++q)
      for (int idx : l.layers[k][q]) {
        const auto& el = c1.elements[static_cast<std::size_t>(idx)];
        const auto ops = on_qubit(el.decomposition, q);
        e.decomposition.insert(e.decomposition.end(), ops.begin(), ops.end());
        e.x90_count += el.x90_count;
      }
  }
  e.cz_count = static_cast<int>(l.layers.size()) - 1;
  e.unitary = compose(e.decomposition, 2);
  return e;
}

inline int c1_index(const Matrix& u) {
  const int k = clifford_group_1q().find(u);
  if (k < 0) throw std::logic_error("not a single-qubit Clifford");
  return k;
}

// Product of 1Q Cliffords applied in time order a then b.
inline int c1_then(int a, int b) {
  const auto& g = clifford_group_1q();
  return c1_index(g.elements[static_cast<std::size_t>(b)].unitary * g.elements[static_cast<std::size_t>(a)].unitary);
}

}  // namespace detail

enum class Synthesis {
  kStructured,  // Hadamards of each CNOT kept apart from the trailing S1 layer
  kMerged,      // every run of single-qubit gates merged into one Clifford
};

// Class-based synthesis: single-qubit layer, CNOT-like, iSWAP-like, SWAP-like (0, 1, 2, 3 CZ).
// CNOT(c->t) = H_t CZ H_t; the leading H always merges into the random layer.
inline const CliffordGroup& clifford_group_2q(Synthesis mode = Synthesis::kStructured) {
  auto build = [](Synthesis m) {
    using detail::c1_index;
    using detail::c1_then;
    using L = std::vector<int>;
    const auto& c1 = clifford_group_1q();
    const int n1 = static_cast<int>(c1.size());
    const double s = 1 / std::sqrt(2.0);
    Matrix h(2, 2);
    h << s, s, s, -s;
    const int id = c1_index(Matrix::Identity(2, 2));
    const int had = c1_index(h);
    // S1: order-3 subgroup cycling X -> Y -> Z
    const double q = 1 / std::sqrt(3.0);
    const Matrix r = rotation_axis(2 * kPi / 3, q, q, q);
    const std::array<int, 3> s1{id, c1_index(r), c1_index(r * r)};
    const bool merged = m == Synthesis::kMerged;
    auto tail = [&](int first, int then) { return merged ? L{c1_then(first, then)} : L{first, then}; };

    CliffordGroup g;
    g.num_qubits = 2;
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n1; ++b) g.add(detail::realize({{{L{a}, L{b}}}}));
    // (a x b) CNOT(1->2) (s x t)
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n1; ++b)
        for (int sa : s1)
          for (int sb : s1)
            g.add(detail::realize({{{L{a}, L{c1_then(b, had)}}, {L{sa}, tail(had, sb)}}}));
    // (a x b) CNOT(1->2) CNOT(2->1) (s x t)
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n1; ++b)
        for (int sa : s1)
          for (int sb : s1)
            g.add(detail::realize({{{L{a}, L{c1_then(b, had)}}, {L{had}, L{had}}, {tail(had, sa), L{sb}}}}));
    // (a x b) SWAP
    for (int a = 0; a < n1; ++a)
      for (int b = 0; b < n1; ++b)
        g.add(detail::realize({{{L{a}, L{c1_then(b, had)}}, {L{had}, L{had}}, {L{had}, L{had}}, {L{}, L{had}}}}));
    if (g.size() != 11520) throw std::logic_error("two-qubit Clifford synthesis is incomplete");
    return g;
  };
  if (mode == Synthesis::kMerged) {
    static const CliffordGroup merged = build(Synthesis::kMerged);
    return merged;
  }
  static const CliffordGroup structured = build(Synthesis::kStructured);
  return structured;
}

inline const CliffordGroup& clifford_group(int num_qubits) {
  if (num_qubits == 1) return clifford_group_1q();
  if (num_qubits == 2) return clifford_group_2q();
  throw std::invalid_argument("Clifford groups are provided for 1 or 2 qubits");
}

}  // namespace donorsim
