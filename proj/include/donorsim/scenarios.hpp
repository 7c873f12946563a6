#pragma once

#include "donorsim/calibration.hpp"
#include "donorsim/csv.hpp"
#include "donorsim/device_io.hpp"
#include "donorsim/error_detection.hpp"
#include "donorsim/log.hpp"
#include "donorsim/rb.hpp"
#include "donorsim/readout.hpp"
#include "donorsim/tomography.hpp"

#include <filesystem>
#include <functional>

namespace donorsim {

// ---------------------------------------------------------------------------
// Noise toggles

struct NoiseMode {
  std::string name = "none";
  bool decoherence = false;  // Lindblad dephasing + relaxation from the device times
  bool crosstalk = false;    // every ESR/NMR line feels every drive

  static NoiseMode parse(const std::string& s) {
    if (s == "none") return {s, false, false};
    if (s == "dephasing") return {s, true, false};
    if (s == "crosstalk") return {s, false, true};
    if (s == "both") return {s, true, true};
    throw ConfigError("unknown noise mode '" + s + "' (none|dephasing|crosstalk|both)");
  }
};

inline RunOptions run_options(const SpinSystemSpec& spec, const NoiseMode& m) {
  RunOptions o;
  if (m.decoherence) o.noise = device_noise(spec);
  o.drive.selectivity = m.crosstalk ? DriveSelectivity::kAllLines : DriveSelectivity::kResonantOnly;
  return o;
}

// ---------------------------------------------------------------------------
// Context handed to each scenario

struct ScenarioContext {
  std::string name;
  SpinSystemSpec spec;
  NoiseMode noise;
  std::uint64_t seed = 0;
  json params;
  std::filesystem::path out;
  std::vector<std::string> files;

  template <typename T>
  T get(const std::string& key) const {
    try {
      return params.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("scenario parameter '" + key + "': " + e.what());
    }
  }

  int nucleus(const std::string& key) const {
    try {
      return spec.nucleus_index(get<std::string>(key));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  std::vector<int> nuclei(const std::string& key) const {
    std::vector<int> out;
    for (const auto& l : get<std::vector<std::string>>(key)) {
      try {
        out.push_back(spec.nucleus_index(l));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    return out;
  }

  RunOptions run() const { return run_options(spec, noise); }

  void write(const std::string& file, const CsvTable& t) {
    t.write((out / file).string());
    files.push_back(file);
  }

  void write_text(const std::string& file, const std::string& text) {
    std::ofstream f(out / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + file);
    f << text;
    files.push_back(file);
  }

  std::string label(int nucleus) const { return spec.nuclei.at(static_cast<std::size_t>(nucleus)).label; }
};

using ScenarioFn = std::function<json(ScenarioContext&)>;

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::string default_noise;
  json defaults;
  ScenarioFn run;
};

namespace scenario_detail {

inline std::string bits_label(std::size_t idx, int width) { return bits_to_string(idx, width); }

inline std::vector<double> linspace(double a, double b, int n) {
  if (n < 2) return {a};
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

inline json fit_json(const FitResult& f) {
  json j;
  j["model"] = f.model;
  j["converged"] = f.converged;
  j["degenerate"] = f.degenerate;
  j["residual_norm"] = f.residual_norm;
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    j["params"][f.names[i]] = f.params[i];
    if (std::isfinite(f.ci_lo[i])) j["ci"][f.names[i]] = {f.ci_lo[i], f.ci_hi[i]};
  }
  return j;
}

inline Matrix reduced_pair(const RunResult& r, const SpinSystemSpec& spec, int a, int b) {
  return reduce_to_nuclei(r.rho, spec, {a, b});
}

// ---------------------------------------------------------------------------

inline json toffoli_truth_table(ScenarioContext& ctx) {
  const auto controls = ctx.nuclei("controls");
  const int target = ctx.nucleus("target");
  if (controls.size() != 3) throw ConfigError("toffoli needs three controls");
  Circuit c = toffoli_circuit(ctx.spec, controls, target);
  compile(c, ctx.spec);
  ctx.write_text("toffoli_circuit.txt", dump_circuit(c, ctx.spec));
  std::vector<int> reg = controls;
  reg.push_back(target);
  const auto table = truth_table(c, ctx.spec, reg, ctx.run());
  const auto ideal = toffoli_ideal(4, 3);
  std::vector<std::string> header{"input"};
  for (std::size_t o = 0; o < 16; ++o) header.push_back("p_" + bits_label(o, 4));
  CsvTable t(header);
  for (std::size_t in = 0; in < 16; ++in) {
    std::vector<CsvTable::Cell> row{bits_label(in, 4)};
    for (std::size_t o = 0; o < 16; ++o) row.push_back(table(o, in));
    t.row(row);
  }
  ctx.write("truth_table.csv", t);
  json s;
  s["fidelity"] = truth_table_fidelity(table, ideal);
  s["register_order"] = json::array();
  for (int i : reg) s["register_order"].push_back(ctx.label(i));
  s["esr_pulses"] = c.count(OpKind::kConditional2Pi);
  s["duration_s"] = circuit_duration(c);
  return s;
}

inline json bell_pairs(ScenarioContext& ctx) {
  const auto pairs = ctx.get<std::vector<std::vector<std::string>>>("pairs");
  const int shots = ctx.get<int>("shots");
  const std::vector<BellState> states{BellState::kPhiPlus, BellState::kPhiMinus, BellState::kPsiPlus,
                                      BellState::kPsiMinus};
  struct Item {
    int a, b;
    BellState s;
    double f_sim = 0, purity = 0, f_linear = 0, f_mle = 0;
    int mle_iters = 0;
    Matrix rho_mle;
  };
  std::vector<Item> items;
  for (const auto& p : pairs) {
    if (p.size() != 2) throw ConfigError("bell pair entries need two labels");
    int a, b;
    try {
      a = ctx.spec.nucleus_index(p[0]);
      b = ctx.spec.nucleus_index(p[1]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (auto s : states) items.push_back({a, b, s});
  }
  const auto opts = ctx.run();
  parallel_for(items.size(), [&](std::size_t k) {
    auto& it = items[k];
    Circuit c = bell_prep_circuit(ctx.spec, it.a, it.b, it.s);
    compile(c, ctx.spec);
    const auto r = run_circuit(c, ctx.spec, register_basis_state(ctx.spec), opts);
    const Matrix rho = reduced_pair(r, ctx.spec, it.a, it.b);
    const Vector target = bell_vector(it.s);
    it.f_sim = state_fidelity(rho, target);
    it.purity = (rho * rho).trace().real();
    std::mt19937_64 rng(derive_seed(ctx.seed, k));
    const auto data = simulate_tomography(rho, 2, shots, rng);
    it.f_linear = state_fidelity(linear_inversion(expectations_from_data(data, 2), 2), target);
    const auto mle = mle_rhorr(data);
    it.f_mle = state_fidelity(mle.rho, target);
    it.mle_iters = mle.iterations;
    it.rho_mle = mle.rho;
  });
  CsvTable t({"pair", "state", "fidelity", "purity", "fidelity_linear", "fidelity_mle", "mle_iterations"});
  CsvTable rho_t({"pair", "state", "row", "col", "re", "im"});
  json s = json::object();
  double worst = 1;
  for (const auto& it : items) {
    const std::string pair = ctx.label(it.a) + "-" + ctx.label(it.b);
    t.row({pair, bell_name(it.s), it.f_sim, it.purity, it.f_linear, it.f_mle, it.mle_iters});
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) rho_t.row({pair, bell_name(it.s), i, j, it.rho_mle(i, j).real(), it.rho_mle(i, j).imag()});
    s["fidelity"][pair][bell_name(it.s)] = it.f_sim;
    s["fidelity_mle"][pair][bell_name(it.s)] = it.f_mle;
    worst = std::min(worst, it.f_sim);
  }
  ctx.write("bell_fidelities.csv", t);
  ctx.write("bell_mle_states.csv", rho_t);
  s["min_fidelity"] = worst;
  return s;
}

inline json ghz_witness(ScenarioContext& ctx) {
  auto nuc = ctx.nuclei("nuclei");
  const int shots = ctx.get<int>("shots");
  Circuit c = ghz_prep_circuit(ctx.spec, nuc);
  compile(c, ctx.spec);
  ctx.write_text("ghz_circuit.txt", dump_circuit(c, ctx.spec));
  const auto r = run_circuit(c, ctx.spec, register_basis_state(ctx.spec), ctx.run());
  const int n = static_cast<int>(nuc.size());
  const Matrix rho = reduce_to_nuclei(r.rho, ctx.spec, nuc);
  const auto exact = ghz_witness_from_state(rho, n);
  const std::size_t dim = std::size_t{1} << n;

  // sampled: one Z-basis run for the populations, one run per M_k
  std::mt19937_64 rng(derive_seed(ctx.seed, 0));
  std::vector<double> pz(dim);
  for (std::size_t a = 0; a < dim; ++a) pz[a] = std::max(0.0, rho(a, a).real());
  std::discrete_distribution<std::size_t> zpick(pz.begin(), pz.end());
  double c0 = 0, c1 = 0;
  for (int k = 0; k < shots; ++k) {
    const auto a = zpick(rng);
    c0 += a == 0;
    c1 += a == dim - 1;
  }
  std::vector<double> mk_exact, mk_sampled;
  for (int k = 0; k < n; ++k) {
    Matrix op = Matrix::Ones(1, 1);
    for (int q = 0; q < n; ++q) op = kron(op, witness_axis(k, n));
    const double e = (op * rho).trace().real();
    mk_exact.push_back(e);
    std::binomial_distribution<int> plus(shots, std::clamp((1 + e) / 2, 0.0, 1.0));
    mk_sampled.push_back(2.0 * plus(rng) / shots - 1);
  }
  const auto sampled = donorsim::ghz_witness(c0 / shots, c1 / shots, mk_sampled);
  CsvTable t({"term", "exact", "sampled"});
  t.row({"P_all_down", rho(0, 0).real(), c0 / shots});
  t.row({"P_all_up", rho(dim - 1, dim - 1).real(), c1 / shots});
  for (int k = 0; k < n; ++k) t.row({"M_" + std::to_string(k), mk_exact[k], mk_sampled[k]});
  t.row({"witness", exact.witness, sampled.witness});
  t.row({"fidelity", exact.fidelity, sampled.fidelity});
  ctx.write("ghz_witness.csv", t);
  CsvTable pop({"state", "population"});
  for (std::size_t a = 0; a < dim; ++a) pop.row({bits_label(a, n), rho(a, a).real()});
  ctx.write("ghz_populations.csv", pop);
  json s;
  s["witness"] = exact.witness;
  s["fidelity"] = exact.fidelity;
  s["fidelity_direct"] = state_fidelity(rho, ghz_vector(n));
  s["witness_sampled"] = sampled.witness;
  s["fidelity_sampled"] = sampled.fidelity;
  s["duration_s"] = circuit_duration(c);
  return s;
}

// Injected-error sweep on one axis, θ on [-π, π].
inline json error_sweep(ScenarioContext& ctx, char axis) {
  const int points = ctx.get<int>("points");
  const auto codeword = ctx.get<std::string>("codeword");
  const int target = ctx.nucleus("target");
  const auto thetas = linspace(-kPi, kPi, points);
  const auto opts = ctx.run();
  std::vector<std::vector<SyndromeRecord>> res(thetas.size());
  parallel_for(thetas.size(), [&](std::size_t i) {
    InjectedError e{target, thetas[i], ErrorAxis::named(axis)};
    res[i] = run_error_detection(ctx.spec, codeword, e, 0, opts).branches;
  });
  const auto ref = codeword_info(codeword);
  // error branch relative to the codeword's own syndrome
  const int ex = axis == 'x' || axis == 'y', ez = axis == 'z' || axis == 'y';
  const int err_sz = ref.sz ^ ex, err_sx = ref.sx ^ ez;
  CsvTable t({"theta", "p_00", "p_01", "p_10", "p_11", "oracle_no_error", "oracle_error"});
  double dev = 0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double c2 = std::pow(std::cos(thetas[i] / 2), 2), s2 = std::pow(std::sin(thetas[i] / 2), 2);
    const auto& b = res[i];
    t.row({thetas[i], branch(b, 0, 0).probability, branch(b, 0, 1).probability, branch(b, 1, 0).probability,
           branch(b, 1, 1).probability, c2, s2});
    if (ref.target) {
      dev = std::max(dev, std::abs(branch(b, ref.sz, ref.sx).probability - c2));
      dev = std::max(dev, std::abs(branch(b, err_sz, err_sx).probability - s2));
    }
  }
  ctx.write(std::string("error_sweep_") + axis + ".csv", t);
  json s;
  s["axis"] = std::string(1, axis);
  s["error_syndrome"] = std::to_string(err_sz) + std::to_string(err_sx);
  s["max_oracle_deviation"] = dev;
  s["points"] = points;
  return s;
}

inline json stabilizer_basis_table(ScenarioContext& ctx) {
  const auto inputs = ctx.get<std::vector<std::string>>("inputs");
  const auto opts = ctx.run();
  std::vector<std::vector<SyndromeRecord>> res(inputs.size());
  for (const auto& in : inputs)
    if (in.size() != 2 || !codeword_info(in).target) throw ConfigError("basis table needs product-state inputs");
  parallel_for(inputs.size(), [&](std::size_t i) {
    res[i] = run_error_detection(ctx.spec, inputs[i], std::nullopt, 0, opts).branches;
  });
  CsvTable t({"input", "expected_p_sz_1", "expected_p_sx_1", "p_sz_1", "p_sx_1", "p_00", "p_01", "p_10", "p_11"});
  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto info = codeword_info(inputs[i]);
    const auto& b = res[i];
    const double psz = branch(b, 1, 0).probability + branch(b, 1, 1).probability;
    const double psx = branch(b, 0, 1).probability + branch(b, 1, 1).probability;
    // a Z-basis product fixes S^Z only, an X-basis product fixes S^X only
    const bool zbasis = inputs[i][0] == '0' || inputs[i][0] == '1';
    const double ez = zbasis ? info.sz : 0.5, ex = zbasis ? 0.5 : info.sx;
    t.row({inputs[i], ez, ex, psz, psx, branch(b, 0, 0).probability, branch(b, 0, 1).probability,
           branch(b, 1, 0).probability, branch(b, 1, 1).probability});
    worst = std::max({worst, std::abs(psz - ez), std::abs(psx - ex)});
  }
  ctx.write("stabilizer_basis_table.csv", t);
  json s;
  s["max_deviation"] = worst;
  return s;
}

inline json arbitrary_error_grid(ScenarioContext& ctx) {
  const int nt = ctx.get<int>("theta_points"), np = ctx.get<int>("phi_points");
  const int target = ctx.nucleus("target");
  const auto thetas = linspace(0, kPi, nt);
  std::vector<double> phis(static_cast<std::size_t>(np));
  for (int j = 0; j < np; ++j) phis[j] = kTwoPi * j / np;
  const auto opts = ctx.run();
  std::vector<std::vector<SyndromeRecord>> res(thetas.size() * phis.size());
  parallel_for(res.size(), [&](std::size_t k) {
    const double th = thetas[k / phis.size()], ph = phis[k % phis.size()];
    res[k] = run_error_detection(ctx.spec, "phi+", InjectedError{target, th, ErrorAxis::in_plane(ph)}, 0, opts).branches;
  });
  CsvTable t({"theta", "phi", "p_00", "p_01", "p_10", "p_11", "oracle_00", "oracle_10", "oracle_11"});
  double dev = 0;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const double th = thetas[k / phis.size()], ph = phis[k % phis.size()];
    const double s2 = std::pow(std::sin(th / 2), 2);
    const double o00 = 1 - s2, o10 = s2 * std::pow(std::cos(ph), 2), o11 = s2 * std::pow(std::sin(ph), 2);
    const auto& b = res[k];
    t.row({th, ph, branch(b, 0, 0).probability, branch(b, 0, 1).probability, branch(b, 1, 0).probability,
           branch(b, 1, 1).probability, o00, o10, o11});
    dev = std::max({dev, std::abs(branch(b, 0, 0).probability - o00), std::abs(branch(b, 1, 0).probability - o10),
                    std::abs(branch(b, 1, 1).probability - o11)});
  }
  ctx.write("arbitrary_error_grid.csv", t);
  json s;
  s["max_oracle_deviation"] = dev;
  return s;
}

struct DetectionPoint {
  std::vector<SyndromeRecord> branches;
  double f_uncorrected = 0, f_pfu = 0, f_pfu_z = 0;
};

inline DetectionPoint detection_point(const SpinSystemSpec& spec, const std::string& codeword, double t_wait,
                                      const RunOptions& opts) {
  DetectionPoint p;
  p.branches = run_error_detection(spec, codeword, std::nullopt, t_wait, opts).branches;
  const Vector target = codeword_info(codeword).target.value_or(bell_vector(BellState::kPhiPlus));
  p.f_uncorrected = state_fidelity(uncorrected_state(p.branches), target);
  p.f_pfu = state_fidelity(pauli_frame_update(p.branches, codeword), target);
  p.f_pfu_z = state_fidelity(pauli_frame_update_z(p.branches, codeword), target);
  return p;
}

inline json dephasing_detection(ScenarioContext& ctx) {
  const auto t_us = ctx.get<std::vector<double>>("t_wait_us");
  const auto codeword = ctx.get<std::string>("codeword");
  const auto opts = ctx.run();
  std::vector<DetectionPoint> pts(t_us.size());
  parallel_for(t_us.size(), [&](std::size_t i) { pts[i] = detection_point(ctx.spec, codeword, t_us[i] * 1e-6, opts); });
  CsvTable t({"t_wait_us", "p_00", "p_01", "p_10", "p_11", "p_sz_1", "p_sx_1", "fidelity_uncorrected",
              "fidelity_pfu", "fidelity_pfu_z"});
  json s;
  for (std::size_t i = 0; i < t_us.size(); ++i) {
    const auto& b = pts[i].branches;
    t.row({t_us[i], branch(b, 0, 0).probability, branch(b, 0, 1).probability, branch(b, 1, 0).probability,
           branch(b, 1, 1).probability, branch(b, 1, 0).probability + branch(b, 1, 1).probability,
           branch(b, 0, 1).probability + branch(b, 1, 1).probability, pts[i].f_uncorrected, pts[i].f_pfu,
           pts[i].f_pfu_z});
  }
  ctx.write("dephasing_detection.csv", t);
  // Bell-decay fits of the uncorrected and corrected fidelity
  FitData du{t_us, {}}, dc{t_us, {}};
  for (const auto& p : pts) {
    du.y.push_back(p.f_uncorrected);
    dc.y.push_back(p.f_pfu);
  }
  FitOptions fo;
  fo.b_lower = 0.25;
  if (t_us.size() >= 8) {
    try {
      s["fit_uncorrected"] = fit_json(fit_stretched(du, fo));
      s["fit_pfu"] = fit_json(fit_stretched(dc, fo));
    } catch (const std::exception& e) {
      s["fit_error"] = e.what();
    }
  }
  s["fidelity_uncorrected_first"] = pts.front().f_uncorrected;
  s["fidelity_uncorrected_last"] = pts.back().f_uncorrected;
  s["fidelity_pfu_last"] = pts.back().f_pfu;
  return s;
}

inline json pfu_recovery(ScenarioContext& ctx) {
  const double t_wait = ctx.get<double>("t_wait_us") * 1e-6;
  const auto words = ctx.get<std::vector<std::string>>("codewords");
  const auto opts = ctx.run();
  std::vector<DetectionPoint> pts(words.size());
  parallel_for(words.size(), [&](std::size_t i) { pts[i] = detection_point(ctx.spec, words[i], t_wait, opts); });
  CsvTable br({"codeword", "syndrome", "probability", "branch_fidelity_after_correction"});
  CsvTable st({"codeword", "state", "row", "col", "re", "im"});
  json s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto ref = codeword_info(words[i]);
    const Vector target = ref.target.value_or(bell_vector(BellState::kPhiPlus));
    for (const auto& b : pts[i].branches) {
      const Matrix u = pfu_correction(b.sx, b.sz, ref);
      const double f = b.probability > 0 ? state_fidelity(u * b.code_state * u.adjoint(), target) : 0.0;
      br.row({words[i], b.label(), b.probability, f});
      s[words[i]]["branches"][b.label()] = b.probability;
    }
    const Matrix unc = uncorrected_state(pts[i].branches), cor = pauli_frame_update(pts[i].branches, words[i]);
    for (const auto& [name, m] : std::vector<std::pair<std::string, Matrix>>{{"uncorrected", unc}, {"corrected", cor}})
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) st.row({words[i], name, r, c, m(r, c).real(), m(r, c).imag()});
    s[words[i]]["fidelity_uncorrected"] = pts[i].f_uncorrected;
    s[words[i]]["fidelity_pfu"] = pts[i].f_pfu;
    s[words[i]]["fidelity_pfu_z"] = pts[i].f_pfu_z;
  }
  ctx.write("pfu_branches.csv", br);
  ctx.write("pfu_states.csv", st);
  return s;
}

inline CsvTable decay_table(const RbResult& r) {
  CsvTable t({"length", "mean_p", "stderr", "n_sequences"});
  for (const auto& row : r.rows) t.row({row.length, row.mean_p, row.stderr_p, row.n_sequences});
  return t;
}

inline CsvTable sequence_table(const RbResult& r) {
  CsvTable t({"length", "sequence", "p"});
  for (const auto& row : r.rows)
    for (std::size_t k = 0; k < row.per_sequence.size(); ++k) t.row({row.length, k, row.per_sequence[k]});
  return t;
}

inline RbNoise rb_noise(const ScenarioContext& ctx) {
  RbNoise n;
  if (ctx.noise.name == "none") return n;
  n.clifford_depolarizing = ctx.get<double>("clifford_depolarizing");
  n.x90_dephasing = ctx.get<double>("x90_dephasing");
  if (ctx.params.contains("interleaved_depolarizing"))
    n.interleaved_depolarizing = ctx.get<double>("interleaved_depolarizing");
  return n;
}

inline json rb_1q(ScenarioContext& ctx) {
  RbExperiment e;
  e.num_qubits = 1;
  e.lengths = ctx.get<std::vector<int>>("lengths");
  e.sequences = ctx.get<int>("sequences");
  e.shots = ctx.get<int>("shots");
  e.seed = derive_seed(ctx.seed, 1);
  e.noise = rb_noise(ctx);
  const auto r = run_rb_experiment(e);
  ctx.write("rb_1q_decay.csv", decay_table(r));
  ctx.write("rb_1q_sequences.csv", sequence_table(r));
  const auto f = fit_rb_bootstrap(r, ctx.get<int>("bootstrap"), derive_seed(ctx.seed, 2));
  json s;
  s["fit"] = fit_json(f);
  s["clifford_fidelity"] = clifford_fidelity_1q(f.params[1]);
  if (std::isfinite(f.ci_lo[1]))
    s["clifford_fidelity_ci"] = {clifford_fidelity_1q(f.ci_lo[1]), clifford_fidelity_1q(f.ci_hi[1])};
  s["mean_x90_per_clifford"] = clifford_group_1q().mean_x90();
  return s;
}

inline json irb_2q(ScenarioContext& ctx) {
  RbExperiment e;
  e.num_qubits = 2;
  e.lengths = ctx.get<std::vector<int>>("lengths");
  e.sequences = ctx.get<int>("sequences");
  e.shots = ctx.get<int>("shots");
  e.noise = rb_noise(ctx);
  e.seed = derive_seed(ctx.seed, 1);
  const auto ref = run_rb_experiment(e);
  e.interleaved = cz_matrix();
  e.seed = derive_seed(ctx.seed, 2);
  const auto inter = run_rb_experiment(e);
  ctx.write("irb_2q_reference.csv", decay_table(ref));
  ctx.write("irb_2q_interleaved.csv", decay_table(inter));
  const auto est = irb_bootstrap(ref, inter, ctx.get<int>("bootstrap"), derive_seed(ctx.seed, 3));
  json s;
  s["reference_fit"] = fit_json(est.reference);
  s["interleaved_fit"] = fit_json(est.interleaved);
  s["cz_fidelity"] = est.fidelity;
  s["cz_fidelity_ci"] = {est.fidelity_ci.lo, est.fidelity_ci.hi};
  const auto& g = clifford_group_2q();
  s["mean_pi2_per_clifford"] = g.mean_x90();
  s["mean_cz_per_clifford"] = g.mean_cz();
  return s;
}

inline json ramsey_suite(ScenarioContext& ctx) {
  const auto nuc = ctx.nuclei("nuclei");
  const auto det = ctx.get<std::vector<double>>("detuning_Hz");
  const int points = ctx.get<int>("points");
  const double span = ctx.get<double>("span_t2");
  if (det.size() != nuc.size()) throw ConfigError("detuning_Hz must match nuclei");
  std::vector<std::vector<double>> taus(nuc.size()), pu(nuc.size());
  std::vector<SpinSystemSpec> specs;
  for (std::size_t i = 0; i < nuc.size(); ++i) {
    specs.push_back(ctx.spec.with_active({nuc[i]}));
    taus[i] = linspace(0, span * ctx.spec.nuclei[nuc[i]].t2_star, points);
    pu[i].resize(taus[i].size());
  }
  const std::size_t total = nuc.size() * static_cast<std::size_t>(points);
  parallel_for(total, [&](std::size_t k) {
    const std::size_t i = k / points, j = k % points;
    const auto& sp = specs[i];
    const double tau = taus[i][j];
    Circuit c;
    c.add(CircuitOp::x_rotation(nuc[i], kPi / 2));
    c.add(CircuitOp::wait(tau));
    c.add(CircuitOp::x_rotation(nuc[i], kPi / 2, kTwoPi * det[i] * tau));
    compile(c, sp);
    const auto r = run_circuit(c, sp, register_basis_state(sp), run_options(sp, ctx.noise));
    pu[i][j] = reduce_to_nuclei(r.rho, sp, {nuc[i]})(1, 1).real();
  });
  json s;
  for (std::size_t i = 0; i < nuc.size(); ++i) {
    const std::string l = ctx.label(nuc[i]);
    FitResult f;
    bool ok = true;
    try {
      f = fit_ramsey(FitData{taus[i], pu[i]});
    } catch (const std::exception& e) {
      ok = false;
      s[l]["fit_error"] = e.what();
    }
    CsvTable t({"tau_s", "p_up", "fit"});
    for (std::size_t j = 0; j < taus[i].size(); ++j) {
      const double model = ok ? f.params[0] * std::exp(-std::pow(taus[i][j] / f.params[1], 2)) *
                                        std::cos(kTwoPi * f.params[2] * taus[i][j] + f.params[3]) +
                                    f.params[4]
                              : std::numeric_limits<double>::quiet_NaN();
      t.row({taus[i][j], pu[i][j], model});
    }
    ctx.write("ramsey_" + l + ".csv", t);
    s[l]["t2_star_configured"] = ctx.spec.nuclei[nuc[i]].t2_star;
    if (ok) {
      s[l]["fit"] = fit_json(f);
      s[l]["t2_star_fitted"] = f.params[1];
    }
  }
  return s;
}

// Rows are measured outcomes, columns prepared states.
inline CsvTable spam_table(const SpamMatrix& m) {
  std::vector<std::string> header{"measured"};
  for (const auto& l : m.labels()) header.push_back(l);
  CsvTable t(header);
  const auto labels = m.labels();
  for (Eigen::Index i = 0; i < m.m.rows(); ++i) {
    std::vector<CsvTable::Cell> row{labels[i]};
    for (Eigen::Index j = 0; j < m.m.cols(); ++j) row.push_back(m.m(i, j));
    t.row(row);
  }
  return t;
}

inline json elzerman_study(ScenarioContext& ctx) {
  ElzermanParams p;
  p.tunnel_out_up = ctx.get<double>("tunnel_out_up_s");
  p.tunnel_in_down = ctx.get<double>("tunnel_in_down_s");
  p.window = ctx.get<double>("window_s");
  p.bandwidth = ctx.get<double>("bandwidth_Hz");
  p.noise = ctx.get<double>("noise");
  p.false_blip = ctx.get<double>("false_blip");
  const int shots = ctx.get<int>("shots");
  std::vector<double> up(static_cast<std::size_t>(shots)), down(up.size());
  {
    std::mt19937_64 ru(derive_seed(ctx.seed, 1)), rd(derive_seed(ctx.seed, 2));
    for (auto& v : up) v = elzerman_single_shot(true, p, ru).max_signal;
    for (auto& v : down) v = elzerman_single_shot(false, p, rd).max_signal;
  }
  const auto a = readout_fidelity_analysis(up, down, ctx.get<int>("threshold_points"));
  CsvTable t({"threshold", "f_up", "f_down", "visibility"});
  for (std::size_t i = 0; i < a.thresholds.size(); ++i)
    t.row({a.thresholds[i], a.f_up_curve[i], a.f_down_curve[i], a.f_up_curve[i] + a.f_down_curve[i] - 1});
  ctx.write("elzerman_threshold.csv", t);

  // repeated QND readout of a nucleus with the resulting electron fidelities
  const ElectronReadout e{1 - a.f_up, 1 - a.f_down};
  const auto reps = ctx.get<std::vector<int>>("qnd_repetitions");
  const int trials = ctx.get<int>("qnd_trials");
  CsvTable q({"repetitions", "error_up", "error_down", "mc_error_up", "mc_error_down"});
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto [eu, ed] = qnd_majority_error(reps[i], e);
    std::mt19937_64 rng(derive_seed(ctx.seed, 100 + i));
    Matrix up_state = Matrix::Zero(2, 2), down_state = Matrix::Zero(2, 2);
    up_state(1, 1) = 1;
    down_state(0, 0) = 1;
    int wu = 0, wd = 0;
    for (int k = 0; k < trials; ++k) {
      wu += qnd_nuclear_readout(up_state, 0, 1, reps[i], e, 0.0, rng).outcome != 1;
      wd += qnd_nuclear_readout(down_state, 0, 1, reps[i], e, 0.0, rng).outcome != 0;
    }
    q.row({reps[i], eu, ed, static_cast<double>(wu) / trials, static_cast<double>(wd) / trials});
  }
  ctx.write("qnd_majority.csv", q);

  // SPAM of the four-nucleus readout: per-nucleus init flips, then QND majority readout
  const int spam_shots = ctx.get<int>("spam_shots"), spam_reps = ctx.get<int>("spam_repetitions");
  const double init_err = ctx.get<double>("init_error");
  const int nn = 4;
  const std::size_t sd = std::size_t{1} << nn;
  RealMatrix counts = RealMatrix::Zero(sd, sd);
  parallel_for(sd, [&](std::size_t j) {
    std::mt19937_64 rng(derive_seed(ctx.seed, 1000 + j));
    std::bernoulli_distribution flip(init_err);
    for (int shot = 0; shot < spam_shots; ++shot) {
      std::size_t seen = 0;
      for (int k = 0; k < nn; ++k) {
        int bit = static_cast<int>((j >> (nn - 1 - k)) & 1u);
        if (flip(rng)) bit ^= 1;
        Matrix st = Matrix::Zero(2, 2);
        st(bit, bit) = 1;
        if (qnd_nuclear_readout(st, 0, 1, spam_reps, e, 0.0, rng).outcome) seen |= std::size_t{1} << (nn - 1 - k);
      }
      counts(seen, j) += 1;
    }
  });
  const auto spam = build_spam(counts);
  ctx.write("spam_matrix.csv", spam_table(spam));
  CsvTable res({"qubit_i", "qubit_j", "residual"});
  double worst_res = 0;
  for (int i = 0; i < nn; ++i)
    for (int j = i + 1; j < nn; ++j) {
      const double r = tensor_residual(marginalize(spam, {i, j}), marginalize(spam, {i}), marginalize(spam, {j}));
      res.row({"N" + std::to_string(i + 1), "N" + std::to_string(j + 1), r});
      worst_res = std::max(worst_res, r);
    }
  ctx.write("spam_pair_residuals.csv", res);
  json s;
  s["spam_assignment_fidelity"] = spam.m.trace() / static_cast<double>(sd);
  s["spam_max_pair_residual"] = worst_res;
  s["f_up"] = a.f_up;
  s["f_down"] = a.f_down;
  s["visibility"] = a.visibility;
  s["best_threshold"] = a.best_threshold;
  return s;
}

inline json donor_sampling(ScenarioContext& ctx) {
  DonorSamplingOptions o;
  const auto sampling = ctx.get<std::string>("sampling");
  const auto count = ctx.get<std::string>("count");
  if (sampling == "resample_per_size") o.sampling = DonorSampling::kResamplePerSize;
  else if (sampling == "sequential") o.sampling = DonorSampling::kSequential;
  else throw ConfigError("sampling must be resample_per_size or sequential");
  if (count == "violating_set_size") o.count = DonorCount::kViolatingSetSize;
  else if (count == "before_violation") o.count = DonorCount::kBeforeViolation;
  else throw ConfigError("count must be violating_set_size or before_violation");
  o.cap = ctx.get<int>("cap");
  const auto r = sample_feasible_donor_count(ctx.get<double>("min_A_Hz"), ctx.get<double>("max_A_Hz"),
                                             ctx.get<double>("threshold_Hz"), ctx.get<std::uint64_t>("trials"),
                                             ctx.seed, o);
  CsvTable t({"count", "trials", "fraction"});
  for (const auto& [k, v] : r.histogram) t.row({k, v, static_cast<double>(v) / r.trials});
  ctx.write("donor_histogram.csv", t);
  json s;
  s["mean"] = r.mean;
  s["std"] = r.std;
  s["min"] = r.min;
  s["max"] = r.max;
  return s;
}

// Two nuclei in |Φ+> with T1 = ratio * T2*, free evolution.
inline std::vector<BiasResult> bias_ratio_curve(const SpinSystemSpec& base, const std::vector<double>& t2,
                                                double ratio, const std::vector<double>& times) {
  SpinSystemSpec spec = base;
  spec.nuclei.resize(2);
  for (int i = 0; i < 2; ++i) {
    spec.nuclei[i].t2_star = t2[i];
    spec.nuclei[i].t1 = ratio * t2[i];
  }
  spec.active_mask.clear();
  NoiseModel noise = device_noise(spec);
  noise.spins[0] = SpinNoise{};  // electron idle in |↓>
  RunOptions o;
  o.noise = noise;
  const Vector phi = bell_vector(BellState::kPhiPlus);
  Vector psi = Vector::Zero(8);
  psi(0) = phi(0);
  psi(3) = phi(3);
  std::vector<BiasResult> out(times.size());
  parallel_for(times.size(), [&](std::size_t i) {
    Circuit c;
    c.add(CircuitOp::wait(times[i]));
    compile(c, spec);
    const auto r = run_circuit(c, spec, projector(psi), o);
    out[i] = bias_ratio(reduce_to_nuclei(r.rho, spec, {0, 1}), phi);
  });
  return out;
}

inline json bias_ratio_scenario(ScenarioContext& ctx) {
  const auto t2_us = ctx.get<std::vector<double>>("t2_star_us");
  if (t2_us.size() != 2) throw ConfigError("t2_star_us needs two values");
  const double ratio = ctx.get<double>("t1_over_t2");
  const int points = ctx.get<int>("points");
  const double dur = ctx.get<double>("duration_us") * 1e-6;
  std::vector<double> times;
  for (int i = 1; i <= points; ++i) times.push_back(dur * i / points);
  const auto r = bias_ratio_curve(ctx.spec, {t2_us[0] * 1e-6, t2_us[1] * 1e-6}, ratio, times);
  CsvTable t({"t_us", "e_z", "e_x", "e_y", "ratio"});
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    t.row({times[i] * 1e6, r[i].e_z, r[i].e_x, r[i].e_y, r[i].ratio});
    lo = std::min(lo, r[i].ratio);
    hi = std::max(hi, r[i].ratio);
  }
  ctx.write("bias_ratio.csv", t);
  json s;
  s["min_ratio"] = lo;
  s["max_ratio"] = hi;
  return s;
}

inline json cccz_calibration(ScenarioContext& ctx) {
  CalibrationOptions o;
  o.target = ctx.nucleus("target");
  o.config = ctx.get<std::vector<int>>("config");
  o.run = ctx.run();
  const auto ms = ctx.get<std::vector<int>>("repetitions");
  const int points = ctx.get<int>("points");
  const double rabi = o.rabi > 0 ? o.rabi : esr_rabi_for(ctx.spec, o.config, o.gates);
  json s;
  s["rabi_Hz"] = rabi;
  s["nominal_duration_s"] = 1 / rabi;
  for (int m : ms) {
    const auto sw = cccz_calibration_sweep(ctx.spec, m, calibration_durations(rabi, m, points), o);
    CsvTable t({"duration_s", "p_up", "fit"});
    for (std::size_t i = 0; i < sw.durations.size(); ++i) {
      const auto& p = sw.fit.params;
      t.row({sw.durations[i], sw.p_up[i], p[0] * std::cos(kTwoPi * p[1] * sw.durations[i] + p[2]) + p[3]});
    }
    ctx.write("cccz_calibration_m" + std::to_string(m) + ".csv", t);
    const std::string k = "m" + std::to_string(m);
    s[k]["best_duration_s"] = sw.best_duration;
    s[k]["relative_error"] = sw.best_duration * rabi - 1;
    s[k]["fringe_frequency_Hz"] = sw.fit.params[1];
  }
  return s;
}

// Toffoli, Bell, GHZ and detection metrics under each noise toggle.
inline json error_budget(ScenarioContext& ctx) {
  const std::vector<std::string> modes{"none", "dephasing", "crosstalk", "both"};
  const double t_wait = ctx.get<double>("t_wait_us") * 1e-6;
  const int a = ctx.spec.nucleus_index("N2"), b = ctx.spec.nucleus_index("N3");
  struct Row {
    double toffoli = 0, bell = 0, ghz = 0, pfu = 0, uncorrected = 0;
  };
  std::vector<Row> rows(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const auto opts = run_options(ctx.spec, NoiseMode::parse(modes[m]));
    const auto active = ctx.spec.active_nuclei();
    Circuit tof = toffoli_circuit(ctx.spec, {active[0], active[1], active[2]}, active[3]);
    compile(tof, ctx.spec);
    rows[m].toffoli = truth_table_fidelity(truth_table(tof, ctx.spec, active, opts), toffoli_ideal(4, 3));
    Circuit bell = bell_prep_circuit(ctx.spec, a, b, BellState::kPhiPlus);
    compile(bell, ctx.spec);
    rows[m].bell = state_fidelity(
        reduced_pair(run_circuit(bell, ctx.spec, register_basis_state(ctx.spec), opts), ctx.spec, a, b),
        bell_vector(BellState::kPhiPlus));
    Circuit ghz = ghz_prep_circuit(ctx.spec);
    compile(ghz, ctx.spec);
    rows[m].ghz = state_fidelity(
        reduce_to_nuclei(run_circuit(ghz, ctx.spec, register_basis_state(ctx.spec), opts).rho, ctx.spec, active),
        ghz_vector(static_cast<int>(active.size())));
    const auto d = detection_point(ctx.spec, "phi+", t_wait, opts);
    rows[m].pfu = d.f_pfu;
    rows[m].uncorrected = d.f_uncorrected;
  }
  CsvTable t({"metric", "none", "dephasing", "crosstalk", "both"});
  auto put = [&](const std::string& name, double Row::*f) {
    t.row({name, rows[0].*f, rows[1].*f, rows[2].*f, rows[3].*f});
  };
  put("toffoli_truth_table_fidelity", &Row::toffoli);
  put("bell_phi_plus_fidelity", &Row::bell);
  put("ghz_fidelity", &Row::ghz);
  put("detection_uncorrected_fidelity", &Row::uncorrected);
  put("detection_pfu_fidelity", &Row::pfu);
  ctx.write("error_budget.csv", t);
  json s;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    s[modes[m]]["toffoli"] = rows[m].toffoli;
    s[modes[m]]["bell"] = rows[m].bell;
    s[modes[m]]["ghz"] = rows[m].ghz;
    s[modes[m]]["detection_uncorrected"] = rows[m].uncorrected;
    s[modes[m]]["detection_pfu"] = rows[m].pfu;
  }
  return s;
}

}  // namespace scenario_detail

inline const std::vector<ScenarioInfo>& scenarios() {
  namespace d = scenario_detail;
  static const std::vector<ScenarioInfo> list{
      {"toffoli_truth_table", "Toffoli truth table of the compiled circuit", "none",
       {{"controls", {"N1", "N2", "N3"}}, {"target", "N4"}}, d::toffoli_truth_table},
      {"bell_pairs", "all four Bell states on nuclear pairs, with simulated tomography + MLE", "none",
       {{"pairs", json::array({json::array({"N2", "N3"}), json::array({"N1", "N2"}), json::array({"N1", "N3"})})},
        {"shots", 1000}}, d::bell_pairs},
      {"ghz_witness", "four-qubit GHZ preparation and witness", "none",
       {{"nuclei", {"N1", "N2", "N3", "N4"}}, {"shots", 1000}}, d::ghz_witness},
      {"error_sweep_z", "syndromes vs injected Z rotation angle", "none",
       {{"points", 33}, {"codeword", "phi+"}, {"target", "N3"}}, [](ScenarioContext& c) { return d::error_sweep(c, 'z'); }},
      {"error_sweep_x", "syndromes vs injected X rotation angle", "none",
       {{"points", 33}, {"codeword", "phi+"}, {"target", "N3"}}, [](ScenarioContext& c) { return d::error_sweep(c, 'x'); }},
      {"error_sweep_y", "syndromes vs injected Y rotation angle", "none",
       {{"points", 33}, {"codeword", "phi+"}, {"target", "N3"}}, [](ScenarioContext& c) { return d::error_sweep(c, 'y'); }},
      {"stabilizer_basis_table", "stabilizer outcomes for product-state inputs", "none",
       {{"inputs", {"00", "01", "10", "11", "++", "+-", "-+", "--"}}}, d::stabilizer_basis_table},
      {"arbitrary_error_grid", "syndromes for in-plane error axes over a theta/phi grid", "none",
       {{"theta_points", 9}, {"phi_points", 8}, {"target", "N3"}}, d::arbitrary_error_grid},
      {"dephasing_detection", "syndromes and recovered fidelity vs idle time", "both",
       {{"t_wait_us", {0, 32, 64, 96, 128, 160, 192, 256, 320, 384}}, {"codeword", "phi+"}}, d::dephasing_detection},
      {"pfu_recovery", "Pauli-frame recovery at a fixed idle time", "both",
       {{"t_wait_us", 192}, {"codewords", {"phi+", "uniform"}}}, d::pfu_recovery},
      {"rb_1q", "single-qubit randomized benchmarking", "dephasing",
       {{"lengths", {1, 10, 25, 50, 75, 100, 150, 200, 300, 400}},
        {"sequences", 9},
        {"shots", 100},
        {"clifford_depolarizing", 0.9914},
        {"x90_dephasing", 0.0},
        {"bootstrap", 500}},
       d::rb_1q},
      {"irb_2q", "two-qubit interleaved randomized benchmarking of CZ", "dephasing",
       {{"lengths", {1, 2, 4, 6, 8, 10, 15, 20, 30}},
        {"sequences", 12},
        {"shots", 200},
        {"clifford_depolarizing", 0.97},
        {"interleaved_depolarizing", 0.99},
        {"x90_dephasing", 0.0},
        {"bootstrap", 300}},
       d::irb_2q},
      {"ramsey_suite", "Ramsey fringes and T2* fits per nucleus", "dephasing",
       {{"nuclei", {"N1", "N2", "N3", "N4"}}, {"detuning_Hz", {7000.0, 8000.0, 5000.0, 50.0}}, {"points", 61},
        {"span_t2", 2.5}},
       d::ramsey_suite},
      {"elzerman_study", "single-shot electron readout and QND majority voting", "none",
       {{"shots", 20000},
        {"tunnel_out_up_s", 50e-6},
        {"tunnel_in_down_s", 100e-6},
        {"window_s", 500e-6},
        {"bandwidth_Hz", 50e3},
        {"noise", 0.2},
        {"false_blip", 0.0},
        {"threshold_points", 400},
        {"qnd_repetitions", {1, 3, 5, 7, 9, 11, 15, 21}},
        {"qnd_trials", 20000},
        {"spam_shots", 2000},
        {"spam_repetitions", 5},
        {"init_error", 0.01}},
       d::elzerman_study},
      {"donor_sampling", "feasible donor count under ESR frequency crowding", "none",
       {{"min_A_Hz", 0.6e6},
        {"max_A_Hz", 304e6},
        {"threshold_Hz", 10e6},
        {"trials", 100000},
        {"sampling", "resample_per_size"},
        {"count", "violating_set_size"},
        {"cap", 64}},
       d::donor_sampling},
      {"bias_ratio", "Z/X error ratio of a Bell pair with T1/T2* = 1e4", "both",
       {{"t2_star_us", {349.0, 788.0}}, {"t1_over_t2", 1e4}, {"duration_us", 500.0}, {"points", 50}},
       d::bias_ratio_scenario},
      {"cccz_calibration", "ESR 2pi duration calibration with m repeated pulses", "none",
       {{"repetitions", {1, 3, 5, 7}}, {"points", 41}, {"config", {0, 0, 0, 0}}, {"target", "N3"}}, d::cccz_calibration},
      {"error_budget", "key fidelities under each noise toggle", "none", {{"t_wait_us", 0.0}}, d::error_budget},
  };
  return list;
}

inline const ScenarioInfo* find_scenario(const std::string& name) {
  for (const auto& s : scenarios())
    if (s.name == name) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Config files: either a bare device file, or {"device": {...} | "device_file": path, "scenarios": {name: {...}}}

struct LoadedConfig {
  SpinSystemSpec spec;
  json scenario_params = json::object();
  std::string source;
};

inline LoadedConfig load_config(const std::string& path) {
  LoadedConfig c;
  c.source = path;
  if (path.empty()) {
    c.spec = default_device();
    return c;
  }
  const json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  if (j.contains("nuclei")) {
    c.spec = device_from_json(j);
  } else if (j.contains("device")) {
    c.spec = device_from_json(j.at("device"));
  } else if (j.contains("device_file")) {
    const auto dir = std::filesystem::path(path).parent_path();
    c.spec = load_device((dir / j.at("device_file").get<std::string>()).string());
  } else {
    c.spec = default_device();
  }
  try {
    c.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (j.contains("scenarios")) c.scenario_params = j.at("scenarios");
  if (!c.scenario_params.is_object()) throw ConfigError(path + ": scenarios must be an object");
  return c;
}

inline json resolve_params(const ScenarioInfo& info, const json& overrides) {
  json p = info.defaults;
  if (!overrides.contains(info.name)) return p;
  const auto& o = overrides.at(info.name);
  if (!o.is_object()) throw ConfigError("scenario parameters for " + info.name + " must be an object");
  for (auto it = o.begin(); it != o.end(); ++it) {
    if (!p.contains(it.key())) throw ConfigError("unknown parameter '" + it.key() + "' for " + info.name);
    p[it.key()] = it.value();
  }
  return p;
}

struct RunRequest {
  std::string scenario;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string noise;  // empty = scenario default
  unsigned threads = 0;
};

// Throws ConfigError for config problems; anything else from the scenario is a simulation failure.
inline json run_scenario(const ScenarioInfo& info, const RunRequest& req) {
  const auto cfg = load_config(req.config_path);
  ScenarioContext ctx;
  ctx.name = info.name;
  ctx.spec = cfg.spec;
  ctx.noise = NoiseMode::parse(req.noise.empty() ? info.default_noise : req.noise);
  ctx.seed = req.seed;
  ctx.params = resolve_params(info, cfg.scenario_params);
  ctx.out = req.out_dir;
  std::filesystem::create_directories(ctx.out);

  json resolved;
  resolved["scenario"] = info.name;
  resolved["config_path"] = req.config_path;
  resolved["seed"] = req.seed;
  resolved["noise"] = ctx.noise.name;
  resolved["device"] = device_to_json(ctx.spec);
  resolved["params"] = ctx.params;

  log::info("running " + info.name + " (noise=" + ctx.noise.name + ", seed=" + std::to_string(req.seed) + ")");
  json summary = info.run(ctx);
  json results;
  results["scenario"] = info.name;
  results["description"] = info.description;
  results["config"] = resolved;
  results["summary"] = summary;
  results["files"] = ctx.files;
  std::ofstream f(ctx.out / "results.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot write results.json");
  f << results.dump(2) << '\n';
  return results;
}

}  // namespace donorsim
