#pragma once

#include "donorsim/core.hpp"
#include "donorsim/parallel.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace donorsim {

struct FitData {
  std::vector<double> x, y;

  void validate(std::size_t n_params) const {
    if (x.size() != y.size()) throw std::invalid_argument("fit data: x and y differ in length");
    if (x.size() < 2 * n_params) throw std::invalid_argument("fit data: need at least 2x as many points as parameters");
  }
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> ci_lo, ci_hi;  // NaN until bootstrapped
  double residual_norm = 0;
  bool converged = false;
  bool degenerate = false;  // amplitude ~ 0, decay constant not identified
  std::string message;

  double get(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return params[i];
    throw std::out_of_range("no fit parameter " + name);
  }
  std::pair<double, double> ci(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return {ci_lo[i], ci_hi[i]};
    throw std::out_of_range("no fit parameter " + name);
  }
};

struct FitOptions {
  double alpha_min = 0.5, alpha_max = 3.0;
  double b_lower = -std::numeric_limits<double>::infinity();
};

namespace detail {

// Internal (unbounded) vector u -> model parameters; residuals r_i = model(x_i) - y_i.
struct Model {
  std::string name;
  std::vector<std::string> names;
  std::function<std::vector<double>(const Eigen::VectorXd&)> to_params;
  std::function<double(double, const std::vector<double>&)> eval;
};

struct LmFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const Model* model;
  const FitData* data;
  int n_in;

  int inputs() const { return n_in; }
  int values() const { return static_cast<int>(data->x.size()); }

  int operator()(const Eigen::VectorXd& u, Eigen::VectorXd& r) const {
    const auto p = model->to_params(u);
    for (std::size_t i = 0; i < data->x.size(); ++i) r(i) = model->eval(data->x[i], p) - data->y[i];
    return 0;
  }
  int df(const Eigen::VectorXd& u, Eigen::MatrixXd& jac) const {
    Eigen::VectorXd r0(values()), r1(values());
    for (int k = 0; k < n_in; ++k) {
      const double h = 1e-7 * std::max(1.0, std::abs(u(k)));
      Eigen::VectorXd up = u, dn = u;
      up(k) += h;
      dn(k) -= h;
      (*this)(up, r1);
      (*this)(dn, r0);
      jac.col(k) = (r1 - r0) / (2 * h);
    }
    return 0;
  }
};

inline FitResult run_lm(const Model& m, const FitData& data, Eigen::VectorXd u) {
  LmFunctor f{&m, &data, static_cast<int>(u.size())};
  Eigen::LevenbergMarquardt<LmFunctor> lm(f);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 20000;
  const auto status = lm.minimize(u);
  FitResult r;
  r.model = m.name;
  r.names = m.names;
  r.params = m.to_params(u);
  Eigen::VectorXd res(data.x.size());
  f(u, res);
  r.residual_norm = res.norm();
  r.converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                std::all_of(r.params.begin(), r.params.end(), [](double v) { return std::isfinite(v); });
  if (!r.converged) r.message = "no convergence (status " + std::to_string(static_cast<int>(status)) + ")";
  r.ci_lo.assign(r.params.size(), std::numeric_limits<double>::quiet_NaN());
  r.ci_hi = r.ci_lo;
  return r;
}

inline double span(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
}

inline bool is_constant(const std::vector<double>& y) {
  const double scale = std::max(1.0, std::abs(y.front()));
  return span(y) <= 1e-12 * scale;
}

// Time at which |y - B| first drops below |A|/e.
inline double first_e_crossing(const FitData& d, double a, double b) {
  for (std::size_t i = 0; i < d.x.size(); ++i)
    if (std::abs(d.y[i] - b) < std::abs(a) / std::exp(1.0)) return std::max(d.x[i], 1e-300);
  return d.x.back() - d.x.front();
}

inline double tail_mean(const std::vector<double>& y, std::size_t k) {
  k = std::max<std::size_t>(1, std::min(k, y.size()));
  double s = 0;
  for (std::size_t i = y.size() - k; i < y.size(); ++i) s += y[i];
  return s / k;
}

inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double logit(double p) { return std::log(p / (1 - p)); }

// Strongest frequency on a uniform-ish grid: periodogram scan plus golden-section refinement.
inline std::pair<double, double> periodogram_peak(const FitData& d, double offset) {
  const double t_span = d.x.back() - d.x.front();
  double dt_min = t_span;
  for (std::size_t i = 1; i < d.x.size(); ++i) dt_min = std::min(dt_min, d.x[i] - d.x[i - 1]);
  const double f_max = 0.5 / std::max(dt_min, 1e-300), f_step = 0.25 / t_span;
  auto power = [&](double f, double* phase) {
    double c = 0, s = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      const double w = kTwoPi * f * d.x[i];
      c += (d.y[i] - offset) * std::cos(w);
      s += (d.y[i] - offset) * std::sin(w);
    }
    if (phase) *phase = std::atan2(-s, c);
    return c * c + s * s;
  };
  double best_f = 0, best_p = -1;
  for (double f = f_step; f <= f_max; f += f_step) {
    const double p = power(f, nullptr);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  double lo = std::max(0.0, best_f - f_step), hi = best_f + f_step;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 80; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (power(a, nullptr) > power(b, nullptr)) hi = b;
    else lo = a;
  }
  double phase = 0;
  const double f = 0.5 * (lo + hi);
  power(f, &phase);
  return {f, phase};
}

}  // namespace detail

// P = A exp(-(t/T)^2) cos(2π Δf t + φ) + B
inline FitResult fit_ramsey(const FitData& d) {
  d.validate(5);
  detail::Model m{"ramsey",
                  {"A", "T2star", "detuning", "phase", "B"},
                  [](const Eigen::VectorXd& u) { return std::vector<double>{u(0), std::exp(u(1)), u(2), u(3), u(4)}; },
                  [](double t, const std::vector<double>& p) {
                    return p[0] * std::exp(-std::pow(t / p[1], 2)) * std::cos(kTwoPi * p[2] * t + p[3]) + p[4];
                  }};
  double b = 0;
  for (double v : d.y) b += v;
  b /= d.y.size();
  const auto [f0, ph0] = detail::periodogram_peak(d, b);
  const double a0 = 0.5 * detail::span(d.y);
  // envelope: first time |y - B| stays below a0/e is a crude T
  double t0 = (d.x.back() - d.x.front()) / 2;
  {
    double env_max = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) env_max = std::max(env_max, std::abs(d.y[i] - b));
    for (std::size_t i = d.x.size(); i-- > 0;)
      if (std::abs(d.y[i] - b) > env_max / std::exp(1.0)) {
        t0 = std::max(d.x[i], 1e-300);
        break;
      }
  }
  Eigen::VectorXd u(5);
  u << a0, std::log(t0), f0, ph0, b;
  auto r = detail::run_lm(m, d, u);
  // cos(x + π) with -A is the same curve; report A > 0
  if (r.params[0] < 0) {
    r.params[0] = -r.params[0];
    r.params[3] += kPi;
  }
  r.params[3] = std::remainder(r.params[3], kTwoPi);
  return r;
}

// A exp(-(t/T)^α) + B, α in [alpha_min, alpha_max], B >= b_lower.
inline FitResult fit_stretched(const FitData& d, const FitOptions& o = {}) {
  d.validate(4);
  const double lo = o.alpha_min, hi = o.alpha_max, bl = o.b_lower;
  detail::Model m{"stretched",
                  {"A", "T2", "alpha", "B"},
                  [lo, hi, bl](const Eigen::VectorXd& u) {
                    const double b = std::isfinite(bl) ? bl + std::exp(u(3)) : u(3);
                    return std::vector<double>{u(0), std::exp(u(1)), lo + (hi - lo) * detail::logistic(u(2)), b};
                  },
                  [](double t, const std::vector<double>& p) { return p[0] * std::exp(-std::pow(t / p[1], p[2])) + p[3]; }};
  FitResult r;
  if (detail::is_constant(d.y)) {
    r.model = m.name;
    r.names = m.names;
    r.params = {0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), d.y.front()};
    r.ci_lo.assign(4, std::numeric_limits<double>::quiet_NaN());
    r.ci_hi = r.ci_lo;
    r.degenerate = true;
    r.converged = true;
    r.message = "constant data";
    return r;
  }
  double b0 = detail::tail_mean(d.y, d.y.size() / 10);
  if (std::isfinite(bl) && b0 <= bl) b0 = bl + 1e-3 * std::max(1.0, detail::span(d.y));
  const double a0 = d.y.front() - b0;
  const double t0 = detail::first_e_crossing(d, a0, b0);
  const double alpha0 = std::clamp(2.0, lo + 1e-3, hi - 1e-3);
  // try a few shapes and keep the best
  FitResult best;
  best.residual_norm = std::numeric_limits<double>::infinity();
  for (double a_init : {alpha0, std::clamp(1.0, lo + 1e-3, hi - 1e-3)}) {
    Eigen::VectorXd u(4);
    u << a0, std::log(t0), detail::logit((a_init - lo) / (hi - lo)), std::isfinite(bl) ? std::log(b0 - bl) : b0;
    auto cand = detail::run_lm(m, d, u);
    if (cand.residual_norm < best.residual_norm) best = cand;
  }
  best.degenerate = std::abs(best.params[0]) < 1e-9 * std::max(1.0, detail::span(d.y));
  return best;
}

inline FitResult fit_exp_decay(const FitData& d, const std::string& name, const std::string& tname) {
  d.validate(3);
  detail::Model m{name,
                  {"A", tname, "B"},
                  [](const Eigen::VectorXd& u) { return std::vector<double>{u(0), std::exp(u(1)), u(2)}; },
                  [](double t, const std::vector<double>& p) { return p[0] * std::exp(-t / p[1]) + p[2]; }};
  FitResult r;
  if (detail::is_constant(d.y)) {
    r.model = name;
    r.names = m.names;
    r.params = {0, std::numeric_limits<double>::quiet_NaN(), d.y.front()};
    r.ci_lo.assign(3, std::numeric_limits<double>::quiet_NaN());
    r.ci_hi = r.ci_lo;
    r.degenerate = true;
    r.converged = true;
    r.message = "constant data";
    return r;
  }
  const double b0 = detail::tail_mean(d.y, std::max<std::size_t>(1, d.y.size() / 10));
  const double a0 = d.y.front() - b0;
  Eigen::VectorXd u(3);
  u << a0, std::log(detail::first_e_crossing(d, a0, b0)), b0;
  auto r2 = detail::run_lm(m, d, u);
  r2.degenerate = std::abs(r2.params[0]) < 1e-9 * std::max(1.0, detail::span(d.y));
  return r2;
}

inline FitResult fit_t1(const FitData& d) { return fit_exp_decay(d, "t1", "T1"); }

// A p^n + B
inline FitResult fit_rb(const FitData& d) {
  d.validate(3);
  detail::Model m{"rb",
                  {"A", "p", "B"},
                  [](const Eigen::VectorXd& u) { return std::vector<double>{u(0), detail::logistic(u(1)), u(2)}; },
                  [](double n, const std::vector<double>& p) { return p[0] * std::pow(p[1], n) + p[2]; }};
  FitResult r;
  if (detail::is_constant(d.y)) {
    r.model = m.name;
    r.names = m.names;
    r.params = {0, 1, d.y.front()};
    r.ci_lo.assign(3, std::numeric_limits<double>::quiet_NaN());
    r.ci_hi = r.ci_lo;
    r.degenerate = true;
    r.converged = true;
    r.message = "constant data";
    return r;
  }
  // start from the exponential-decay fit in n
  const auto e = fit_exp_decay(d, "rb", "n0");
  const double p0 = std::clamp(std::exp(-1.0 / e.params[1]), 1e-6, 1 - 1e-12);
  Eigen::VectorXd u(3);
  u << e.params[0], detail::logit(p0), e.params[2];
  auto out = detail::run_lm(m, d, u);
  return out;
}

// A cos(2π f t + φ) + B
inline FitResult fit_sine(const FitData& d) {
  d.validate(4);
  detail::Model m{"sine",
                  {"A", "frequency", "phase", "B"},
                  [](const Eigen::VectorXd& u) { return std::vector<double>{u(0), u(1), u(2), u(3)}; },
                  [](double t, const std::vector<double>& p) { return p[0] * std::cos(kTwoPi * p[1] * t + p[2]) + p[3]; }};
  if (detail::is_constant(d.y)) throw std::runtime_error("fit_sine: data do not oscillate");
  double b = 0;
  for (double v : d.y) b += v;
  b /= d.y.size();
  const auto [f0, ph0] = detail::periodogram_peak(d, b);
  Eigen::VectorXd u(4);
  u << 0.5 * detail::span(d.y), f0, ph0, b;
  auto r = detail::run_lm(m, d, u);
  if (r.params[0] < 0) {
    r.params[0] = -r.params[0];
    r.params[2] += kPi;
  }
  r.params[2] = std::remainder(r.params[2], kTwoPi);
  if (!(r.params[1] > 0)) throw std::runtime_error("fit_sine: data do not oscillate");
  return r;
}

inline double clifford_fidelity_1q(double p) { return (1 + p) / 2; }

inline double irb_fidelity(double p_ref, double p_interleaved) {
  if (!(p_ref > 0) || p_ref > 1 || !(p_interleaved > 0) || p_interleaved > 1)
    throw std::invalid_argument("irb_fidelity: p values must be in (0, 1]");
  return (1 + 3 * p_interleaved / p_ref) / 4;
}

// ---------------------------------------------------------------------------
// Bootstrap

struct Interval {
  double lo = 0, hi = 0, center = 0;
};

inline Interval percentile_interval(std::vector<double> v, double center) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - i;
    return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
  };
  return {q(0.15865), q(0.84135), center};
}

inline Interval bootstrap_ci(const std::vector<double>& samples,
                             const std::function<double(const std::vector<double>&)>& estimator, int resamples,
                             std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("bootstrap_ci: empty sample set");
  if (resamples < 100) throw std::invalid_argument("bootstrap_ci: need at least 100 resamples");
  std::vector<double> stats(resamples);
  parallel_for(static_cast<std::size_t>(resamples), [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    std::vector<double> s(samples.size());
    for (auto& x : s) x = samples[pick(rng)];
    stats[k] = estimator(s);
  });
  return percentile_interval(stats, estimator(samples));
}

// Pairs bootstrap of a fit: resample (x, y) points, refit, percentile bands per parameter.
inline FitResult bootstrap_fit(const FitData& d, const std::function<FitResult(const FitData&)>& fitter, int resamples,
                               std::uint64_t seed) {
  if (resamples < 100) throw std::invalid_argument("bootstrap_fit: need at least 100 resamples");
  FitResult base = fitter(d);
  const std::size_t np = base.params.size();
  std::vector<std::vector<double>> draws(resamples);
  parallel_for(static_cast<std::size_t>(resamples), [&](std::size_t k) {
    std::mt19937_64 rng(derive_seed(seed, k));
    std::uniform_int_distribution<std::size_t> pick(0, d.x.size() - 1);
    std::vector<std::size_t> idx(d.x.size());
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    FitData s;
    for (auto i : idx) {
      s.x.push_back(d.x[i]);
      s.y.push_back(d.y[i]);
    }
    try {
      draws[k] = fitter(s).params;
    } catch (const std::exception&) {
      draws[k].clear();
    }
  });
  for (std::size_t p = 0; p < np; ++p) {
    std::vector<double> v;
    for (const auto& dr : draws)
      if (dr.size() == np && std::isfinite(dr[p])) v.push_back(dr[p]);
    if (v.empty()) continue;
    const auto iv = percentile_interval(v, base.params[p]);
    base.ci_lo[p] = iv.lo;
    base.ci_hi[p] = iv.hi;
  }
  return base;
}

}  // namespace donorsim
