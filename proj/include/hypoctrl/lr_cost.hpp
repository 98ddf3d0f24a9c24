#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hypoctrl/core.hpp"
#include "hypoctrl/linalg.hpp"

// Constants of the adapted Lebeau-Robbiano argument: a spectral inequality
// |pi_k g| <= e^{c1 k^a} |pi_k g|_omega and a dissipation estimate
// |(1 - pi_k) e^{tA} g| <= c2^{-1} e^{-c2 t^m k^b} |g| (0 < t < t0) give
// |e^{TA} g|^2 <= C exp(C / T^{am/(b-a)}) int_0^T |e^{tA} g|_omega^2 dt.
// Magnitudes are double-exponential, so everything is carried as logs.
namespace hypoctrl::lr {

struct LRParams {
  double c1 = 1.0;
  double c2 = 1.0;
  double a = 0.5;
  double b = 1.0;
  double m = 1.0;
  double t0 = 1.0;

  void validate() const {
    require(c1 > 0 && c2 > 0 && a > 0 && b > 0 && m > 0 && t0 > 0,
            "LR parameters must all be positive");
    require(a < b, "LR parameters need a < b");
  }
  double exponent() const { return a * m / (b - a); }
};

inline double safe_exp(double x) { return x > 709.0 ? std::numeric_limits<double>::infinity() : std::exp(x); }

struct GammaM {
  double q = 0.5;
  double log_gamma = 0.0;
  double log_M = 0.0;
  double gamma = 0.0;  // +inf when exp overflows; the logs stay exact
  double M = 0.0;
  double relation_residual = 0.0;  // relative, c2 g^b 2^-m vs 3 c1 (2g)^a q^-e
};

// gamma(q) = (3 c1 2^{a+m} / (c2 q^e))^{1/(b-a)}, M(q) = 3 c1 (2 gamma)^a.
inline GammaM gamma_and_M(const LRParams& p, double q) {
  p.validate();
  require(q > 0 && q < 1, "q must lie in (0, 1)");
  const double e = p.exponent();
  GammaM out;
  out.q = q;
  out.log_gamma = (std::log(3.0 * p.c1) + (p.a + p.m) * std::numbers::ln2 - std::log(p.c2) - e * std::log(q)) /
                  (p.b - p.a);
  out.log_M = std::log(3.0 * p.c1) + p.a * (std::numbers::ln2 + out.log_gamma);
  out.gamma = safe_exp(out.log_gamma);
  out.M = safe_exp(out.log_M);
  const double lhs = std::log(p.c2) + p.b * out.log_gamma - p.m * std::numbers::ln2;
  const double rhs = out.log_M - e * std::log(q);
  out.relation_residual = std::abs(std::expm1(lhs - rhs));
  // for astronomically large values the logs themselves carry rounding
  const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lhs), std::abs(rhs));
  require(std::abs(lhs - rhs) <= 1e-10 + slack, "gamma relation check failed");
  return out;
}

// Exponent-safe evaluation of the three admissibility conditions on tau.
namespace detail {
// gamma / tau^{m/(b-a)} > 1
inline bool cond_gamma(const LRParams& p, const GammaM& g, double log_tau) {
  return g.log_gamma - p.m / (p.b - p.a) * log_tau > 0.0;
}
// tau/4 >= exp(-c1 (2 gamma)^a / tau^e)  <=>  c1 (2g)^a tau^-e >= log(4/tau)
inline bool cond_lower(const LRParams& p, const GammaM& g, double log_tau) {
  const double rhs = std::log(4.0) - log_tau;
  if (rhs <= 0) return true;
  const double log_k = std::log(p.c1) + p.a * (std::numbers::ln2 + g.log_gamma);
  return log_k - p.exponent() * log_tau >= std::log(rhs);
}
// tau / c2^2 <= exp(c2 g^b / (2^m tau^e))  <=>  c2 g^b 2^-m tau^-e >= log tau - 2 log c2
inline bool cond_upper(const LRParams& p, const GammaM& g, double log_tau) {
  const double rhs = log_tau - 2.0 * std::log(p.c2);
  if (rhs <= 0) return true;
  const double log_k = std::log(p.c2) + p.b * g.log_gamma - p.m * std::numbers::ln2;
  return log_k - p.exponent() * log_tau >= std::log(rhs);
}
}  // namespace detail

struct Tau0Result {
  double tau0_prime = 0.0;
  int binding = -1;  // index of the binding condition, -1 when capped at t0
  double thresholds[3] = {0, 0, 0};
};

inline bool tau_admissible(const LRParams& p, const GammaM& g, double tau) {
  const double lt = std::log(tau);
  return detail::cond_gamma(p, g, lt) && detail::cond_lower(p, g, lt) && detail::cond_upper(p, g, lt);
}

// Largest tau0' <= t0 such that all three conditions hold on (0, tau0'). Each
// condition holds on an initial interval (0, tau_i); tau_i is found by
// bisection in log tau, after checking by sampling that the condition does
// not switch back on below the threshold.
inline Tau0Result tau0_prime(const LRParams& p, double q, const GammaM& g) {
  p.validate();
  static const char* names[3] = {"gamma / tau^{m/(b-a)} > 1", "tau/4 >= exp(-c1 (2 gamma)^a / tau^e)",
                                 "tau / c2^2 <= exp(c2 gamma^b / (2^m tau^e))"};
  using Cond = bool (*)(const LRParams&, const GammaM&, double);
  const Cond conds[3] = {detail::cond_gamma, detail::cond_lower, detail::cond_upper};
  Tau0Result out;
  const double log_hi = std::log(p.t0);
  // lower end of the search; conditions are all asymptotically true as tau -> 0
  const double log_lo = std::min(log_hi, -700.0);
  double best = log_hi;
  for (int c = 0; c < 3; ++c) {
    require(conds[c](p, g, log_lo), std::string("no admissible tau: condition ") + names[c] +
                                        " fails near tau = 0", ErrorKind::no_admissible_tau);
    // conditions 0 and 2 decrease in tau; condition 1 decreases up to the
    // minimiser tau* = (e K)^{1/e} of log(tau/4) + K tau^-e and then recovers
    double mono_hi = log_hi;
    if (c == 1) {
      const double log_k = std::log(p.c1) + p.a * (std::numbers::ln2 + g.log_gamma);
      mono_hi = std::min(log_hi, (std::log(p.exponent()) + log_k) / p.exponent());
    }
    double thr = log_hi;
    if (!conds[c](p, g, mono_hi)) {
      double lo = log_lo, hi = mono_hi;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (conds[c](p, g, mid) ? lo : hi) = mid;
      }
      thr = lo;
      // monotonicity guard: holds everywhere below the threshold
      for (int s = 0; s < 256; ++s) {
        const double lt = log_lo + (thr - log_lo) * s / 256.0;
        require(conds[c](p, g, lt), std::string("condition ") + names[c] + " is not monotone",
                ErrorKind::no_admissible_tau);
      }
    }
    out.thresholds[c] = std::exp(thr);
    if (thr < best) {
      best = thr;
      out.binding = c;
    }
  }
  out.tau0_prime = std::exp(best);
  require(out.tau0_prime > 0, "no admissible tau: bracket collapsed", ErrorKind::no_admissible_tau);
  return out;
}

// k(q, tau) = floor(gamma tau^{-m/(b-a)}) + 1, within (gamma tau^-, 2 gamma tau^-].
inline double k_of_tau(const LRParams& p, const GammaM& g, double tau) {
  const double lk = g.log_gamma - p.m / (p.b - p.a) * std::log(tau);
  const double k = std::floor(safe_exp(lk)) + 1.0;
  require(std::log(k) <= lk + std::numbers::ln2 + 1e-12, "k(q, tau) exceeds 2 gamma tau^{-m/(b-a)}");
  return k;
}

// f_q(s) = exp(-M / s^e), returned as a log.
inline double log_f(const LRParams& p, const GammaM& g, double s) {
  return -safe_exp(g.log_M - p.exponent() * std::log(s));
}

struct CostReport {
  LRParams params;
  double q = 0.5;
  double exponent = 0.0;
  GammaM gm;
  Tau0Result tau;
  double tau0_prime = 0.0;
  double T_tilde0 = 0.0;
  double log_C1 = 0.0;
  double log_C2 = 0.0;
  double log_C = 0.0;
  double C1() const { return safe_exp(log_C1); }
  double C2() const { return safe_exp(log_C2); }
  double C() const { return safe_exp(log_C); }

  // log of C exp(C / T^e)
  double log_cost(double T) const {
    require(T > 0, "cost horizon must be positive");
    return log_C + safe_exp(log_C - exponent * std::log(T));
  }
  double cost(double T) const { return safe_exp(log_cost(T)); }
  // branch bounds: exp(C1 / T^e) for T < T~0, C2 exp(C1 / T^e) for T >= T~0
  double log_branch_bound(double T) const {
    const double base = safe_exp(log_C1 - exponent * std::log(T));
    return T < T_tilde0 ? base : log_C2 + base;
  }
};

// Default q = 1/2. C is the upper bound from the construction,
// not an optimised constant.
inline CostReport observability_cost(const LRParams& p, double q = 0.5) {
  p.validate();
  CostReport r;
  r.params = p;
  r.q = q;
  r.exponent = p.exponent();
  r.gm = gamma_and_M(p, q);
  r.tau = tau0_prime(p, q, r.gm);
  r.tau0_prime = r.tau.tau0_prime;
  r.T_tilde0 = 2.0 * r.tau0_prime;
  const double e = r.exponent;
  r.log_C1 = r.gm.log_M + e * std::numbers::ln2;
  // C2 = exp(2^e C1 / T~0^e)
  r.log_C2 = safe_exp(e * std::numbers::ln2 + r.log_C1 - e * std::log(r.T_tilde0));
  r.log_C = std::max({r.log_C1, r.log_C2, 0.0});
  return r;
}

// Diagonal contraction semigroup e^{tA} = diag(e^{-lambda_j t}), j = 1..D,
// pi_k = modes j <= k, observation |g|_omega^2 = sum_j r_j |g_j|^2.
// lambda_j = c2 t0^{m-1} j^b (m >= 1, c2 <= 1) gives the dissipation estimate
// with constant c2 and r_j = e^{-2 c1 j^a} the spectral inequality with c1,
// the latter with equality on mode k.
struct DiagonalSemigroupModel {
  Vec lambda;
  Vec log_r;

  static DiagonalSemigroupModel hypothesis_exact(const LRParams& p, int modes) {
    p.validate();
    require(p.m >= 1.0 && p.c2 <= 1.0, "synthetic model needs m >= 1 and c2 <= 1");
    DiagonalSemigroupModel mdl;
    mdl.lambda.resize(modes);
    mdl.log_r.resize(modes);
    for (int j = 1; j <= modes; ++j) {
      mdl.lambda(j - 1) = p.c2 * std::pow(p.t0, p.m - 1.0) * std::pow(j, p.b);
      mdl.log_r(j - 1) = -2.0 * p.c1 * std::pow(j, p.a);
    }
    return mdl;
  }
  int modes() const { return static_cast<int>(lambda.size()); }

  // log |(1 - pi_k) e^{tA}|, -inf when no mode lies above k
  double log_tail_norm(double t, double k) const {
    const double j = std::floor(k) + 1.0;
    if (j > modes()) return -std::numeric_limits<double>::infinity();
    return -lambda(static_cast<int>(j) - 1) * t;
  }
  Vec evolve(const Vec& g, double t) const { return (g.array() * (-lambda.array() * t).exp()).matrix(); }
  double observed(const Vec& g) const { return (log_r.array().exp() * g.array().square()).sum(); }
  // int_s^t |e^{uA} g|_omega^2 du in closed form
  double observed_energy(const Vec& g, double s, double t) const {
    double acc = 0.0;
    for (int j = 0; j < modes(); ++j) {
      const double l2 = 2.0 * lambda(j);
      acc += std::exp(log_r(j)) * g(j) * g(j) * (std::exp(-l2 * s) - std::exp(-l2 * t)) / l2;
    }
    return acc;
  }

  // max over k, t of the hypothesis violations for given constants (<= 0 when satisfied)
  double hypothesis_violation(const LRParams& p) const {
    double worst = -INFINITY;
    for (int k = 1; k <= modes(); ++k) {
      // spectral: r_j >= e^{-2 c1 k^a} for j <= k
      worst = std::max(worst, -2.0 * p.c1 * std::pow(k, p.a) - log_r(k - 1));
      for (int s = 1; s <= 16; ++s) {
        const double t = p.t0 * s / 16.0 * (1 - 1e-12);
        const double bound = -std::log(p.c2) - p.c2 * std::pow(t, p.m) * std::pow(k, p.b);
        worst = std::max(worst, log_tail_norm(t, k) - bound);
      }
    }
    return worst;
  }
};

struct TelescopingStep {
  int index = 0;
  double T_k = 0.0;
  double tau_k = 0.0;
  double mode_k = 0.0;
  double spectral_slack = 0.0;
  double dissipation_slack = 0.0;
  double step_slack = 0.0;
  double residual = 0.0;  // max of the three; > 0 marks a failed step
};

struct TelescopingTrace {
  CostReport cost;
  std::vector<TelescopingStep> steps;
  int first_failure = -1;
  double tau_sum = 0.0;
  int final_bound_holds = 0;  // out of `states`
  int states = 0;
  double worst_final_margin = -INFINITY;  // log lhs - log rhs, <= 0 when the bound holds
  bool pass = false;
};

// Runs the telescoping sequence tau_k = T / 2^{k+1} on a diagonal model and
// checks every ingredient of the one-step inequality with the constants in p.
inline TelescopingTrace telescoping_trace(const LRParams& p, double T, const DiagonalSemigroupModel& model,
                                          std::uint64_t seed = 1, int states = 50, double tol = 1e-12) {
  TelescopingTrace tr;
  tr.cost = observability_cost(p);
  require(T > 0 && T < tr.cost.T_tilde0, "telescoping horizon must lie in (0, T~0)");
  const GammaM& g = tr.cost.gm;
  const double q = tr.cost.q;
  tr.states = states;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Vec> gs;
  for (int s = 0; s < states; ++s) {
    Vec v(model.modes());
    for (int j = 0; j < model.modes(); ++j) v(j) = nd(rng);
    gs.push_back(v / v.norm());
  }
  double Tk = T;
  for (int k = 0; k < 200; ++k) {
    TelescopingStep st;
    st.index = k;
    st.T_k = Tk;
    st.tau_k = T / std::pow(2.0, k + 1);
    tr.tau_sum += st.tau_k;
    const double tau = st.tau_k;
    st.mode_k = k_of_tau(p, g, tau);
    // spectral inequality on pi_k: min_{j <= k} r_j e^{2 c1 k^a} >= 1
    const int jmax = static_cast<int>(std::min<double>(st.mode_k, model.modes()));
    double min_ratio = INFINITY;
    for (int j = 1; j <= jmax; ++j)
      min_ratio = std::min(min_ratio, model.log_r(j - 1) + 2.0 * p.c1 * std::pow(st.mode_k, p.a));
    st.spectral_slack = -min_ratio;
    // dissipation on [tau/2, tau] at k(q, tau)
    st.dissipation_slack = -INFINITY;
    for (int s = 0; s <= 16; ++s) {
      const double t = tau * (0.5 + s / 32.0);
      const double bound = -std::log(p.c2) - p.c2 * std::pow(t, p.m) * std::pow(st.mode_k, p.b);
      st.dissipation_slack = std::max(st.dissipation_slack, model.log_tail_norm(t, st.mode_k) - bound);
    }
    // f(tau)|e^{tau A} h|^2 - f(q tau)|h|^2 <= int_{tau/2}^{tau} |e^{tA} h|_omega^2, h = e^{T_{k+1} A} g
    const double lf_tau = log_f(p, g, tau), lf_qtau = log_f(p, g, q * tau);
    st.step_slack = -INFINITY;
    const double Tnext = Tk - tau;
    for (const Vec& g0 : gs) {
      const Vec h = model.evolve(g0, Tnext);
      const double lhs = std::exp(lf_tau) * model.evolve(h, tau).squaredNorm() - std::exp(lf_qtau) * h.squaredNorm();
      const double rhs = model.observed_energy(h, 0.5 * tau, tau);
      const double scale = std::max({rhs, std::exp(lf_tau) * h.squaredNorm(), 1e-300});
      st.step_slack = std::max(st.step_slack, (lhs - rhs) / scale);
    }
    st.residual = std::max({st.spectral_slack, st.dissipation_slack, st.step_slack});
    if (tr.first_failure < 0 && st.residual > tol) tr.first_failure = k;
    tr.steps.push_back(st);
    Tk = Tnext;
    if (Tk < 1e-12 * T) break;
  }
  // final observability bound
  const double log_cost = tr.cost.log_cost(T);
  for (const Vec& g0 : gs) {
    const double lhs = std::log(model.evolve(g0, T).squaredNorm());
    const double rhs = log_cost + std::log(model.observed_energy(g0, 0.0, T));
    tr.worst_final_margin = std::max(tr.worst_final_margin, lhs - rhs);
    if (lhs <= rhs) ++tr.final_bound_holds;
  }
  tr.pass = tr.first_failure < 0 && tr.final_bound_holds == states;
  return tr;
}

}  // namespace hypoctrl::lr
