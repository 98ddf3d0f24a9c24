#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hypoctrl/core.hpp"
#include "hypoctrl/grid.hpp"
#include "hypoctrl/hermite.hpp"
#include "hypoctrl/linalg.hpp"
#include "hypoctrl/lr_cost.hpp"
#include "hypoctrl/ou_semigroup.hpp"

// Null control of f' + A f = 1_omega u on a finite-dimensional rendering of
// the state space. States are coefficient vectors whose Euclidean norm is the
// L^2 norm: Hermite coefficients, or sqrt(cell volume) * grid values.
namespace hypoctrl::control {

struct ControlProblem {
  std::string backend;  // "hermite" or "grid"
  CMat R;               // omega restriction form, Hermitian PSD
  std::function<CMat(double)> propagator;  // e^{-tA}
  double T = 1.0;
  int nt = 256;
  CVec f0;

  std::shared_ptr<const hermite::TruncatedOperator> op;
  hermite::RegionSpec region;
  std::vector<grid::Axis> axes;
  std::vector<unsigned char> mask;  // grid backend: 1 inside omega

  int size() const { return static_cast<int>(R.rows()); }
  double dt() const { return T / nt; }
  void validate() const {
    require(T > 0, "control horizon must be positive");
    require(nt >= 16 && (nt & (nt - 1)) == 0, "nt must be a power of two >= 16");
    require(R.rows() == R.cols() && f0.size() == R.rows(), "control problem dimensions disagree");
  }
};

inline ControlProblem hermite_problem(const hermite::TruncatedOperator& op, const hermite::RegionSpec& region,
                                      double T, int nt, const CVec& f0, bool claim_thickness = false,
                                      const hermite::GramOptions& gopt = {}) {
  if (claim_thickness)
    require(region.thickness().has_value(), "region " + region.name() + " has no thickness witness");
  ControlProblem cp;
  cp.backend = "hermite";
  cp.op = std::make_shared<const hermite::TruncatedOperator>(op);
  cp.region = region;
  cp.R = hermite::omega_gram(op.trunc(), region, gopt).G.cast<cplx>();
  auto held = cp.op;
  cp.propagator = [held](double t) { return held->propagator(t); };
  cp.T = T;
  cp.nt = nt;
  cp.f0 = f0;
  cp.validate();
  return cp;
}

// Grid backend: e^{tP} of an OU system through the Fourier representation,
// assembled column by column on the grid.
inline ControlProblem grid_problem(const phase_space::OUSystem& sys, const std::vector<grid::Axis>& axes,
                                   const hermite::RegionSpec& region, double T, int nt,
                                   const grid::GridFunction& f0) {
  require(static_cast<int>(axes.size()) == sys.n() && region.n == sys.n(), "grid, region and system dimensions differ");
  require(f0.axes() == axes, "initial state lives on a different grid");
  ControlProblem cp;
  cp.backend = "grid";
  cp.region = region;
  cp.axes = axes;
  const grid::GridFunction proto(axes);
  const int D = static_cast<int>(proto.size());
  const double scale = std::sqrt(proto.cell_volume());
  cp.mask.resize(D);
  cp.R = CMat::Zero(D, D);
  cp.f0.resize(D);
  Vec x;
  for (int i = 0; i < D; ++i) {
    proto.coords(i, x);
    cp.mask[i] = region.contains(x) ? 1 : 0;
    cp.R(i, i) = cp.mask[i];
    cp.f0(i) = scale * f0[i];
  }
  cp.propagator = [sys, axes, D](double t) {
    CMat E(D, D);
    ou::FourierOptions fo;
    fo.tail_tolerance = 1.0;  // unit columns are not band-limited; silence the check
    parallel_for(0, static_cast<std::size_t>(D), [&](std::size_t j) {
      grid::GridFunction e(axes);
      e[j] = 1.0;
      const grid::GridFunction out = ou::fourier_apply(sys, e, t, false, fo);
      for (int i = 0; i < D; ++i) E(i, static_cast<int>(j)) = out[i];
    });
    return E;
  };
  cp.T = T;
  cp.nt = nt;
  cp.validate();
  return cp;
}

// Diagonal model from the telescoping engine as a control problem:
// A = diag(lambda_j), R = diag(r_j).
inline ControlProblem synthetic_problem(const lr::DiagonalSemigroupModel& model, double T, int nt, const CVec& f0) {
  ControlProblem cp;
  cp.backend = "synthetic";
  cp.R = model.log_r.array().exp().matrix().cast<cplx>().asDiagonal();
  const Vec lambda = model.lambda;
  cp.propagator = [lambda](double t) -> CMat {
    return (-lambda.array() * t).exp().matrix().cast<cplx>().asDiagonal();
  };
  cp.T = T;
  cp.nt = nt;
  cp.f0 = f0;
  cp.validate();
  return cp;
}

struct GramianReport {
  CMat G_T;
  CMat E_T;  // e^{-TA}
  Vec eigenvalues;
  CMat eigenvectors;
  double lambda_min = 0.0;
  // sup_g |e^{-T A*} g|^2 / <G_T g, g>
  double observability_cost_hat = 0.0;
  // the same ratio maximised over random g only
  double sampled_cost_hat = 0.0;
  double T = 0.0;
  int nt = 0;
};

// Composite trapezoid for int_0^T e^{-sA} R e^{-sA*} ds. With nt = 2^p nodes
// the sum satisfies W(2t) = W(t) + E(t) W(t) E(t)^*, so p doublings suffice.
inline GramianReport observability_gramian(const ControlProblem& cp, std::uint64_t seed = 1, int samples = 64) {
  cp.validate();
  const double dt = cp.dt();
  CMat E = cp.propagator(dt);
  CMat W = 0.5 * dt * (cp.R + E * cp.R * E.adjoint());
  for (int len = 1; len < cp.nt; len *= 2) {
    W = W + E * W * E.adjoint();
    E = E * E;
  }
  W = 0.5 * (W + W.adjoint()).eval();
  GramianReport rep;
  rep.T = cp.T;
  rep.nt = cp.nt;
  rep.E_T = E;
  Eigen::SelfAdjointEigenSolver<CMat> es(W);
  rep.eigenvalues = es.eigenvalues();
  rep.eigenvectors = es.eigenvectors();
  rep.lambda_min = rep.eigenvalues(0);
  rep.G_T = std::move(W);
  if (rep.lambda_min < 1e-13)
    throw Error(ErrorKind::unobservable_truncation,
                "observability Gramian lambda_min = " + std::to_string(rep.lambda_min));
  const Vec inv_sqrt = rep.eigenvalues.array().rsqrt();
  const CMat M = inv_sqrt.asDiagonal() * rep.eigenvectors.adjoint() * rep.E_T;
  Eigen::SelfAdjointEigenSolver<CMat> mm(M * M.adjoint(), Eigen::EigenvaluesOnly);
  rep.observability_cost_hat = mm.eigenvalues().maxCoeff();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int s = 0; s < samples; ++s) {
    CVec g(cp.size());
    for (int i = 0; i < cp.size(); ++i) g(i) = cplx(nd(rng), nd(rng));
    const double num = (rep.E_T.adjoint() * g).squaredNorm();
    const double den = g.dot(rep.G_T * g).real();
    rep.sampled_cost_hat = std::max(rep.sampled_cost_hat, num / den);
  }
  return rep;
}

struct ControlResult {
  double eps = 0.0;
  CVec phi;          // dual variable, (G_T + eps) phi = e^{-TA} f0
  CMat control;      // v(t_j) on the coarse grid, columns j = 0..nt; u = 1_omega v
  double terminal_residual = 0.0;           // refined forward simulation
  double discrete_terminal_residual = 0.0;  // same time grid as the Gramian
  double control_energy = 0.0;              // refined trapezoid
  double control_energy_discrete = 0.0;     // same grid as the Gramian
  double dual_energy = 0.0;                 // <phi, G_T phi>
  double duality_gap = 0.0;                 // |control_energy - dual_energy| / dual_energy
  double solve_residual = 0.0;
  int refine = 1;
  // coarse grid time series
  std::vector<double> times;
  std::vector<double> state_norms;
  std::vector<double> control_norms;  // |1_omega v(t)|
};

namespace detail {
struct Simulation {
  CVec final_state;
  double energy = 0.0;
  CMat control;
  std::vector<double> state_norms;
  std::vector<double> control_norms;
};

// f_{i+1} = E f_i + (h/2)(E R v_i + R v_{i+1}), v_i = -e^{-(T - t_i)A*} phi
inline Simulation simulate(const ControlProblem& cp, const CVec& phi, int steps) {
  const double h = cp.T / steps;
  const CMat E = cp.propagator(h);
  const CMat Ea = E.adjoint();
  CMat v(cp.size(), steps + 1);
  v.col(steps) = -phi;
  for (int i = steps; i-- > 0;) v.col(i) = Ea * v.col(i + 1);
  Simulation s;
  CVec f = cp.f0;
  CVec Rv_prev = cp.R * v.col(0);
  s.energy = 0.5 * v.col(0).dot(Rv_prev).real();
  s.state_norms.push_back(f.norm());
  s.control_norms.push_back(std::sqrt(std::max(0.0, v.col(0).dot(Rv_prev).real())));
  for (int i = 0; i < steps; ++i) {
    const CVec Rv_next = cp.R * v.col(i + 1);
    f = E * f + 0.5 * h * (E * Rv_prev + Rv_next);
    const double vr = v.col(i + 1).dot(Rv_next).real();
    s.energy += (i + 1 == steps ? 0.5 : 1.0) * vr;
    s.state_norms.push_back(f.norm());
    s.control_norms.push_back(std::sqrt(std::max(0.0, vr)));
    Rv_prev = Rv_next;
  }
  s.energy *= h;
  s.final_state = std::move(f);
  s.control = std::move(v);
  return s;
}
}  // namespace detail

// Minimal-norm (HUM) control with Tikhonov floor eps; eps <= 0 picks
// 1e-8 trace(G_T) / D. The forward simulation is repeated on a grid refined
// by `refine` with the exact adjoint flow, so the reported residual includes
// the time-discretisation error.
inline ControlResult hum_control(const ControlProblem& cp, const GramianReport& rep, double eps = -1.0,
                                 int refine = 4) {
  cp.validate();
  require(rep.nt == cp.nt && rep.T == cp.T, "Gramian was computed for a different time grid");
  require(refine >= 1, "refinement factor must be >= 1");
  const int D = cp.size();
  ControlResult res;
  res.refine = refine;
  res.eps = eps > 0 ? eps : 1e-8 * rep.G_T.trace().real() / D;
  const CVec r = rep.E_T * cp.f0;
  const double f0n = cp.f0.norm();
  for (int j = 0; j <= cp.nt; ++j) res.times.push_back(j * cp.dt());
  if (f0n == 0.0) {
    res.phi = CVec::Zero(D);
    res.control = CMat::Zero(D, cp.nt + 1);
    res.state_norms.assign(cp.nt + 1, 0.0);
    res.control_norms.assign(cp.nt + 1, 0.0);
    return res;
  }
  const Vec shifted = rep.eigenvalues.array() + res.eps;
  res.phi = rep.eigenvectors * (shifted.cwiseInverse().cast<cplx>().asDiagonal() * (rep.eigenvectors.adjoint() * r));
  res.solve_residual = (rep.G_T * res.phi + res.eps * res.phi - r).norm() / r.norm();
  if (res.solve_residual > 1e-8)
    throw Error(ErrorKind::ill_conditioned, "HUM solve residual " + std::to_string(res.solve_residual));
  res.dual_energy = res.phi.dot(rep.G_T * res.phi).real();

  const detail::Simulation coarse = detail::simulate(cp, res.phi, cp.nt);
  res.control = coarse.control;
  res.state_norms = coarse.state_norms;
  res.control_norms = coarse.control_norms;
  res.discrete_terminal_residual = coarse.final_state.norm() / f0n;
  res.control_energy_discrete = coarse.energy;
  if (refine == 1) {
    res.terminal_residual = res.discrete_terminal_residual;
    res.control_energy = res.control_energy_discrete;
  } else {
    const detail::Simulation fine = detail::simulate(cp, res.phi, cp.nt * refine);
    res.terminal_residual = fine.final_state.norm() / f0n;
    res.control_energy = fine.energy;
  }
  res.duality_gap = res.dual_energy > 0 ? std::abs(res.control_energy - res.dual_energy) / res.dual_energy : 0.0;
  return res;
}

// u(t_j, x) = 1_omega(x) v(t_j, x) at the given points (columns); entries
// outside omega are exact zeros.
inline CMat control_on_points(const ControlProblem& cp, const ControlResult& res, int j, const Mat& points) {
  require(j >= 0 && j < res.control.cols(), "time index outside the control grid");
  CMat out = CMat::Zero(points.cols(), 1);
  CVec vals;
  if (cp.backend == "hermite") {
    vals = hermite::hermite_synthesize(cp.op->trunc(), res.control.col(j), points);
  } else {
    require(points.cols() == cp.size(), "grid control is evaluated on its own nodes");
    const double scale = 1.0 / std::sqrt(grid::GridFunction(cp.axes).cell_volume());
    vals = scale * res.control.col(j);
  }
  for (Eigen::Index p = 0; p < points.cols(); ++p)
    if (cp.region.contains(points.col(p))) out(p, 0) = vals(p);
  return out;
}

// Node coordinates of the grid backend, one column per node.
inline Mat grid_nodes(const ControlProblem& cp) {
  const grid::GridFunction proto(cp.axes);
  Mat pts(proto.dim(), proto.size());
  Vec x;
  for (std::size_t i = 0; i < proto.size(); ++i) {
    proto.coords(i, x);
    pts.col(static_cast<Eigen::Index>(i)) = x;
  }
  return pts;
}

struct ObservabilityComparison {
  double T = 0.0;
  double log_cost_hat = 0.0;
  double log_cost_theory = 0.0;
  bool holds = false;
  std::string note;
};

// Theory constants are upper bounds: a failure is data, not an error.
inline ObservabilityComparison verify_observability(const GramianReport& rep, const lr::CostReport& cost) {
  ObservabilityComparison c;
  c.T = rep.T;
  c.log_cost_hat = std::log(rep.observability_cost_hat);
  c.log_cost_theory = cost.log_cost(rep.T);
  c.holds = c.log_cost_hat <= c.log_cost_theory;
  if (!c.holds) c.note = "measured cost exceeds the constructed bound";
  return c;
}

// LR constants from measured profiles: c1, a from the spectral fit
// c_hat(k) ~ c1 k^a, b = 1, and c2, m from delta_hat(t) ~ c t^m with
// c2 = min(c, 1 / C0_hat), t0 = t0_hat. Empty when the fit is inadmissible.
inline std::optional<lr::LRParams> measured_lr_params(const hermite::SpectralProfile& sp,
                                                      const hermite::GelfandShilovProfile& gs) {
  std::vector<double> lt, ld;
  for (const auto& row : gs.rows)
    if (row.delta_hat > 0) {
      lt.push_back(std::log(row.t));
      ld.push_back(std::log(row.delta_hat));
    }
  if (lt.size() < 2 || sp.fitted_points < 2) return std::nullopt;
  const linalg::LineFit fit = linalg::fit_line(lt, ld);
  lr::LRParams p;
  p.c1 = sp.coefficient;
  p.a = sp.exponent;
  p.b = 1.0;
  p.m = fit.slope;
  p.c2 = std::min(std::exp(fit.intercept), gs.C0_hat > 0 ? 1.0 / gs.C0_hat : 1.0);
  p.t0 = gs.t0_hat > 0 ? gs.t0_hat : 1.0;
  if (!(p.c1 > 0 && p.c2 > 0 && p.a > 0 && p.a < p.b && p.m > 0 && p.t0 > 0)) return std::nullopt;
  return p;
}

}  // namespace hypoctrl::control
