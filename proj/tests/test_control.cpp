#include "hypoctrl/control.hpp"

#include <chrono>

#include <gtest/gtest.h>

namespace hypoctrl::control {
namespace {

using hermite::HermiteTruncation;
using hermite::RegionSpec;
using hermite::TruncatedOperator;

CVec gaussian_state(const HermiteTruncation& tr, const Vec& center) {
  CVec c = hermite::hermite_coefficients(
      tr, [&](const Vec& x) { return cplx(std::exp(-0.5 * (x - center).squaredNorm())); }, 10.0, 32, 12);
  return c / c.norm();
}

RegionSpec outside_unit_ball(int n) { return RegionSpec::complement_of_ball(Vec::Zero(n), 1.0); }

ControlProblem heat_problem(int N, double T, int nt) {
  const HermiteTruncation tr(1, N);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::build_ou_symbol(phase_space::heat_system(1)), tr);
  return hermite_problem(op, outside_unit_ball(1), T, nt, gaussian_state(tr, Vec::Constant(1, 0.5)), true);
}

ControlProblem kfp_problem(int N, double T, int nt) {
  const HermiteTruncation tr(2, N);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  Vec c(2);
  c << 0.5, 0.0;
  return hermite_problem(op, outside_unit_ball(2), T, nt, gaussian_state(tr, c), true);
}

TEST(Gramian, WholeSpaceCostIsAtMostInverseT) {
  const HermiteTruncation tr(2, 10);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  for (double T : {0.5, 1.0, 2.0}) {
    const ControlProblem cp = hermite_problem(op, RegionSpec::whole_space(2), T, 128, CVec::Zero(tr.size()));
    const GramianReport rep = observability_gramian(cp);
    EXPECT_LE(rep.observability_cost_hat, (1.0 / T) * (1 + 1e-3));
  }
}

TEST(Gramian, PsdAndMinDirectionConsistency) {
  const ControlProblem cp = heat_problem(12, 1.0, 128);
  const GramianReport rep = observability_gramian(cp);
  EXPECT_GT(rep.lambda_min, 0.0);
  EXPECT_LE((rep.G_T - rep.G_T.adjoint()).norm(), 1e-14 * rep.G_T.norm());
  const CVec u = rep.eigenvectors.col(0);
  const double ratio = (rep.E_T.adjoint() * u).squaredNorm() / rep.lambda_min;
  EXPECT_GE(rep.observability_cost_hat * (1 + 1e-6), ratio);
  EXPECT_LE(rep.sampled_cost_hat, rep.observability_cost_hat * (1 + 1e-10));
}

TEST(Gramian, MatchesDirectTrapezoidSum) {
  const ControlProblem cp = heat_problem(8, 1.0, 16);
  const GramianReport rep = observability_gramian(cp);
  CMat W = CMat::Zero(cp.size(), cp.size());
  for (int j = 0; j <= cp.nt; ++j) {
    const CMat E = hermite::assemble_weyl(phase_space::build_ou_symbol(phase_space::heat_system(1)),
                                          HermiteTruncation(1, 8)).propagator(j * cp.dt());
    W += (j == 0 || j == cp.nt ? 0.5 : 1.0) * cp.dt() * E * cp.R * E.adjoint();
  }
  EXPECT_LE((W - rep.G_T).norm(), 1e-12 * W.norm());
}

TEST(Gramian, TimeRefinementIsConverged) {
  const double a = observability_gramian(heat_problem(12, 1.0, 128)).observability_cost_hat;
  const double b = observability_gramian(heat_problem(12, 1.0, 256)).observability_cost_hat;
  EXPECT_LE(std::abs(a - b), 0.01 * b);
}

TEST(Gramian, HeatOnGridPath) {
  const auto sys = phase_space::heat_system(1);
  const std::vector<grid::Axis> axes{grid::Axis::from_box(32, 6.0)};
  const auto f0 = grid::GridFunction::sample(axes, [](const Vec& x) { return cplx(std::exp(-0.5 * (x(0) - 0.5) * (x(0) - 0.5))); });
  const RegionSpec omega = outside_unit_ball(1);
  const GramianReport coarse = observability_gramian(grid_problem(sys, axes, omega, 1.0, 256, f0));
  const GramianReport fine = observability_gramian(grid_problem(sys, axes, omega, 1.0, 1024, f0));
  EXPECT_GT(coarse.lambda_min, 0.0);
  EXPECT_TRUE(std::isfinite(coarse.observability_cost_hat));
  EXPECT_LE(std::abs(coarse.observability_cost_hat - fine.observability_cost_hat),
            0.01 * fine.observability_cost_hat);
}

TEST(Gramian, UnobservableTruncationIsReported) {
  // omega far outside the Hermite box: the Gramian is numerically zero
  const HermiteTruncation tr(1, 8);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::harmonic_symbol(1), tr);
  Vec normal(1);
  normal << 1.0;
  const ControlProblem cp = hermite_problem(op, RegionSpec::half_space(normal, 9.0), 1.0, 32, CVec::Zero(tr.size()));
  try {
    observability_gramian(cp);
    FAIL() << "expected unobservable truncation";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unobservable_truncation);
  }
}

TEST(Hum, ZeroInitialStateGivesZeroControl) {
  ControlProblem cp = heat_problem(10, 1.0, 64);
  cp.f0.setZero();
  const ControlResult res = hum_control(cp, observability_gramian(cp));
  EXPECT_EQ(res.control.norm(), 0.0);
  EXPECT_EQ(res.terminal_residual, 0.0);
}

TEST(Hum, HeatNullControl) {
  const auto start = std::chrono::steady_clock::now();
  const ControlProblem cp = heat_problem(16, 1.0, 256);
  const GramianReport rep = observability_gramian(cp);
  const ControlResult res = hum_control(cp, rep, 1e-8);
  EXPECT_LE(res.terminal_residual, 1e-2);
  EXPECT_LE(res.duality_gap, 0.05);
  EXPECT_LE(res.control_energy, rep.observability_cost_hat * cp.f0.squaredNorm() * 1.05);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 120.0);
}

TEST(Hum, KfpNullControl) {
  const auto start = std::chrono::steady_clock::now();
  const ControlProblem cp = kfp_problem(24, 1.0, 256);
  const GramianReport rep = observability_gramian(cp);
  const ControlResult res = hum_control(cp, rep);
  EXPECT_LE(res.terminal_residual, 5e-2);
  EXPECT_LE(res.duality_gap, 0.05);
  EXPECT_LE(res.control_energy, rep.observability_cost_hat * cp.f0.squaredNorm() * 1.05);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 120.0);
}

TEST(Hum, DiscreteDualityIdentity) {
  const ControlProblem cp = heat_problem(12, 1.0, 128);
  const GramianReport rep = observability_gramian(cp);
  const ControlResult res = hum_control(cp, rep, 1e-6);
  const CVec r = rep.E_T * cp.f0;
  const CMat shifted = rep.G_T + res.eps * CMat::Identity(cp.size(), cp.size());
  const CVec y = shifted.lu().solve(r);
  const double expected = y.dot(rep.G_T * y).real();
  EXPECT_NEAR(res.control_energy_discrete, expected, 1e-8 * expected);
  // on its own grid the defect is exactly the Tikhonov floor eps * phi
  EXPECT_NEAR(res.discrete_terminal_residual, res.eps * res.phi.norm() / cp.f0.norm(), 1e-9);
}

TEST(Hum, ControlVanishesOutsideOmega) {
  const ControlProblem cp = heat_problem(12, 1.0, 64);
  const ControlResult res = hum_control(cp, observability_gramian(cp));
  Mat pts(1, 401);
  for (int i = 0; i < 401; ++i) pts(0, i) = -4.0 + 0.02 * i;
  for (int j : {0, 10, 64}) {
    const CMat u = control_on_points(cp, res, j, pts);
    double inside = 0.0;
    for (int i = 0; i < 401; ++i) {
      if (std::abs(pts(0, i)) <= 1.0)
        EXPECT_EQ(u(i, 0), cplx(0.0));
      else
        inside += std::abs(u(i, 0));
    }
    EXPECT_GT(inside, 0.0);
  }
}

TEST(Hum, GridControlVanishesOutsideOmega) {
  const auto sys = phase_space::heat_system(1);
  const std::vector<grid::Axis> axes{grid::Axis::from_box(32, 6.0)};
  const auto f0 = grid::GridFunction::sample(axes, [](const Vec& x) { return cplx(std::exp(-0.5 * x(0) * x(0))); });
  const ControlProblem cp = grid_problem(sys, axes, outside_unit_ball(1), 1.0, 64, f0);
  const ControlResult res = hum_control(cp, observability_gramian(cp));
  const Mat pts = grid_nodes(cp);
  const CMat u = control_on_points(cp, res, 5, pts);
  for (int i = 0; i < cp.size(); ++i)
    if (!cp.mask[i]) EXPECT_EQ(u(i, 0), cplx(0.0));
}

TEST(Verify, HarmonicCostNonincreasingInT) {
  const HermiteTruncation tr(1, 16);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::harmonic_symbol(1), tr);
  double prev = INFINITY;
  for (double T : {0.5, 1.0, 2.0}) {
    const ControlProblem cp = hermite_problem(op, outside_unit_ball(1), T, 256, CVec::Zero(tr.size()));
    const double c = observability_gramian(cp).observability_cost_hat;
    EXPECT_LE(c, prev * (1 + 1e-9));
    prev = c;
  }
}

TEST(Verify, KfpLogCostAffineInInverseCube) {
  std::vector<double> x, y;
  for (double T : {0.2, 0.4, 0.8}) {
    const ControlProblem cp = kfp_problem(16, T, 256);
    x.push_back(1.0 / (T * T * T));
    y.push_back(std::log(observability_gramian(cp).observability_cost_hat));
  }
  EXPECT_GE(linalg::fit_line(x, y).correlation, 0.9);
}

TEST(Verify, SyntheticRunsRespectTheoryBound) {
  for (const lr::LRParams& p : {lr::LRParams{1, 1, 0.5, 1, 1, 1}, lr::LRParams{0.5, 0.8, 0.5, 1.0, 3.0, 0.5}}) {
    const auto model = lr::DiagonalSemigroupModel::hypothesis_exact(p, 48);
    ASSERT_LE(model.hypothesis_violation(p), 1e-12);
    const lr::CostReport cost = lr::observability_cost(p);
    const double T = 0.5 * cost.T_tilde0;
    ASSERT_TRUE(lr::telescoping_trace(p, T, model).pass);
    const ControlProblem cp = synthetic_problem(model, T, 256, CVec::Zero(48));
    const ObservabilityComparison cmp = verify_observability(observability_gramian(cp), cost);
    EXPECT_TRUE(cmp.holds) << cmp.log_cost_hat << " vs " << cmp.log_cost_theory;
  }
}

TEST(Verify, MeasuredConstantsAreRecordedNotThrown) {
  const HermiteTruncation tr(1, 16);
  const TruncatedOperator op = hermite::assemble_weyl(phase_space::harmonic_symbol(1), tr);
  const ControlProblem cp = hermite_problem(op, outside_unit_ball(1), 1.0, 128, CVec::Zero(tr.size()));
  const GramianReport rep = observability_gramian(cp);
  lr::CostReport fake = lr::observability_cost(lr::LRParams{1e-3, 1, 0.5, 1, 1, 1});
  fake.log_C = 0.0;
  fake.exponent = 1.0;
  const ObservabilityComparison cmp = verify_observability(rep, fake);
  EXPECT_EQ(cmp.holds, cmp.log_cost_hat <= cmp.log_cost_theory);
  EXPECT_NEAR(cmp.log_cost_theory, 1.0, 1e-12);
}

}  // namespace
}  // namespace hypoctrl::control
