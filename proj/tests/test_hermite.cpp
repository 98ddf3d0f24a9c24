#include "hypoctrl/hermite.hpp"

#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "hypoctrl/ou_semigroup.hpp"
#include "test_util.hpp"

namespace hypoctrl::hermite {
namespace {

using hypoctrl::testing::random_cvector;
using phase_space::SymbolBuilder;

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth = 50) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6 * (flo + 4 * flm + fmid);
        const double right = (hi - mid) / 6 * (fmid + 4 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15 * tol)
          return left + right + (left + right - whole) / 15;
        return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
      };
  return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), depth);
}

double psi1d(int k, double x) {
  std::vector<double> v(k + 1);
  hermite_1d(x, k, v.data());
  return v[k];
}

TEST(HermiteTruncation, GradedLexBijection) {
  const HermiteTruncation tr(3, 7);
  EXPECT_EQ(tr.size(), 120);  // C(10, 3)
  for (int i = 0; i < tr.size(); ++i) {
    EXPECT_EQ(tr.index_of(tr.alpha(i)), i);
    if (i > 0) EXPECT_LE(tr.degree(i - 1), tr.degree(i));
  }
  for (int k = 0; k <= 7; ++k)
    for (int i = tr.shell_begin(k); i < tr.shell_begin(k + 1); ++i) EXPECT_EQ(tr.degree(i), k);
  EXPECT_EQ(tr.index_of({8, 0, 0}), -1);
}

TEST(HermiteEval, GroundStateAtOrigin) {
  for (int n = 1; n <= 3; ++n) {
    const HermiteTruncation tr(n, 4);
    const Mat v = hermite_eval(tr, Mat::Zero(n, 1));
    EXPECT_NEAR(v(0, 0), std::pow(std::numbers::pi, -0.25 * n), 1e-15);
  }
}

TEST(HermiteEval, OrthonormalUnderQuadrature) {
  const int N = 40;
  const HermiteTruncation tr(1, N);
  // composite Gauss-Legendre over the essential support
  const double L = hermite_box(N) + 4.0;
  const linalg::QuadratureRule r = linalg::composite_gauss_legendre(-L, L, 80, 16);
  const Mat psi = hermite_eval(tr, r.nodes.transpose());
  const Mat g = psi.transpose() * r.weights.asDiagonal() * psi;
  EXPECT_LT((g - Mat::Identity(N + 1, N + 1)).cwiseAbs().maxCoeff(), 1e-10);
  // Gauss-Hermite with Christoffel weights
  const linalg::QuadratureRule gh = gauss_hermite_scaled(N + 1);
  const Mat p2 = hermite_eval(tr, gh.nodes.transpose());
  const Mat g2 = p2.transpose() * gh.weights.asDiagonal() * p2;
  EXPECT_LT((g2 - Mat::Identity(N + 1, N + 1)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(HermiteEval, HighDegreeFarFromOrigin) {
  // psi_60(40): the Gaussian factor alone underflows the naive recurrence
  std::vector<double> v(61);
  hermite_1d(40.0, 60, v.data());
  for (double x : v) EXPECT_TRUE(std::isfinite(x));
  EXPECT_GT(v[60], 0.0);
  // H_n(x) = (2x)^n sum_m (-1)^m n! / (m! (n-2m)!) (2x)^{-2m}, summed term by term
  double series = 0.0, term = 1.0;
  for (int m = 0; 2 * m <= 60; ++m) {
    series += term;
    term *= -static_cast<double>((60 - 2 * m) * (59 - 2 * m)) / ((m + 1) * 80.0 * 80.0);
  }
  const double expected_log = 60 * std::log(80.0) + std::log(series) -
                              0.5 * (60 * std::log(2.0) + std::lgamma(61.0) + 0.5 * std::log(std::numbers::pi)) -
                              800.0;
  EXPECT_NEAR(std::log(v[60]), expected_log, 1e-10);
}

TEST(HermiteEval, HarmonicEigenrelationByFiniteDifferences) {
  const HermiteTruncation tr(2, 6);
  const double h = 1e-2;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x(2);
    x << u(rng), u(rng);
    Mat pts(2, 9);
    pts.col(0) = x;
    for (int d = 0; d < 2; ++d) {
      for (int s = 1; s <= 2; ++s) {
        Vec e = Vec::Zero(2);
        e(d) = s * h;
        pts.col(1 + 4 * d + 2 * (s - 1)) = x + e;
        pts.col(2 + 4 * d + 2 * (s - 1)) = x - e;
      }
    }
    const Mat v = hermite_eval(tr, pts);
    for (int i = 0; i < tr.size(); ++i) {
      double lap = 0.0;
      for (int d = 0; d < 2; ++d) {
        const double fp1 = v(1 + 4 * d, i), fm1 = v(2 + 4 * d, i);
        const double fp2 = v(3 + 4 * d, i), fm2 = v(4 + 4 * d, i);
        lap += (-fp2 + 16 * fp1 - 30 * v(0, i) + 16 * fm1 - fm2) / (12 * h * h);
      }
      const double lhs = -lap + x.squaredNorm() * v(0, i);
      EXPECT_NEAR(lhs, (2.0 * tr.degree(i) + 2) * v(0, i), 1e-6);
    }
  }
}

TEST(AssembleWeyl, HarmonicOscillatorIsDiagonal) {
  for (int n = 1; n <= 3; ++n) {
    const HermiteTruncation tr(n, 8);
    const TruncatedOperator op = assemble_weyl(phase_space::harmonic_symbol(n), tr);
    CMat expected = CMat::Zero(tr.size(), tr.size());
    for (int i = 0; i < tr.size(); ++i) expected(i, i) = 2.0 * tr.degree(i) + n;
    EXPECT_EQ((op.A() - expected).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(AssembleWeyl, XXiMatchesQuadratureOracle) {
  // (xD + Dx)/2 psi = -i (x psi' + psi/2), psi_k' = sqrt(k/2) psi_{k-1} - sqrt((k+1)/2) psi_{k+1}
  const int N = 12;
  const HermiteTruncation tr(1, N);
  SymbolBuilder s(1);
  s.add(s.x(0), s.xi(0), 1.0);
  const TruncatedOperator op = assemble_weyl(s.build(), tr);
  const linalg::QuadratureRule r = linalg::composite_gauss_legendre(-14, 14, 40, 16);
  for (int a = 0; a <= N; ++a) {
    for (int b = 0; b <= N; ++b) {
      cplx acc = 0.0;
      for (Eigen::Index i = 0; i < r.nodes.size(); ++i) {
        const double x = r.nodes(i);
        const double dpsi = (b > 0 ? std::sqrt(b / 2.0) * psi1d(b - 1, x) : 0.0) -
                            std::sqrt((b + 1) / 2.0) * psi1d(b + 1, x);
        acc += r.weights(i) * psi1d(a, x) * cplx(0, -1) * (x * dpsi + 0.5 * psi1d(b, x));
      }
      EXPECT_LT(std::abs(op.A()(a, b) - acc), 1e-9) << a << "," << b;
    }
  }
  // couples degrees differing by 2 only
  for (int a = 0; a <= N; ++a)
    for (int b = 0; b <= N; ++b)
      if (std::abs(a - b) != 2) EXPECT_EQ(op.A()(a, b), cplx(0.0));
}

TEST(AssembleWeyl, KfpCompressionIsAccretive) {
  const HermiteTruncation tr(2, 30);
  const TruncatedOperator op = assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  EXPECT_TRUE(op.accretive_flag());
  std::mt19937_64 rng(17);
  const double scale = op.norm_bound();
  for (int k = 0; k < 50; ++k) {
    const CVec v = random_cvector(rng, tr.size());
    EXPECT_GE((v.adjoint() * op.A() * v)(0, 0).real(), -1e-10 * scale * v.squaredNorm());
  }
}

TEST(AssembleWeyl, LinearInTheSymbol) {
  const HermiteTruncation tr(2, 10);
  const QuadraticSymbol q1 = phase_space::kfp_symbol(0.7);
  const QuadraticSymbol q2 = phase_space::catalogue_symbol(2, 2);
  const CMat lhs = assemble_weyl(q1 + q2, tr).A();
  const CMat rhs = assemble_weyl(q1, tr).A() + assemble_weyl(q2, tr).A();
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Propagate, HarmonicDecayIsExact) {
  const HermiteTruncation tr(2, 10);
  const TruncatedOperator op = assemble_weyl(phase_space::harmonic_symbol(2), tr);
  std::mt19937_64 rng(2);
  const CVec v = random_cvector(rng, tr.size());
  const double t = 0.37;
  const CVec w = op.propagate(v, t);
  for (int i = 0; i < tr.size(); ++i)
    EXPECT_LT(std::abs(w(i) - std::exp(-(2.0 * tr.degree(i) + 2) * t) * v(i)), 1e-12);
  EXPECT_LT((op.propagate(v, 0.0) - v).norm(), 0.0 + 1e-300);
}

TEST(Propagate, KfpMatchesRungeKutta) {
  const HermiteTruncation tr(2, 30);
  const TruncatedOperator op = assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  std::mt19937_64 rng(8);
  CVec v = random_cvector(rng, tr.size());
  v.normalize();
  const double t = 0.5;
  const int steps = 2000;
  const double dt = t / steps;
  const CMat& a = op.A();
  CVec y = v;
  for (int s = 0; s < steps; ++s) {
    const CVec k1 = -(a * y);
    const CVec k2 = -(a * (y + 0.5 * dt * k1));
    const CVec k3 = -(a * (y + 0.5 * dt * k2));
    const CVec k4 = -(a * (y + dt * k3));
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  EXPECT_LT((op.propagate(v, t) - y).norm(), 1e-7);
}

TEST(Propagate, ImplicitSteppingMatchesExponential) {
  const HermiteTruncation tr(2, 12);
  const TruncatedOperator op = assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  std::mt19937_64 rng(9);
  const CVec v = random_cvector(rng, tr.size());
  EXPECT_LT((op.propagate_implicit(v, 0.3) - op.propagate(v, 0.3)).norm(), 1e-8 * v.norm());
}

TEST(Propagate, KfpIsContraction) {
  const HermiteTruncation tr(2, 30);
  const TruncatedOperator op = assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  for (double t : {0.01, 0.1, 1.0}) {
    const CMat& e = op.propagator(t);
    Eigen::SelfAdjointEigenSolver<CMat> es(e.adjoint() * e, Eigen::EigenvaluesOnly);
    EXPECT_LE(std::sqrt(es.eigenvalues().maxCoeff()), 1.0 + 1e-10) << "t=" << t;
  }
}

TEST(ProjectEnergy, ProjectionIdentities) {
  const HermiteTruncation tr(2, 9);
  std::mt19937_64 rng(4);
  const CVec v = random_cvector(rng, tr.size());
  EXPECT_EQ(project_energy(tr, v, 9, EnergyMode::up_to_level), v);
  double parseval = 0.0;
  for (int k = 0; k <= 9; ++k) {
    const CVec pk = project_energy(tr, v, k, EnergyMode::at_level);
    parseval += pk.squaredNorm();
    EXPECT_EQ(project_energy(tr, pk, k, EnergyMode::at_level), pk);
    EXPECT_LE(pk.norm(), v.norm());
    for (int j = 0; j <= 9; ++j)
      if (j != k) EXPECT_EQ(project_energy(tr, pk, j, EnergyMode::at_level).norm(), 0.0);
  }
  EXPECT_NEAR(parseval, v.squaredNorm(), 1e-12 * v.squaredNorm());
}

TEST(OmegaGram, WholeSpaceIsIdentity) {
  const HermiteTruncation tr(2, 10);
  const GramMatrix g = omega_gram(tr, RegionSpec::whole_space(2));
  EXPECT_LT((g.G - Mat::Identity(tr.size(), tr.size())).cwiseAbs().maxCoeff(), 1e-8);
  // complement of a degenerate ball is also the whole space
  const GramMatrix g0 = omega_gram(tr, RegionSpec::complement_of_ball(Vec::Zero(2), 0.0));
  EXPECT_LT((g0.G - Mat::Identity(tr.size(), tr.size())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(OmegaGram, HalfLineMatchesAdaptiveQuadrature) {
  const int N = 10;
  const HermiteTruncation tr(1, N);
  Vec normal(1);
  normal << 1.0;
  const GramMatrix g = omega_gram(tr, RegionSpec::half_space(normal, 0.0));
  EXPECT_NEAR(g.G(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(g.G(0, 1), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-10);
  for (int a = 0; a <= N; a += 3) {
    for (int b = a; b <= N; b += 2) {
      const double oracle =
          adaptive_simpson([&](double x) { return psi1d(a, x) * psi1d(b, x); }, 0.0, 20.0, 1e-13);
      EXPECT_NEAR(g.G(a, b), oracle, 1e-9) << a << "," << b;
    }
  }
}

TEST(OmegaGram, BoundedBetweenZeroAndIdentity) {
  const HermiteTruncation tr(2, 12);
  Vec c(2);
  c << 0.3, -0.2;
  Vec nrm(2);
  nrm << 1.0, 2.0;
  const std::vector<RegionSpec> regions = {RegionSpec::complement_of_ball(c, 1.2),
                                           RegionSpec::half_space(nrm, 0.4),
                                           RegionSpec::ball_lattice(2, 2.0, 0.6)};
  for (const RegionSpec& reg : regions) {
    const GramMatrix g = omega_gram(tr, reg);
    EXPECT_LT((g.G - g.G.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(g.G);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8) << reg.name();
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-8) << reg.name();
  }
}

TEST(OmegaGram, ComplementaryRegionsSumToIdentity) {
  const HermiteTruncation tr(2, 12);
  const Mat id = Mat::Identity(tr.size(), tr.size());
  Vec nrm(2);
  nrm << 1.0, 1.0;
  const Mat g1 = omega_gram(tr, RegionSpec::half_space(nrm, 0.3)).G;
  const Mat g2 = omega_gram(tr, RegionSpec::half_space(-nrm, -0.3)).G;
  EXPECT_LT((g1 + g2 - id).cwiseAbs().maxCoeff(), 1e-8);
  Vec c(2);
  c << -0.4, 0.5;
  const Mat out = omega_gram(tr, RegionSpec::complement_of_ball(c, 1.5)).G;
  const Mat in = omega_gram(tr, RegionSpec::union_of_balls({{c, 1.5}})).G;
  EXPECT_LT((out + in - id).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OmegaGram, BallAgreesWithMaskedGrid) {
  // brute-force midpoint sum of psi_a psi_b over the indicator, n = 2
  const HermiteTruncation tr(2, 4);
  Vec c(2);
  c << 0.2, 0.1;
  const RegionSpec reg = RegionSpec::union_of_balls({{c, 1.0}});
  const Mat g = omega_gram(tr, reg).G;
  const int m = 1200;
  const double h = 2.4 / m;
  Mat pts(2, 0);
  std::vector<Vec> inside;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      Vec x(2);
      x << c(0) - 1.2 + (i + 0.5) * h, c(1) - 1.2 + (j + 0.5) * h;
      if (reg.contains(x)) inside.push_back(x);
    }
  }
  pts.resize(2, static_cast<Eigen::Index>(inside.size()));
  for (std::size_t k = 0; k < inside.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = inside[k];
  const Mat psi = hermite_eval(tr, pts);
  const Mat brute = h * h * psi.transpose() * psi;
  EXPECT_LT((g - brute).cwiseAbs().maxCoeff(), 2e-4);
}

TEST(RegionSpec, ThicknessWitness) {
  EXPECT_TRUE(RegionSpec::complement_of_ball(Vec::Zero(2), 1.0).thickness().has_value());
  EXPECT_TRUE(RegionSpec::ball_lattice(2, 2.0, 0.5).thickness().has_value());
  Vec nrm(1);
  nrm << 1.0;
  EXPECT_FALSE(RegionSpec::half_space(nrm, 0.0).thickness().has_value());
  // witness check on sample points for the complement of a ball
  const RegionSpec reg = RegionSpec::complement_of_ball(Vec::Zero(2), 1.0);
  const auto [delta, r] = *reg.thickness();
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    Vec y(2);
    y << nd(rng), nd(rng);
    const Vec dir = y.norm() > 0 ? Vec(y.normalized()) : Vec(Vec::Unit(2, 0));
    const Vec yp = y.norm() >= 1.0 + r ? y : Vec((1.0 + r + 1e-9) * dir);
    EXPECT_LE((y - yp).norm(), delta);
    EXPECT_GE(yp.norm() - r, 1.0 - 1e-12);
  }
}

TEST(SpectralProfile, WholeSpaceIsTrivial) {
  const HermiteTruncation tr(1, 20);
  const GramMatrix g = omega_gram(tr, RegionSpec::whole_space(1));
  const SpectralProfile p = spectral_constant_profile(tr, g, {0, 5, 10, 20});
  for (const auto& e : p.entries) {
    EXPECT_NEAR(e.lambda_min, 1.0, 1e-12);
    EXPECT_NEAR(e.c_hat, 0.0, 1e-12);
  }
}

TEST(SpectralProfile, SqrtKGrowthOutsideUnitInterval) {
  const HermiteTruncation tr(1, 40);
  const GramMatrix g = omega_gram(tr, RegionSpec::complement_of_ball(Vec::Zero(1), 1.0));
  std::vector<int> ks;
  for (int k = 4; k <= 40; ++k) ks.push_back(k);
  const SpectralProfile p = spectral_constant_profile(tr, g, ks);
  EXPECT_NEAR(p.exponent, 0.5, 0.15);
  for (std::size_t i = 1; i < p.entries.size(); ++i)
    EXPECT_LE(p.entries[i].lambda_min, p.entries[i - 1].lambda_min + 1e-14);

  Vec a(1), b(1);
  a << -1.5;
  b << 1.5;
  const GramMatrix gb = omega_gram(tr, RegionSpec::union_of_balls({{a, 0.5}, {b, 0.5}}));
  const SpectralProfile pb = spectral_constant_profile(tr, gb, ks);
  EXPECT_GT(pb.exponent, p.exponent);
}

TEST(GelfandShilov, HarmonicRateIsExactlyT) {
  const HermiteTruncation tr(1, 20);
  const TruncatedOperator op = assemble_weyl(phase_space::harmonic_symbol(1), tr);
  GelfandShilovOptions opt;
  opt.c0_grid = {1.0};
  const GelfandShilovProfile p = gelfand_shilov_profile(op, {0.1, 0.2, 0.4}, 0, opt);
  for (const auto& row : p.rows) {
    // bisection resolution is 2^-25 on [0, 1]
    EXPECT_GE(row.mu_by_c0[0], row.t - 1e-7);
    EXPECT_LE(row.mu_by_c0[0], row.t + 1e-7);
    EXPECT_NEAR(row.mu, row.t, 1e-9);
  }
  EXPECT_NEAR(p.exponent, 1.0, 1e-6);
}

TEST(GelfandShilov, KfpExponentNearThree) {
  const HermiteTruncation tr(2, 30);
  const TruncatedOperator op = assemble_weyl(phase_space::kfp_symbol(1.0), tr);
  const GelfandShilovProfile p = gelfand_shilov_profile(op, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 1);
  EXPECT_EQ(p.target_exponent, 3);
  EXPECT_NEAR(p.exponent, 3.0, 0.6);
  for (const auto& row : p.rows) {
    for (std::size_t i = 1; i < row.tail_norms.size(); ++i)
      EXPECT_LE(row.tail_norms[i], row.tail_norms[i - 1] * (1 + 1e-12));
    for (std::size_t i = 1; i < row.mu_by_c0.size(); ++i) EXPECT_GE(row.mu_by_c0[i], row.mu_by_c0[i - 1]);
  }
}

// e^{tP} f0 = e^{-t Tr(B)/2} T^{-1} e^{-tL} T f0, T = multiplication by sqrt(rho)
TEST(ConjugationIdentity, WeightedOuMatchesHermitePropagation) {
  const phase_space::OUSystem sys = phase_space::scalar_stable_system();
  const phase_space::ConjugatedSymbols conj = phase_space::weighted_conjugation_symbols(sys);
  const HermiteTruncation tr(1, 48);
  const TruncatedOperator op = assemble_weyl(conj.L_symbol, tr);
  auto f0 = [](double x) { return std::exp(-0.5 * (x - 0.5) * (x - 0.5)); };
  auto sqrt_rho = [&](double x) {
    Vec v(1);
    v << x;
    return std::sqrt(ou::rho(conj.Q_inf, v));
  };
  const CVec c0 = hermite_coefficients(tr, [&](const Vec& x) { return sqrt_rho(x(0)) * f0(x(0)); }, 14.0);

  const std::vector<grid::Axis> axes = {grid::Axis::from_box(256, 12.0)};
  const grid::GridFunction g0 = grid::GridFunction::sample(axes, [&](const Vec& x) { return cplx(f0(x(0))); });
  for (double t : {0.1, 0.5}) {
    const grid::GridFunction ref = ou::kolmogorov_apply(sys, g0, t);
    const CVec ct = op.propagate(c0, t);
    double err = 0.0;
    Vec x;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref.coords(i, x);
      if (std::abs(x(0)) > 4.0) continue;
      const cplx h = hermite_synthesize(tr, ct, Mat(x))(0);
      const cplx f = std::exp(-0.5 * t * sys.B().trace()) * h / sqrt_rho(x(0));
      err = std::max(err, std::abs(f - ref[i]));
    }
    EXPECT_LT(err, 1e-4) << "t=" << t;
  }
}

}  // namespace
}  // namespace hypoctrl::hermite
