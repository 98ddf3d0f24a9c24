#pragma once

#include <numeric>
#include <optional>
#include <string>

#include "hypoctrl/core.hpp"
#include "hypoctrl/linalg.hpp"

// Quadratic symbols on R^{2n}, variables ordered X = (x_1..x_n, xi_1..xi_n).
// q(X) = X^T M X with M complex symmetric.
namespace hypoctrl::phase_space {

class QuadraticSymbol {
 public:
  QuadraticSymbol() = default;
  QuadraticSymbol(int n, const CMat& m) : n_(n), m_((m + m.transpose()) / 2.0) {
    require(n >= 1, "symbol dimension must be positive");
    require(m.rows() == 2 * n && m.cols() == 2 * n, "symbol matrix must be 2n x 2n");
    require(m.allFinite(), "symbol matrix has non-finite entries");
  }
  static QuadraticSymbol from_parts(const Mat& re, const Mat& im) {
    require(re.rows() == im.rows() && re.cols() == im.cols(), "M_re and M_im shapes differ");
    require(re.rows() % 2 == 0, "symbol matrix must have even size");
    CMat m(re.rows(), re.cols());
    m.real() = re;
    m.imag() = im;
    return QuadraticSymbol(static_cast<int>(re.rows() / 2), m);
  }

  int n() const { return n_; }
  const CMat& M() const { return m_; }
  Mat re() const { return m_.real(); }
  Mat im() const { return m_.imag(); }

  cplx operator()(const Vec& x) const { return polar(x, x); }
  // Bilinear polarization q(X, Y) = X^T M Y.
  cplx polar(const Vec& x, const Vec& y) const {
    return (x.cast<cplx>().transpose() * m_ * y.cast<cplx>())(0, 0);
  }

  double min_real_eig() const { return linalg::min_sym_eig(re()); }
  bool is_accretive(double tol = 1e-12) const {
    return min_real_eig() >= -tol * std::max(1.0, linalg::max_abs(m_));
  }

  QuadraticSymbol conj() const { return QuadraticSymbol(n_, m_.conjugate()); }
  QuadraticSymbol operator+(const QuadraticSymbol& o) const {
    require(n_ == o.n_, "symbol dimensions differ");
    return QuadraticSymbol(n_, m_ + o.m_);
  }
  QuadraticSymbol operator*(cplx s) const { return QuadraticSymbol(n_, m_ * s); }

 private:
  int n_ = 0;
  CMat m_;
};

// Builder for symbols written as sums of monomials X_i X_j.
class SymbolBuilder {
 public:
  explicit SymbolBuilder(int n) : n_(n), m_(CMat::Zero(2 * n, 2 * n)) {}
  int x(int j) const { return j; }
  int xi(int j) const { return n_ + j; }
  SymbolBuilder& add(int i, int j, cplx c) {
    if (i == j) {
      m_(i, i) += c;
    } else {
      m_(i, j) += c / 2.0;
      m_(j, i) += c / 2.0;
    }
    return *this;
  }
  // c * (u^T X)^2 for a linear form u.
  SymbolBuilder& add_square(const Vec& u, cplx c) {
    m_ += c * (u * u.transpose()).cast<cplx>();
    return *this;
  }
  QuadraticSymbol build() const { return QuadraticSymbol(n_, m_); }

 private:
  int n_;
  CMat m_;
};

// J = [[0, I], [-I, 0]].
inline Mat symplectic_matrix(int n) {
  Mat j = Mat::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n) = Mat::Identity(n, n);
  j.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return j;
}

// sigma((x, xi), (y, eta)) = <xi, y> - <x, eta>.
inline double sigma(const Vec& a, const Vec& b) {
  const Eigen::Index n = a.size() / 2;
  return a.tail(n).dot(b.head(n)) - a.head(n).dot(b.tail(n));
}

struct HamiltonMap {
  CMat F;
  Mat ReF;
  Mat ImF;
};

// F = J M satisfies sigma(X, F Y) = q(X, Y).
inline HamiltonMap hamilton_map(const QuadraticSymbol& q) {
  HamiltonMap h;
  h.F = symplectic_matrix(q.n()).cast<cplx>() * q.M();
  h.ReF = h.F.real();
  h.ImF = h.F.imag();
  return h;
}

struct SingularSpaceReport {
  std::vector<int> chain_dims;
  Mat S_basis;  // columns
  std::optional<int> k0;
  // delta = num / den = 2 k0 / (2 k0 + 1)
  std::optional<std::pair<int, int>> delta_loss;
  bool ill_conditioned = false;
  // Re q restricted to S is definite (trivially true when S = {0})
  bool partially_elliptic = true;
  double tol = 1e-10;

  bool trivial() const { return S_basis.cols() == 0; }
  std::optional<double> delta_value() const {
    if (!delta_loss) return std::nullopt;
    return static_cast<double>(delta_loss->first) / delta_loss->second;
  }
};

inline SingularSpaceReport singular_space(const HamiltonMap& h, double tol = 1e-10,
                                          const Mat* re_m = nullptr) {
  const int dim = static_cast<int>(h.ReF.rows());
  SingularSpaceReport rep;
  rep.tol = tol;
  Mat stack(0, dim);
  Mat power = Mat::Identity(dim, dim);
  for (int p = 0; p < dim; ++p) {
    Mat block = h.ReF * power;
    Mat next(stack.rows() + dim, dim);
    next << stack, block;
    stack = std::move(next);
    bool near = false;
    Mat ker = linalg::null_space(stack, tol, &near);
    rep.ill_conditioned = rep.ill_conditioned || near;
    rep.chain_dims.push_back(static_cast<int>(ker.cols()));
    if (p + 1 == dim) rep.S_basis = ker;
    power = h.ImF * power;
  }
  // guard against round-off making the sequence non-monotone
  for (std::size_t i = 1; i < rep.chain_dims.size(); ++i)
    rep.chain_dims[i] = std::min(rep.chain_dims[i], rep.chain_dims[i - 1]);
  for (int p = 0; p < dim; ++p) {
    if (rep.chain_dims[p] == 0) {
      rep.k0 = p;
      rep.delta_loss = std::make_pair(2 * p, 2 * p + 1);
      break;
    }
  }
  if (re_m && rep.S_basis.cols() > 0) {
    Mat restricted = rep.S_basis.transpose() * (*re_m) * rep.S_basis;
    const double scale = std::max(1.0, linalg::max_abs(*re_m));
    rep.partially_elliptic = linalg::min_sym_eig(restricted) > tol * scale;
  }
  return rep;
}

inline SingularSpaceReport singular_space(const QuadraticSymbol& q, double tol = 1e-10) {
  Mat re = q.re();
  return singular_space(hamilton_map(q), tol, &re);
}

class OUSystem {
 public:
  OUSystem() = default;
  OUSystem(const Mat& q, const Mat& b, double tol = 1e-12) : q_(linalg::symmetrize(q)), b_(b) {
    require(q.rows() >= 1 && q.rows() == q.cols(), "Q must be square");
    require(b.rows() == q.rows() && b.cols() == q.cols(), "B must match Q");
    require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, linalg::max_abs(q)),
            "Q must be symmetric");
    const double scale = std::max(1.0, linalg::max_abs(q));
    require(linalg::min_sym_eig(q_) >= -tol * scale, "Q must be positive semidefinite");
    max_re_eig_ = linalg::max_real_eig(b_);
    stable_flag_ = max_re_eig_ < -tol;
  }
  int n() const { return static_cast<int>(q_.rows()); }
  const Mat& Q() const { return q_; }
  const Mat& B() const { return b_; }
  bool stable_flag() const { return stable_flag_; }
  double max_real_eig() const { return max_re_eig_; }

 private:
  Mat q_, b_;
  bool stable_flag_ = false;
  double max_re_eig_ = 0.0;
};

// q(x, xi) = 1/2 <Q xi, xi> - i <B x, xi>.
inline QuadraticSymbol build_ou_symbol(const OUSystem& sys) {
  const int n = sys.n();
  CMat m = CMat::Zero(2 * n, 2 * n);
  m.bottomRightCorner(n, n) = (sys.Q() / 2.0).cast<cplx>();
  // -i xi^T B x split symmetrically between the (xi, x) and (x, xi) blocks
  m.bottomLeftCorner(n, n) = cplx(0, -0.5) * sys.B().cast<cplx>();
  m.topRightCorner(n, n) = cplx(0, -0.5) * sys.B().transpose().cast<cplx>();
  return QuadraticSymbol(n, m);
}

struct KalmanResult {
  int rank = 0;
  std::optional<int> kalman_k0;
  bool near_threshold = false;
};

inline KalmanResult kalman_analysis(const OUSystem& sys, double tol = 1e-10) {
  const int n = sys.n();
  const Mat root = linalg::psd_sqrt(sys.Q());
  KalmanResult res;
  Mat stack(n, 0);
  Mat block = root;
  for (int p = 0; p < n; ++p) {
    Mat next(n, stack.cols() + n);
    next << stack, block;
    stack = std::move(next);
    linalg::RankInfo info = linalg::rank_info(stack, tol);
    res.near_threshold = res.near_threshold || info.near_threshold;
    res.rank = info.rank;
    if (!res.kalman_k0 && info.rank == n) res.kalman_k0 = p;
    block = sys.B() * block;
  }
  return res;
}

struct AveragedRealPart {
  Mat matrix;
  double min_eig = 0.0;
  bool converged = true;
  double refinement_change = 0.0;
};

// Coefficient matrix of (1/2T) int_{-T}^{T} Re q(exp(2t ImF) X) dt.
inline AveragedRealPart averaged_real_part(const QuadraticSymbol& q, double T, int nodes = 64) {
  require(T > 0, "averaging time must be positive");
  require(nodes >= 64, "averaging needs at least 64 nodes");
  const HamiltonMap h = hamilton_map(q);
  const Mat re = q.re();
  auto average = [&](int m) {
    const linalg::QuadratureRule rule = linalg::gauss_legendre(m);
    Mat acc = Mat::Zero(re.rows(), re.cols());
    for (int i = 0; i < m; ++i) {
      const double t = T * rule.nodes(i);
      const Mat phi = linalg::expm(Mat(2.0 * t * h.ImF));
      acc += rule.weights(i) * (phi.transpose() * re * phi);
    }
    return linalg::symmetrize(Mat(acc / 2.0));
  };
  AveragedRealPart out;
  out.matrix = average(nodes);
  const Mat finer = average(2 * nodes);
  out.refinement_change = (finer - out.matrix).cwiseAbs().maxCoeff();
  out.converged = out.refinement_change <= 1e-8;
  if (!out.converged)
    log(LogLevel::warn, "averaged_real_part: quadrature not converged, change " +
                            std::to_string(out.refinement_change));
  out.min_eig = linalg::min_sym_eig(out.matrix);
  return out;
}

struct RhoParams {
  Mat Q_inf;
  double normalization = 0.0;  // (2 pi)^{-n/2} det(Q_inf)^{-1/2}
};

struct ConjugatedSymbols {
  QuadraticSymbol L_symbol;
  QuadraticSymbol Lfrak_symbol;
  Mat Q_inf;
  RhoParams rho;
};

inline Mat checked_q_infinity(const OUSystem& sys) {
  require(sys.stable_flag(), "spectrum of B is not in the open left half-plane",
          ErrorKind::unstable_drift);
  Mat x = linalg::symmetrize(linalg::solve_lyapunov(sys.B(), sys.Q()));
  const double res = (sys.B() * x + x * sys.B().transpose() + sys.Q()).cwiseAbs().maxCoeff();
  if (res > 1e-10 * std::max(1.0, linalg::max_abs(sys.Q())))
    log(LogLevel::warn, "Lyapunov residual " + std::to_string(res));
  return x;
}

// L = 1/2|Q^{1/2} xi|^2 + 1/8|Q^{1/2} Q_inf^{-1} x|^2 - i<(1/2 Q Q_inf^{-1} + B) x, xi>;
// Lfrak carries +i on the cross term.
inline ConjugatedSymbols weighted_conjugation_symbols(const OUSystem& sys) {
  const int n = sys.n();
  require(sys.stable_flag(), "spectrum of B is not in the open left half-plane",
          ErrorKind::unstable_drift);
  require(kalman_analysis(sys).rank == n, "Kalman rank condition fails",
          ErrorKind::hypoellipticity_fails);
  ConjugatedSymbols out;
  out.Q_inf = checked_q_infinity(sys);
  const Mat qinv = out.Q_inf.inverse();
  const Mat k = 0.5 * sys.Q() * qinv + sys.B();
  Mat re = Mat::Zero(2 * n, 2 * n);
  re.topLeftCorner(n, n) = linalg::symmetrize(Mat(qinv * sys.Q() * qinv / 8.0));
  re.bottomRightCorner(n, n) = sys.Q() / 2.0;
  Mat im = Mat::Zero(2 * n, 2 * n);
  im.bottomLeftCorner(n, n) = -0.5 * k;
  im.topRightCorner(n, n) = -0.5 * k.transpose();
  out.L_symbol = QuadraticSymbol::from_parts(re, im);
  out.Lfrak_symbol = out.L_symbol.conj();
  out.rho.Q_inf = out.Q_inf;
  out.rho.normalization =
      std::pow(2.0 * std::numbers::pi, -0.5 * n) / std::sqrt(out.Q_inf.determinant());
  return out;
}

// ---------------------------------------------------------------------------
// Presets

inline QuadraticSymbol harmonic_symbol(int n) {
  return QuadraticSymbol(n, CMat::Identity(2 * n, 2 * n));
}

// Kramers-Fokker-Planck with potential a x^2 / 2, variables (x, v, xi, eta):
// q = eta^2 + v^2/4 + i(v xi - a x eta).
inline QuadraticSymbol kfp_symbol(double a) {
  SymbolBuilder s(2);
  s.add(s.xi(1), s.xi(1), 1.0);
  s.add(s.x(1), s.x(1), 0.25);
  s.add(s.x(1), s.xi(0), cplx(0, 1));
  s.add(s.x(0), s.xi(1), cplx(0, -a));
  return s.build();
}

// Symbols realising a prescribed k0 (n >= 1 for k0 = 0, n >= 2 otherwise,
// k0 <= 2n - 1).
inline QuadraticSymbol catalogue_symbol(int k0, int n) {
  require(k0 >= 0 && k0 <= 2 * n - 1, "catalogue k0 must lie in [0, 2n-1]");
  SymbolBuilder s(n);
  auto add_harmonic = [&](int from) {
    for (int j = from; j < n; ++j) {
      s.add(s.x(j), s.x(j), 1.0);
      s.add(s.xi(j), s.xi(j), 1.0);
    }
  };
  if (k0 == 0) {
    add_harmonic(0);
    return s.build();
  }
  require(n >= 2, "catalogue symbols with k0 >= 1 need n >= 2");
  if (k0 == 1) {
    s.add(s.xi(1), s.xi(1), 1.0);
    s.add(s.x(1), s.x(1), 1.0);
    s.add(s.x(1), s.xi(0), cplx(0, 1));
    s.add(s.x(0), s.xi(1), cplx(0, -1));
    add_harmonic(2);
    return s.build();
  }
  const int p = k0 / 2;
  if (k0 % 2 == 0) {
    s.add(s.xi(0), s.xi(0), 1.0);
    s.add(s.x(0), s.x(0), 1.0);
  } else {
    s.add(s.x(0), s.x(0), 1.0);
  }
  // i(xi_1^2 + 2 x_2 xi_1 + ... + xi_p^2 + 2 x_{p+1} xi_p + xi_{p+1}^2)
  for (int j = 0; j < p; ++j) {
    s.add(s.xi(j), s.xi(j), cplx(0, 1));
    s.add(s.x(j + 1), s.xi(j), cplx(0, 2));
  }
  s.add(s.xi(p), s.xi(p), cplx(0, 1));
  add_harmonic(p + 1);
  return s.build();
}

struct ChainParams {
  double a = 2.0, b = 2.0, c = 1.0;
  double alpha = 1.0, alpha1 = 1.0, alpha2 = 1.0;
};

struct ChainPreset {
  QuadraticSymbol symbol;
  bool accretive_flag = false;
  double beta1 = 0, beta2 = 0, delta1 = 0, delta2 = 0;
  double nondegeneracy = 0;  // (a+c-1)(b+c-1) - c^2
};

// Chain of two oscillators coupled to heat baths, n = 6, variables
// (x1, x2, y1, y2, z1, z2, xi1, xi2, eta1, eta2, zeta1, zeta2).
inline ChainPreset chain_preset(const ChainParams& p) {
  require(p.alpha > 0 && p.alpha1 > 0 && p.alpha2 > 0, "chain alphas must be positive");
  ChainPreset out;
  out.beta1 = (p.alpha1 / p.alpha) * (2.0 / p.alpha1 - 1.0 / p.alpha);
  out.beta2 = (p.alpha2 / p.alpha) * (2.0 / p.alpha2 - 1.0 / p.alpha);
  out.delta1 = p.alpha1 / p.alpha - 1.0;
  out.delta2 = p.alpha2 / p.alpha - 1.0;
  out.accretive_flag = p.alpha > 0.5 * std::max(p.alpha1, p.alpha2);
  out.nondegeneracy = (p.a + p.c - 1.0) * (p.b + p.c - 1.0) - p.c * p.c;

  SymbolBuilder s(6);
  const int x1 = 0, x2 = 1, y1 = 2, y2 = 3, z1 = 4, z2 = 5;
  const int xi1 = 6, xi2 = 7, eta1 = 8, eta2 = 9, zeta1 = 10, zeta2 = 11;
  const cplx I(0, 1);
  s.add(zeta1, zeta1, p.alpha1);
  s.add(zeta2, zeta2, p.alpha2);
  Vec u = Vec::Zero(12);
  u(z1) = 1;
  u(x1) = -1;
  s.add_square(u, out.beta1);
  u.setZero();
  u(z2) = 1;
  u(x2) = -1;
  s.add_square(u, out.beta2);
  // 2 delta_j zeta_j (z_j - x_j)
  s.add(zeta1, z1, 2.0 * out.delta1 * I).add(zeta1, x1, -2.0 * out.delta1 * I);
  s.add(zeta2, z2, 2.0 * out.delta2 * I).add(zeta2, x2, -2.0 * out.delta2 * I);
  s.add(y1, xi1, I).add(y2, xi2, I);
  // -eta1((a+c) x1 - c x2 - z1) - eta2(-c x1 + (b+c) x2 - z2)
  s.add(eta1, x1, -(p.a + p.c) * I).add(eta1, x2, p.c * I).add(eta1, z1, I);
  s.add(eta2, x1, p.c * I).add(eta2, x2, -(p.b + p.c) * I).add(eta2, z2, I);
  out.symbol = s.build();
  return out;
}

inline OUSystem heat_system(int n) { return OUSystem(2.0 * Mat::Identity(n, n), Mat::Zero(n, n)); }

// Q = diag(0, 2 I_d), B = [[0, -I_d], [0, 0]].
inline OUSystem kolmogorov_system(int d) {
  Mat q = Mat::Zero(2 * d, 2 * d);
  q.bottomRightCorner(d, d) = 2.0 * Mat::Identity(d, d);
  Mat b = Mat::Zero(2 * d, 2 * d);
  b.topRightCorner(d, d) = -Mat::Identity(d, d);
  return OUSystem(q, b);
}

// Q = 2, B = -1: invariant density is the standard Gaussian.
inline OUSystem scalar_stable_system() { return OUSystem(Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, -1.0)); }

// Kolmogorov-type with friction: Q = diag(0, 2), B = [[0, -1], [1, -1]].
inline OUSystem damped_kolmogorov_system() {
  Mat q(2, 2), b(2, 2);
  q << 0, 0, 0, 2;
  b << 0, -1, 1, -1;
  return OUSystem(q, b);
}

}  // namespace hypoctrl::phase_space
