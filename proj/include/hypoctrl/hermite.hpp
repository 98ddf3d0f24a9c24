#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "hypoctrl/core.hpp"
#include "hypoctrl/linalg.hpp"
#include "hypoctrl/phase_space.hpp"

// Hermite functions psi_alpha, Weyl quantisation of quadratic symbols on the
// truncation {|alpha| <= N}, propagation, region Gram matrices and profiles.
namespace hypoctrl::hermite {

using phase_space::QuadraticSymbol;

// Multi-indices with |alpha| <= N in graded-lex order: by total degree, then
// lexicographically descending (N,0,..) before (N-1,1,..). Each degree shell
// is a contiguous block, so pi_k is a leading block.
class HermiteTruncation {
 public:
  HermiteTruncation() = default;
  HermiteTruncation(int n, int N) : n_(n), N_(N) {
    require(n >= 1 && n <= 4, "Hermite truncations support 1 <= n <= 4");
    require(N >= 0, "truncation degree must be nonnegative");
    std::vector<int> a(n, 0);
    for (int d = 0; d <= N; ++d) {
      shell_begin_.push_back(static_cast<int>(alphas_.size()));
      enumerate(0, d, a);
    }
    shell_begin_.push_back(static_cast<int>(alphas_.size()));
    for (int i = 0; i < size(); ++i) index_.emplace(alphas_[i], i);
  }

  int n() const { return n_; }
  int N() const { return N_; }
  int size() const { return static_cast<int>(alphas_.size()); }
  const std::vector<int>& alpha(int i) const { return alphas_[i]; }
  int degree(int i) const {
    int s = 0;
    for (int v : alphas_[i]) s += v;
    return s;
  }
  // -1 when |alpha| > N or alpha has negative entries
  int index_of(const std::vector<int>& a) const {
    auto it = index_.find(a);
    return it == index_.end() ? -1 : it->second;
  }
  // [shell_begin(k), shell_begin(k+1)) is the degree-k shell
  int shell_begin(int k) const { return shell_begin_[std::clamp(k, 0, N_ + 1)]; }
  // number of indices with degree <= k
  int count_up_to(int k) const { return k < 0 ? 0 : shell_begin(k + 1); }
  // eigenvalues 2|alpha| + n of the harmonic oscillator
  Vec energies() const {
    Vec h(size());
    for (int i = 0; i < size(); ++i) h(i) = 2.0 * degree(i) + n_;
    return h;
  }

 private:
  void enumerate(int axis, int remaining, std::vector<int>& a) {
    if (axis == n_ - 1) {
      a[axis] = remaining;
      alphas_.push_back(a);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      a[axis] = v;
      enumerate(axis + 1, remaining - v, a);
    }
  }

  int n_ = 0;
  int N_ = 0;
  std::vector<std::vector<int>> alphas_;
  std::vector<int> shell_begin_;
  std::map<std::vector<int>, int> index_;
};

// psi_0..psi_N at x. The recurrence runs without the Gaussian factor and with
// a running log-scale, so large |x| neither underflows psi_0 nor overflows the
// polynomial part.
inline void hermite_1d(double x, int N, double* out) {
  double log_scale = 0.0;
  double prev = 0.0, cur = std::pow(std::numbers::pi, -0.25);
  out[0] = cur;
  thread_local std::vector<double> logs;
  logs.assign(N + 1, 0.0);
  for (int k = 0; k < N; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      cur *= 1e-150;
      prev *= 1e-150;
      log_scale += 150.0 * std::numbers::ln10;
    }
    out[k + 1] = cur;
    logs[k + 1] = log_scale;
  }
  for (int k = 0; k <= N; ++k) {
    if (out[k] == 0.0) continue;
    const double e = logs[k] - 0.5 * x * x + std::log(std::abs(out[k]));
    out[k] = std::copysign(std::exp(e), out[k]);
  }
}

// Values psi_alpha(x) for each column x of `points` (n x P); result is P x D.
inline Mat hermite_eval(const HermiteTruncation& trunc, const Mat& points) {
  const int n = trunc.n(), N = trunc.N();
  require(points.rows() == n, "points must have one row per dimension");
  const Eigen::Index P = points.cols();
  Mat out(P, trunc.size());
  std::vector<double> table(static_cast<std::size_t>(n) * (N + 1));
  for (Eigen::Index p = 0; p < P; ++p) {
    for (int d = 0; d < n; ++d) hermite_1d(points(d, p), N, table.data() + d * (N + 1));
    for (int i = 0; i < trunc.size(); ++i) {
      double v = 1.0;
      const auto& a = trunc.alpha(i);
      for (int d = 0; d < n; ++d) v *= table[d * (N + 1) + a[d]];
      out(p, i) = v;
    }
  }
  return out;
}

// Gauss-Hermite rule for weight e^{-y^2} (Golub-Welsch nodes). The weights are
// returned multiplied by e^{y^2} via the Christoffel formula
// w_i e^{y_i^2} = 1 / sum_k psi_k(y_i)^2, so sum_i w_i psi_a psi_b is exact for
// a + b <= 2m - 1.
inline linalg::QuadratureRule gauss_hermite_scaled(int m) {
  require(m >= 1, "Gauss-Hermite needs at least one node");
  Mat jac = Mat::Zero(m, m);
  for (int k = 1; k < m; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Mat> es(jac, Eigen::EigenvaluesOnly);
  linalg::QuadratureRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(m);
  std::vector<double> psi(m);
  for (int i = 0; i < m; ++i) {
    hermite_1d(rule.nodes(i), m - 1, psi.data());
    double s = 0.0;
    for (double v : psi) s += v * v;
    rule.weights(i) = 1.0 / s;
  }
  return rule;
}

// Compression pi_N q^w pi_N of a quadratic symbol's Weyl quantisation.
class TruncatedOperator {
 public:
  TruncatedOperator(HermiteTruncation trunc, CMat a) : trunc_(std::move(trunc)), a_(std::move(a)) {
    require(a_.rows() == trunc_.size() && a_.cols() == trunc_.size(),
            "operator matrix does not match the truncation");
    const CMat h = linalg::hermitian_part(a_);
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    min_re_ = es.eigenvalues().size() ? es.eigenvalues()(0) : 0.0;
    accretive_ = min_re_ >= -1e-10 * norm_bound();
    cache_ = std::make_shared<Cache>();
  }

  const HermiteTruncation& trunc() const { return trunc_; }
  const CMat& A() const { return a_; }
  int size() const { return trunc_.size(); }
  bool accretive_flag() const { return accretive_; }
  // smallest eigenvalue of the Hermitian part (numerical-range lower bound)
  double min_real_part() const { return min_re_; }
  // sqrt(|A|_1 |A|_inf), an upper bound for the spectral norm
  double norm_bound() const {
    const double n1 = a_.cwiseAbs().colwise().sum().maxCoeff();
    const double ninf = a_.cwiseAbs().rowwise().sum().maxCoeff();
    return std::sqrt(n1 * ninf);
  }
  // rows whose exact image couples to degrees N+1, N+2
  bool truncated_row(int i) const { return trunc_.degree(i) >= trunc_.N() - 1; }

  TruncatedOperator adjoint() const { return TruncatedOperator(trunc_, a_.adjoint()); }

  // e^{-tA}; dense exponential cached per t for D <= dense_limit, otherwise
  // adaptive Crank-Nicolson applied to the identity.
  const CMat& propagator(double t) const {
    require(t >= 0, "propagation time must be nonnegative");
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->mats.find(t);
    if (it != cache_->mats.end()) return *it->second;
    auto m = std::make_unique<CMat>(t == 0.0 ? CMat(CMat::Identity(size(), size()))
                                             : compute_propagator(t));
    const CMat& ref = *m;
    cache_->mats.emplace(t, std::move(m));
    return ref;
  }

  CVec propagate(const CVec& v, double t) const {
    require(v.size() == size(), "coefficient vector does not match the truncation");
    if (t == 0.0) return v;
    if (size() > dense_limit) return propagate_implicit(v, t);
    return propagator(t) * v;
  }

  static constexpr int dense_limit = 2000;

  // Crank-Nicolson with Richardson step-doubling error control.
  CVec propagate_implicit(const CVec& v, double t, double tol = 1e-10) const {
    int steps = std::max(16, static_cast<int>(std::ceil(t * norm_bound())));
    const CMat id = CMat::Identity(size(), size());
    auto run = [&](int s) {
      const double dt = t / s;
      Eigen::PartialPivLU<CMat> lu(id + 0.5 * dt * a_);
      const CMat rhs = id - 0.5 * dt * a_;
      CVec x = v;
      for (int k = 0; k < s; ++k) x = lu.solve(rhs * x);
      return x;
    };
    CVec coarse = run(steps);
    double err = INFINITY;
    for (int level = 0; level < 12; ++level) {
      CVec fine = run(2 * steps);
      err = (fine - coarse).norm() / 3.0;
      if (err <= tol * std::max(1.0, v.norm())) return fine + (fine - coarse) / 3.0;
      coarse = std::move(fine);
      steps *= 2;
    }
    throw Error(ErrorKind::step_size_failure,
                "Crank-Nicolson did not reach tolerance; achieved " + std::to_string(err));
  }

 private:
  CMat compute_propagator(double t) const {
    if (size() <= dense_limit) return linalg::expm(CMat(-t * a_));
    const CMat id = CMat::Identity(size(), size());
    CMat out(size(), size());
    for (int j = 0; j < size(); ++j) out.col(j) = propagate_implicit(id.col(j), t);
    return out;
  }

  struct Cache {
    std::mutex mu;
    std::map<double, std::unique_ptr<CMat>> mats;
  };

  HermiteTruncation trunc_;
  CMat a_;
  double min_re_ = 0.0;
  bool accretive_ = false;
  std::shared_ptr<Cache> cache_;
};

namespace detail {
// sqrt2 w_j = c_lower a_j + c_raise a_j^* for w = (x_1..x_n, D_1..D_n), with
// x = (a + a^*)/sqrt2 and D = -i d/dx = -i (a - a^*)/sqrt2.
struct LadderForm {
  int axis;
  cplx lower;
  cplx raise;
};

inline LadderForm ladder_form(int k, int n) {
  if (k < n) return {k, cplx(1), cplx(1)};
  return {k - n, cplx(0, -1), cplx(0, 1)};
}
}  // namespace detail

// q^w = sum_{j,k} M_jk (w_j w_k + w_k w_j)/2 = sum_{j,k} M_jk w_j w_k (M symmetric).
// Each w_j w_k moves the degree by at most 2; entries between indices of
// degree <= N are exact.
inline TruncatedOperator assemble_weyl(const QuadraticSymbol& q, const HermiteTruncation& trunc) {
  require(q.n() == trunc.n(), "symbol and truncation dimensions differ");
  const int n = trunc.n(), D = trunc.size();
  const CMat& M = q.M();
  CMat a = CMat::Zero(D, D);
  parallel_for(0, static_cast<std::size_t>(D), [&](std::size_t col) {
    const std::vector<int>& beta = trunc.alpha(static_cast<int>(col));
    for (int j = 0; j < 2 * n; ++j) {
      for (int k = 0; k < 2 * n; ++k) {
        const cplx m = M(j, k);
        if (m == cplx(0.0)) continue;
        const detail::LadderForm wk = detail::ladder_form(k, n), wj = detail::ladder_form(j, n);
        // w_k psi_beta, then w_j on each of the (at most two) terms; the two
        // ladder factors share one sqrt so diagonal entries stay integral
        for (int s1 = -1; s1 <= 1; s1 += 2) {
          std::vector<int> g = beta;
          cplx c1;
          double p1;
          if (s1 < 0) {
            if (g[wk.axis] == 0) continue;
            c1 = wk.lower;
            p1 = g[wk.axis]--;
          } else {
            c1 = wk.raise;
            p1 = ++g[wk.axis];
          }
          for (int s2 = -1; s2 <= 1; s2 += 2) {
            std::vector<int> h = g;
            cplx c2;
            double p2;
            if (s2 < 0) {
              if (h[wj.axis] == 0) continue;
              c2 = wj.lower;
              p2 = h[wj.axis]--;
            } else {
              c2 = wj.raise;
              p2 = ++h[wj.axis];
            }
            const int row = trunc.index_of(h);
            if (row >= 0) a(row, static_cast<Eigen::Index>(col)) += 0.5 * m * c1 * c2 * std::sqrt(p1 * p2);
          }
        }
      }
    }
  });
  return TruncatedOperator(trunc, std::move(a));
}

enum class EnergyMode { at_level, up_to_level };

// P_k (at_level) or pi_k (up_to_level) applied to coefficients.
inline CVec project_energy(const HermiteTruncation& trunc, const CVec& v, int k, EnergyMode mode) {
  require(v.size() == trunc.size(), "coefficient vector does not match the truncation");
  require(k <= trunc.N(), "projection level exceeds the truncation degree");
  CVec out = CVec::Zero(v.size());
  if (k < 0) return out;
  const int lo = mode == EnergyMode::at_level ? trunc.shell_begin(k) : 0;
  const int hi = trunc.shell_begin(k + 1);
  out.segment(lo, hi - lo) = v.segment(lo, hi - lo);
  return out;
}

// Coefficients <f, psi_alpha> by tensor Gauss-Legendre on [-half_width, half_width]^n.
template <class F>
CVec hermite_coefficients(const HermiteTruncation& trunc, F&& f, double half_width, int panels = 64,
                          int per_panel = 12) {
  const int n = trunc.n();
  const linalg::QuadratureRule r = linalg::composite_gauss_legendre(-half_width, half_width, panels, per_panel);
  const Eigen::Index m = r.nodes.size();
  Eigen::Index total = 1;
  for (int d = 0; d < n; ++d) total *= m;
  CVec out = CVec::Zero(trunc.size());
  const Eigen::Index chunk = 4096;
  Vec x(n);
  for (Eigen::Index start = 0; start < total; start += chunk) {
    const Eigen::Index len = std::min(chunk, total - start);
    Mat pts(n, len);
    CVec vals(len);
    for (Eigen::Index p = 0; p < len; ++p) {
      Eigen::Index rem = start + p;
      double w = 1.0;
      for (int d = n - 1; d >= 0; --d) {
        const Eigen::Index i = rem % m;
        rem /= m;
        x(d) = r.nodes(i);
        w *= r.weights(i);
      }
      pts.col(p) = x;
      vals(p) = w * cplx(f(x));
    }
    out += hermite_eval(trunc, pts).transpose() * vals;
  }
  return out;
}

// sum_alpha c_alpha psi_alpha at each column of `points`.
inline CVec hermite_synthesize(const HermiteTruncation& trunc, const CVec& c, const Mat& points) {
  return hermite_eval(trunc, points).cast<cplx>() * c;
}

// Control / observation regions in R^n.
struct RegionSpec {
  enum class Kind { whole_space, complement_of_ball, union_of_balls, half_space, ball_lattice };
  struct Ball {
    Vec center;
    double radius = 0.0;
  };

  Kind kind = Kind::whole_space;
  int n = 1;
  std::vector<Ball> balls;  // complement_of_ball: one entry; union_of_balls: all
  Vec normal;               // half_space {<normal, x> > offset}, normal unit
  double offset = 0.0;
  double spacing = 0.0;  // ball_lattice: balls of radius r at spacing * Z^n
  double r = 0.0;

  static RegionSpec whole_space(int n) {
    RegionSpec s;
    s.n = n;
    return s;
  }
  static RegionSpec complement_of_ball(const Vec& center, double radius) {
    require(radius >= 0, "ball radius must be nonnegative");
    RegionSpec s;
    s.kind = Kind::complement_of_ball;
    s.n = static_cast<int>(center.size());
    s.balls.push_back({center, radius});
    return s;
  }
  static RegionSpec union_of_balls(std::vector<Ball> balls) {
    require(!balls.empty(), "union of balls needs at least one ball");
    RegionSpec s;
    s.kind = Kind::union_of_balls;
    s.n = static_cast<int>(balls.front().center.size());
    for (std::size_t i = 0; i < balls.size(); ++i) {
      require(balls[i].radius > 0 && balls[i].center.size() == s.n, "invalid ball in union");
      for (std::size_t j = 0; j < i; ++j)
        require((balls[i].center - balls[j].center).norm() >= balls[i].radius + balls[j].radius,
                "union_of_balls needs pairwise disjoint balls");
    }
    s.balls = std::move(balls);
    return s;
  }
  static RegionSpec half_space(const Vec& normal, double offset) {
    require(normal.norm() > 0, "half-space normal must be nonzero");
    RegionSpec s;
    s.kind = Kind::half_space;
    s.n = static_cast<int>(normal.size());
    s.normal = normal.normalized();
    s.offset = offset / normal.norm();
    return s;
  }
  static RegionSpec ball_lattice(int n, double spacing, double r) {
    require(spacing > 0 && r > 0, "lattice spacing and radius must be positive");
    require(2 * r <= spacing, "lattice balls must not overlap (2r <= spacing)");
    RegionSpec s;
    s.kind = Kind::ball_lattice;
    s.n = n;
    s.spacing = spacing;
    s.r = r;
    return s;
  }

  bool contains(const Vec& x) const {
    switch (kind) {
      case Kind::whole_space:
        return true;
      case Kind::complement_of_ball:
        return (x - balls[0].center).norm() > balls[0].radius;
      case Kind::union_of_balls:
        for (const Ball& b : balls)
          if ((x - b.center).norm() < b.radius) return true;
        return false;
      case Kind::half_space:
        return normal.dot(x) > offset;
      case Kind::ball_lattice: {
        Vec y = x / spacing;
        for (Eigen::Index d = 0; d < y.size(); ++d) y(d) -= std::round(y(d));
        return y.norm() * spacing < r;
      }
    }
    return false;
  }

  // (delta, r): every point lies within delta of some B(y', r) inside the
  // region. Half-spaces and bounded unions have no such witness.
  std::optional<std::pair<double, double>> thickness() const {
    switch (kind) {
      case Kind::whole_space:
        return std::make_pair(0.0, 1.0);
      case Kind::complement_of_ball:
        return std::make_pair(2.0 * (balls[0].radius + 1.0), 1.0);
      case Kind::ball_lattice:
        return std::make_pair(0.5 * spacing * std::sqrt(static_cast<double>(n)), r);
      default:
        return std::nullopt;
    }
  }

  std::string name() const {
    switch (kind) {
      case Kind::whole_space: return "whole_space";
      case Kind::complement_of_ball: return "complement_of_ball";
      case Kind::union_of_balls: return "union_of_balls";
      case Kind::half_space: return "half_space";
      case Kind::ball_lattice: return "ball_lattice";
    }
    return "";
  }
};

struct GramMatrix {
  Mat G;
  int refinement_level = 0;   // panel doublings used
  double refinement_change = 0.0;
  std::size_t nodes = 0;      // quadrature nodes at the accepted level
  double box_half_width = 0.0;
};

struct GramOptions {
  double tolerance = 1e-7;
  int max_doublings = 5;
  int per_panel = 16;
};

namespace detail {

// Accumulates sum_i w_i psi(x_i) psi(x_i)^T over a node stream.
class GramAccumulator {
 public:
  explicit GramAccumulator(const HermiteTruncation& trunc)
      : trunc_(trunc), g_(Mat::Zero(trunc.size(), trunc.size())), pts_(trunc.n(), kChunk), w_(kChunk) {}
  void add(const Vec& x, double w) {
    pts_.col(fill_) = x;
    w_(fill_) = w;
    ++count_;
    if (++fill_ == kChunk) flush();
  }
  Mat finish() {
    flush();
    return linalg::symmetrize(g_);
  }
  std::size_t count() const { return count_; }

 private:
  void flush() {
    if (fill_ == 0) return;
    const Mat psi = hermite_eval(trunc_, pts_.leftCols(fill_));
    g_.noalias() += psi.transpose() * (w_.head(fill_).asDiagonal() * psi);
    fill_ = 0;
  }
  static constexpr Eigen::Index kChunk = 4096;
  const HermiteTruncation& trunc_;
  Mat g_;
  Mat pts_;
  Vec w_;
  Eigen::Index fill_ = 0;
  std::size_t count_ = 0;
};

// Ball by nested substitution: x_d = c_d + rho_d sin(theta_d), rho_{d+1} =
// rho_d cos(theta_d), last axis linear. The integrand stays smooth, so tensor
// Gauss-Legendre converges spectrally.
inline void add_ball(GramAccumulator& acc, const Vec& c, double radius, int panels, int per_panel) {
  const int n = static_cast<int>(c.size());
  const double half_pi = 0.5 * std::numbers::pi;
  const linalg::QuadratureRule ang = linalg::composite_gauss_legendre(-half_pi, half_pi, panels, per_panel);
  const linalg::QuadratureRule lin = linalg::composite_gauss_legendre(-1.0, 1.0, panels, per_panel);
  const Eigen::Index m = ang.nodes.size();
  Vec x(n);
  std::vector<Eigen::Index> idx(n, 0);
  Eigen::Index total = 1;
  for (int d = 0; d < n; ++d) total *= m;
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rem = k;
    for (int d = n - 1; d >= 0; --d) {
      idx[d] = rem % m;
      rem /= m;
    }
    double rho = radius, w = 1.0;
    for (int d = 0; d < n - 1; ++d) {
      const double th = ang.nodes(idx[d]);
      x(d) = c(d) + rho * std::sin(th);
      w *= ang.weights(idx[d]) * rho * std::cos(th);
      rho *= std::cos(th);
    }
    x(n - 1) = c(n - 1) + rho * lin.nodes(idx[n - 1]);
    w *= lin.weights(idx[n - 1]) * rho;
    acc.add(x, w);
  }
}

// Half-space <normal, x> > offset in rotated coordinates y = U^T x, U e_1 = normal.
// Along y_1: Gauss-Legendre on [offset, L]; transverse: Gauss-Hermite, exact
// because psi_a psi_b is a polynomial times e^{-|y|^2}.
inline void add_half_space(GramAccumulator& acc, const HermiteTruncation& trunc, const Vec& normal,
                           double offset, double L, int panels, int per_panel) {
  const int n = trunc.n();
  if (offset >= L) return;
  const double lo = std::max(offset, -L);
  Mat basis = Mat::Identity(n, n);
  basis.col(0) = normal;
  Eigen::HouseholderQR<Mat> qr(basis);
  Mat U = qr.householderQ();
  if (U.col(0).dot(normal) < 0) U.col(0) *= -1.0;
  const linalg::QuadratureRule along = linalg::composite_gauss_legendre(lo, L, panels, per_panel);
  const linalg::QuadratureRule across = gauss_hermite_scaled(trunc.N() + 1);
  const Eigen::Index ma = along.nodes.size(), mt = across.nodes.size();
  Eigen::Index total = ma;
  for (int d = 1; d < n; ++d) total *= mt;
  Vec y(n);
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rem = k;
    double w = 1.0;
    for (int d = n - 1; d >= 1; --d) {
      const Eigen::Index i = rem % mt;
      rem /= mt;
      y(d) = across.nodes(i);
      w *= across.weights(i);
    }
    y(0) = along.nodes(rem);
    w *= along.weights(rem);
    acc.add(U * y, w);
  }
}

inline int base_panels(double length, int N) {
  return std::max(2, static_cast<int>(std::ceil(length * std::sqrt(2.0 * N + 1.0) / 4.0)));
}

inline Mat region_gram_at(const HermiteTruncation& trunc, const RegionSpec& region, double L, int level,
                          int per_panel, std::size_t& nodes) {
  const int n = trunc.n(), N = trunc.N();
  const int scale = 1 << level;
  GramAccumulator acc(trunc);
  auto ball = [&](const Vec& c, double radius) {
    // skip balls beyond the essential support
    Vec nearest = c;
    for (int d = 0; d < n; ++d) nearest(d) = std::clamp(c(d), -L, L);
    if ((nearest - c).norm() >= radius) return;
    add_ball(acc, c, radius, scale * base_panels(std::numbers::pi * radius, N), per_panel);
  };
  Mat g;
  switch (region.kind) {
    case RegionSpec::Kind::whole_space:
      nodes = 0;
      return Mat::Identity(trunc.size(), trunc.size());
    case RegionSpec::Kind::complement_of_ball:
      if (region.balls[0].radius > 0) ball(region.balls[0].center, region.balls[0].radius);
      g = acc.finish();
      nodes = acc.count();
      return Mat::Identity(trunc.size(), trunc.size()) - g;
    case RegionSpec::Kind::union_of_balls:
      for (const auto& b : region.balls) ball(b.center, b.radius);
      break;
    case RegionSpec::Kind::half_space:
      add_half_space(acc, trunc, region.normal, region.offset, L,
                     scale * base_panels(L - std::max(region.offset, -L), N), per_panel);
      break;
    case RegionSpec::Kind::ball_lattice: {
      const int reach = static_cast<int>(std::ceil((L + region.r) / region.spacing));
      const int side = 2 * reach + 1;
      int total = 1;
      for (int d = 0; d < n; ++d) total *= side;
      Vec c(n);
      for (int k = 0; k < total; ++k) {
        int rem = k;
        for (int d = n - 1; d >= 0; --d) {
          c(d) = region.spacing * (rem % side - reach);
          rem /= side;
        }
        ball(c, region.r);
      }
      break;
    }
  }
  g = acc.finish();
  nodes = acc.count();
  return g;
}

}  // namespace detail

// Essential support of psi_alpha, |alpha| <= N, per axis.
inline double hermite_box(int N) { return std::sqrt(4.0 * N + 6.0) + 2.0; }

// G_ab = int_omega psi_a psi_b, with panel doubling until entries move by at
// most opt.tolerance.
inline GramMatrix omega_gram(const HermiteTruncation& trunc, const RegionSpec& region,
                             const GramOptions& opt = {}) {
  require(region.n == trunc.n(), "region and truncation dimensions differ");
  GramMatrix out;
  out.box_half_width = hermite_box(trunc.N());
  std::size_t nodes = 0;
  Mat prev = detail::region_gram_at(trunc, region, out.box_half_width, 0, opt.per_panel, nodes);
  if (region.kind == RegionSpec::Kind::whole_space) {
    out.G = prev;
    return out;
  }
  for (int level = 1; level <= opt.max_doublings; ++level) {
    Mat next = detail::region_gram_at(trunc, region, out.box_half_width, level, opt.per_panel, nodes);
    const double change = linalg::max_abs(Mat(next - prev));
    if (change <= opt.tolerance) {
      out.G = std::move(next);
      out.refinement_level = level;
      out.refinement_change = change;
      out.nodes = nodes;
      return out;
    }
    prev = std::move(next);
  }
  throw Error(ErrorKind::under_resolved_region, "region Gram matrix did not converge under panel doubling");
}

struct SpectralEntry {
  int k = 0;
  double lambda_min = 0.0;
  double c_hat = 0.0;
  bool vacuous = false;  // lambda_min below 1e-14
};

struct SpectralProfile {
  std::vector<SpectralEntry> entries;
  // c_hat(k) ~ coefficient * k^exponent over non-vacuous k >= 1
  double exponent = 0.0;
  double coefficient = 0.0;
  double fit_residual = 0.0;
  int fitted_points = 0;
};

// lambda_min of G restricted to degree <= k; the best constant in
// |g| <= C |g|_{L^2(omega)} for such g is lambda_min^{-1/2}.
inline SpectralProfile spectral_constant_profile(const HermiteTruncation& trunc, const GramMatrix& gram,
                                                 const std::vector<int>& k_list) {
  SpectralProfile prof;
  std::vector<double> lx, ly;
  for (int k : k_list) {
    require(k >= 0 && k <= trunc.N(), "profile degree outside the truncation");
    const int d = trunc.count_up_to(k);
    Eigen::SelfAdjointEigenSolver<Mat> es(gram.G.topLeftCorner(d, d), Eigen::EigenvaluesOnly);
    SpectralEntry e;
    e.k = k;
    e.lambda_min = es.eigenvalues()(0);
    e.vacuous = e.lambda_min < 1e-14;
    e.c_hat = -0.5 * std::log(std::max(e.lambda_min, 1e-300));
    if (e.vacuous) log(LogLevel::warn, "spectral inequality vacuous at degree " + std::to_string(k));
    prof.entries.push_back(e);
    if (!e.vacuous && k >= 1 && e.c_hat > 0) {
      lx.push_back(std::log(static_cast<double>(k)));
      ly.push_back(std::log(e.c_hat));
    }
  }
  const linalg::LineFit fit = linalg::fit_line(lx, ly);
  prof.exponent = fit.slope;
  prof.coefficient = std::exp(fit.intercept);
  prof.fit_residual = fit.max_residual;
  prof.fitted_points = static_cast<int>(lx.size());
  return prof;
}

struct GelfandShilovOptions {
  std::vector<double> c0_grid = {1.0, 1.1, 2.0};
  // time window of the exponent fit
  double fit_t_min = 0.1;
  double fit_t_max = 0.6;
  int bisection_steps = 25;
};

struct GelfandShilovRow {
  double t = 0.0;
  double delta_hat = 0.0;  // slope of -log |(1 - pi_k) e^{-tA}| over k
  double mu = 0.0;         // delta_hat / 2
  std::vector<double> mu_by_c0;  // largest mu with |e^{mu H} e^{-tA}| <= C0
  std::vector<double> tail_norms;  // |(1 - pi_k) e^{-tA}| for k = k_min..k_max
  double c0_fit = 0.0;  // max_k e^{delta_hat k} |(1 - pi_k) e^{-tA}|
};

struct GelfandShilovProfile {
  std::vector<GelfandShilovRow> rows;
  int k_min = 2;
  int k_max = 0;
  int target_exponent = 1;  // 2 k0 + 1
  double exponent = 0.0;
  double fit_residual = 0.0;
  double C0_hat = 0.0;
  double t0_hat = 0.0;  // time at which the local exponent peaks
  double truncation_fraction = 0.0;
  bool truncation_warning = false;
  std::vector<double> c0_grid;
};

// Hermite-tail decay of e^{-tA}. delta_hat(t) is the least-squares slope of
// -log |(1 - pi_k) e^{-tA}| over k in [2, N-4] (top two shells excluded), and
// mu(t) = delta_hat / 2 is the Gelfand-Shilov rate since H = 2|alpha| + n.
inline GelfandShilovProfile gelfand_shilov_profile(const TruncatedOperator& op, const std::vector<double>& times,
                                                   int k0, const GelfandShilovOptions& opt = {}) {
  const HermiteTruncation& tr = op.trunc();
  require(tr.N() >= 8, "Gelfand-Shilov profile needs N >= 8");
  require(!times.empty(), "Gelfand-Shilov profile needs times");
  if (!op.accretive_flag()) log(LogLevel::warn, "Gelfand-Shilov profile of a non-accretive operator");
  GelfandShilovProfile prof;
  prof.k_max = tr.N() - 4;
  prof.target_exponent = 2 * k0 + 1;
  prof.c0_grid = opt.c0_grid;
  const Vec h = tr.energies();
  const int D = tr.size();
  std::vector<double> fit_x, fit_y;
  for (double t : times) {
    require(t > 0, "Gelfand-Shilov times must be positive");
    const CMat& E = op.propagator(t);
    GelfandShilovRow row;
    row.t = t;
    std::vector<double> ks, lg;
    for (int k = prof.k_min; k <= prof.k_max; ++k) {
      const int lo = tr.count_up_to(k);
      const CMat tail = E.bottomRows(D - lo);
      // the rows x rows Gram is the smaller one
      Eigen::SelfAdjointEigenSolver<CMat> es(tail * tail.adjoint(), Eigen::EigenvaluesOnly);
      const double nrm = std::sqrt(std::max(es.eigenvalues()(D - lo - 1), 0.0));
      row.tail_norms.push_back(nrm);
      ks.push_back(k);
      lg.push_back(-std::log(std::max(nrm, 1e-300)));
    }
    row.delta_hat = linalg::fit_line(ks, lg).slope;
    row.mu = 0.5 * row.delta_hat;
    for (std::size_t i = 0; i < ks.size(); ++i)
      row.c0_fit = std::max(row.c0_fit, std::exp(row.delta_hat * ks[i]) * row.tail_norms[i]);
    // per-C0 rates by bisection, norm by power iteration
    CVec warm;
    for (double c0 : opt.c0_grid) {
      auto weighted_norm = [&](double mu) {
        const CMat w = (mu * h).array().exp().matrix().asDiagonal() * E;
        return linalg::power_norm(w, &warm, 30, 1000, 1e-8);
      };
      double lo = 0.0, hi = 1.0;
      if (weighted_norm(0.0) > c0) {
        row.mu_by_c0.push_back(0.0);
        continue;
      }
      while (weighted_norm(hi) <= c0 && hi < 64.0) {
        lo = hi;
        hi *= 2.0;
      }
      for (int it = 0; it < opt.bisection_steps; ++it) {
        const double mid = 0.5 * (lo + hi);
        (weighted_norm(mid) <= c0 ? lo : hi) = mid;
      }
      row.mu_by_c0.push_back(lo);
    }
    if (t >= opt.fit_t_min - 1e-12 && t <= opt.fit_t_max + 1e-12 && row.mu > 0) {
      fit_x.push_back(std::log(t));
      fit_y.push_back(std::log(row.mu));
    }
    prof.C0_hat = std::max(prof.C0_hat, row.c0_fit);
    prof.rows.push_back(std::move(row));
  }
  const linalg::LineFit fit = linalg::fit_line(fit_x, fit_y);
  prof.exponent = fit.slope;
  prof.fit_residual = fit.max_residual;

  // plateau edge: where the local exponent between consecutive times peaks
  double best = -INFINITY;
  for (std::size_t i = 1; i < prof.rows.size(); ++i) {
    const auto& a = prof.rows[i - 1];
    const auto& b = prof.rows[i];
    if (a.mu <= 0 || b.mu <= 0 || b.t == a.t) continue;
    const double local = std::log(b.mu / a.mu) / std::log(b.t / a.t);
    if (local > best) {
      best = local;
      prof.t0_hat = b.t;
    }
  }

  // share of the weighted norm carried by the top two shells at the largest t
  const GelfandShilovRow& last = prof.rows.back();
  const CMat weighted = (last.mu * h).array().exp().matrix().asDiagonal() * op.propagator(last.t);
  const int top = tr.count_up_to(tr.N() - 2);
  const double full = linalg::power_norm(weighted);
  const double edge = linalg::power_norm(CMat(weighted.bottomRows(D - top)));
  prof.truncation_fraction = full > 0 ? edge / full : 0.0;
  prof.truncation_warning = prof.truncation_fraction > 0.1;
  if (prof.truncation_warning)
    log(LogLevel::warn, "Gelfand-Shilov profile is truncation-dominated at the largest time");
  return prof;
}

}  // namespace hypoctrl::hermite
