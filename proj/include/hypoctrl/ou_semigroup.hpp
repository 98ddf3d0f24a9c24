#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hypoctrl/core.hpp"
#include "hypoctrl/grid.hpp"
#include "hypoctrl/linalg.hpp"
#include "hypoctrl/phase_space.hpp"

// Ornstein-Uhlenbeck semigroups e^{tP}, P = 1/2 Tr(Q D^2) + <Bx, D>.
namespace hypoctrl::ou {

using grid::Axis;
using grid::GridFunction;
using phase_space::OUSystem;

struct CovarianceQt {
  double t = 0.0;
  Mat Qt;
  double detQt = 0.0;
};

// Q_t = int_0^t e^{sB} Q e^{sB^T} ds. The block exponential
// exp(t [[B, Q], [0, -B^T]]) has upper-right block G(t) with G(t) e^{tB^T} = Q_t.
inline CovarianceQt covariance_qt(const Mat& q, const Mat& b, double t) {
  require(t >= 0, "covariance time must be nonnegative");
  const Eigen::Index n = q.rows();
  CovarianceQt c;
  c.t = t;
  if (t == 0.0) {
    c.Qt = Mat::Zero(n, n);
    c.detQt = 0.0;
    return c;
  }
  Mat big = Mat::Zero(2 * n, 2 * n);
  big.topLeftCorner(n, n) = t * b;
  big.topRightCorner(n, n) = t * q;
  big.bottomRightCorner(n, n) = -t * b.transpose();
  const Mat e = linalg::expm(big);
  c.Qt = linalg::symmetrize(Mat(e.topRightCorner(n, n) * linalg::expm(Mat(t * b.transpose()))));
  c.detQt = c.Qt.determinant();
  return c;
}

inline CovarianceQt covariance_qt(const OUSystem& sys, double t) {
  return covariance_qt(sys.Q(), sys.B(), t);
}

// Same integral by composite Gauss-Legendre; the fallback for stiff drift.
inline Mat covariance_qt_quadrature(const Mat& q, const Mat& b, double t, int panels = 8,
                                    int per_panel = 16) {
  const linalg::QuadratureRule rule = linalg::composite_gauss_legendre(0.0, t, panels, per_panel);
  Mat acc = Mat::Zero(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const Mat e = linalg::expm(Mat(rule.nodes(i) * b));
    acc += rule.weights(i) * e * q * e.transpose();
  }
  return linalg::symmetrize(acc);
}

inline Mat q_infinity(const OUSystem& sys) { return phase_space::checked_q_infinity(sys); }

// Invariant density rho(x) = (2 pi)^{-n/2} det(Q_inf)^{-1/2} exp(-1/2 <Q_inf^{-1} x, x>).
inline double rho(const Mat& q_inf, const Vec& x) {
  const double n = static_cast<double>(x.size());
  return std::pow(2.0 * std::numbers::pi, -0.5 * n) / std::sqrt(q_inf.determinant()) *
         std::exp(-0.5 * x.dot(q_inf.ldlt().solve(x)));
}

struct ApplyDiagnostics {
  // kolmogorov_apply
  double max_escape = 0.0;  // transported-box overshoot relative to the box half-width
  std::vector<int> nodes_per_axis;
  // fourier_apply
  bool aliasing_warning = false;
  double tail_fraction = 0.0;
};

struct KolmogorovOptions {
  int interpolation_order = 8;
  double truncation_sigmas = 8.0;
  // quadrature panels per whitened axis: panels_per_spacing * |L e_j| / h
  double panels_per_spacing = 2.0;
  int min_panels = 4;
  int nodes_per_panel = 8;
  // tolerated overshoot of e^{tB} (box) beyond the box, relative
  double boundary_margin = 0.5;
};

// Kolmogorov's formula: (e^{tP} f)(x) = E[f(e^{tB} x - Y)], Y ~ N(0, Q_t).
// Gauss-Legendre quadrature in whitened coordinates (Y = L Z, |Z_j| <= 8) with
// Lagrange interpolation of f. Quadrature offsets do not depend on x, so the
// quadrature-plus-interpolation sum is a fixed discrete convolution kernel;
// h = f * G_{Q_t} is formed on the grid by FFT and then h(e^{tB} x) is
// interpolated.
inline GridFunction kolmogorov_apply(const OUSystem& sys, const GridFunction& f, double t,
                                     const KolmogorovOptions& opt = {},
                                     ApplyDiagnostics* diag = nullptr) {
  const int n = sys.n();
  require(f.dim() == n, "grid dimension does not match the system");
  require(t > 0, "kolmogorov_apply needs t > 0");
  const CovarianceQt cov = covariance_qt(sys, t);
  require(cov.detQt > 0, "Q_t is singular (Kalman rank condition fails)",
          ErrorKind::hypoellipticity_fails);
  Eigen::LLT<Mat> llt(cov.Qt);
  require(llt.info() == Eigen::Success, "Q_t is not positive definite",
          ErrorKind::hypoellipticity_fails);
  const Mat L = llt.matrixL();
  const Mat etb = linalg::expm(Mat(t * sys.B()));

  // transported box corners must stay near the sampled domain
  double escape = 0.0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    Vec x(n);
    for (int d = 0; d < n; ++d) x(d) = ((corner >> d) & 1 ? 1.0 : -1.0) * f.axes()[d].half_width();
    const Vec y = etb * x;
    for (int d = 0; d < n; ++d) {
      const double hw = f.axes()[d].half_width();
      escape = std::max(escape, (std::abs(y(d)) - hw) / hw);
    }
  }
  if (diag) diag->max_escape = escape;
  require(escape <= opt.boundary_margin,
          "transported grid leaves the box by " + std::to_string(escape) + " of its half-width",
          ErrorKind::domain_escape);

  // quadrature rules per whitened axis, Gaussian weight folded in
  double hmin = INFINITY;
  for (const Axis& a : f.axes()) hmin = std::min(hmin, a.spacing);
  std::vector<linalg::QuadratureRule> rules(n);
  std::vector<int> counts(n);
  for (int d = 0; d < n; ++d) {
    const double col = L.col(d).norm();
    const int panels =
        std::max(opt.min_panels, static_cast<int>(std::ceil(opt.panels_per_spacing * col / hmin)));
    rules[d] = linalg::composite_gauss_legendre(-opt.truncation_sigmas, opt.truncation_sigmas,
                                                panels, opt.nodes_per_panel);
    for (Eigen::Index i = 0; i < rules[d].weights.size(); ++i)
      rules[d].weights(i) *= std::exp(-0.5 * rules[d].nodes(i) * rules[d].nodes(i)) /
                             std::sqrt(2.0 * std::numbers::pi);
    counts[d] = static_cast<int>(rules[d].nodes.size());
  }
  if (diag) diag->nodes_per_axis = counts;

  // kernel K[m] on the doubled periodic grid: h[i] = sum_m K[m] f[i - m]
  const int order = opt.interpolation_order;
  std::vector<int> shape(n);
  std::vector<std::size_t> kstride(n);
  std::size_t ksize = 1;
  for (int d = n - 1; d >= 0; --d) {
    shape[d] = 2 * f.axes()[d].points;
    kstride[d] = ksize;
    ksize *= static_cast<std::size_t>(shape[d]);
  }
  std::vector<cplx> kernel(ksize, cplx(0.0));
  {
    std::size_t total_nodes = 1;
    for (int c : counts) total_nodes *= static_cast<std::size_t>(c);
    std::vector<int> idx(n), start(n);
    std::vector<std::array<double, 16>> w(n);
    Vec z(n);
    for (std::size_t k = 0; k < total_nodes; ++k) {
      std::size_t rem = k;
      double wk = 1.0;
      for (int d = n - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(rem % counts[d]);
        rem /= counts[d];
        z(d) = rules[d].nodes(idx[d]);
        wk *= rules[d].weights(idx[d]);
      }
      // f(u - y) interpolated: offset m = -y / h with weights from the stencil
      const Vec y = L * z;
      bool inside = true;
      for (int d = 0; d < n; ++d) {
        const double u = -y(d) / f.axes()[d].spacing;
        grid::lagrange_weights(u, order, start[d], w[d].data());
        if (std::abs(u) > f.axes()[d].points - 1 + order) inside = false;
      }
      if (!inside) continue;
      // scatter the tensor stencil
      std::size_t combos = 1;
      for (int d = 0; d < n; ++d) combos *= static_cast<std::size_t>(order);
      for (std::size_t c = 0; c < combos; ++c) {
        std::size_t r = c, flat = 0;
        double weight = wk;
        bool reachable = true;
        for (int d = n - 1; d >= 0; --d) {
          const int j = static_cast<int>(r % order);
          r /= order;
          // h[i] gets f[i + start + j]; as a convolution offset m = -(start + j)
          const int m = -(start[d] + j);
          const int len = shape[d];
          // offsets of N or more never connect two grid points and would alias
          if (std::abs(m) >= f.axes()[d].points) reachable = false;
          flat += static_cast<std::size_t>(((m % len) + len) % len) * kstride[d];
          weight *= w[d][j];
        }
        if (reachable) kernel[flat] += weight;
      }
    }
  }
  std::vector<cplx> padded(ksize, cplx(0.0));
  {
    std::vector<int> idx;
    for (std::size_t i = 0; i < f.size(); ++i) {
      f.multi_index(i, idx);
      std::size_t flat = 0;
      for (int d = 0; d < n; ++d) flat += static_cast<std::size_t>(idx[d]) * kstride[d];
      padded[flat] = f[i];
    }
  }
  grid::fft_nd(kernel, shape, false);
  grid::fft_nd(padded, shape, false);
  for (std::size_t i = 0; i < ksize; ++i) padded[i] *= kernel[i];
  grid::fft_nd(padded, shape, true);
  GridFunction h(f.axes());
  {
    std::vector<int> idx;
    for (std::size_t i = 0; i < h.size(); ++i) {
      h.multi_index(i, idx);
      std::size_t flat = 0;
      for (int d = 0; d < n; ++d) flat += static_cast<std::size_t>(idx[d]) * kstride[d];
      h[i] = padded[flat];
    }
  }

  GridFunction out(f.axes());
  const grid::Interpolator interp(h, order);
  parallel_for(0, f.size(), [&](std::size_t i) {
    Vec x(n);
    out.coords(i, x);
    const Vec p = etb * x;
    out[i] = interp(p.data());
  });
  return out;
}

struct FourierOptions {
  int pad = 2;
  int interpolation_order = 8;
  double tail_tolerance = 1e-8;
};

// Fourier side: ghat(t, xi) = e^{-c t Tr B} g0hat(e^{-tB^T} xi) e^{-1/2 <Q'_t xi, xi>},
// c = 1/2 with the half-trace factor (generator P + 1/2 Tr B), else c = 1, and
// Q'_t the covariance of the time-reversed pair (Q, -B).
inline GridFunction fourier_apply(const OUSystem& sys, const GridFunction& f, double t,
                                  bool with_half_trace, const FourierOptions& opt = {},
                                  ApplyDiagnostics* diag = nullptr) {
  const int n = sys.n();
  require(f.dim() == n, "grid dimension does not match the system");
  require(t >= 0, "fourier_apply needs t >= 0");
  const GridFunction spec = grid::forward_transform(f, opt.pad);

  // spectral tail test: energy in the outer tenth of the band
  {
    double total = 0.0, tail = 0.0;
    std::vector<int> idx;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      spec.multi_index(i, idx);
      const double e = std::norm(spec[i]);
      total += e;
      bool outer = false;
      for (int d = 0; d < n; ++d) {
        const grid::Axis& a = spec.axes()[d];
        if (std::abs(idx[d] - a.center) > 0.45 * a.points) outer = true;
      }
      if (outer) tail += e;
    }
    const double frac = total > 0 ? tail / total : 0.0;
    if (diag) {
      diag->tail_fraction = frac;
      diag->aliasing_warning = frac > opt.tail_tolerance;
    }
    if (frac > opt.tail_tolerance)
      log(LogLevel::warn, "fourier_apply: spectral tail fraction " + std::to_string(frac));
  }

  const Mat qrev = covariance_qt(sys.Q(), Mat(-sys.B()), t).Qt;
  const Mat shear = linalg::expm(Mat(-t * sys.B().transpose()));
  const double trace_factor = std::exp(-(with_half_trace ? 0.5 : 1.0) * t * sys.B().trace());
  GridFunction out_spec(spec.axes());
  const grid::Interpolator interp(spec, opt.interpolation_order);
  const bool identity_shear = (shear - Mat::Identity(n, n)).cwiseAbs().maxCoeff() == 0.0;
  parallel_for(0, spec.size(), [&](std::size_t i) {
    Vec xi(n);
    out_spec.coords(i, xi);
    const double damp = std::exp(-0.5 * xi.dot(qrev * xi));
    if (damp == 0.0) return;
    cplx g0;
    if (identity_shear) {
      g0 = spec[i];
    } else {
      const Vec eta = shear * xi;
      g0 = interp(eta.data());
    }
    out_spec[i] = trace_factor * damp * g0;
  });
  return grid::inverse_transform(out_spec, f.axes());
}

// Lemma-alg integrand f_X(t) = int_0^t |Q^{1/2} e^{sB^T} X|^2 ds = X^T Q_t X,
// with Q_t assembled by quadrature.
inline double hypoellipticity_integrand(const OUSystem& sys, const Vec& x, double t) {
  const Mat qt = covariance_qt_quadrature(sys.Q(), sys.B(), t);
  return x.dot(qt * x);
}

struct HypoellipticityIndex {
  bool hypoelliptic = false;
  int k0 = -1;
  double c_hat = 0.0;
  double t0_hat = 0.0;
  std::vector<double> times;
  std::vector<double> ratios;  // min_X f_X(t) / t^{2k0+1}
};

// Quasi-uniform unit vectors: equally spaced angles for n=2, a Fibonacci
// lattice for n=3, normalized Gaussians otherwise.
inline std::vector<Vec> sphere_samples(int n, int count, unsigned seed = 7) {
  std::vector<Vec> out;
  if (n == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
    return out;
  }
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = std::numbers::pi * (i + 0.5) / count;  // half circle suffices
      Vec v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double r = std::sqrt(1.0 - z * z);
      Vec v(3);
      v << r * std::cos(golden * i), r * std::sin(golden * i), z;
      out.push_back(v);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < count; ++i) {
    Vec v(n);
    for (int d = 0; d < n; ++d) v(d) = normal(rng);
    out.push_back(v.normalized());
  }
  return out;
}

// Estimates c, t0 with int_0^t |Q^{1/2} e^{sB^T} X|^2 ds >= c t^{2k0+1} |X|^2 on
// (0, t0]. Dyadic times t_max 2^{-j}; the sampled minimum is augmented with
// the exact minimising direction at each t. Non-hypoelliptic systems give c = 0.
inline HypoellipticityIndex hypoellipticity_index(const OUSystem& sys, double t_max, int n_sphere,
                                                  int dyadic_levels = 16, unsigned seed = 7) {
  require(t_max > 0, "t_max must be positive");
  require(n_sphere >= 100, "n_sphere must be at least 100");
  HypoellipticityIndex out;
  const phase_space::KalmanResult kal = phase_space::kalman_analysis(sys);
  if (kal.rank < sys.n() || !kal.kalman_k0) return out;
  out.hypoelliptic = true;
  out.k0 = *kal.kalman_k0;
  const double power = 2.0 * out.k0 + 1.0;
  const std::vector<Vec> samples = sphere_samples(sys.n(), n_sphere, seed);
  for (int j = dyadic_levels; j >= 0; --j) {
    const double t = t_max * std::ldexp(1.0, -j);
    const Mat qt = covariance_qt_quadrature(sys.Q(), sys.B(), t);
    Eigen::SelfAdjointEigenSolver<Mat> es(qt);
    double fmin = es.eigenvectors().col(0).dot(qt * es.eigenvectors().col(0));
    for (const Vec& x : samples) fmin = std::min(fmin, x.dot(qt * x));
    require(fmin > 0.0, "nonpositive f_X(t) at t=" + std::to_string(t), ErrorKind::quadrature_failure);
    out.times.push_back(t);
    out.ratios.push_back(fmin / std::pow(t, power));
  }
  const double small_t = out.ratios.front();
  const double t_cap = std::min(1.0, t_max);
  out.c_hat = small_t;
  out.t0_hat = out.times.front();
  for (std::size_t i = 0; i < out.times.size(); ++i) {
    if (out.times[i] > t_cap * (1 + 1e-12) || out.ratios[i] < 0.5 * small_t) break;
    out.t0_hat = out.times[i];
    out.c_hat = std::min(out.c_hat, out.ratios[i]);
  }
  return out;
}

struct DissipationProfile {
  std::vector<double> times;
  std::vector<double> cutoffs;
  std::vector<double> fitted_delta;    // worst case over cutoffs, operator norm
  std::vector<double> measured_delta;  // min_k -log r(t,k) / k^2 for the supplied g0
  std::vector<std::vector<double>> r;  // r[t][k] = |(1 - pi_k) e^{tP~} g0| / |g0|
  double exponent_fit = 0.0;
  double fit_residual_log10 = 0.0;
  bool fit_rejected = false;
  double c_hat = 0.0;
  double t0_hat = 0.0;
};

// Dissipation in frequency: for e^{tP~} (half-trace generator) the transport is
// an isometry, so |(1 - pi_k) e^{tP~}| = exp(-k^2 lambda_min(Q'_t) / 2) and
// delta(t) = lambda_min(Q'_t) / 2 for every cutoff k.
inline DissipationProfile frequency_dissipation_profile(const OUSystem& sys, const GridFunction& g0,
                                                        const std::vector<double>& times,
                                                        const std::vector<double>& cutoffs,
                                                        const FourierOptions& opt = {}) {
  require(!times.empty() && !cutoffs.empty(), "times and cutoffs must be nonempty");
  DissipationProfile prof;
  prof.times = times;
  prof.cutoffs = cutoffs;
  const double norm0 = g0.l2_norm();
  require(norm0 > 0, "g0 must be nonzero");
  for (double t : times) {
    require(t > 0, "dissipation times must be positive");
    const Mat qrev = covariance_qt(sys.Q(), Mat(-sys.B()), t).Qt;
    double worst = INFINITY;
    for (double k : cutoffs) {
      require(k > 0, "cutoffs must be positive");
      const double log_norm = -0.5 * k * k * linalg::min_sym_eig(qrev);
      worst = std::min(worst, -log_norm / (k * k));
    }
    prof.fitted_delta.push_back(std::max(0.0, worst));

    const GridFunction g = fourier_apply(sys, g0, t, true, opt);
    const GridFunction spec = grid::forward_transform(g, 1);
    std::vector<double> row;
    double measured = INFINITY;
    for (double k : cutoffs) {
      double tail = 0.0;
      Vec xi(sys.n());
      for (std::size_t i = 0; i < spec.size(); ++i) {
        spec.coords(i, xi);
        if (xi.norm() > k) tail += std::norm(spec[i]);
      }
      // Parseval: |g|^2 = (2 pi)^{-n} int |ghat|^2
      double dxi = spec.cell_volume();
      const double rr = std::sqrt(tail * dxi / std::pow(2.0 * std::numbers::pi, sys.n())) / norm0;
      row.push_back(rr);
      if (rr > 0) measured = std::min(measured, -std::log(rr) / (k * k));
    }
    prof.r.push_back(row);
    prof.measured_delta.push_back(measured);
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (prof.fitted_delta[i] > 0) {
      lx.push_back(std::log(times[i]));
      ly.push_back(std::log(prof.fitted_delta[i]));
    }
  }
  const linalg::LineFit fit = linalg::fit_line(lx, ly);
  prof.exponent_fit = fit.slope;
  prof.fit_residual_log10 = fit.max_residual / std::log(10.0);
  prof.fit_rejected = lx.size() < 2 || prof.fit_residual_log10 > 0.1;
  // delta(t) >= c t^p on (0, t0]: c from the smallest time, t0 the plateau edge
  if (!lx.empty()) {
    const double p = fit.slope;
    const double c_small = prof.fitted_delta.front() / std::pow(times.front(), p);
    prof.c_hat = c_small;
    prof.t0_hat = times.front();
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double c = prof.fitted_delta[i] / std::pow(times[i], p);
      if (c < 0.5 * c_small) break;
      prof.c_hat = std::min(prof.c_hat, c);
      prof.t0_hat = times[i];
    }
  }
  return prof;
}

}  // namespace hypoctrl::ou
