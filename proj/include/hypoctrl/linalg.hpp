#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypoctrl/core.hpp"

namespace hypoctrl::linalg {

inline Mat expm(const Mat& a) { return a.exp(); }
inline CMat expm(const CMat& a) { return a.exp(); }

template <class M>
M symmetrize(const M& a) {
  return (a + a.transpose()) / 2.0;
}

inline CMat hermitian_part(const CMat& a) { return (a + a.adjoint()) / 2.0; }

inline double min_sym_eig(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const CMat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

// Symmetric square root with negative eigenvalues clipped to zero. Eigenvalues
// at round-off level are clipped too, otherwise the square root lifts them to
// ~1e-8 and they survive rank cutoffs.
inline Mat psd_sqrt(const Mat& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(q));
  const double top = es.eigenvalues().size() ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * top;
  Vec d = es.eigenvalues().unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline double max_real_eig(const Mat& b) {
  if (b.size() == 0) return -INFINITY;
  Eigen::EigenSolver<Mat> es(b, false);
  return es.eigenvalues().real().maxCoeff();
}

struct RankInfo {
  int rank = 0;
  // a singular value sits within a factor 10 of the cutoff
  bool near_threshold = false;
};

inline RankInfo rank_info(const Mat& a, double tol) {
  RankInfo info;
  if (a.size() == 0) return info;
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  if (smax == 0.0) return info;
  const double cut = tol * smax;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) >= cut) ++info.rank;
    if (s(i) > cut / 10.0 && s(i) < cut * 10.0) info.near_threshold = true;
  }
  return info;
}

// Orthonormal basis (columns) of the real null space, same cutoff as rank_info.
inline Mat null_space(const Mat& a, double tol, bool* near_threshold = nullptr) {
  const Eigen::Index cols = a.cols();
  if (a.rows() == 0) return Mat::Identity(cols, cols);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double cut = tol * smax;
  Eigen::Index r = 0;
  bool near = false;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (smax > 0.0 && s(i) >= cut) ++r;
    if (smax > 0.0 && s(i) > cut / 10.0 && s(i) < cut * 10.0) near = true;
  }
  if (near_threshold) *near_threshold = near;
  return svd.matrixV().rightCols(cols - r);
}

// Solves B X + X B^T = -Q over symmetric X (n(n+1)/2 unknowns).
inline Mat solve_lyapunov(const Mat& b, const Mat& q) {
  const int n = static_cast<int>(b.rows());
  const int m = n * (n + 1) / 2;
  auto idx = [n](int i, int j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
  };
  Mat a = Mat::Zero(m, m);
  Vec rhs(m);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const int row = idx(i, j);
      rhs(row) = -0.5 * (q(i, j) + q(j, i));
      for (int k = 0; k < n; ++k) {
        a(row, idx(k, j)) += b(i, k);
        a(row, idx(i, k)) += b(j, k);
      }
    }
  }
  Vec sol = a.fullPivLu().solve(rhs);
  Mat x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = sol(idx(i, j));
  return x;
}

struct QuadratureRule {
  Vec nodes;
  Vec weights;
};

// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_m.
inline QuadratureRule gauss_legendre(int m) {
  require(m >= 1, "gauss_legendre needs at least one node");
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
  }
  QuadratureRule rule{Vec(m), Vec(m)};
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = m * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes(i) = -x;
    rule.nodes(m - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(m - 1 - i) = w;
  }
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(m, rule);
  return rule;
}

// Composite Gauss-Legendre on [a, b] with equal panels.
inline QuadratureRule composite_gauss_legendre(double a, double b, int panels, int per_panel) {
  QuadratureRule base = gauss_legendre(per_panel);
  QuadratureRule out{Vec(panels * per_panel), Vec(panels * per_panel)};
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < per_panel; ++i) {
      out.nodes(p * per_panel + i) = mid + 0.5 * h * base.nodes(i);
      out.weights(p * per_panel + i) = 0.5 * h * base.weights(i);
    }
  }
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  double correlation = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.correlation = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    fit.max_residual = std::max(fit.max_residual, std::abs(y[i] - fit.slope * x[i] - fit.intercept));
  return fit;
}

// Largest singular value of a by power iteration on a^* a. `start` is a warm
// start and receives the final right singular vector.
inline double power_norm(const CMat& a, CVec* start = nullptr, int min_iter = 30,
                         int max_iter = 1000, double tol = 1e-8) {
  if (a.size() == 0) return 0.0;
  CVec v;
  if (start && start->size() == a.cols() && start->norm() > 0) {
    v = *start;
  } else {
    v = CVec::Ones(a.cols());
  }
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    CVec w = a * v;
    const double s = w.norm();
    CVec z = a.adjoint() * w;
    const double zn = z.norm();
    if (zn == 0.0) {
      sigma = s;
      break;
    }
    v = z / zn;
    const bool done = it + 1 >= min_iter && std::abs(s - sigma) <= tol * std::max(s, 1e-300);
    sigma = s;
    if (done) break;
  }
  if (start) *start = v;
  return sigma;
}

}  // namespace hypoctrl::linalg
