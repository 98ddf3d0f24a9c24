#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "hypoctrl/core.hpp"

namespace hypoctrl::grid {

// Uniform axis: coord(i) = (i - center) * spacing, center = (points-1)/2 for
// physical grids (symmetric about 0) and points/2 for DFT frequency grids.
struct Axis {
  int points = 0;
  double spacing = 0.0;
  double center = 0.0;

  Axis() = default;
  Axis(int points_, double spacing_) : points(points_), spacing(spacing_), center(0.5 * (points_ - 1)) {}
  Axis(int points_, double spacing_, double center_) : points(points_), spacing(spacing_), center(center_) {}

  static Axis from_box(int points, double half_width) {
    require(points >= 2, "axis needs at least two points");
    require(half_width > 0, "axis half-width must be positive");
    return Axis(points, 2.0 * half_width / (points - 1));
  }
  double coord(int i) const { return (i - center) * spacing; }
  double first() const { return coord(0); }
  double half_width() const { return 0.5 * (points - 1) * spacing; }
  // fractional index of a coordinate
  double index_of(double x) const { return x / spacing + center; }
  bool operator==(const Axis& o) const {
    return points == o.points && spacing == o.spacing && center == o.center;
  }
};

class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(std::vector<Axis> axes) : axes_(std::move(axes)) {
    require(!axes_.empty(), "grid needs at least one axis");
    std::size_t total = 1;
    strides_.assign(axes_.size(), 1);
    for (std::size_t d = axes_.size(); d-- > 0;) {
      strides_[d] = total;
      total *= static_cast<std::size_t>(axes_[d].points);
    }
    values_.assign(total, cplx(0.0));
  }

  template <class F>
  static GridFunction sample(std::vector<Axis> axes, F&& f) {
    GridFunction g(std::move(axes));
    Vec x(g.dim());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.coords(i, x);
      g.values_[i] = f(x);
    }
    return g;
  }

  int dim() const { return static_cast<int>(axes_.size()); }
  std::size_t size() const { return values_.size(); }
  const std::vector<Axis>& axes() const { return axes_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }

  double cell_volume() const {
    double v = 1.0;
    for (const Axis& a : axes_) v *= a.spacing;
    return v;
  }
  void multi_index(std::size_t flat, std::vector<int>& idx) const {
    idx.resize(axes_.size());
    for (std::size_t d = 0; d < axes_.size(); ++d) {
      idx[d] = static_cast<int>(flat / strides_[d]);
      flat %= strides_[d];
    }
  }
  void coords(std::size_t flat, Vec& x) const {
    x.resize(dim());
    for (std::size_t d = 0; d < axes_.size(); ++d) {
      x(d) = axes_[d].coord(static_cast<int>(flat / strides_[d]));
      flat %= strides_[d];
    }
  }
  double l2_norm() const {
    double s = 0.0;
    for (const cplx& v : values_) s += std::norm(v);
    return std::sqrt(s * cell_volume());
  }
  double sup_norm() const {
    double s = 0.0;
    for (const cplx& v : values_) s = std::max(s, std::abs(v));
    return s;
  }
  bool same_grid(const GridFunction& o) const { return axes_ == o.axes_; }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::vector<cplx> values_;
};

inline double l2_distance(const GridFunction& a, const GridFunction& b) {
  require(a.same_grid(b), "grid functions live on different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s * a.cell_volume());
}

// Lagrange weights for `order` consecutive nodes start, ..., start+order-1 at
// fractional index u.
inline void lagrange_weights(double u, int order, int& start, double* w) {
  start = static_cast<int>(std::floor(u)) - (order / 2 - 1);
  const double s = u - start;  // position inside the stencil, in [order/2-1, order/2)
  for (int i = 0; i < order; ++i) {
    double num = 1.0, den = 1.0;
    for (int j = 0; j < order; ++j) {
      if (j == i) continue;
      num *= (s - j);
      den *= (i - j);
    }
    w[i] = num / den;
  }
}

// Tensor Lagrange interpolation of a grid function at an arbitrary point;
// samples outside the grid count as zero.
class Interpolator {
 public:
  explicit Interpolator(const GridFunction& f, int order = 8) : f_(f), order_(order) {
    require(order >= 2 && order <= 16 && order % 2 == 0, "interpolation order must be even, 2..16");
  }
  int order() const { return order_; }

  cplx operator()(const double* x) const {
    const int n = f_.dim();
    std::array<int, 8> start{};
    std::array<std::array<double, 16>, 8> w{};
    require(n <= 8, "interpolation supports at most 8 dimensions");
    for (int d = 0; d < n; ++d) {
      const Axis& ax = f_.axes()[d];
      const double u = ax.index_of(x[d]);
      if (u < -order_ || u > ax.points - 1 + order_) return cplx(0.0);
      lagrange_weights(u, order_, start[d], w[d].data());
    }
    return accumulate(0, 0, 1.0, start, w);
  }

 private:
  cplx accumulate(int d, std::size_t offset, double weight, const std::array<int, 8>& start,
                  const std::array<std::array<double, 16>, 8>& w) const {
    const Axis& ax = f_.axes()[d];
    const std::size_t stride = f_.strides()[d];
    cplx acc(0.0);
    for (int i = 0; i < order_; ++i) {
      const int idx = start[d] + i;
      if (idx < 0 || idx >= ax.points) continue;
      const double wi = weight * w[d][i];
      if (d + 1 == f_.dim()) {
        acc += wi * f_[offset + idx * stride];
      } else {
        acc += accumulate(d + 1, offset + idx * stride, wi, start, w);
      }
    }
    return acc;
  }

  const GridFunction& f_;
  int order_;
};

// In-place n-dimensional FFT over row-major data.
inline void fft_nd(std::vector<cplx>& data, const std::vector<int>& shape, bool inverse) {
  Eigen::FFT<double> fft;
  std::size_t total = data.size();
  std::size_t stride = total;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    const std::size_t len = static_cast<std::size_t>(shape[d]);
    stride /= len;
    std::vector<cplx> in(len), out(len);
    const std::size_t block = len * stride;
    for (std::size_t outer = 0; outer < total; outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        for (std::size_t k = 0; k < len; ++k) in[k] = data[outer + inner + k * stride];
        if (inverse) {
          fft.inv(out, in);
        } else {
          fft.fwd(out, in);
        }
        for (std::size_t k = 0; k < len; ++k) data[outer + inner + k * stride] = out[k];
      }
    }
  }
}

inline std::vector<Axis> frequency_axes(const std::vector<Axis>& axes, int pad) {
  std::vector<Axis> out;
  for (const Axis& a : axes) {
    const int p = a.points * pad;
    out.push_back(Axis(p, 2.0 * std::numbers::pi / (p * a.spacing), p / 2));
  }
  return out;
}

inline double frequency_coord(const Axis& fa, int k) { return fa.coord(k); }

// Continuous Fourier transform fhat(xi) = int e^{-i x.xi} f(x) dx sampled on
// xi_k = (k - P/2) * 2 pi / (P h), P = pad * points, returned as a GridFunction
// over the frequency axes.
inline GridFunction forward_transform(const GridFunction& f, int pad) {
  const int n = f.dim();
  for (const Axis& a : f.axes()) require(a.points % 2 == 0, "Fourier grids need an even point count");
  std::vector<Axis> fax = frequency_axes(f.axes(), pad);
  std::vector<int> shape;
  for (const Axis& a : fax) shape.push_back(a.points);
  GridFunction spec(fax);
  // embed f into the padded grid, centred
  std::vector<int> idx;
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.multi_index(i, idx);
    std::size_t flat = 0;
    for (int d = 0; d < n; ++d) {
      const int off = (fax[d].points - f.axes()[d].points) / 2;
      flat += static_cast<std::size_t>(idx[d] + off) * spec.strides()[d];
    }
    spec[flat] = f[i];
  }
  fft_nd(spec.values(), shape, false);
  // reorder to centred frequencies and apply h^n e^{-i xi x0}
  GridFunction out(fax);
  const double vol = f.cell_volume();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.multi_index(i, idx);
    std::size_t src = 0;
    double phase = 0.0;
    for (int d = 0; d < n; ++d) {
      const int p = fax[d].points;
      const int k = (idx[d] - p / 2 + p) % p;
      src += static_cast<std::size_t>(k) * spec.strides()[d];
      const double x0 = -0.5 * (p - 1) * f.axes()[d].spacing;
      phase -= frequency_coord(fax[d], idx[d]) * x0;
    }
    out[i] = vol * spec[src] * std::polar(1.0, phase);
  }
  return out;
}

// Inverse of forward_transform, cropped back to `axes`.
inline GridFunction inverse_transform(const GridFunction& spec, const std::vector<Axis>& axes) {
  const int n = spec.dim();
  const std::vector<Axis>& fax = spec.axes();
  std::vector<int> shape;
  for (const Axis& a : fax) shape.push_back(a.points);
  GridFunction work(fax);
  std::vector<int> idx;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec.multi_index(i, idx);
    std::size_t dst = 0;
    double phase = 0.0;
    for (int d = 0; d < n; ++d) {
      const int p = fax[d].points;
      const int k = (idx[d] - p / 2 + p) % p;
      dst += static_cast<std::size_t>(k) * work.strides()[d];
      const double x0 = -0.5 * (p - 1) * axes[d].spacing;
      phase += frequency_coord(fax[d], idx[d]) * x0;
    }
    work[dst] = spec[i] * std::polar(1.0, phase);
  }
  fft_nd(work.values(), shape, true);
  GridFunction out(axes);
  double vol = 1.0;
  for (const Axis& a : axes) vol *= a.spacing;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.multi_index(i, idx);
    std::size_t src = 0;
    for (int d = 0; d < n; ++d) {
      const int off = (fax[d].points - axes[d].points) / 2;
      src += static_cast<std::size_t>(idx[d] + off) * work.strides()[d];
    }
    out[i] = work[src] / vol;
  }
  return out;
}

}  // namespace hypoctrl::grid
