#pragma once

#include <functional>

#include "swrom/types.hpp"

namespace swrom {

// Uniform periodic grid on [a,b) x [c,d). Nodes x_i = a + i*dx, y_j = c + j*dy
// with i < nx, j < ny; the right/top boundary is identified with the left/bottom
// one. Fields are stored with the y index fastest:  idx(i,j) = i*ny + j.
struct GridSpec {
  long nx = 0, ny = 0;
  double a = 0, b = 1, c = 0, d = 1;
  double dx = 0, dy = 0;

  GridSpec() = default;
  GridSpec(long nx_, long ny_, double a_ = 0, double b_ = 1, double c_ = 0, double d_ = 1)
      : nx(nx_), ny(ny_), a(a_), b(b_), c(c_), d(d_) {
    if (nx < 3 || ny < 3) throw ConfigError("GridSpec: need nx, ny >= 3");
    if (!(a < b) || !(c < d)) throw ConfigError("GridSpec: need a < b and c < d");
    dx = (b - a) / static_cast<double>(nx);
    dy = (d - c) / static_cast<double>(ny);
  }

  long n() const { return nx * ny; }
  long index(long i, long j) const { return i * ny + j; }
  double x(long i) const { return a + static_cast<double>(i) * dx; }
  double y(long j) const { return c + static_cast<double>(j) * dy; }
  double cell_area() const { return dx * dy; }
};

// s x s skew-symmetric central-difference circulant (unscaled, entries +-1):
// +1 on the first superdiagonal, -1 on the first subdiagonal, -1 at (1,s),
// +1 at (s,1) in 1-based notation. Requires s >= 3.
SpMat build_circulant_diff(long s);

struct DiffOps {
  GridSpec grid;
  SpMat dx;  // (1/2dx) Dtilde_nx (x) I_ny
  SpMat dy;  // (1/2dy) I_nx (x) Dtilde_ny
};

DiffOps build_diff_ops(const GridSpec& grid);

// sample a function of (x,y) at the grid nodes in storage order
Field discretize_field(const GridSpec& grid, const std::function<double(double, double)>& f);

}  // namespace swrom
