#include "swrom/grid.hpp"

#include <vector>

namespace swrom {

SpMat build_circulant_diff(long s) {
  if (s < 3) throw ConfigError("build_circulant_diff: need s >= 3");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * s);
  for (long r = 0; r < s; ++r) {
    trips.emplace_back(r, (r + 1) % s, 1.0);
    trips.emplace_back(r, (r - 1 + s) % s, -1.0);
  }
  SpMat m(s, s);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

namespace {

// A (x) I_k and I_k (x) A for the lexicographic layout idx(i,j) = i*ny + j
SpMat kron_left(const SpMat& a, long k, double scale) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(a.nonZeros()) * k);
  for (int outer = 0; outer < a.outerSize(); ++outer)
    for (SpMat::InnerIterator it(a, outer); it; ++it)
      for (long j = 0; j < k; ++j)
        trips.emplace_back(it.row() * k + j, it.col() * k + j, scale * it.value());
  SpMat m(a.rows() * k, a.cols() * k);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

SpMat kron_right(long k, const SpMat& a, double scale) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(a.nonZeros()) * k);
  for (long blk = 0; blk < k; ++blk)
    for (int outer = 0; outer < a.outerSize(); ++outer)
      for (SpMat::InnerIterator it(a, outer); it; ++it)
        trips.emplace_back(blk * a.rows() + it.row(), blk * a.cols() + it.col(),
                           scale * it.value());
  SpMat m(a.rows() * k, a.cols() * k);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

DiffOps build_diff_ops(const GridSpec& grid) {
  const SpMat cx = build_circulant_diff(grid.nx);
  const SpMat cy = build_circulant_diff(grid.ny);
  DiffOps ops;
  ops.grid = grid;
  ops.dx = kron_left(cx, grid.ny, 1.0 / (2.0 * grid.dx));
  ops.dy = kron_right(grid.nx, cy, 1.0 / (2.0 * grid.dy));
  return ops;
}

Field discretize_field(const GridSpec& grid, const std::function<double(double, double)>& f) {
  Field w(grid.n());
  for (long i = 0; i < grid.nx; ++i)
    for (long j = 0; j < grid.ny; ++j) w[grid.index(i, j)] = f(grid.x(i), grid.y(j));
  return w;
}

}  // namespace swrom
