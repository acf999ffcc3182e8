#include "swrom/invariants.hpp"

#include <cmath>

namespace swrom {

namespace {

// Neumaier compensated summation; the conservation checks sit near roundoff,
// so the plain SIMD sum's N*eps worst case is not good enough here
class CompensatedSum {
 public:
  void add(double x) {
    const double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

void check_state(const State& z, long n, const char* where) {
  if (z.u.size() != n || z.v.size() != n || z.h.size() != n)
    throw DimensionError(std::string(where) + ": state length does not match grid");
}

}  // namespace

double energy(const State& z, const GridSpec& grid, const Physics& phys) {
  check_state(z, grid.n(), "energy");
  CompensatedSum acc;
  for (long i = 0; i < grid.n(); ++i)
    acc.add((z.u[i] * z.u[i] + z.v[i] * z.v[i] + phys.g * z.h[i]) * z.h[i]);
  return 0.5 * grid.cell_area() * acc.value();
}

double enstrophy(const State& z, const DiffOps& ops, const Physics& phys) {
  const GridSpec& grid = ops.grid;
  check_state(z, grid.n(), "enstrophy");
  const long bad = z.first_nonpositive_depth();
  if (bad >= 0)
    throw PositivityError("enstrophy: h <= 0 at node " + std::to_string(bad), bad);
  const Field w = ops.dx * z.v - ops.dy * z.u + phys.f;
  CompensatedSum acc;
  for (long i = 0; i < grid.n(); ++i) acc.add(w[i] * w[i] / z.h[i]);
  return 0.5 * grid.cell_area() * acc.value();
}

std::pair<double, double> mass_and_vorticity(const State& z, const DiffOps& ops,
                                             const Physics& phys) {
  const GridSpec& grid = ops.grid;
  check_state(z, grid.n(), "mass_and_vorticity");
  const Field w = ops.dx * z.v - ops.dy * z.u + phys.f;
  CompensatedSum mass, vort;
  for (long i = 0; i < grid.n(); ++i) {
    mass.add(z.h[i]);
    vort.add(w[i]);
  }
  return {grid.cell_area() * mass.value(), grid.cell_area() * vort.value()};
}

InvariantSample invariant_sample(double t, const State& z, const DiffOps& ops,
                                 const Physics& phys) {
  const auto [m, v] = mass_and_vorticity(z, ops, phys);
  return InvariantSample{t, energy(z, ops.grid, phys), enstrophy(z, ops, phys), m, v};
}

InvariantErrors invariant_error_series(const InvariantSeries& series) {
  if (series.empty()) throw DimensionError("invariant_error_series: empty series");
  InvariantErrors e;
  const InvariantSample& ref = series.front();
  const long nt = static_cast<long>(series.size()) - 1;
  if (nt == 0) return e;
  for (long k = 1; k <= nt; ++k) {
    e.H += std::abs(series[k].H - ref.H);
    e.Z += std::abs(series[k].Z - ref.Z);
    e.M += std::abs(series[k].M - ref.M);
    e.V += std::abs(series[k].V - ref.V);
  }
  const double scale = 1.0 / static_cast<double>(nt);
  e.H *= scale;
  e.Z *= scale;
  e.M *= scale;
  e.V *= scale;
  return e;
}

namespace {

double l2_norm(const Field& w, double area) { return std::sqrt(w.squaredNorm() * area); }

}  // namespace

VariableErrors relative_l2_error(std::span<const State> reference, std::span<const State> test,
                                 const GridSpec& grid) {
  if (reference.size() != test.size())
    throw DimensionError("relative_l2_error: trajectory lengths differ");
  if (reference.empty()) throw DimensionError("relative_l2_error: empty trajectories");
  const double area = grid.cell_area();
  VariableErrors e;
  for (size_t k = 0; k < reference.size(); ++k) {
    check_state(reference[k], grid.n(), "relative_l2_error");
    check_state(test[k], grid.n(), "relative_l2_error");
    const double nu = l2_norm(reference[k].u, area);
    const double nv = l2_norm(reference[k].v, area);
    const double nh = l2_norm(reference[k].h, area);
    if (nu == 0.0 || nv == 0.0 || nh == 0.0)
      throw Error("relative_l2_error: reference norm vanishes at step " + std::to_string(k + 1));
    e.u += l2_norm(reference[k].u - test[k].u, area) / nu;
    e.v += l2_norm(reference[k].v - test[k].v, area) / nv;
    e.h += l2_norm(reference[k].h - test[k].h, area) / nh;
  }
  const double scale = 1.0 / static_cast<double>(reference.size());
  e.u *= scale;
  e.v *= scale;
  e.h *= scale;
  return e;
}

}  // namespace swrom
