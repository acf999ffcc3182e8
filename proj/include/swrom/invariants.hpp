#pragma once

#include <span>
#include <utility>
#include <vector>

#include "swrom/grid.hpp"
#include "swrom/types.hpp"

namespace swrom {

// H = (1/2) sum (u^2 + v^2 + g h) h dx dy
double energy(const State& z, const GridSpec& grid, const Physics& phys);

// Z = (1/2) sum (Dx v - Dy u + f)^2 / h dx dy, requires h > 0 everywhere
double enstrophy(const State& z, const DiffOps& ops, const Physics& phys);

// M = sum h dx dy,  V = sum (Dx v - Dy u + f) dx dy
std::pair<double, double> mass_and_vorticity(const State& z, const DiffOps& ops,
                                             const Physics& phys);

struct InvariantSample {
  double t, H, Z, M, V;
};
using InvariantSeries = std::vector<InvariantSample>;

InvariantSample invariant_sample(double t, const State& z, const DiffOps& ops,
                                 const Physics& phys);

// time-averaged absolute deviation from the first entry:
// (1/nt) sum_{k=1..nt} |E^k - E^0| per invariant, nt = series.size() - 1
struct InvariantErrors {
  double H = 0, Z = 0, M = 0, V = 0;
};
InvariantErrors invariant_error_series(const InvariantSeries& series);

// time-averaged relative L2 errors per variable over matched trajectories
// (1/nt) sum_k |w^k - wh^k|_L2 / |w^k|_L2 with |w|_L2 = sqrt(sum w^2 dx dy)
struct VariableErrors {
  double u = 0, v = 0, h = 0;
};
VariableErrors relative_l2_error(std::span<const State> reference, std::span<const State> test,
                                 const GridSpec& grid);

}  // namespace swrom
