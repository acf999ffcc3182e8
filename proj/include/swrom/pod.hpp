#pragma once

#include <span>

#include "swrom/grid.hpp"
#include "swrom/types.hpp"

namespace swrom {

// mean-centered snapshot matrices, one column per retained time level t_1..t_nt
struct SnapshotSet {
  Mat su, sv, sh;
  Field mean_u, mean_v, mean_h;
};

SnapshotSet assemble_snapshots(std::span<const State> trajectory);

struct RankRule {
  enum class Kind { fixed, energy } kind = Kind::fixed;
  long n = 0;
  double kappa = 0.0;

  static RankRule fixed(long n) { return RankRule{Kind::fixed, n, 0.0}; }
  static RankRule energy(double kappa) { return RankRule{Kind::energy, 0, kappa}; }
};

// smallest n with sum_{j<=n} s_j^2 / sum_j s_j^2 > 1 - kappa
long select_rank(const Vec& sigma, double kappa);

// thin SVD with the numerical rank relative to sigma_1 * max(dims) * eps
struct ThinSvdResult {
  Mat U;
  Vec sigma;
  long numerical_rank = 0;
};
ThinSvdResult thin_svd(const Mat& a);

// flips columns so the entry of largest magnitude is positive (first on ties)
void fix_basis_signs(Mat& v);

// thin SVD basis of a raw matrix plus the full singular value vector;
// truncated is set when a fixed rank exceeded the numerical rank
struct SvdBasis {
  Mat V;
  Vec sigma;
  long n = 0;
  bool truncated = false;
};
SvdBasis svd_basis(const Mat& a, const RankRule& rule);

struct PodBasis {
  Mat Vu, Vv, Vh;            // N x n each, orthonormal columns
  Vec sig_u, sig_v, sig_h;   // full singular value vectors, length min(N, nt)
  Field mean_u, mean_v, mean_h;
  long n = 0;
  bool truncated = false;
};

PodBasis compute_pod_basis(const SnapshotSet& snaps, const RankRule& rule);

// lift: z = mean + V z_r; project: z_r = V^T (z - mean)
State lift(const Vec& zr, const PodBasis& basis);
Vec project(const State& z, const PodBasis& basis);

}  // namespace swrom
