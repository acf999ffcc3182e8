#include "swrom/pod.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace swrom {

SnapshotSet assemble_snapshots(std::span<const State> trajectory) {
  if (trajectory.empty()) throw DimensionError("assemble_snapshots: empty trajectory");
  const long n = trajectory.front().size();
  const long nt = static_cast<long>(trajectory.size());
  SnapshotSet s;
  s.su.resize(n, nt);
  s.sv.resize(n, nt);
  s.sh.resize(n, nt);
  for (long k = 0; k < nt; ++k) {
    if (trajectory[k].size() != n)
      throw DimensionError("assemble_snapshots: inconsistent state sizes");
    s.su.col(k) = trajectory[k].u;
    s.sv.col(k) = trajectory[k].v;
    s.sh.col(k) = trajectory[k].h;
  }
  s.mean_u = s.su.rowwise().mean();
  s.mean_v = s.sv.rowwise().mean();
  s.mean_h = s.sh.rowwise().mean();
  s.su.colwise() -= s.mean_u;
  s.sv.colwise() -= s.mean_v;
  s.sh.colwise() -= s.mean_h;
  return s;
}

long select_rank(const Vec& sigma, double kappa) {
  if (sigma.size() == 0) throw DimensionError("select_rank: empty spectrum");
  double total = 0.0;
  for (long j = 0; j < sigma.size(); ++j) total += sigma[j] * sigma[j];
  if (total == 0.0) throw Error("select_rank: all singular values vanish");
  const double target = (1.0 - kappa) * total;
  double cum = 0.0;
  for (long j = 0; j < sigma.size(); ++j) {
    cum += sigma[j] * sigma[j];
    if (cum > target) return j + 1;
  }
  return sigma.size();
}

ThinSvdResult thin_svd(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) throw DimensionError("svd_basis: empty matrix");
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU);
  ThinSvdResult out;
  out.U = svd.matrixU();
  out.sigma = svd.singularValues();
  const double floor = out.sigma.size()
                           ? out.sigma[0] *
                                 static_cast<double>(std::max(a.rows(), a.cols())) *
                                 std::numeric_limits<double>::epsilon()
                           : 0.0;
  for (long j = 0; j < out.sigma.size(); ++j)
    if (out.sigma[j] > floor) ++out.numerical_rank;
  if (out.numerical_rank == 0) throw Error("svd_basis: matrix is numerically zero");
  return out;
}

// sign convention: the entry of largest magnitude in each column is positive,
// first such entry on ties, so bases are reproducible
void fix_basis_signs(Mat& v) {
  for (long j = 0; j < v.cols(); ++j) {
    long arg = 0;
    double best = -1.0;
    for (long i = 0; i < v.rows(); ++i) {
      const double m = std::abs(v(i, j));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (v(arg, j) < 0.0) v.col(j) = -v.col(j);
  }
}

namespace {

long rule_rank(const ThinSvdResult& svd, const RankRule& rule) {
  if (rule.kind == RankRule::Kind::energy) return select_rank(svd.sigma, rule.kappa);
  if (rule.n < 1) throw ConfigError("svd_basis: fixed rank must be >= 1");
  return rule.n;
}

}  // namespace

SvdBasis svd_basis(const Mat& a, const RankRule& rule) {
  const ThinSvdResult svd = thin_svd(a);
  SvdBasis out;
  out.sigma = svd.sigma;
  long n = rule_rank(svd, rule);
  if (n > svd.numerical_rank) {
    out.truncated = true;
    n = svd.numerical_rank;
  }
  out.n = n;
  out.V = svd.U.leftCols(n);
  fix_basis_signs(out.V);
  return out;
}

PodBasis compute_pod_basis(const SnapshotSet& snaps, const RankRule& rule) {
  const ThinSvdResult su = thin_svd(snaps.su);
  const ThinSvdResult sv = thin_svd(snaps.sv);
  const ThinSvdResult sh = thin_svd(snaps.sh);
  // one shared mode count keeps the reduced blocks aligned; under the energy
  // rule take the largest per-variable selection so the criterion holds for
  // every variable, capped by the smallest numerical rank
  long n = std::max({rule_rank(su, rule), rule_rank(sv, rule), rule_rank(sh, rule)});
  const long cap = std::min({su.numerical_rank, sv.numerical_rank, sh.numerical_rank});
  PodBasis basis;
  basis.truncated = n > cap;
  if (n > cap) n = cap;
  basis.Vu = su.U.leftCols(n);
  basis.Vv = sv.U.leftCols(n);
  basis.Vh = sh.U.leftCols(n);
  fix_basis_signs(basis.Vu);
  fix_basis_signs(basis.Vv);
  fix_basis_signs(basis.Vh);
  basis.sig_u = su.sigma;
  basis.sig_v = sv.sigma;
  basis.sig_h = sh.sigma;
  basis.mean_u = snaps.mean_u;
  basis.mean_v = snaps.mean_v;
  basis.mean_h = snaps.mean_h;
  basis.n = n;
  return basis;
}

State lift(const Vec& zr, const PodBasis& basis) {
  const long n = basis.n;
  if (zr.size() != 3 * n) throw DimensionError("lift: reduced state length != 3n");
  State z;
  z.u = basis.mean_u + basis.Vu * zr.segment(0, n);
  z.v = basis.mean_v + basis.Vv * zr.segment(n, n);
  z.h = basis.mean_h + basis.Vh * zr.segment(2 * n, n);
  return z;
}

Vec project(const State& z, const PodBasis& basis) {
  if (z.size() != basis.Vu.rows()) throw DimensionError("project: state length != N");
  const long n = basis.n;
  Vec zr(3 * n);
  zr.segment(0, n) = basis.Vu.transpose() * (z.u - basis.mean_u);
  zr.segment(n, n) = basis.Vv.transpose() * (z.v - basis.mean_v);
  zr.segment(2 * n, n) = basis.Vh.transpose() * (z.h - basis.mean_h);
  return zr;
}

}  // namespace swrom
