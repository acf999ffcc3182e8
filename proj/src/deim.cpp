#include "swrom/deim.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace swrom {

NonlinearSnapshotSet collect_nonlinearity_snapshots(std::span<const State> trajectory,
                                                    const DiffOps& ops, const Physics& phys) {
  if (trajectory.empty())
    throw DimensionError("collect_nonlinearity_snapshots: empty trajectory");
  const long n = trajectory.front().size();
  const long nt = static_cast<long>(trajectory.size());
  NonlinearSnapshotSet g;
  g.g1.resize(n, nt);
  g.g2.resize(n, nt);
  g.g3.resize(n, nt);
  for (long k = 0; k < nt; ++k) {
    const Vec f = rhs_hamiltonian(trajectory[k], ops, phys);
    g.g1.col(k) = f.segment(0, n);
    g.g2.col(k) = f.segment(n, n);
    g.g3.col(k) = f.segment(2 * n, n);
  }
  return g;
}

namespace {

long argmax_abs(const Vec& r) {
  long arg = 0;
  double best = -1.0;
  for (long i = 0; i < r.size(); ++i) {
    const double m = std::abs(r[i]);
    if (m > best) {  // strict: ties keep the smallest index
      best = m;
      arg = i;
    }
  }
  return arg;
}

}  // namespace

std::vector<long> deim_points(const Mat& v) {
  const long m = v.cols();
  if (m < 1 || v.rows() < m) throw DimensionError("deim_points: need N >= m >= 1 columns");
  std::vector<long> idx;
  idx.reserve(m);
  std::set<long> seen;
  idx.push_back(argmax_abs(v.col(0)));
  seen.insert(idx[0]);
  for (long j = 1; j < m; ++j) {
    Mat a(j, j);
    Vec rhs(j);
    for (long r = 0; r < j; ++r) {
      for (long c = 0; c < j; ++c) a(r, c) = v(idx[r], c);
      rhs[r] = v(idx[r], j);
    }
    Eigen::FullPivLU<Mat> lu(a);
    if (!lu.isInvertible())
      throw SolverError("deim_points: singular interpolation system at mode " +
                        std::to_string(j));
    const Vec c = lu.solve(rhs);
    const Vec r = v.col(j) - v.leftCols(j) * c;
    const long p = argmax_abs(r);
    if (seen.count(p))
      throw SolverError("deim_points: duplicate interpolation point at mode " +
                        std::to_string(j));
    idx.push_back(p);
    seen.insert(p);
  }
  return idx;
}

namespace {

DeimComponent build_component(const Mat& vw, const Mat& u_full, long m) {
  DeimComponent c;
  c.VF = u_full.leftCols(m);
  fix_basis_signs(c.VF);
  c.idx = deim_points(c.VF);
  Mat ptv(m, m);
  for (long r = 0; r < m; ++r) ptv.row(r) = c.VF.row(c.idx[r]);
  Eigen::FullPivLU<Mat> lu(ptv);
  if (!lu.isInvertible())
    throw SolverError("build_deim_operator: P^T V_F is singular");
  Eigen::JacobiSVD<Mat> svd(ptv);
  c.cond = svd.singularValues()(0) / svd.singularValues()(m - 1);
  c.proj = (vw.transpose() * c.VF) * lu.inverse();
  return c;
}

}  // namespace

DeimOperator build_deim_operator(const PodBasis& basis, const NonlinearSnapshotSet& snaps,
                                 const RankRule& rule) {
  const ThinSvdResult t1 = thin_svd(snaps.g1);
  const ThinSvdResult t2 = thin_svd(snaps.g2);
  const ThinSvdResult t3 = thin_svd(snaps.g3);
  long m = 0;
  if (rule.kind == RankRule::Kind::energy) {
    m = std::max({select_rank(t1.sigma, rule.kappa), select_rank(t2.sigma, rule.kappa),
                  select_rank(t3.sigma, rule.kappa)});
  } else {
    if (rule.n < 1) throw ConfigError("build_deim_operator: fixed m must be >= 1");
    m = rule.n;
  }
  const long cap = std::min({t1.numerical_rank, t2.numerical_rank, t3.numerical_rank});
  if (m > cap) m = cap;

  DeimOperator op;
  op.m = m;
  op.c1 = build_component(basis.Vu, t1.U, m);
  op.c2 = build_component(basis.Vv, t2.U, m);
  op.c3 = build_component(basis.Vh, t3.U, m);
  return op;
}

// ---------------------------------------------------------------------------
// sampled evaluation machinery
//
// Each sampled row of a component block touches only the five stencil nodes
// (center, x+-1, y+-1). The stepper packs the basis rows of those nodes once;
// per evaluation everything is a handful of small dense products whose sizes
// depend on m and n only.

namespace {

constexpr long kStencil = 5;  // center, xp, xm, yp, ym

struct PackedComponent {
  std::vector<long> nodes;  // 5 per sampled row
  Mat bu, bv, bh;           // (5m) x n packed basis rows
  Vec mu, mv, mh;           // (5m) packed means
  Vec f_center;             // Coriolis at the center nodes
};

struct Gathered {
  Vec u, v, h;  // lifted values at the packed nodes, length 5m
};

PackedComponent pack_component(const std::vector<long>& idx, const GridSpec& grid,
                               const PodBasis& basis, const Physics& phys) {
  const long m = static_cast<long>(idx.size());
  PackedComponent pc;
  pc.nodes.resize(kStencil * m);
  pc.bu.resize(kStencil * m, basis.n);
  pc.bv.resize(kStencil * m, basis.n);
  pc.bh.resize(kStencil * m, basis.n);
  pc.mu.resize(kStencil * m);
  pc.mv.resize(kStencil * m);
  pc.mh.resize(kStencil * m);
  pc.f_center.resize(m);
  for (long r = 0; r < m; ++r) {
    const long p = idx[r];
    const long i = p / grid.ny, j = p % grid.ny;
    const long stencil[kStencil] = {
        p,
        grid.index((i + 1) % grid.nx, j),
        grid.index((i - 1 + grid.nx) % grid.nx, j),
        grid.index(i, (j + 1) % grid.ny),
        grid.index(i, (j - 1 + grid.ny) % grid.ny),
    };
    for (long s = 0; s < kStencil; ++s) {
      const long node = stencil[s];
      const long row = r * kStencil + s;
      pc.nodes[row] = node;
      pc.bu.row(row) = basis.Vu.row(node);
      pc.bv.row(row) = basis.Vv.row(node);
      pc.bh.row(row) = basis.Vh.row(node);
      pc.mu[row] = basis.mean_u[node];
      pc.mv[row] = basis.mean_v[node];
      pc.mh[row] = basis.mean_h[node];
    }
    pc.f_center[r] = phys.f[p];
  }
  return pc;
}

Gathered gather(const PackedComponent& pc, const Vec& zr, long n, EvalStats* stats) {
  Gathered g;
  g.u = pc.mu + pc.bu * zr.segment(0, n);
  g.v = pc.mv + pc.bv * zr.segment(n, n);
  g.h = pc.mh + pc.bh * zr.segment(2 * n, n);
  if (stats) stats->node_gathers += 3 * g.u.size();
  return g;
}

enum Slot { C = 0, XP = 1, XM = 2, YP = 3, YM = 4 };

}  // namespace

struct DeimAvfStepper::Impl {
  DeimOperator op;
  PodBasis basis;
  SolverOptions opts;
  double inv2dx, inv2dy;
  double g;
  PackedComponent p1, p2, p3;

  Impl(const DeimOperator& op_, const PodBasis& basis_, const DiffOps& ops,
       const Physics& phys, const SolverOptions& opts_)
      : op(op_), basis(basis_), opts(opts_) {
    inv2dx = 1.0 / (2.0 * ops.grid.dx);
    inv2dy = 1.0 / (2.0 * ops.grid.dy);
    g = phys.g;
    p1 = pack_component(op.c1.idx, ops.grid, basis, phys);
    p2 = pack_component(op.c2.idx, ops.grid, basis, phys);
    p3 = pack_component(op.c3.idx, ops.grid, basis, phys);
  }

  // segment average of grad H components at one packed slot
  static double avg_i1(const Gathered& a, const Gathered& b, long s) {
    return (b.u[s] * b.h[s] + a.u[s] * a.h[s]) / 3.0 +
           (b.u[s] * a.h[s] + a.u[s] * b.h[s]) / 6.0;
  }
  static double avg_i2(const Gathered& a, const Gathered& b, long s) {
    return (b.v[s] * b.h[s] + a.v[s] * a.h[s]) / 3.0 +
           (b.v[s] * a.h[s] + a.v[s] * b.h[s]) / 6.0;
  }
  double avg_i3(const Gathered& a, const Gathered& b, long s) const {
    return (b.u[s] * b.u[s] + b.u[s] * a.u[s] + a.u[s] * a.u[s] + b.v[s] * b.v[s] +
            b.v[s] * a.v[s] + a.v[s] * a.v[s]) /
               6.0 +
           0.5 * g * (b.h[s] + a.h[s]);
  }

  double q_mid(const PackedComponent& pc, const Gathered& a, const Gathered& b, long r) const {
    const long o = r * kStencil;
    const double dxv = 0.5 * ((a.v[o + XP] + b.v[o + XP]) - (a.v[o + XM] + b.v[o + XM])) * inv2dx;
    const double dyu = 0.5 * ((a.u[o + YP] + b.u[o + YP]) - (a.u[o + YM] + b.u[o + YM])) * inv2dy;
    const double hm = 0.5 * (a.h[o + C] + b.h[o + C]);
    if (!(hm > 0.0))
      throw PositivityError("reduced AVF evaluation: midpoint h <= 0 at sampled node " +
                                std::to_string(pc.nodes[o + C]),
                            pc.nodes[o + C]);
    return (dxv - dyu + pc.f_center[r]) / hm;
  }

  // sampled rows of J((a+b)/2) avf_integral(a, b), three component vectors
  void combine_avf(const Gathered& a1, const Gathered& b1, const Gathered& a2,
                   const Gathered& b2, const Gathered& a3, const Gathered& b3, Vec& f1, Vec& f2,
                   Vec& f3, EvalStats* stats) const {
    const long m = op.m;
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      const double q = q_mid(p1, a1, b1, r);
      const double i2c = avg_i2(a1, b1, o + C);
      f1[r] = q * i2c - (avg_i3(a1, b1, o + XP) - avg_i3(a1, b1, o + XM)) * inv2dx;
    }
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      const double q = q_mid(p2, a2, b2, r);
      const double i1c = avg_i1(a2, b2, o + C);
      f2[r] = -q * i1c - (avg_i3(a2, b2, o + YP) - avg_i3(a2, b2, o + YM)) * inv2dy;
    }
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      f3[r] = -(avg_i1(a3, b3, o + XP) - avg_i1(a3, b3, o + XM)) * inv2dx -
              (avg_i2(a3, b3, o + YP) - avg_i2(a3, b3, o + YM)) * inv2dy;
    }
    if (stats) stats->rows_evaluated += 3 * m;
  }

  // sampled rows of the instantaneous right-hand side J(z) grad H(z)
  void combine_plain(const Gathered& g1, const Gathered& g2, const Gathered& g3, Vec& f1,
                     Vec& f2, Vec& f3, EvalStats* stats) const {
    const long m = op.m;
    auto phi = [&](const Gathered& gg, long s) {
      return 0.5 * (gg.u[s] * gg.u[s] + gg.v[s] * gg.v[s]) + g * gg.h[s];
    };
    auto q_of = [&](const PackedComponent& pc, const Gathered& gg, long r) {
      const long o = r * kStencil;
      const double dxv = (gg.v[o + XP] - gg.v[o + XM]) * inv2dx;
      const double dyu = (gg.u[o + YP] - gg.u[o + YM]) * inv2dy;
      if (!(gg.h[o + C] > 0.0))
        throw PositivityError("reduced rhs evaluation: h <= 0 at sampled node " +
                                  std::to_string(pc.nodes[o + C]),
                              pc.nodes[o + C]);
      return (dxv - dyu + pc.f_center[r]) / gg.h[o + C];
    };
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      f1[r] = q_of(p1, g1, r) * g1.v[o + C] * g1.h[o + C] -
              (phi(g1, o + XP) - phi(g1, o + XM)) * inv2dx;
    }
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      f2[r] = -q_of(p2, g2, r) * g2.u[o + C] * g2.h[o + C] -
              (phi(g2, o + YP) - phi(g2, o + YM)) * inv2dy;
    }
    for (long r = 0; r < m; ++r) {
      const long o = r * kStencil;
      f3[r] = -(g3.u[o + XP] * g3.h[o + XP] - g3.u[o + XM] * g3.h[o + XM]) * inv2dx -
              (g3.v[o + YP] * g3.h[o + YP] - g3.v[o + YM] * g3.h[o + YM]) * inv2dy;
    }
    if (stats) stats->rows_evaluated += 3 * m;
  }

  Vec project_samples(const Vec& f1, const Vec& f2, const Vec& f3) const {
    const long n = basis.n;
    Vec out(3 * n);
    out.segment(0, n) = op.c1.proj * f1;
    out.segment(n, n) = op.c2.proj * f2;
    out.segment(2 * n, n) = op.c3.proj * f3;
    return out;
  }

  Vec reduced_rhs(const Vec& zr, EvalStats* stats) {
    if (zr.size() != 3 * basis.n)
      throw DimensionError("reduced_rhs_deim: reduced state length != 3n");
    const Gathered g1 = gather(p1, zr, basis.n, stats);
    const Gathered g2 = gather(p2, zr, basis.n, stats);
    const Gathered g3 = gather(p3, zr, basis.n, stats);
    Vec f1(op.m), f2(op.m), f3(op.m);
    combine_plain(g1, g2, g3, f1, f2, f3, stats);
    return project_samples(f1, f2, f3);
  }

  // dt * V_i P_i^T F_i^avf(lift(za), lift(xb)) stacked and projected
  Vec sampled_flow(const Gathered& a1, const Gathered& a2, const Gathered& a3,
                   const Gathered& b1, const Gathered& b2, const Gathered& b3,
                   EvalStats* stats) {
    Vec f1(op.m), f2(op.m), f3(op.m);
    combine_avf(a1, b1, a2, b2, a3, b3, f1, f2, f3, stats);
    return project_samples(f1, f2, f3);
  }

  Vec step(const Vec& zr, double dt, StepStats* stats, EvalStats* eval_stats) {
    const long n3 = 3 * basis.n;
    if (zr.size() != n3) throw DimensionError("avf_step_reduced: reduced state length != 3n");
    const double tol = opts.newton_tol * (1.0 + zr.norm());
    const Gathered a1 = gather(p1, zr, basis.n, eval_stats);
    const Gathered a2 = gather(p2, zr, basis.n, eval_stats);
    const Gathered a3 = gather(p3, zr, basis.n, eval_stats);

    Vec x = zr;
    Gathered b1 = a1, b2 = a2, b3 = a3;  // candidate = zr initially
    auto regather = [&](const Vec& cand) {
      b1 = gather(p1, cand, basis.n, eval_stats);
      b2 = gather(p2, cand, basis.n, eval_stats);
      b3 = gather(p3, cand, basis.n, eval_stats);
    };
    auto residual_from = [&](const Vec& cand, const Gathered& c1, const Gathered& c2,
                             const Gathered& c3) {
      Vec f1(op.m), f2(op.m), f3(op.m);
      combine_avf(a1, c1, a2, c2, a3, c3, f1, f2, f3, eval_stats);
      return Vec(cand - zr - dt * project_samples(f1, f2, f3));
    };

    Vec rho = residual_from(x, b1, b2, b3);
    int it = 0;
    const double fd_base = std::sqrt(std::numeric_limits<double>::epsilon());
    while (rho.norm() > tol) {
      if (it >= opts.newton_max_iter)
        throw ConvergenceError(
            "avf_step_reduced: Newton did not converge, residual " + std::to_string(rho.norm()),
            rho.norm());
      // finite-difference Jacobian of the residual; the gathered values are
      // affine in the reduced state, so a perturbed column only shifts one
      // packed block by eps times a basis column
      Mat jac(n3, n3);
      for (long j = 0; j < n3; ++j) {
        const double eps = fd_base * (1.0 + std::abs(x[j]));
        Vec xp = x;
        xp[j] += eps;
        Gathered c1 = b1, c2 = b2, c3 = b3;
        const long blk = j / basis.n, jj = j % basis.n;
        if (blk == 0) {
          c1.u += eps * p1.bu.col(jj);
          c2.u += eps * p2.bu.col(jj);
          c3.u += eps * p3.bu.col(jj);
        } else if (blk == 1) {
          c1.v += eps * p1.bv.col(jj);
          c2.v += eps * p2.bv.col(jj);
          c3.v += eps * p3.bv.col(jj);
        } else {
          c1.h += eps * p1.bh.col(jj);
          c2.h += eps * p2.bh.col(jj);
          c3.h += eps * p3.bh.col(jj);
        }
        if (eval_stats) eval_stats->node_gathers += kStencil * op.m * 3;
        jac.col(j) = (residual_from(xp, c1, c2, c3) - rho) / eps;
      }
      const Vec delta = jac.partialPivLu().solve(rho);
      if (stats) {
        ++stats->linear_solves;
        ++stats->factorizations;
        ++stats->newton_iterations;
      }
      x -= delta;
      regather(x);
      rho = residual_from(x, b1, b2, b3);
      ++it;
    }
    // accept the exact update map at the converged point (same reasoning as
    // the full-order AVF step)
    Vec f1(op.m), f2(op.m), f3(op.m);
    combine_avf(a1, b1, a2, b2, a3, b3, f1, f2, f3, eval_stats);
    return zr + dt * project_samples(f1, f2, f3);
  }
};

DeimAvfStepper::DeimAvfStepper(const DeimOperator& op, const PodBasis& basis,
                               const DiffOps& ops, const Physics& phys,
                               const SolverOptions& opts)
    : impl_(std::make_unique<Impl>(op, basis, ops, phys, opts)) {}
DeimAvfStepper::~DeimAvfStepper() = default;

Vec DeimAvfStepper::step(const Vec& zr, double dt, StepStats* stats, EvalStats* eval_stats) {
  return impl_->step(zr, dt, stats, eval_stats);
}

Vec DeimAvfStepper::reduced_rhs(const Vec& zr, EvalStats* eval_stats) {
  return impl_->reduced_rhs(zr, eval_stats);
}

Vec reduced_rhs_deim(const Vec& zr, const DeimOperator& op, const PodBasis& basis,
                     const DiffOps& ops, const Physics& phys, EvalStats* stats) {
  DeimAvfStepper stepper(op, basis, ops, phys, SolverOptions{});
  return stepper.reduced_rhs(zr, stats);
}

Vec avf_step_reduced(const Vec& zr, double dt, const DeimOperator& op, const PodBasis& basis,
                     const DiffOps& ops, const Physics& phys, const SolverOptions& opts,
                     StepStats* stats, EvalStats* eval_stats) {
  DeimAvfStepper stepper(op, basis, ops, phys, opts);
  return stepper.step(zr, dt, stats, eval_stats);
}

}  // namespace swrom
