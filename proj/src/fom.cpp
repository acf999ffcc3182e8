#include "swrom/fom.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <string>
#include <vector>

namespace swrom {

Field potential_vorticity(const State& z, const DiffOps& ops, const Physics& phys) {
  const long bad = z.first_nonpositive_depth();
  if (bad >= 0)
    throw PositivityError("potential_vorticity: h <= 0 at node " + std::to_string(bad), bad);
  return (ops.dx * z.v - ops.dy * z.u + phys.f).cwiseQuotient(z.h);
}

Vec gradient_hamiltonian(const State& z, const Physics& phys) {
  const long n = z.size();
  Vec g(3 * n);
  g.segment(0, n) = z.u.cwiseProduct(z.h);
  g.segment(n, n) = z.v.cwiseProduct(z.h);
  g.segment(2 * n, n) =
      0.5 * (z.u.cwiseProduct(z.u) + z.v.cwiseProduct(z.v)) + phys.g * z.h;
  return g;
}

Vec poisson_apply(const State& z_mid, const Vec& w, const DiffOps& ops, const Physics& phys) {
  const long n = z_mid.size();
  if (w.size() != 3 * n) throw DimensionError("poisson_apply: vector length != 3N");
  const Field q = potential_vorticity(z_mid, ops, phys);
  const auto w1 = w.segment(0, n), w2 = w.segment(n, n), w3 = w.segment(2 * n, n);
  Vec out(3 * n);
  out.segment(0, n) = q.cwiseProduct(w2) - ops.dx * w3;
  out.segment(n, n) = -q.cwiseProduct(w1) - ops.dy * w3;
  out.segment(2 * n, n) = -(ops.dx * w1) - ops.dy * w2;
  return out;
}

Vec rhs_hamiltonian(const State& z, const DiffOps& ops, const Physics& phys) {
  return poisson_apply(z, gradient_hamiltonian(z, phys), ops, phys);
}

Vec avf_integral(const State& z_k, const State& z_k1, const Physics& phys) {
  const long n = z_k.size();
  if (z_k1.size() != n) throw DimensionError("avf_integral: state sizes differ");
  Vec out(3 * n);
  out.segment(0, n) = (z_k1.u.cwiseProduct(z_k1.h) + z_k.u.cwiseProduct(z_k.h)) / 3.0 +
                      (z_k1.u.cwiseProduct(z_k.h) + z_k.u.cwiseProduct(z_k1.h)) / 6.0;
  out.segment(n, n) = (z_k1.v.cwiseProduct(z_k1.h) + z_k.v.cwiseProduct(z_k.h)) / 3.0 +
                      (z_k1.v.cwiseProduct(z_k.h) + z_k.v.cwiseProduct(z_k1.h)) / 6.0;
  // the h gradient is linear along the segment, so its average is the midpoint
  out.segment(2 * n, n) =
      (z_k1.u.cwiseProduct(z_k1.u) + z_k1.u.cwiseProduct(z_k.u) + z_k.u.cwiseProduct(z_k.u) +
       z_k1.v.cwiseProduct(z_k1.v) + z_k1.v.cwiseProduct(z_k.v) + z_k.v.cwiseProduct(z_k.v)) /
          6.0 +
      (0.5 * phys.g) * (z_k1.h + z_k.h);
  return out;
}

Vec rhs_fplane(const State& z, const DiffOps& ops, const Physics& phys) {
  const long n = z.size();
  const Field dxu = ops.dx * z.u, dyu = ops.dy * z.u;
  const Field dxv = ops.dx * z.v, dyv = ops.dy * z.v;
  Vec out(3 * n);
  out.segment(0, n) =
      -z.u.cwiseProduct(dxu) - z.v.cwiseProduct(dyu) - phys.g * (ops.dx * z.h) +
      phys.f.cwiseProduct(z.v);
  out.segment(n, n) =
      -z.u.cwiseProduct(dxv) - z.v.cwiseProduct(dyv) - phys.g * (ops.dy * z.h) -
      phys.f.cwiseProduct(z.u);
  out.segment(2 * n, n) =
      -(ops.dx * z.u.cwiseProduct(z.h)) - ops.dy * z.v.cwiseProduct(z.h);
  return out;
}

namespace {

// triplet accumulator for 3x3 block sparse matrices; every structural term is
// always emitted (zeros included) so the pattern is identical across states
// and the symbolic factorization can be reused
class BlockAssembler {
 public:
  explicit BlockAssembler(long n) : n_(n) { trips_.reserve(16 * 3 * n); }

  void diag(int bi, int bj, const Field& d, double scale = 1.0) {
    for (long i = 0; i < n_; ++i)
      trips_.emplace_back(bi * n_ + i, bj * n_ + i, scale * d[i]);
  }

  void identity(int bi, int bj, double value) {
    for (long i = 0; i < n_; ++i) trips_.emplace_back(bi * n_ + i, bj * n_ + i, value);
  }

  // diag(d) * D
  void diag_op(int bi, int bj, const Field& d, const SpMat& D, double scale = 1.0) {
    for (int outer = 0; outer < D.outerSize(); ++outer)
      for (SpMat::InnerIterator it(D, outer); it; ++it)
        trips_.emplace_back(bi * n_ + it.row(), bj * n_ + it.col(),
                            scale * d[it.row()] * it.value());
  }

  // D * diag(d)
  void op_diag(int bi, int bj, const SpMat& D, const Field& d, double scale = 1.0) {
    for (int outer = 0; outer < D.outerSize(); ++outer)
      for (SpMat::InnerIterator it(D, outer); it; ++it)
        trips_.emplace_back(bi * n_ + it.row(), bj * n_ + it.col(),
                            scale * it.value() * d[it.col()]);
  }

  void op(int bi, int bj, const SpMat& D, double scale) {
    for (int outer = 0; outer < D.outerSize(); ++outer)
      for (SpMat::InnerIterator it(D, outer); it; ++it)
        trips_.emplace_back(bi * n_ + it.row(), bj * n_ + it.col(), scale * it.value());
  }

  SpMat build() const {
    SpMat m(3 * n_, 3 * n_);
    m.setFromTriplets(trips_.begin(), trips_.end());
    m.makeCompressed();
    return m;
  }

 private:
  long n_;
  std::vector<Eigen::Triplet<double>> trips_;
};

State midpoint(const State& a, const State& b) {
  return State{0.5 * (a.u + b.u), 0.5 * (a.v + b.v), 0.5 * (a.h + b.h)};
}

}  // namespace

SpMat jacobian_fplane(const State& z, const DiffOps& ops, const Physics& phys) {
  const long n = z.size();
  const Field dxu = ops.dx * z.u, dyu = ops.dy * z.u;
  const Field dxv = ops.dx * z.v, dyv = ops.dy * z.v;
  BlockAssembler a(n);
  a.diag(0, 0, dxu, -1.0);
  a.diag_op(0, 0, z.u, ops.dx, -1.0);
  a.diag_op(0, 0, z.v, ops.dy, -1.0);
  a.diag(0, 1, dyu, -1.0);
  a.diag(0, 1, phys.f, 1.0);
  a.op(0, 2, ops.dx, -phys.g);
  a.diag(1, 0, dxv, -1.0);
  a.diag(1, 0, phys.f, -1.0);
  a.diag(1, 1, dyv, -1.0);
  a.diag_op(1, 1, z.u, ops.dx, -1.0);
  a.diag_op(1, 1, z.v, ops.dy, -1.0);
  a.op(1, 2, ops.dy, -phys.g);
  a.op_diag(2, 0, ops.dx, z.h, -1.0);
  a.op_diag(2, 1, ops.dy, z.h, -1.0);
  a.op_diag(2, 2, ops.dx, z.u, -1.0);
  a.op_diag(2, 2, ops.dy, z.v, -1.0);
  return a.build();
}

SpMat avf_residual_jacobian(const State& z_k, const State& z_k1, const DiffOps& ops,
                            const Physics& phys) {
  const long n = z_k.size();
  const State zm = midpoint(z_k, z_k1);
  const Field q = potential_vorticity(zm, ops, phys);
  const Vec integral = avf_integral(z_k, z_k1, phys);
  const Field i1 = integral.segment(0, n), i2 = integral.segment(n, n);
  const Field inv_hm = zm.h.cwiseInverse();
  const Field alpha = z_k1.h / 3.0 + z_k.h / 6.0;
  const Field beta_u = z_k1.u / 3.0 + z_k.u / 6.0;
  const Field beta_v = z_k1.v / 3.0 + z_k.v / 6.0;
  const Field du = (2.0 * z_k1.u + z_k.u) / 6.0;
  const Field dv = (2.0 * z_k1.v + z_k.v) / 6.0;

  BlockAssembler a(n);
  // row 1: d/dz' of  q(m).I2 - Dx I3
  a.diag_op(0, 0, i2.cwiseProduct(inv_hm), ops.dy, -0.5);
  a.op_diag(0, 0, ops.dx, du, -1.0);
  a.diag_op(0, 1, i2.cwiseProduct(inv_hm), ops.dx, 0.5);
  a.diag(0, 1, q.cwiseProduct(alpha), 1.0);
  a.op_diag(0, 1, ops.dx, dv, -1.0);
  a.diag(0, 2, i2.cwiseProduct(q).cwiseProduct(inv_hm), -0.5);
  a.diag(0, 2, q.cwiseProduct(beta_v), 1.0);
  a.op(0, 2, ops.dx, -0.5 * phys.g);
  // row 2: d/dz' of  -q(m).I1 - Dy I3
  a.diag_op(1, 0, i1.cwiseProduct(inv_hm), ops.dy, 0.5);
  a.diag(1, 0, q.cwiseProduct(alpha), -1.0);
  a.op_diag(1, 0, ops.dy, du, -1.0);
  a.diag_op(1, 1, i1.cwiseProduct(inv_hm), ops.dx, -0.5);
  a.op_diag(1, 1, ops.dy, dv, -1.0);
  a.diag(1, 2, i1.cwiseProduct(q).cwiseProduct(inv_hm), 0.5);
  a.diag(1, 2, q.cwiseProduct(beta_u), -1.0);
  a.op(1, 2, ops.dy, -0.5 * phys.g);
  // row 3: d/dz' of  -Dx I1 - Dy I2
  a.op_diag(2, 0, ops.dx, alpha, -1.0);
  a.op_diag(2, 1, ops.dy, alpha, -1.0);
  a.op_diag(2, 2, ops.dx, beta_u, -1.0);
  a.op_diag(2, 2, ops.dy, beta_v, -1.0);
  return a.build();
}

namespace {

using Solver = Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>>;

SpMat identity_minus(const SpMat& a, double scale, long dim) {
  SpMat id(dim, dim);
  id.setIdentity();
  SpMat m = id - scale * a;
  m.makeCompressed();
  return m;
}

void check_positive_accepted(const State& z, const char* scheme) {
  const long bad = z.first_nonpositive_depth();
  if (bad >= 0)
    throw PositivityError(std::string(scheme) + ": accepted state has h <= 0 at node " +
                              std::to_string(bad),
                          bad);
}

}  // namespace

struct AvfStepper::Impl {
  DiffOps ops;
  Physics phys;
  SolverOptions opts;
  Solver solver;
  bool analyzed = false;

  Impl(const DiffOps& o, const Physics& p, const SolverOptions& s) : ops(o), phys(p), opts(s) {}

  State step(const State& z, double dt, StepStats* stats) {
    const long n = z.size();
    const double tol = opts.newton_tol * (1.0 + z.pack().norm());
    State zn = z;  // initial guess
    Vec residual(3 * n);
    auto eval_residual = [&](const State& cand) -> Vec {
      const State zm = midpoint(z, cand);
      const Vec flow = poisson_apply(zm, avf_integral(z, cand, phys), ops, phys);
      Vec r(3 * n);
      r.segment(0, n) = cand.u - z.u - dt * flow.segment(0, n);
      r.segment(n, n) = cand.v - z.v - dt * flow.segment(n, n);
      r.segment(2 * n, n) = cand.h - z.h - dt * flow.segment(2 * n, n);
      return r;
    };
    residual = eval_residual(zn);
    int it = 0;
    while (residual.norm() > tol) {
      if (it >= opts.newton_max_iter)
        throw ConvergenceError("avf_step: Newton did not converge after " +
                                   std::to_string(opts.newton_max_iter) +
                                   " iterations, residual " + std::to_string(residual.norm()),
                               residual.norm());
      const SpMat a =
          identity_minus(avf_residual_jacobian(z, zn, ops, phys), dt, 3 * n);
      if (!analyzed) {
        solver.analyzePattern(a);
        analyzed = true;
      }
      solver.factorize(a);
      if (solver.info() != Eigen::Success)
        throw SolverError("avf_step: sparse factorization failed");
      const Vec delta = solver.solve(residual);
      if (stats) {
        ++stats->factorizations;
        ++stats->linear_solves;
        ++stats->newton_iterations;
      }
      zn.u -= delta.segment(0, n);
      zn.v -= delta.segment(n, n);
      zn.h -= delta.segment(2 * n, n);
      residual = eval_residual(zn);
      ++it;
    }
    // re-evaluate the update map at the converged point so the accepted state
    // satisfies the discrete flow identically in floating point; this is what
    // keeps mass constant to roundoff instead of to the Newton tolerance
    const State zm = midpoint(z, zn);
    const Vec flow = poisson_apply(zm, avf_integral(z, zn, phys), ops, phys);
    State out;
    out.u = z.u + dt * flow.segment(0, n);
    out.v = z.v + dt * flow.segment(n, n);
    out.h = z.h + dt * flow.segment(2 * n, n);
    check_positive_accepted(out, "avf_step");
    return out;
  }
};

AvfStepper::AvfStepper(const DiffOps& ops, const Physics& phys, const SolverOptions& opts)
    : impl_(std::make_unique<Impl>(ops, phys, opts)) {}
AvfStepper::~AvfStepper() = default;
State AvfStepper::step(const State& z, double dt, StepStats* stats) {
  return impl_->step(z, dt, stats);
}

struct KahanStepper::Impl {
  DiffOps ops;
  Physics phys;
  SolverOptions opts;
  Solver solver;
  bool analyzed = false;

  Impl(const DiffOps& o, const Physics& p, const SolverOptions& s) : ops(o), phys(p), opts(s) {}

  State step(const State& z, double dt, StepStats* stats) {
    const long n = z.size();
    const SpMat a = identity_minus(jacobian_fplane(z, ops, phys), 0.5 * dt, 3 * n);
    if (!analyzed) {
      solver.analyzePattern(a);
      analyzed = true;
    }
    solver.factorize(a);
    if (solver.info() != Eigen::Success)
      throw SolverError("kahan_step: sparse factorization failed");
    const Vec d = solver.solve(rhs_fplane(z, ops, phys));
    if (stats) {
      ++stats->factorizations;
      ++stats->linear_solves;
    }
    State out{z.u + dt * d.segment(0, n), z.v + dt * d.segment(n, n),
              z.h + dt * d.segment(2 * n, n)};
    check_positive_accepted(out, "kahan_step");
    return out;
  }
};

KahanStepper::KahanStepper(const DiffOps& ops, const Physics& phys, const SolverOptions& opts)
    : impl_(std::make_unique<Impl>(ops, phys, opts)) {}
KahanStepper::~KahanStepper() = default;
State KahanStepper::step(const State& z, double dt, StepStats* stats) {
  return impl_->step(z, dt, stats);
}

State avf_step(const State& z, double dt, const DiffOps& ops, const Physics& phys,
               const SolverOptions& opts, StepStats* stats) {
  AvfStepper stepper(ops, phys, opts);
  return stepper.step(z, dt, stats);
}

State kahan_step(const State& z, double dt, const DiffOps& ops, const Physics& phys,
                 const SolverOptions& opts, StepStats* stats) {
  KahanStepper stepper(ops, phys, opts);
  return stepper.step(z, dt, stats);
}

State integrate(const State& z0, Scheme scheme, const TimeSpec& ts, const DiffOps& ops,
                const Physics& phys, const SolverOptions& opts, const StepSink& sink,
                StepStats* stats) {
  if (z0.size() != ops.grid.n()) throw DimensionError("integrate: state does not match grid");
  State z = z0;
  if (ts.nt == 0) return z;
  if (scheme == Scheme::avf) {
    AvfStepper stepper(ops, phys, opts);
    for (long k = 1; k <= ts.nt; ++k) {
      z = stepper.step(z, ts.dt, stats);
      if (sink) sink(k, static_cast<double>(k) * ts.dt, z);
    }
  } else {
    KahanStepper stepper(ops, phys, opts);
    for (long k = 1; k <= ts.nt; ++k) {
      z = stepper.step(z, ts.dt, stats);
      if (sink) sink(k, static_cast<double>(k) * ts.dt, z);
    }
  }
  return z;
}

}  // namespace swrom
