#include "doctest.h"
#include "oracles.hpp"
#include "swrom/fom.hpp"
#include "swrom/invariants.hpp"

#include <cmath>

using namespace swrom;

namespace {

// smooth positive test state with nontrivial dynamics
State make_bump(const GridSpec& g) {
  constexpr double pi = 3.14159265358979323846;
  State z;
  z.h = discretize_field(g, [](double x, double y) {
    return 1.0 + 0.5 * std::exp(-25.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)));
  });
  z.u = discretize_field(
      g, [pi](double x, double y) { return -(0.5 / pi) * std::sin(pi * x) * std::sin(2 * pi * y); });
  z.v = discretize_field(
      g, [pi](double x, double y) { return (0.5 / pi) * std::sin(2 * pi * x) * std::sin(pi * y); });
  return z;
}

double rel_diff(const Vec& a, const Vec& b) { return (a - b).norm() / (1.0 + b.norm()); }

}  // namespace

TEST_SUITE("fom") {

TEST_CASE("gradient of the Hamiltonian") {
  const GridSpec g(5, 4);
  const Physics phys = Physics::constant(3.0, 0.0, g.n());
  auto gen = oracles::rng(21);
  const State z = oracles::random_state(g.n(), gen);
  const Vec grad = gradient_hamiltonian(z, phys);
  CHECK(rel_diff(grad, oracles::dense_gradient_hamiltonian(z, phys)) < 1e-15);

  // independent finite-difference check against the summed Hamiltonian
  const auto ham = [&](const Vec& packed) {
    const State s = State::unpack(packed);
    double acc = 0.0;
    for (long i = 0; i < s.size(); ++i)
      acc += 0.5 * (s.u[i] * s.u[i] + s.v[i] * s.v[i] + phys.g * s.h[i]) * s.h[i];
    Vec one(1);
    one[0] = acc;
    return one;
  };
  const Mat fd = oracles::fd_jacobian(ham, z.pack());
  CHECK((fd.row(0).transpose() - grad).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("average integral equals two-point Gauss quadrature") {
  const GridSpec g(4, 4);
  const Physics phys = Physics::constant(2.5, 0.0, g.n());
  auto gen = oracles::rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const State za = oracles::random_state(g.n(), gen);
    const State zb = oracles::random_state(g.n(), gen);
    const Vec lib = avf_integral(za, zb, phys);
    const Vec quad = oracles::gauss2_gradient_average(za, zb, phys);
    CHECK(rel_diff(lib, quad) < 1e-13);
  }
}

TEST_CASE("average integral degenerates to the gradient") {
  const GridSpec g(4, 5);
  const Physics phys = Physics::constant(1.7, 0.3, g.n());
  auto gen = oracles::rng(23);
  const State z = oracles::random_state(g.n(), gen);
  CHECK(rel_diff(avf_integral(z, z, phys), gradient_hamiltonian(z, phys)) < 1e-15);
}

TEST_CASE("Poisson structure matrix: action and skew symmetry") {
  const GridSpec g(5, 5);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.4, g.n());
  auto gen = oracles::rng(24);
  const State z = oracles::random_state(g.n(), gen);
  const Mat j = oracles::dense_poisson_matrix(z, ops, phys);
  CHECK((j + j.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec w = oracles::random_vec(3 * g.n(), gen);
    CHECK(rel_diff(poisson_apply(z, w, ops, phys), j * w) < 1e-13);
  }
  State bad = z;
  bad.h[3] = 0.0;
  CHECK_THROWS_AS(poisson_apply(bad, Vec::Zero(3 * g.n()), ops, phys), PositivityError);
}

TEST_CASE("Hamiltonian right-hand side matches a dense matrix oracle") {
  const GridSpec g(6, 4, 0.0, 1.0, 0.0, 2.0);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(9.81, 0.7, g.n());
  auto gen = oracles::rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    const State z = oracles::random_state(g.n(), gen);
    const Vec direct = rhs_hamiltonian(z, ops, phys);
    const Vec assembled =
        oracles::dense_poisson_matrix(z, ops, phys) * oracles::dense_gradient_hamiltonian(z, phys);
    CHECK((direct - assembled).norm() < 1e-13 * assembled.norm());
  }

  const GridSpec gb(8, 8);
  const DiffOps opsb = build_diff_ops(gb);
  const Physics physb = Physics::constant(1.0, 0.2, gb.n());
  const State zb = make_bump(gb);
  const Vec direct = rhs_hamiltonian(zb, opsb, physb);
  const Vec assembled = oracles::dense_poisson_matrix(zb, opsb, physb) *
                        oracles::dense_gradient_hamiltonian(zb, physb);
  CHECK((direct - assembled).norm() < 1e-13 * assembled.norm());
}

TEST_CASE("advective and vector-invariant forms agree at second order") {
  // the two right-hand sides discretize the same PDE but differ by the
  // central-difference product-rule defect, which is O(dx^2) on smooth fields;
  // the continuity rows are algebraically identical
  constexpr double pi = 3.14159265358979323846;
  const auto defect = [&](long nside) {
    const GridSpec g(nside, nside);
    const DiffOps ops = build_diff_ops(g);
    const Physics phys = Physics::constant(1.0, 0.3, g.n());
    State z;
    z.u = discretize_field(
        g, [pi](double x, double y) { return 0.4 * std::sin(2 * pi * x) * std::cos(2 * pi * y); });
    z.v = discretize_field(g, [pi](double x, double y) {
      return -0.3 * std::cos(2 * pi * x) * std::sin(2 * pi * y);
    });
    z.h = discretize_field(
        g, [pi](double x, double y) { return 1.0 + 0.2 * std::sin(2 * pi * x) * std::sin(2 * pi * y); });
    const Vec d = rhs_hamiltonian(z, ops, phys) - rhs_fplane(z, ops, phys);
    const long n = g.n();
    CHECK(d.segment(2 * n, n).cwiseAbs().maxCoeff() < 1e-13);
    return d.head(2 * n).cwiseAbs().maxCoeff();
  };
  const double d16 = defect(16), d32 = defect(32);
  CHECK(d16 > 1e-6);  // the forms are genuinely different discretizations
  const double ratio = d16 / d32;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("analytic Jacobians match finite differences") {
  const GridSpec g(4, 4);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(2.0, 0.5, g.n());
  auto gen = oracles::rng(26);
  const State z = oracles::random_state(g.n(), gen);

  const auto f = [&](const Vec& p) { return rhs_fplane(State::unpack(p), ops, phys); };
  CHECK((Mat(jacobian_fplane(z, ops, phys)) - oracles::fd_jacobian(f, z.pack()))
            .cwiseAbs()
            .maxCoeff() < 1e-6);

  const State zk = oracles::random_state(g.n(), gen);
  const auto flow = [&](const Vec& p) {
    const State zn = State::unpack(p);
    State mid;
    mid.u = 0.5 * (zk.u + zn.u);
    mid.v = 0.5 * (zk.v + zn.v);
    mid.h = 0.5 * (zk.h + zn.h);
    return poisson_apply(mid, avf_integral(zk, zn, phys), ops, phys);
  };
  const State zn0 = oracles::random_state(g.n(), gen);
  CHECK((Mat(avf_residual_jacobian(zk, zn0, ops, phys)) - oracles::fd_jacobian(flow, zn0.pack()))
            .cwiseAbs()
            .maxCoeff() < 1e-6);
}

TEST_CASE("avf step conserves mass and energy") {
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z = make_bump(g);
  SolverOptions opts;
  opts.newton_tol = 1e-12;
  StepStats stats;
  const State zn = avf_step(z, 0.05, ops, phys, opts, &stats);
  CHECK(stats.newton_iterations >= 1);
  CHECK(stats.factorizations == stats.newton_iterations);

  const double h0 = energy(z, g, phys), h1 = energy(zn, g, phys);
  CHECK(std::abs(h1 - h0) <= 1e-10 * std::abs(h0));
  const auto [m0, v0] = mass_and_vorticity(z, ops, phys);
  const auto [m1, v1] = mass_and_vorticity(zn, ops, phys);
  CHECK(std::abs(m1 - m0) <= 1e-13 * std::abs(m0));
  CHECK(std::abs(v1 - v0) <= 1e-13 * (1.0 + std::abs(v0)));
}

TEST_CASE("avf mass conservation survives a loose Newton tolerance") {
  // the accepted state is a re-evaluated conservative update, so the mass
  // defect stays at roundoff even when the Newton iteration stops early
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z = make_bump(g);
  SolverOptions opts;
  opts.newton_tol = 1e-6;
  const State zn = avf_step(z, 0.05, ops, phys, opts);
  const auto [m0, v0] = mass_and_vorticity(z, ops, phys);
  const auto [m1, v1] = mass_and_vorticity(zn, ops, phys);
  CHECK(std::abs(m1 - m0) <= 1e-13 * std::abs(m0));
}

TEST_CASE("avf step is time symmetric") {
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.1, g.n());
  const State z = make_bump(g);
  SolverOptions opts;
  opts.newton_tol = 1e-12;
  const State fwd = avf_step(z, 0.05, ops, phys, opts);
  const State back = avf_step(fwd, -0.05, ops, phys, opts);
  CHECK((back.pack() - z.pack()).norm() <= 100 * opts.newton_tol * (1.0 + z.pack().norm()));
}

TEST_CASE("kahan step solves the polarized implicit equation") {
  const GridSpec g(6, 6);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.3, 0.2, g.n());
  const State z = make_bump(g);
  const double dt = 0.05;
  const State zn = kahan_step(z, dt, ops, phys);

  // linear part extracted at the zero state, where the quadratic terms vanish
  State zero;
  zero.u = Field::Zero(g.n());
  zero.v = Field::Zero(g.n());
  zero.h = Field::Zero(g.n());
  const SpMat l = jacobian_fplane(zero, ops, phys);
  State sum;
  sum.u = z.u + zn.u;
  sum.v = z.v + zn.v;
  sum.h = z.h + zn.h;
  const Vec polarized = 0.5 * (rhs_fplane(sum, ops, phys) - rhs_fplane(z, ops, phys) -
                               rhs_fplane(zn, ops, phys)) +
                        0.5 * (l * (z.pack() + zn.pack()));
  const Vec residual = (zn.pack() - z.pack()) / dt - polarized;
  CHECK(residual.norm() <= 1e-11 * (1.0 + z.pack().norm()));
}

TEST_CASE("kahan step conserves mass and uses one solve per step") {
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z0 = make_bump(g);
  const TimeSpec ts = TimeSpec::from_steps(0.4, 8);
  StepStats stats;
  const State zn = integrate(z0, Scheme::kahan, ts, ops, phys, {}, {}, &stats);
  CHECK(stats.linear_solves == 8);
  CHECK(stats.factorizations == 8);
  CHECK(stats.newton_iterations == 0);
  const auto [m0, v0] = mass_and_vorticity(z0, ops, phys);
  const auto [m1, v1] = mass_and_vorticity(zn, ops, phys);
  CHECK(std::abs(m1 - m0) <= 1e-12 * std::abs(m0));
}

TEST_CASE("integrate bookkeeping") {
  const GridSpec g(5, 5);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z0 = make_bump(g);

  const TimeSpec none = TimeSpec::from_steps(0.1, 0);
  const State same = integrate(z0, Scheme::kahan, none, ops, phys);
  CHECK((same.pack() - z0.pack()).cwiseAbs().maxCoeff() == 0.0);

  std::vector<long> ks;
  std::vector<double> t_seen;
  const TimeSpec ts = TimeSpec::from_steps(0.75, 3);
  integrate(z0, Scheme::kahan, ts, ops, phys, {},
            [&](long k, double t, const State&) {
              ks.push_back(k);
              t_seen.push_back(t);
            });
  CHECK(ks == std::vector<long>{1, 2, 3});
  CHECK(t_seen[2] == doctest::Approx(0.75));

  State wrong = z0;
  wrong.u = Field::Zero(7);
  wrong.v = Field::Zero(7);
  wrong.h = Field::Ones(7);
  CHECK_THROWS_AS(integrate(wrong, Scheme::kahan, ts, ops, phys), DimensionError);
}

TEST_CASE("positivity loss is reported") {
  const GridSpec g(5, 5);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  State z;
  z.u = Field::Constant(g.n(), 0.1);
  z.v = Field::Constant(g.n(), -0.1);
  z.h = Field::Constant(g.n(), -1.0);
  CHECK_THROWS_AS(kahan_step(z, 0.05, ops, phys), PositivityError);
}

TEST_CASE("avf Newton reports non-convergence") {
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z = make_bump(g);
  SolverOptions opts;
  opts.newton_tol = 1e-15;
  opts.newton_max_iter = 1;
  CHECK_THROWS_AS(avf_step(z, 0.5, ops, phys, opts), ConvergenceError);
}

TEST_CASE("both schemes converge at second order") {
  const GridSpec g(16, 16);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z0 = make_bump(g);
  SolverOptions opts;
  opts.newton_tol = 1e-12;
  const double T = 0.5, dt = 0.05;

  for (const Scheme scheme : {Scheme::avf, Scheme::kahan}) {
    const auto solve = [&](double step) {
      return integrate(z0, scheme, TimeSpec::from_dt(T, step), ops, phys, opts);
    };
    const Vec ref = solve(dt / 64).pack();
    const double e1 = (solve(dt).pack() - ref).norm();
    const double e2 = (solve(dt / 2).pack() - ref).norm();
    CHECK(e1 / e2 > 3.0);
    CHECK(e1 / e2 < 5.0);
  }
}

TEST_CASE("integration is deterministic") {
  const GridSpec g(8, 8);
  const DiffOps ops = build_diff_ops(g);
  const Physics phys = Physics::constant(1.0, 0.0, g.n());
  const State z0 = make_bump(g);
  const TimeSpec ts = TimeSpec::from_steps(0.25, 5);
  SolverOptions opts;
  const Vec a = integrate(z0, Scheme::avf, ts, ops, phys, opts).pack();
  const Vec b = integrate(z0, Scheme::avf, ts, ops, phys, opts).pack();
  CHECK((a.array() == b.array()).all());
}

}  // TEST_SUITE
