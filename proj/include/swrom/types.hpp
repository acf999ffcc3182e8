#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace swrom {

using Field = Eigen::VectorXd;  // one scalar unknown sampled on the grid, length N
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

// thrown when a layer thickness is non-positive where a division by h happens
// or when a step would accept such a state
struct PositivityError : Error {
  long node;
  PositivityError(const std::string& what, long node_) : Error(what), node(node_) {}
};

struct ConvergenceError : Error {
  double residual;
  ConvergenceError(const std::string& what, double r) : Error(what), residual(r) {}
};

struct SolverError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// prognostic variables on the periodic grid, each of length N = nx*ny
struct State {
  Field u, v, h;

  long size() const { return u.size(); }

  Vec pack() const {
    if (u.size() != v.size() || u.size() != h.size())
      throw DimensionError("State::pack: component length mismatch");
    Vec z(3 * u.size());
    z << u, v, h;
    return z;
  }

  static State unpack(const Vec& z) {
    if (z.size() % 3 != 0) throw DimensionError("State::unpack: length not divisible by 3");
    const long n = z.size() / 3;
    return State{z.segment(0, n), z.segment(n, n), z.segment(2 * n, n)};
  }

  // index of the first node with h <= 0, or -1 if none
  long first_nonpositive_depth() const {
    for (long i = 0; i < h.size(); ++i)
      if (!(h[i] > 0.0)) return i;
    return -1;
  }
};

struct Physics {
  double g = 1.0;
  Field f;  // Coriolis parameter per node; constant vector on the f-plane

  static Physics constant(double g, double f0, long n) {
    return Physics{g, Field::Constant(n, f0)};
  }
};

struct TimeSpec {
  double dt = 0.0;
  double T = 0.0;
  long nt = 0;

  static TimeSpec from_steps(double T, long nt) {
    if (nt < 0 || T < 0.0) throw ConfigError("TimeSpec: T and nt must be non-negative");
    TimeSpec ts;
    ts.T = T;
    ts.nt = nt;
    ts.dt = nt > 0 ? T / static_cast<double>(nt) : 0.0;
    return ts;
  }

  static TimeSpec from_dt(double T, double dt) {
    if (T < 0.0 || dt <= 0.0) throw ConfigError("TimeSpec: need T >= 0 and dt > 0");
    TimeSpec ts;
    ts.T = T;
    ts.dt = dt;
    ts.nt = static_cast<long>(std::llround(T / dt));
    if (std::abs(static_cast<double>(ts.nt) * dt - T) > 1e-12 * std::max(T, 1.0))
      throw ConfigError("TimeSpec: dt does not divide T (|nt*dt - T| > 1e-12*T)");
    return ts;
  }
};

struct SolverOptions {
  double newton_tol = 1e-10;  // residual <= newton_tol * (1 + |z_k|_2)
  int newton_max_iter = 25;
};

// instrumentation accumulated by the steppers; cheap enough to always track
struct StepStats {
  long linear_solves = 0;
  long factorizations = 0;
  long newton_iterations = 0;
};

}  // namespace swrom
