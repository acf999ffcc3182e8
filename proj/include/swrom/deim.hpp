#pragma once

#include <memory>
#include <span>
#include <vector>

#include "swrom/fom.hpp"
#include "swrom/pod.hpp"

namespace swrom {

// raw (uncentered) nonlinearity snapshots, one column per state: the three
// component blocks of the Hamiltonian right-hand side J(z) grad H(z)
struct NonlinearSnapshotSet {
  Mat g1, g2, g3;
};

NonlinearSnapshotSet collect_nonlinearity_snapshots(std::span<const State> trajectory,
                                                    const DiffOps& ops, const Physics& phys);

// greedy interpolation point selection; ties resolved to the smallest index
std::vector<long> deim_points(const Mat& v);

struct DeimComponent {
  std::vector<long> idx;  // m interpolation nodes
  Mat VF;                 // N x m nonlinearity basis
  Mat proj;               // n x m precomputed  V_w^T V_F (P^T V_F)^{-1}
  double cond = 0.0;      // condition estimate of P^T V_F
};

struct DeimOperator {
  DeimComponent c1, c2, c3;  // paired with the u, v, h bases respectively
  long m = 0;
};

DeimOperator build_deim_operator(const PodBasis& basis, const NonlinearSnapshotSet& snaps,
                                 const RankRule& rule);

// instrumentation for the sampled-entry evaluations: the reduced path must
// never touch more than a stencil's worth of grid data per sampled row
struct EvalStats {
  long rows_evaluated = 0;
  long node_gathers = 0;  // lifted (node, variable, state) values requested
};

// V^T F(lift(zr)) approximated through the sampled rows only
Vec reduced_rhs_deim(const Vec& zr, const DeimOperator& op, const PodBasis& basis,
                     const DiffOps& ops, const Physics& phys, EvalStats* stats = nullptr);

// implicit AVF step on the reduced unknowns; Newton with a finite-difference
// reduced Jacobian. Evaluations stay local to the sampled stencils.
Vec avf_step_reduced(const Vec& zr, double dt, const DeimOperator& op, const PodBasis& basis,
                     const DiffOps& ops, const Physics& phys, const SolverOptions& opts = {},
                     StepStats* stats = nullptr, EvalStats* eval_stats = nullptr);

// stepper with precomputed stencil gather tables for use in time loops
class DeimAvfStepper {
 public:
  DeimAvfStepper(const DeimOperator& op, const PodBasis& basis, const DiffOps& ops,
                 const Physics& phys, const SolverOptions& opts);
  ~DeimAvfStepper();

  Vec step(const Vec& zr, double dt, StepStats* stats = nullptr,
           EvalStats* eval_stats = nullptr);
  Vec reduced_rhs(const Vec& zr, EvalStats* eval_stats = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace swrom
