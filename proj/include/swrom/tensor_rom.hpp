#pragma once

#include <cstdint>
#include <utility>

#include "swrom/fom.hpp"
#include "swrom/pod.hpp"

namespace swrom {

// block operators of the quadratic form of the f-plane system:
//   F(z) = -Ax Q(u~ (x) Bx z) - Ay Q(v~ (x) By z) + L z
// with Q the Hadamard matricization, u~ = (u;u;u), v~ = (v;v;v)
struct BlockOps {
  SpMat Ax, Ay;  // blkdiag(I, I, D)
  SpMat Bx, By;  // blkdiag(D, D, I)
  SpMat L;       // [0 diag(f) -g Dx; -diag(f) 0 -g Dy; 0 0 0]
  long N = 0;
};

BlockOps build_block_ops(const DiffOps& ops, const Physics& phys);

// Q(a (x) b) = a . b, the only place the Kronecker vector is conceptually used
Vec quadratic_action(const Vec& a, const Vec& b);

// evaluates the block form above; must agree with rhs_fplane
Vec full_quadratic_form(const State& z, const BlockOps& blocks);

// multiply counts are exact for the loops actually executed; tests assert
// scaling ceilings against them
struct BuildStats {
  std::int64_t multiplies = 0;
  double seconds = 0.0;
};

// reduced quadratic operators Q_ur, Q_vr of size 3n x (3n)^2, column block t
// holding the action of the t-th mode of the replicated velocity factor:
//   col(t, s) = t*3n + s,  F_quad = Q_ur (u~_r (x) z_r) + Q_vr (v~_r (x) z_r)
struct ReducedQuadratics {
  Mat Qu, Qv;
};

// reference builder: materializes Q (V* (x) G) column by column; guarded to
// tiny sizes, meant as the oracle for the fast builders
ReducedQuadratics build_reduced_quadratic_naive(const PodBasis& basis, const BlockOps& blocks,
                                                BuildStats* stats = nullptr);

// mode-unfolded three-step build (tensor matricizations, blocked over the
// long axis to bound memory)
ReducedQuadratics build_reduced_quadratic_mumode(const PodBasis& basis, const BlockOps& blocks,
                                                 BuildStats* stats = nullptr);

// row-wise build from vec(G(i,:)^T V*(i,:)); batched=true forms row blocks
// and contracts each with one matrix product, batched=false goes row by row
ReducedQuadratics build_reduced_quadratic_rowwise(const PodBasis& basis, const BlockOps& blocks,
                                                  bool batched, BuildStats* stats = nullptr);

// constant and linear reduced terms; c_r must equal V^T F(mean)
std::pair<Vec, Mat> build_affine_terms(const PodBasis& basis, const BlockOps& blocks);

struct TpodModel {
  Mat Qu, Qv;  // 3n x (3n)^2
  Mat Lr;      // 3n x 3n
  Vec cr;      // 3n
  long n = 0;
};

enum class TensorBuilder { naive, mumode, rowwise, rowwise_batched };

TpodModel build_tpod_model(const PodBasis& basis, const BlockOps& blocks, TensorBuilder builder,
                           BuildStats* stats = nullptr);

// F_r(z_r) evaluated as a tensor contraction, no (3n)^2 vector is formed
Vec reduced_rhs_tpod(const Vec& zr, const TpodModel& model);

// exact Jacobian of reduced_rhs_tpod
Mat reduced_jacobian_tpod(const Vec& zr, const TpodModel& model);

// linearly implicit reduced step, one dense LU solve per call
Vec kahan_step_reduced(const Vec& zr, double dt, const TpodModel& model,
                       StepStats* stats = nullptr);

}  // namespace swrom
