#pragma once

#include <functional>
#include <memory>

#include "swrom/grid.hpp"
#include "swrom/types.hpp"

namespace swrom {

// q = (Dx v - Dy u + f) / h, requires h > 0 at every node
Field potential_vorticity(const State& z, const DiffOps& ops, const Physics& phys);

// gradient of the (unscaled) Hamiltonian: (u.h ; v.h ; (u.u + v.v)/2 + g h)
Vec gradient_hamiltonian(const State& z, const Physics& phys);

// J(z) grad H(z) written with the skew Poisson blocks applied directly
Vec rhs_hamiltonian(const State& z, const DiffOps& ops, const Physics& phys);

// w -> J(z_mid) w without materializing J
Vec poisson_apply(const State& z_mid, const Vec& w, const DiffOps& ops, const Physics& phys);

// closed form of int_0^1 grad H(z_k + s (z_k1 - z_k)) ds (exact, integrand quadratic)
Vec avf_integral(const State& z_k, const State& z_k1, const Physics& phys);

// d/dz_k1 of [ J((z_k + z_k1)/2) avf_integral(z_k, z_k1) ], used by the Newton solve
SpMat avf_residual_jacobian(const State& z_k, const State& z_k1, const DiffOps& ops,
                            const Physics& phys);

// f-plane right-hand side F(z) = R1(z) + R2(z) + L z (quadratic plus linear)
Vec rhs_fplane(const State& z, const DiffOps& ops, const Physics& phys);

// analytic Jacobian of rhs_fplane
SpMat jacobian_fplane(const State& z, const DiffOps& ops, const Physics& phys);

// implicit average-vector-field step: z' = z + dt J((z+z')/2) avf_integral(z, z')
State avf_step(const State& z, double dt, const DiffOps& ops, const Physics& phys,
               const SolverOptions& opts = {}, StepStats* stats = nullptr);

// Kahan step: one linear solve (I - dt/2 F'(z)) d = F(z), z' = z + dt d
State kahan_step(const State& z, double dt, const DiffOps& ops, const Physics& phys,
                 const SolverOptions& opts = {}, StepStats* stats = nullptr);

enum class Scheme { avf, kahan };

// steppers hold the sparse pattern and symbolic factorization across steps
class AvfStepper {
 public:
  AvfStepper(const DiffOps& ops, const Physics& phys, const SolverOptions& opts);
  ~AvfStepper();
  State step(const State& z, double dt, StepStats* stats = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class KahanStepper {
 public:
  KahanStepper(const DiffOps& ops, const Physics& phys, const SolverOptions& opts);
  ~KahanStepper();
  State step(const State& z, double dt, StepStats* stats = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// called after every accepted step with (k, t_k, z^k), k = 1..nt
using StepSink = std::function<void(long, double, const State&)>;

State integrate(const State& z0, Scheme scheme, const TimeSpec& ts, const DiffOps& ops,
                const Physics& phys, const SolverOptions& opts = {}, const StepSink& sink = {},
                StepStats* stats = nullptr);

}  // namespace swrom
