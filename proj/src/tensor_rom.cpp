#include "swrom/tensor_rom.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <vector>

namespace swrom {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

SpMat block_diag3(const SpMat& a, const SpMat& b, const SpMat& c) {
  const long n = a.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(a.nonZeros() + b.nonZeros() + c.nonZeros());
  auto add = [&](const SpMat& m, long off) {
    for (int outer = 0; outer < m.outerSize(); ++outer)
      for (SpMat::InnerIterator it(m, outer); it; ++it)
        trips.emplace_back(off + it.row(), off + it.col(), it.value());
  };
  add(a, 0);
  add(b, n);
  add(c, 2 * n);
  SpMat out(3 * n, 3 * n);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

SpMat sparse_identity(long n) {
  SpMat id(n, n);
  id.setIdentity();
  return id;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

BlockOps build_block_ops(const DiffOps& ops, const Physics& phys) {
  const long n = ops.grid.n();
  BlockOps b;
  b.N = n;
  const SpMat id = sparse_identity(n);
  b.Ax = block_diag3(id, id, ops.dx);
  b.Ay = block_diag3(id, id, ops.dy);
  b.Bx = block_diag3(ops.dx, ops.dx, id);
  b.By = block_diag3(ops.dy, ops.dy, id);
  // linear part: Coriolis rotation plus the pressure gradient
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * n + 2 * ops.dx.nonZeros());
  for (long i = 0; i < n; ++i) {
    trips.emplace_back(i, n + i, phys.f[i]);
    trips.emplace_back(n + i, i, -phys.f[i]);
  }
  for (int outer = 0; outer < ops.dx.outerSize(); ++outer)
    for (SpMat::InnerIterator it(ops.dx, outer); it; ++it)
      trips.emplace_back(it.row(), 2 * n + it.col(), -phys.g * it.value());
  for (int outer = 0; outer < ops.dy.outerSize(); ++outer)
    for (SpMat::InnerIterator it(ops.dy, outer); it; ++it)
      trips.emplace_back(n + it.row(), 2 * n + it.col(), -phys.g * it.value());
  b.L.resize(3 * n, 3 * n);
  b.L.setFromTriplets(trips.begin(), trips.end());
  b.L.makeCompressed();
  return b;
}

Vec quadratic_action(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionError("quadratic_action: length mismatch");
  return a.cwiseProduct(b);
}

Vec full_quadratic_form(const State& z, const BlockOps& blocks) {
  const long n = z.size();
  if (3 * n != blocks.Ax.rows()) throw DimensionError("full_quadratic_form: size mismatch");
  Vec zp = z.pack();
  Vec ut(3 * n), vt(3 * n);
  ut << z.u, z.u, z.u;
  vt << z.v, z.v, z.v;
  return -(blocks.Ax * quadratic_action(ut, blocks.Bx * zp)) -
         blocks.Ay * quadratic_action(vt, blocks.By * zp) + blocks.L * zp;
}

// ---------------------------------------------------------------------------
// reduced quadratic builders
//
// All three compute  Q_r = W Q(V* (x) G)  with W = -V^T A, G = B V and V* the
// block-replicated velocity basis. Column (t, s) of Q(V* (x) G) is
// V*(:,t) . G(:,s) and lives at index t*3n + s.

namespace {

struct Factors {
  Mat W;   // 3n x 3N
  Mat G;   // 3N x 3n
  Mat Vs;  // 3N x 3n, block diagonal replication of the velocity basis
};

Mat dense_block_basis(const Mat& a, const Mat& b, const Mat& c) {
  const long rows = a.rows(), cols = a.cols();
  Mat v = Mat::Zero(3 * rows, 3 * cols);
  v.block(0, 0, rows, cols) = a;
  v.block(rows, cols, rows, cols) = b;
  v.block(2 * rows, 2 * cols, rows, cols) = c;
  return v;
}

Factors build_factors(const PodBasis& basis, const BlockOps& blocks, bool x_direction) {
  const long N = blocks.N, n = basis.n;
  if (basis.Vu.rows() != N) throw DimensionError("tensor build: basis does not match grid");
  Factors f;
  const SpMat& A = x_direction ? blocks.Ax : blocks.Ay;
  const SpMat& B = x_direction ? blocks.Bx : blocks.By;
  const Mat v = dense_block_basis(basis.Vu, basis.Vv, basis.Vh);
  f.W = -(A.transpose() * v).transpose();  // -V^T A
  f.G = B * v;
  const Mat& vel = x_direction ? basis.Vu : basis.Vv;
  f.Vs = dense_block_basis(vel, vel, vel);
  (void)n;
  return f;
}

long pick_block_rows(long n3) {
  // keep each blocked intermediate around 48 MB
  const long rows = 48L * 1000 * 1000 / 8 / (n3 * n3);
  return std::max<long>(1, rows);
}

Mat rowwise_build(const Factors& f, bool batched, std::int64_t* multiplies) {
  const long N3 = f.G.rows(), n3 = f.G.cols();
  Mat q = Mat::Zero(n3, n3 * n3);
  if (batched) {
    const long block = pick_block_rows(n3);
    RowMat rows(block, n3 * n3);
    for (long k0 = 0; k0 < N3; k0 += block) {
      const long b = std::min(block, N3 - k0);
      for (long k = 0; k < b; ++k) {
        Eigen::Map<Mat> m(rows.row(k).data(), n3, n3);
        m.noalias() = f.G.row(k0 + k).transpose() * f.Vs.row(k0 + k);
      }
      q.noalias() += f.W.middleCols(k0, b) * rows.topRows(b);
    }
  } else {
    Vec row(n3 * n3);
    Eigen::Map<Mat> m(row.data(), n3, n3);
    for (long k = 0; k < N3; ++k) {
      m.noalias() = f.G.row(k).transpose() * f.Vs.row(k);
      q.noalias() += f.W.col(k) * row.transpose();
    }
  }
  if (multiplies) *multiplies += N3 * n3 * n3 + n3 * N3 * n3 * n3;
  return q;
}

Mat mumode_build(const Factors& f, std::int64_t* multiplies) {
  const long N3 = f.G.rows(), n3 = f.G.cols();
  // step 1: the first mode product collapses onto the diagonal fibers of the
  // Hadamard tensor, leaving exactly W; steps 2 and 3 are the mode-2 and
  // mode-3 products, carried out on explicit unfoldings block by block
  Mat q3 = Mat::Zero(n3, n3 * n3);  // mode-3 unfolding of the result
  const long block = pick_block_rows(n3);
  Mat z2(n3, 0);
  RowMat z3(0, 0);
  for (long k0 = 0; k0 < N3; k0 += block) {
    const long b = std::min(block, N3 - k0);
    z2.resize(n3, b * n3);
    // mode-2 unfolding: column (k, r) holds W(r,k) * G(k,:)^T
    for (long k = 0; k < b; ++k)
      for (long r = 0; r < n3; ++r)
        z2.col(k * n3 + r) = f.W(r, k0 + k) * f.G.row(k0 + k).transpose();
    // reorder into the mode-3 unfolding: row k, column (s, r)
    z3.resize(b, n3 * n3);
    for (long k = 0; k < b; ++k)
      for (long r = 0; r < n3; ++r)
        for (long s = 0; s < n3; ++s) z3(k, s * n3 + r) = z2(s, k * n3 + r);
    q3.noalias() += f.Vs.middleRows(k0, b).transpose() * z3;
  }
  // back to the mode-1 layout used by the evaluation path
  Mat q(n3, n3 * n3);
  for (long t = 0; t < n3; ++t)
    for (long s = 0; s < n3; ++s)
      for (long r = 0; r < n3; ++r) q(r, t * n3 + s) = q3(t, s * n3 + r);
  if (multiplies) *multiplies += N3 * n3 * n3 + n3 * N3 * n3 * n3;
  return q;
}

Mat naive_build(const Factors& f, std::int64_t* multiplies) {
  const long N3 = f.G.rows(), n3 = f.G.cols();
  if (N3 * n3 * n3 > 10'000'000)
    throw Error("build_reduced_quadratic_naive: problem too large for the reference builder");
  Mat q(n3, n3 * n3);
  for (long t = 0; t < n3; ++t)
    for (long s = 0; s < n3; ++s)
      q.col(t * n3 + s) = f.W * f.Vs.col(t).cwiseProduct(f.G.col(s));
  if (multiplies) *multiplies += n3 * n3 * (N3 + n3 * N3);
  return q;
}

template <typename Fn>
ReducedQuadratics run_build(const PodBasis& basis, const BlockOps& blocks, BuildStats* stats,
                            Fn&& builder) {
  std::int64_t mult = 0;
  const double t0 = now_seconds();
  const Factors fu = build_factors(basis, blocks, true);
  const Factors fv = build_factors(basis, blocks, false);
  ReducedQuadratics out;
  out.Qu = builder(fu, &mult);
  out.Qv = builder(fv, &mult);
  if (stats) {
    stats->multiplies = mult;
    stats->seconds = now_seconds() - t0;
  }
  return out;
}

}  // namespace

ReducedQuadratics build_reduced_quadratic_naive(const PodBasis& basis, const BlockOps& blocks,
                                                BuildStats* stats) {
  return run_build(basis, blocks, stats,
                   [](const Factors& f, std::int64_t* m) { return naive_build(f, m); });
}

ReducedQuadratics build_reduced_quadratic_mumode(const PodBasis& basis, const BlockOps& blocks,
                                                 BuildStats* stats) {
  return run_build(basis, blocks, stats,
                   [](const Factors& f, std::int64_t* m) { return mumode_build(f, m); });
}

ReducedQuadratics build_reduced_quadratic_rowwise(const PodBasis& basis, const BlockOps& blocks,
                                                  bool batched, BuildStats* stats) {
  return run_build(basis, blocks, stats, [batched](const Factors& f, std::int64_t* m) {
    return rowwise_build(f, batched, m);
  });
}

std::pair<Vec, Mat> build_affine_terms(const PodBasis& basis, const BlockOps& blocks) {
  const long N = blocks.N, n = basis.n;
  const Mat v = dense_block_basis(basis.Vu, basis.Vv, basis.Vh);
  Vec zbar(3 * N);
  zbar << basis.mean_u, basis.mean_v, basis.mean_h;
  Vec ubar(3 * N), vbar(3 * N);
  ubar << basis.mean_u, basis.mean_u, basis.mean_u;
  vbar << basis.mean_v, basis.mean_v, basis.mean_v;

  const Mat wx = -(blocks.Ax.transpose() * v).transpose();
  const Mat wy = -(blocks.Ay.transpose() * v).transpose();
  const Vec bxz = blocks.Bx * zbar;
  const Vec byz = blocks.By * zbar;

  Vec cr = wx * ubar.cwiseProduct(bxz) + wy * vbar.cwiseProduct(byz) +
           v.transpose() * (blocks.L * zbar);

  // E_u V and E_v V replicate the velocity blocks into every block row
  Mat eu = Mat::Zero(3 * N, 3 * n), ev = Mat::Zero(3 * N, 3 * n);
  for (int b = 0; b < 3; ++b) {
    eu.block(b * N, 0, N, n) = basis.Vu;
    ev.block(b * N, n, N, n) = basis.Vv;
  }

  const Mat gx = blocks.Bx * v;
  const Mat gy = blocks.By * v;
  Mat lr = wx * ubar.asDiagonal() * gx + wx * bxz.asDiagonal() * eu +
           wy * vbar.asDiagonal() * gy + wy * byz.asDiagonal() * ev +
           v.transpose() * (blocks.L * v);
  return {cr, lr};
}

TpodModel build_tpod_model(const PodBasis& basis, const BlockOps& blocks, TensorBuilder builder,
                           BuildStats* stats) {
  ReducedQuadratics q;
  switch (builder) {
    case TensorBuilder::naive:
      q = build_reduced_quadratic_naive(basis, blocks, stats);
      break;
    case TensorBuilder::mumode:
      q = build_reduced_quadratic_mumode(basis, blocks, stats);
      break;
    case TensorBuilder::rowwise:
      q = build_reduced_quadratic_rowwise(basis, blocks, false, stats);
      break;
    case TensorBuilder::rowwise_batched:
      q = build_reduced_quadratic_rowwise(basis, blocks, true, stats);
      break;
  }
  TpodModel model;
  model.Qu = std::move(q.Qu);
  model.Qv = std::move(q.Qv);
  auto [cr, lr] = build_affine_terms(basis, blocks);
  model.cr = std::move(cr);
  model.Lr = std::move(lr);
  model.n = basis.n;
  return model;
}

Vec reduced_rhs_tpod(const Vec& zr, const TpodModel& model) {
  const long n = model.n, n3 = 3 * n;
  if (zr.size() != n3) throw DimensionError("reduced_rhs_tpod: reduced state length != 3n");
  Vec out = model.cr + model.Lr * zr;
  for (long t = 0; t < n3; ++t) {
    const double ut = zr[t % n];
    const double vt = zr[n + t % n];
    out.noalias() += ut * (model.Qu.middleCols(t * n3, n3) * zr);
    out.noalias() += vt * (model.Qv.middleCols(t * n3, n3) * zr);
  }
  return out;
}

Mat reduced_jacobian_tpod(const Vec& zr, const TpodModel& model) {
  const long n = model.n, n3 = 3 * n;
  if (zr.size() != n3) throw DimensionError("reduced_jacobian_tpod: reduced state length != 3n");
  Mat jac = model.Lr;
  for (long t = 0; t < n3; ++t) {
    const auto bu = model.Qu.middleCols(t * n3, n3);
    const auto bv = model.Qv.middleCols(t * n3, n3);
    jac.noalias() += zr[t % n] * bu;
    jac.noalias() += zr[n + t % n] * bv;
    jac.col(t % n).noalias() += bu * zr;
    jac.col(n + t % n).noalias() += bv * zr;
  }
  return jac;
}

Vec kahan_step_reduced(const Vec& zr, double dt, const TpodModel& model, StepStats* stats) {
  const long n3 = 3 * model.n;
  const Mat a = Mat::Identity(n3, n3) - (0.5 * dt) * reduced_jacobian_tpod(zr, model);
  const Vec d = a.partialPivLu().solve(reduced_rhs_tpod(zr, model));
  if (stats) {
    ++stats->linear_solves;
    ++stats->factorizations;
  }
  return zr + dt * d;
}

}  // namespace swrom
