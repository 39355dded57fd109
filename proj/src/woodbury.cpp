#include "sketchchain/woodbury.hpp"

#include <cmath>
#include <utility>

#include "sketchchain/dense.hpp"
#include "sketchchain/iterative.hpp"
#include "sketchchain/rng.hpp"
#include "sketchchain/sketching.hpp"

namespace skch {

void WoodburyForm::validate() const {
  require(c != nullptr, "woodbury form requires a factor operator");
  require(nu > 0.0, "woodbury form requires nu > 0");
  require(norm_bound >= nu, "woodbury norm bound cannot be below nu");
}

SolverHandle woodbury_solve(const WoodburyForm& form, SolverHandle inner, double epsilon) {
  form.validate();
  require(epsilon > 0.0, "woodbury_solve requires epsilon > 0");
  require(inner.valid(), "woodbury_solve requires an inner solver");
  require(inner.dim() == form.c->cols(), "woodbury inner solver dimension mismatch");
  const double budget = epsilon * form.nu * form.nu / (form.norm_bound * form.norm_bound);
  require(inner.epsilon() <= budget * (1.0 + 1e-9),
          "woodbury inner accuracy must be <= epsilon nu^2 / ||M||^2");

  OpPtr c = form.c;
  const double nu = form.nu;
  auto fn = [c, inner, nu](const Vector& b) {
    Vector z = c->apply_adjoint(b);
    Vector y = inner(z);
    Vector w = c->apply(y);
    return Vector((b - w) / nu);
  };
  return SolverHandle(c->rows(), epsilon, "woodbury " + inner.target_desc(), std::move(fn));
}

SolverHandle base_solver(const DenseMatrix& a, double nu, double epsilon, double delta,
                         std::uint64_t seed, WorkPtr work, const BaseSolverConfig& cfg) {
  require(a.rows() >= 1 && a.cols() >= 1, "base_solver requires a nonempty matrix");
  require(nu > 0.0, "base_solver requires nu > 0");
  require(epsilon > 0.0 && epsilon < 1.0, "base_solver requires epsilon in (0,1)");
  require(delta > 0.0 && delta < 1.0, "base_solver requires delta in (0,1)");
  if (!work) work = make_work();
  const Index s = a.rows(), d = a.cols();

  if (s > d) {
    // Flat assumption fails; the d x d Gram is the cheaper factorization.
    DenseMatrix g = a.transpose() * a;
    work->add_macs(s * d * d);
    return dense_pd_factor_solve(g, nu, work);
  }

  DenseMatrix at = a.transpose();  // d x s, the factor C of the identity
  OpPtr c = make_dense(at, work);
  OpPtr inner_target = make_gram_ridge(c, nu, work);  // A A' + nu I

  // ||M|| <= est + nu with est in [||A||^2, 2||A||^2] from the power method.
  double frob2 = a.squaredNorm();
  double est = 0.0;
  if (frob2 > 0.0) {
    OpPtr gram_small = make_gram_ridge(c, 0.0, work);
    est = spectral_upper_2approx(*gram_small, derive_seed(seed, 1));
  }
  const double norm_bound = est + nu;

  // Sketch the rows of A' at distortion 1/2: the ridged sketch Gram is a
  // 2-relative preconditioner, so the accelerated loop runs at kappa = 4.
  EmbeddingPlan plan;
  plan.k = s;
  plan.epsilon = cfg.eps_embed;
  plan.delta = delta;
  plan.c_s = cfg.c_s;
  plan.c_b = cfg.c_b;
  SparseEmbedding emb = make_sparse_embedding(plan, d, derive_seed(seed, 2));
  DenseMatrix sat = sketch_rows(emb, at, work);  // s' x s
  DenseMatrix sketch_gram = sat.transpose() * sat;
  work->add_macs(sat.rows() * s * s);

  SolverHandle sketch_factor = dense_pd_factor_solve(sketch_gram, nu, work);
  SolverHandle precond = scale_target(sketch_factor, 2.0);

  double eps_inner = epsilon * nu * nu / (norm_bound * norm_bound);
  eps_inner = clamp_epsilon(eps_inner);
  PagdConfig pcfg;
  pcfg.kappa = 4.0;
  pcfg.epsilon = eps_inner;
  SolverHandle inner =
      make_pagd_solver(inner_target, std::move(precond), pcfg, "sketched small gram");

  WoodburyForm form;
  form.c = c;
  form.nu = nu;
  form.norm_bound = norm_bound;
  return woodbury_solve(form, std::move(inner), epsilon);
}

}  // namespace skch
