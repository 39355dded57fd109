#pragma once

#include <cstdint>

#include "sketchchain/operators.hpp"
#include "sketchchain/solver.hpp"

namespace skch {

// Target M = C W^{-1} C' + nu I. Only C, nu, and an upper bound on ||M|| are
// needed at solve time; the W block lives inside the caller-built inner
// solver, whose target is C'C + nu W.
struct WoodburyForm {
  OpPtr c;
  double nu = 0.0;
  double norm_bound = 0.0;  // >= ||M||

  void validate() const;
};

// epsilon-solver for M from an inner solver for C'C + nu W:
//   g(b) = (1/nu) (b - C inner(C' b)).
// One inner solve and one application of C and C' per call. The inner
// accuracy must be at most epsilon nu^2 / norm_bound^2.
SolverHandle woodbury_solve(const WoodburyForm& form, SolverHandle inner, double epsilon);

struct BaseSolverConfig {
  double eps_embed = 0.5;  // the sketch is sized to approximate within factor 2
  double c_s = 4.0;
  double c_b = 2.0;
};

// epsilon-solver for A'A + nu I for a flat s x d block (s <= d typical).
// Sketches the rows of A', factors the s x s sketch Gram densely, and runs
// the accelerated loop for A A' + nu I behind the Woodbury identity with
// C = A'. When s > d the d x d Gram is factored directly instead. Holds with
// probability >= 1 - delta over the sketch.
SolverHandle base_solver(const DenseMatrix& a, double nu, double epsilon, double delta,
                         std::uint64_t seed, WorkPtr work, const BaseSolverConfig& cfg = {});

}  // namespace skch
