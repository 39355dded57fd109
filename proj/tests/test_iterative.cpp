#include <Eigen/Cholesky>
#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "sketchchain/dense.hpp"
#include "sketchchain/iterative.hpp"
#include "sketchchain/oracle.hpp"
#include "test_support.hpp"

using namespace skch;

namespace {

std::vector<double> random_eigs(Index d, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> e(d);
  for (Index i = 0; i < d; ++i) e[i] = lo + (hi - lo) * rng.uniform01();
  std::sort(e.begin(), e.end(), std::greater<double>());
  return e;
}

// Solver for N that adds noise at 90% of the declared accuracy budget:
//   || f(b) - N^{-1} b ||_N = 0.9 sqrt(eps_f) || b ||_{N^{-1}}.
SolverHandle noisy_solver(const DenseMatrix& n, double eps_f, std::uint64_t seed) {
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(Eigen::MatrixXd(n));
  auto nm = std::make_shared<DenseMatrix>(n);
  auto ctr = std::make_shared<std::uint64_t>(0);
  auto fn = [llt, nm, eps_f, seed, ctr](const Vector& b) {
    Vector z = llt->solve(b);
    double ref = b.dot(z);
    if (ref <= 0.0) return z;
    Vector u = testsup::gaussian_vector(b.size(), derive_seed(seed, ++*ctr));
    double un = u.dot(*nm * u);
    double c = std::sqrt(0.81 * eps_f * ref / un);
    return Vector(z + c * u);
  };
  return SolverHandle(n.rows(), eps_f, "noisy dense", std::move(fn));
}

}  // namespace

TEST_CASE("pagd budget values, monotone benefit, config errors") {
  PagdConfig cfg;
  cfg.kappa = 4.0;
  cfg.epsilon = 1e-8;
  CHECK(cfg.max_iters() == 153);
  cfg.kappa = 1.0;
  cfg.epsilon = 0.5;
  CHECK(cfg.max_iters() == 6);
  cfg.kappa = 10.0;
  cfg.epsilon = 1e-6;
  CHECK(cfg.max_iters() == 184);

  for (double eps : {1e-2, 1e-6, 1e-10}) {
    Index prev = 0;
    for (double kap : {1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0, 1024.0}) {
      PagdConfig c;
      c.kappa = kap;
      c.epsilon = eps;
      Index cap = c.max_iters();
      CHECK(cap >= prev);  // halving kappa never increases the budget
      CHECK(cap >= 1);
      prev = cap;
    }
  }

  PagdConfig bad;
  bad.kappa = 0.5;
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = PagdConfig{};
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = PagdConfig{};
  bad.epsilon = 1.0;
  CHECK_THROWS_AS(bad.validate(), contract_error);
  bad = PagdConfig{};
  bad.exit_safety = 0.5;
  CHECK_THROWS_AS(bad.validate(), contract_error);
}

TEST_CASE("pagd with a perfect preconditioner certifies almost immediately") {
  auto work = make_work();
  DenseMatrix m = testsup::pd_with_eigenvalues(random_eigs(20, 0.5, 8.0, 11), 12);
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  SolverHandle inner = dense_pd_factor_solve(m, work);
  PagdConfig cfg;
  cfg.kappa = 1.0;
  cfg.epsilon = 1e-10;
  Vector b = testsup::gaussian_vector(20, 77);
  PagdStats st;
  Vector x = pagd(*mop, inner, cfg, b, &st);
  CHECK(oracle::m_norm_error(m, x, b) <= 1e-10);
  CHECK(st.certified);
  CHECK(st.iterations <= 3);
  CHECK(st.iterations <= st.cap);
}

TEST_CASE("pagd on diag(1,4) preconditioned by diag(4,4)") {
  auto work = make_work();
  DenseMatrix m(2, 2), n(2, 2);
  m << 1, 0, 0, 4;
  n << 4, 0, 0, 4;
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  SolverHandle inner = dense_pd_factor_solve(n, work);
  PagdConfig cfg;
  cfg.kappa = 4.0;
  cfg.epsilon = 1e-8;
  REQUIRE(cfg.max_iters() == 153);

  for (int s = 0; s < 5; ++s) {
    Vector b = testsup::gaussian_vector(2, 500 + s);
    PagdStats st;
    Vector x = pagd(*mop, inner, cfg, b, &st);
    CHECK(oracle::m_norm_error(m, x, b) <= 1e-8);
    CHECK(st.iterations <= 153);
  }

  // Exact-cap mode runs the whole budget and still meets the contract.
  cfg.exact_cap = true;
  Vector b = testsup::gaussian_vector(2, 7);
  PagdStats st;
  Vector x = pagd(*mop, inner, cfg, b, &st);
  CHECK(st.iterations == 153);
  CHECK(!st.certified);
  CHECK(oracle::m_norm_error(m, x, b) <= 1e-8);
}

TEST_CASE("pagd random PD with a ridge preconditioner at kappa 10") {
  auto work = make_work();
  std::vector<double> eigs = random_eigs(100, 1.0, 10.0, 31);
  DenseMatrix m = testsup::pd_with_eigenvalues(eigs, 32);
  double lam_min = eigs.back();
  DenseMatrix n = m + 9.0 * lam_min * DenseMatrix::Identity(100, 100);
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  SolverHandle inner = dense_pd_factor_solve(n, work);
  PagdConfig cfg;
  cfg.kappa = 10.0;
  cfg.epsilon = 1e-6;
  for (int s = 0; s < 20; ++s) {
    Vector b = testsup::gaussian_vector(100, 900 + s);
    PagdStats st;
    Vector x = pagd(*mop, inner, cfg, b, &st);
    CHECK(oracle::m_norm_error(m, x, b) <= 1e-6);
    CHECK(st.iterations <= st.cap);
  }
}

TEST_CASE("pagd stays within contract under legally noisy inner solves") {
  auto work = make_work();
  std::vector<double> eigs = random_eigs(40, 1.0, 6.0, 51);
  DenseMatrix m = testsup::pd_with_eigenvalues(eigs, 52);
  double lam_min = eigs.back();
  DenseMatrix n = m + 9.0 * lam_min * DenseMatrix::Identity(40, 40);
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  double kappa = 10.0;
  SolverHandle inner = noisy_solver(n, 1.0 / (10.0 * kappa), 61);
  PagdConfig cfg;
  cfg.kappa = kappa;
  cfg.epsilon = 1e-4;
  for (int s = 0; s < 10; ++s) {
    Vector b = testsup::gaussian_vector(40, 700 + s);
    PagdStats st;
    Vector x = pagd(*mop, inner, cfg, b, &st);
    CHECK(oracle::m_norm_error(m, x, b) <= 1e-4);
    CHECK(st.iterations <= st.cap);
  }
}

TEST_CASE("pagd rejects contract violations and nonfinite iterates") {
  auto work = make_work();
  DenseMatrix m(3, 3);
  m << 2, 0, 0, 0, 2, 0, 0, 0, 2;
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  PagdConfig cfg;
  cfg.kappa = 4.0;
  cfg.epsilon = 1e-4;

  // Inner solver too loose for kappa.
  SolverHandle loose(3, 0.5, "loose", [](const Vector& b) { return b; });
  CHECK_THROWS_AS(pagd(*mop, loose, cfg, Vector::Ones(3)), contract_error);

  // Dimension mismatches.
  SolverHandle wrong(4, 0.0, "wrong dim", [](const Vector& b) { return b; });
  CHECK_THROWS_AS(pagd(*mop, wrong, cfg, Vector::Ones(3)), contract_error);
  SolverHandle ok(3, 0.0, "id", [](const Vector& b) { return b; });
  CHECK_THROWS_AS(pagd(*mop, ok, cfg, Vector::Ones(2)), contract_error);

  // Nonfinite inner result.
  SolverHandle nan_solver(3, 0.0, "nan", [](const Vector& b) {
    Vector v = b;
    v[0] = std::numeric_limits<double>::quiet_NaN();
    return v;
  });
  CHECK_THROWS_AS(pagd(*mop, nan_solver, cfg, Vector::Ones(3)), numeric_error);
}

TEST_CASE("pagd global tally counts invocations without violations") {
  reset_pagd_global_stats();
  auto work = make_work();
  DenseMatrix m = testsup::pd_with_eigenvalues(random_eigs(10, 1.0, 3.0, 81), 82);
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  SolverHandle inner = dense_pd_factor_solve(m, work);
  PagdConfig cfg;
  cfg.kappa = 1.0;
  cfg.epsilon = 1e-8;
  for (int s = 0; s < 7; ++s) pagd(*mop, inner, cfg, testsup::gaussian_vector(10, s));
  auto g = pagd_global_stats();
  CHECK(g.invocations == 7);
  CHECK(g.cap_violations == 0);
}

TEST_CASE("pagd solver handle wraps the loop and tracks calls") {
  auto work = make_work();
  DenseMatrix m = testsup::pd_with_eigenvalues(random_eigs(12, 1.0, 5.0, 91), 92);
  DenseMatrix n = m + 4.0 * DenseMatrix::Identity(12, 12);  // lam_min >= 1 so n <= 5m
  OpPtr mop = make_psd_explicit(m, 0.0, work);
  PagdConfig cfg;
  cfg.kappa = 5.0;
  cfg.epsilon = 1e-7;
  SolverHandle h = make_pagd_solver(mop, dense_pd_factor_solve(n, work), cfg, "m via ridge");
  CHECK(h.dim() == 12);
  CHECK(h.epsilon() == 1e-7);
  Vector b = testsup::gaussian_vector(12, 17);
  Vector x = h(b);
  CHECK(oracle::m_norm_error(m, x, b) <= 1e-7);
  CHECK(h.calls() == 1);
}

TEST_CASE("exact power method: identity, spike, one-sidedness") {
  auto work = make_work();
  DenseMatrix id = DenseMatrix::Identity(8, 8);
  OpPtr idop = make_psd_explicit(id, 0.0, work);
  CHECK(power_method_exact(*idop, 4, 3) == doctest::Approx(1.0).epsilon(1e-14));

  DenseMatrix two(2, 2);
  two << 3, 0, 0, 1;
  OpPtr twop = make_psd_explicit(two, 0.0, work);
  int ok = 0;
  for (int s = 0; s < 100; ++s) {
    double xi = power_method_exact(*twop, 64, 100 + s);
    CHECK(xi <= 3.0 + 1e-9);
    if (xi >= 3.0 / 1.25) ++ok;
  }
  CHECK(ok >= 75);

  for (int s = 0; s < 100; ++s) {
    std::vector<double> eigs = random_eigs(12, 0.1, 5.0, 2000 + s);
    DenseMatrix m = testsup::pd_with_eigenvalues(eigs, 3000 + s);
    OpPtr mop = make_psd_explicit(m, 0.0, work);
    double xi = power_method_exact(*mop, 8, 4000 + s);
    CHECK(xi <= eigs.front() * (1.0 + 1e-9));
  }

  CHECK_THROWS_AS(power_method_exact(*idop, 1, 0), contract_error);
  DenseMatrix zero = DenseMatrix::Zero(4, 4);
  OpPtr zop = make_psd_explicit(zero, 0.0, work);
  CHECK_THROWS_AS(power_method_exact(*zop, 4, 0), numeric_error);
}

TEST_CASE("inexact matvec power composes errors within the stated law") {
  DenseMatrix m(2, 2);
  m << 2, 0, 0, 1;
  MatvecHandle exact{2, 0.0, 2.0, [m](const Vector& v) { return Vector(m * v); }};

  MatvecHandle same = inexact_matvec_power(exact, 1);
  Vector e1 = Vector::Zero(2);
  e1[0] = 1.0;
  CHECK((same(e1) - exact(e1)).norm() == 0.0);

  MatvecHandle cubed = inexact_matvec_power(exact, 3);
  Vector e2 = Vector::Zero(2);
  e2[1] = 1.0;
  CHECK(cubed(e1)[0] == 8.0);
  CHECK(cubed(e1)[1] == 0.0);
  CHECK(cubed(e2)[1] == 1.0);
  CHECK(cubed.accuracy == 0.0);
  CHECK(cubed.kappa_bound == doctest::Approx(8.0));

  // Relative noise 1e-12, kappa(M) = 4, q = 5: measured error against the
  // dense fifth power stays below 1e-12 * 12^10 in norm.
  std::vector<double> eigs = random_eigs(10, 1.0, 4.0, 123);
  eigs.front() = 4.0;
  eigs.back() = 1.0;
  DenseMatrix big = testsup::pd_with_eigenvalues(eigs, 124);
  Vector w = testsup::gaussian_vector(10, 125);
  w /= w.norm();
  MatvecHandle noisy{10, 1e-24, 4.0, [big, w](const Vector& v) {
                       Vector mv = big * v;
                       return Vector(mv + 1e-12 * mv.norm() * w);
                     }};
  MatvecHandle five = inexact_matvec_power(noisy, 5);
  CHECK(five.accuracy == doctest::Approx(1e-24 * std::pow(12.0, 10.0)));
  Eigen::MatrixXd m5 = Eigen::MatrixXd::Identity(10, 10);
  for (int i = 0; i < 5; ++i) m5 = m5 * big;
  const double bound = 1e-12 * std::pow(12.0, 10.0);
  for (int s = 0; s < 20; ++s) {
    Vector b = testsup::gaussian_vector(10, 300 + s);
    Vector got = five(b);
    Vector ref = m5 * b;
    double rel = (got - ref).norm() / ref.norm();
    CHECK(rel <= bound);
    CHECK(rel * rel <= five.accuracy);
  }

  // Per-stage law on fresh random instances: error <= sqrt(eps_f) (3 kappa)^q.
  for (int inst = 0; inst < 20; ++inst) {
    double kap = inst % 2 == 0 ? 2.0 : 4.0;
    std::vector<double> ev = random_eigs(8, 1.0, kap, 500 + inst);
    ev.front() = kap;
    ev.back() = 1.0;
    DenseMatrix a = testsup::pd_with_eigenvalues(ev, 600 + inst);
    Vector dir = testsup::gaussian_vector(8, 700 + inst);
    dir /= dir.norm();
    MatvecHandle f{8, 1e-20, kap, [a, dir](const Vector& v) {
                     Vector mv = a * v;
                     return Vector(mv + 1e-10 * mv.norm() * dir);
                   }};
    for (Index q : {Index{2}, Index{3}}) {
      MatvecHandle fq = inexact_matvec_power(f, q);
      Eigen::MatrixXd aq = Eigen::MatrixXd::Identity(8, 8);
      for (Index i = 0; i < q; ++i) aq = aq * a;
      Vector b = testsup::gaussian_vector(8, 800 + inst);
      double rel = (fq(b) - Vector(aq * b)).norm() / (aq * b).norm();
      CHECK(rel <= 1e-10 * std::pow(3.0 * kap, static_cast<double>(q)));
    }
  }

  // A noisy handle without a condition bound cannot compose its accuracy.
  MatvecHandle unbounded{4, 1e-6, -1.0, [](const Vector& v) { return v; }};
  CHECK_THROWS_AS(inexact_matvec_power(unbounded, 2), contract_error);
}

TEST_CASE("spectral norm estimate: constant, spike, q-trend, overrides") {
  DenseMatrix c = 7.0 * DenseMatrix::Identity(6, 6);
  MatvecHandle fc{6, 0.0, 1.0, [c](const Vector& v) { return Vector(c * v); }};
  CHECK(estimate_spectral_norm(fc, 0.3, 0.1, 9) == doctest::Approx(7.0).epsilon(1e-12));

  DenseMatrix spike = DenseMatrix::Identity(50, 50);
  spike(0, 0) = 5.0;
  MatvecHandle fs{50, 0.0, 5.0, [spike](const Vector& v) { return Vector(spike * v); }};
  int ok = 0;
  for (int s = 0; s < 100; ++s) {
    double x = estimate_spectral_norm(fs, 0.3, 0.01, 10000 + s);
    if (x >= 5.0 / 1.3 && x <= 5.0 * 1.3) ++ok;
  }
  CHECK(ok >= 99);

  std::vector<double> ev = {3.0, 2.5, 2.0, 1.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  DenseMatrix m = testsup::pd_with_eigenvalues(ev, 42);
  MatvecHandle fm{10, 0.0, 3.0, [m](const Vector& v) { return Vector(m * v); }};
  double mean4 = 0.0, mean16 = 0.0, mean64 = 0.0;
  const int trials = 200;
  for (int s = 0; s < trials; ++s) {
    mean4 += power_ratio_estimate(fm, 4, 100 + s);
    mean16 += power_ratio_estimate(fm, 16, 100 + s);
    mean64 += power_ratio_estimate(fm, 64, 100 + s);
  }
  mean4 /= trials;
  mean16 /= trials;
  mean64 /= trials;
  CHECK(mean4 <= mean16 + 1e-9);
  CHECK(mean16 <= mean64 + 1e-9);
  CHECK(mean64 <= 3.0 + 1e-9);

  auto count = std::make_shared<int>(0);
  MatvecHandle counted{6, 0.0, 1.0, [c, count](const Vector& v) {
                         ++*count;
                         return Vector(c * v);
                       }};
  PowerConfig pc;
  pc.q_override = 5;
  pc.trials_override = 3;
  estimate_spectral_norm(counted, 0.3, 0.1, 1, pc);
  CHECK(*count == 3 * (2 * 5 + 1));
}

TEST_CASE("doubled power ratio upper-bounds the spectrum") {
  auto work = make_work();
  int above = 0;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> eigs = random_eigs(10, 0.5, 6.0, 5000 + s);
    DenseMatrix m = testsup::pd_with_eigenvalues(eigs, 6000 + s);
    OpPtr mop = make_psd_explicit(m, 0.0, work);
    double u = spectral_upper_2approx(*mop, 7000 + s);
    CHECK(u <= 2.0 * eigs.front() * (1.0 + 1e-9));
    if (u >= eigs.front()) ++above;
  }
  CHECK(above >= 45);
}

TEST_CASE("square solver: identity, scaled identity, accelerated inner solver") {
  auto work = make_work();
  DenseMatrix id = DenseMatrix::Identity(5, 5);
  SolverHandle fid = dense_pd_factor_solve(id, work);
  SolverHandle sid = square_solver(fid, 1.0, 1e-8);
  Vector b = testsup::gaussian_vector(5, 3);
  CHECK((sid(b) - b).norm() <= 1e-12 * b.norm());

  DenseMatrix twos = 2.0 * DenseMatrix::Identity(4, 4);
  SolverHandle ftwo = dense_pd_factor_solve(twos, work);
  SolverHandle stwo = square_solver(ftwo, 1.0, 1e-8);
  Vector v = testsup::gaussian_vector(4, 5);
  CHECK((stwo(v) - v / 4.0).norm() <= 1e-12 * v.norm());

  std::vector<double> eigs = random_eigs(30, 1.0, 5.0, 201);
  eigs.back() = 1.0;
  eigs.front() = 5.0;
  DenseMatrix a = testsup::pd_with_eigenvalues(eigs, 202);
  OpPtr aop = make_psd_explicit(a, 0.0, work);
  DenseMatrix n = a + DenseMatrix::Identity(30, 30);  // lam_min = 1 so a <= n <= 2a
  const double eps = 1e-6;
  PagdConfig cfg;
  cfg.kappa = 2.0;
  cfg.epsilon = eps / (9.0 * 25.0);
  SolverHandle f = make_pagd_solver(aop, dense_pd_factor_solve(n, work), cfg, "a via ridge");
  SolverHandle sq = square_solver(f, 5.0, eps);
  DenseMatrix a2 = a * a;
  for (int s = 0; s < 10; ++s) {
    Vector rhs = testsup::gaussian_vector(30, 400 + s);
    CHECK(oracle::m_norm_error(a2, sq(rhs), rhs) <= eps);
  }

  SolverHandle loose(5, 0.1, "loose", [](const Vector& x) { return x; });
  CHECK_THROWS_AS(square_solver(loose, 2.0, 1e-4), contract_error);
}
