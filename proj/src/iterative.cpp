#include "sketchchain/iterative.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>
#include <vector>

#include "sketchchain/rng.hpp"

namespace skch {

namespace {

std::atomic<std::uint64_t> g_pagd_invocations{0};
std::atomic<std::uint64_t> g_pagd_violations{0};

Vector gaussian_unit(Index d, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(d);
  for (Index i = 0; i < d; ++i) x[i] = rng.gaussian();
  double n = x.norm();
  if (n > 0.0) x /= n;
  return x;
}

}  // namespace

PagdGlobalStats pagd_global_stats() {
  return {g_pagd_invocations.load(), g_pagd_violations.load()};
}

void reset_pagd_global_stats() {
  g_pagd_invocations.store(0);
  g_pagd_violations.store(0);
}

void PagdConfig::validate() const {
  require(kappa >= 1.0, "pagd requires kappa >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, "pagd requires epsilon in (0,1)");
  require(exit_safety >= 1.0, "pagd exit_safety >= 1");
}

Index PagdConfig::max_iters() const {
  validate();
  double eps = clamp_epsilon(epsilon);
  double cap = std::ceil(4.0 * std::sqrt(kappa) * std::log(2.0 / eps));
  return cap < 1.0 ? 1 : static_cast<Index>(cap);
}

Vector pagd(const LinearOperator& m, const SolverHandle& precond, const PagdConfig& cfg,
            const Vector& b, PagdStats* stats) {
  cfg.validate();
  require(m.rows() == m.cols(), "pagd requires a square operator");
  require(precond.dim() == m.rows(), "pagd preconditioner dimension mismatch");
  require(precond.epsilon() <= 1.0 / (10.0 * cfg.kappa) + 1e-12,
          "pagd inner solver accuracy must be <= 1/(10 kappa)");
  require(b.size() == m.rows(), "pagd right-hand side dimension mismatch");

  const Index cap = cfg.max_iters();
  const double beta = (std::sqrt(cfg.kappa) - 1.0) / (std::sqrt(cfg.kappa) + 1.0);
  g_pagd_invocations.fetch_add(1);

  if (stats) {
    *stats = PagdStats{};
    stats->cap = cap;
  }

  Vector x = Vector::Zero(b.size());
  Vector y = x;
  Vector g(b.size()), p(b.size());
  double ref = -1.0;
  Index applied = 0;
  Vector result = x;
  bool certified = false;

  for (Index it = 0; it < cap; ++it) {
    m.apply_to(y, g);
    g -= b;
    p = precond(g);
    ++applied;
    if (!g.allFinite() || !p.allFinite())
      throw numeric_error("pagd: nonfinite iterate");
    double gp = g.dot(p);
    if (it == 0) ref = gp > 0.0 ? gp : 0.0;
    // A PSD preconditioner keeps g'p nonnegative up to rounding. A clearly
    // negative value means the solver handed in is not a contraction, and a
    // certificate based on it would be meaningless.
    if (gp < -1e-9 * ref) throw numeric_error("pagd: preconditioned gradient turned indefinite");
    double lhs = 2.0 * cfg.exit_safety * cfg.kappa * (gp > 0.0 ? gp : 0.0);
    double rhs = cfg.epsilon * ref;
    if (stats) stats->last_ratio = rhs > 0.0 ? lhs / rhs : 0.0;
    if (!cfg.exact_cap && lhs <= rhs) {
      result = y;
      certified = true;
      break;
    }
    // Past the momentum transient a run whose g'p sits far above the nominal
    // decay curve for the declared kappa cannot certify within the cap; the
    // declaration is wrong and finishing the budget would only burn work. The
    // curve uses a quarter of the nominal rate and a 10x constant as slack.
    if (cfg.stall_check && !cfg.exact_cap && ref > 0.0 &&
        static_cast<double>(it) >= 2.0 * std::sqrt(cfg.kappa)) {
      const double expected = std::exp(-static_cast<double>(it) / (2.0 * std::sqrt(cfg.kappa)));
      if (gp > 10.0 * ref * std::max(2.0 * cfg.epsilon, expected))
        throw numeric_error("pagd: stalled without certificate");
    }
    Vector xn = y - p;
    y = xn + beta * (xn - x);
    x = std::move(xn);
    result = x;
  }

  if (stats) {
    stats->iterations = applied;
    stats->certified = certified;
  }
  if (applied > cap) g_pagd_violations.fetch_add(1);
  return result;
}

SolverHandle make_pagd_solver(OpPtr m, SolverHandle precond, PagdConfig cfg,
                              std::string target_desc) {
  cfg.validate();
  require(m != nullptr, "make_pagd_solver requires an operator");
  auto fn = [m, precond, cfg](const Vector& b) { return pagd(*m, precond, cfg, b); };
  return SolverHandle(m->rows(), cfg.epsilon, std::move(target_desc), std::move(fn));
}

double power_method_exact(const LinearOperator& m, Index q, std::uint64_t seed) {
  require(m.rows() == m.cols(), "power method requires a square operator");
  require(q >= 2, "power method requires q >= 2");
  const Index d = m.rows();
  for (int attempt = 0; attempt < 5; ++attempt) {
    Vector u = gaussian_unit(d, derive_seed(seed, 1000 + attempt));
    bool dead = false;
    Vector t(d);
    for (Index j = 0; j < q; ++j) {
      m.apply_to(u, t);
      double c = t.norm();
      if (!(c > 0.0) || !t.allFinite()) {
        dead = true;
        break;
      }
      u = t / c;
    }
    if (dead) continue;
    m.apply_to(u, t);
    double num = u.dot(t);
    if (!std::isfinite(num)) throw numeric_error("power method: nonfinite ratio");
    return num;
  }
  throw numeric_error("power method: iterates vanished on every attempt");
}

double power_ratio_estimate(const MatvecHandle& f, Index q, std::uint64_t seed) {
  require(q >= 1, "power ratio requires q >= 1");
  const Index d = f.dim;
  for (int attempt = 0; attempt < 5; ++attempt) {
    Vector x = gaussian_unit(d, derive_seed(seed, 2000 + attempt));
    Vector y = x;
    double c_last = 0.0;
    double dot_prev = 0.0, dot_last = 0.0;
    bool dead = false;
    for (Index j = 1; j <= 2 * q + 1; ++j) {
      Vector t = f(y);
      double c = t.norm();
      if (!(c > 0.0) || !t.allFinite()) {
        dead = true;
        break;
      }
      y = t / c;
      if (j == 2 * q) dot_prev = x.dot(y);
      if (j == 2 * q + 1) {
        dot_last = x.dot(y);
        c_last = c;
      }
    }
    if (dead || dot_prev == 0.0) continue;
    double ratio = c_last * dot_last / dot_prev;
    if (!std::isfinite(ratio)) throw numeric_error("power ratio: nonfinite estimate");
    return ratio;
  }
  throw numeric_error("power ratio: degenerate draws on every attempt");
}

double estimate_spectral_norm(const MatvecHandle& f, double epsilon, double delta,
                              std::uint64_t seed, const PowerConfig& cfg) {
  require(epsilon > 0.0 && epsilon < 1.0, "spectral norm estimate: epsilon in (0,1)");
  require(delta > 0.0 && delta < 1.0, "spectral norm estimate: delta in (0,1)");
  const Index d = f.dim;
  Index q = cfg.q_override > 0
                ? cfg.q_override
                : static_cast<Index>(std::ceil(cfg.q_mult * log_floor1(static_cast<double>(d)) /
                                               epsilon));
  if (q < 2) q = 2;
  Index trials = cfg.trials_override > 0
                     ? cfg.trials_override
                     : static_cast<Index>(std::ceil(cfg.trials_mult * std::log(1.0 / delta)));
  if (trials < 1) trials = 1;
  std::vector<double> xs;
  xs.reserve(trials);
  for (Index t = 0; t < trials; ++t)
    xs.push_back(power_ratio_estimate(f, q, derive_seed(seed, 3000 + t)));
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

double spectral_upper_2approx(const LinearOperator& m, std::uint64_t seed) {
  const Index d = m.rows();
  Index q = 1 + static_cast<Index>(std::ceil(20.0 * log_floor1(static_cast<double>(d))));
  double best = 0.0;
  for (int t = 0; t < 5; ++t) {
    double xi = power_method_exact(m, q, derive_seed(seed, 4000 + t));
    if (xi > best) best = xi;
  }
  require(best > 0.0, "spectral upper bound: operator looks zero");
  return 2.0 * best;
}

MatvecHandle inexact_matvec_power(const MatvecHandle& f, Index q) {
  require(q >= 1, "matvec power requires q >= 1");
  if (q == 1) return f;
  double acc = 0.0;
  double kap = f.kappa_bound;
  if (f.accuracy > 0.0) {
    require(kap >= 1.0, "matvec power needs a condition bound to compose accuracy");
    acc = f.accuracy *
          std::pow(3.0 * kap, 2.0 * static_cast<double>(q));
    if (acc > 1.0) acc = 1.0;
  }
  double kap_q = kap >= 1.0 ? std::pow(kap, static_cast<double>(q)) : -1.0;
  auto fn = [f, q](const Vector& b) {
    Vector v = f(b);
    for (Index j = 1; j < q; ++j) v = f(v);
    return v;
  };
  return MatvecHandle{f.dim, acc, kap_q, std::move(fn)};
}

SolverHandle square_solver(const SolverHandle& f, double kappa_a, double epsilon) {
  require(kappa_a >= 1.0, "square solver requires kappa >= 1");
  require(epsilon > 0.0, "square solver requires epsilon > 0");
  require(f.epsilon() <= epsilon / (9.0 * kappa_a * kappa_a) + 1e-15,
          "square solver: inner accuracy must be epsilon/(9 kappa^2)");
  auto fn = [f](const Vector& b) { return f(f(b)); };
  return SolverHandle(f.dim(), epsilon, "squared " + f.target_desc(), std::move(fn));
}

}  // namespace skch
