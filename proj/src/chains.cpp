#include "sketchchain/chains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sketchchain/dense.hpp"
#include "sketchchain/iterative.hpp"
#include "sketchchain/rng.hpp"
#include "sketchchain/woodbury.hpp"

namespace skch {

Index PreconChain::dim() const { return m0 ? m0->rows() : 0; }

void PreconChain::validate() const {
  require(m0 != nullptr, "chain: missing head operator");
  require(m0->rows() == m0->cols(), "chain: head operator must be square");
  require(!levels.empty(), "chain: need at least one level");
  for (const auto& lvl : levels) {
    require(lvl.m != nullptr, "chain: missing level operator");
    require(lvl.m->rows() == lvl.m->cols(), "chain: level operator must be square");
    require(lvl.m->rows() == m0->rows(), "chain: level dimension mismatch");
    require(lvl.kappa >= 1.0, "chain: level factor below one");
  }
}

namespace {

// Accuracy the level-t loop must deliver for M_{t-1}. Everything below the
// head feeds the next loop up as preconditioner, which pins it at
// 1/(10 kappa_{t-1}); the head runs at the requested accuracy.
double level_epsilon(const PreconChain& chain, Index t, double epsilon) {
  if (t == 1) return clamp_epsilon(epsilon);
  return 1.0 / (10.0 * chain.levels[t - 2].kappa);
}

}  // namespace

std::vector<Index> rpagd_caps(const PreconChain& chain, double epsilon) {
  chain.validate();
  std::vector<Index> caps(chain.levels.size());
  for (Index t = 1; t <= chain.depth(); ++t) {
    PagdConfig cfg;
    cfg.kappa = chain.levels[t - 1].kappa;
    cfg.epsilon = level_epsilon(chain, t, epsilon);
    caps[t - 1] = cfg.max_iters();
  }
  return caps;
}

SolverHandle rpagd(const PreconChain& chain, SolverHandle bsolve, double epsilon,
                   const RpagdOptions& opts) {
  chain.validate();
  require(epsilon > 0.0 && epsilon < 1.0, "rpagd: epsilon out of range");
  require(bsolve.valid(), "rpagd: empty base solver");
  require(bsolve.dim() == chain.dim(), "rpagd: base solver dimension mismatch");
  const Index T = chain.depth();
  const double need = 1.0 / (10.0 * chain.levels[T - 1].kappa);
  require(bsolve.epsilon() <= need * (1.0 + 1e-9),
          "rpagd: base solver accuracy exceeds 1/(10 kappa_T)");
  if (opts.level_solvers) opts.level_solvers->assign(static_cast<std::size_t>(T), SolverHandle{});
  SolverHandle f = std::move(bsolve);
  for (Index t = T; t >= 1; --t) {
    PagdConfig cfg;
    cfg.kappa = chain.levels[t - 1].kappa;
    cfg.epsilon = level_epsilon(chain, t, epsilon);
    cfg.exact_cap = opts.exact_cap;
    cfg.exit_safety = opts.exit_safety;
    OpPtr target = (t == 1) ? chain.m0 : chain.levels[t - 2].m;
    f = make_pagd_solver(std::move(target), std::move(f), cfg,
                         "chain level " + std::to_string(t - 1));
    if (opts.level_solvers) (*opts.level_solvers)[static_cast<std::size_t>(t - 1)] = f;
  }
  return f;
}

Index RegularizedChain::dim() const {
  return entries.empty() ? 0 : static_cast<Index>(entries.front().a.cols());
}

void RegularizedChain::validate() const {
  require(!entries.empty(), "regularized chain: no entries");
  const Index d = static_cast<Index>(entries.front().a.cols());
  require(d > 0, "regularized chain: zero-width head");
  double prev = 0.0;
  for (const auto& e : entries) {
    require(e.a.cols() == d, "regularized chain: column count mismatch");
    require(e.a.rows() > 0, "regularized chain: empty level matrix");
    require(e.nu > 0.0, "regularized chain: ridge not positive");
    require(e.nu >= prev, "regularized chain: ridge schedule not monotone");
    prev = e.nu;
  }
}

PreconChain lift_regularized_chain(const RegularizedChain& chain, double epsilon, WorkPtr work) {
  chain.validate();
  require(chain.depth() >= 1, "lift: chain needs at least one level beyond the head");
  require(epsilon > 0.0 && epsilon < 1.0, "lift: epsilon out of range");
  PreconChain out;
  out.m0 = make_gram_ridge(make_dense(chain.entries[0].a, work), chain.entries[0].nu, work);
  double scale = 1.0;
  for (std::size_t t = 1; t < chain.entries.size(); ++t) {
    scale *= 4.0;
    OpPtr gram =
        make_gram_ridge(make_dense(chain.entries[t].a, work), chain.entries[t].nu, work);
    PreconLevel lvl;
    lvl.m = make_scaled(std::move(gram), scale, work);
    lvl.kappa = 16.0 * chain.entries[t].nu / chain.entries[t - 1].nu;
    out.levels.push_back(std::move(lvl));
  }
  out.validate();
  return out;
}

GeometricSchedule geometric_schedule(Index d, Index k, double u, double nu_base) {
  require(d >= 1, "schedule: dimension not positive");
  require(k >= 1 && k <= d, "schedule: rank must lie in [1, d]");
  require(u > 0.0, "schedule: tail estimate not positive");
  require(nu_base > 1.0, "schedule: ridge base must exceed one");
  GeometricSchedule s;
  const double dd = static_cast<double>(d);
  s.T = std::max<Index>(
      1, static_cast<Index>(std::ceil(std::log(dd / static_cast<double>(k)) / std::log(nu_base))));
  s.k_t.resize(static_cast<std::size_t>(s.T) + 1);
  s.nu_t.resize(static_cast<std::size_t>(s.T) + 1);
  const double nu0 = u * static_cast<double>(k) / dd;
  for (Index t = 0; t <= s.T; ++t) {
    s.nu_t[static_cast<std::size_t>(t)] = nu0 * std::pow(nu_base, static_cast<double>(t));
    if (t == 0) {
      s.k_t[0] = d;
    } else {
      Index kt = static_cast<Index>(std::ceil(dd * std::pow(nu_base, 1.0 - static_cast<double>(t))));
      s.k_t[static_cast<std::size_t>(t)] = std::min(d, std::max(k, kt));
    }
  }
  return s;
}

RegularizedChain build_chain_geometric(const DenseMatrix& a, Index k, double u, double delta,
                                       std::uint64_t seed, const WorkPtr& work,
                                       const ChainBuildConfig& cfg) {
  require(a.rows() > 0 && a.cols() > 0, "chain build: empty matrix");
  require(delta > 0.0 && delta < 1.0, "chain build: delta out of range");
  const Index d = static_cast<Index>(a.cols());
  GeometricSchedule sched = geometric_schedule(d, k, u, cfg.nu_base);
  RegularizedChain out;
  out.entries.resize(static_cast<std::size_t>(sched.T) + 1);
  out.entries[0] = {a, sched.nu_t[0]};
  const double dl = delta / static_cast<double>(sched.T);
  for (Index t = 1; t <= sched.T; ++t) {
    auto emb = regularized_embed(a, sched.k_t[static_cast<std::size_t>(t)], cfg.eps_level, dl,
                                 derive_seed(seed, static_cast<std::uint64_t>(t)), work, cfg.c_s,
                                 cfg.c_b);
    out.entries[static_cast<std::size_t>(t)] = {std::move(emb.sa),
                                                sched.nu_t[static_cast<std::size_t>(t)]};
  }
  out.validate();
  return out;
}

namespace {

Index optimized_depth(Index d, Index k, double alpha) {
  const double inner = std::log(static_cast<double>(d) / (2.0 * static_cast<double>(k)));
  const double root = std::sqrt(std::max(0.0, inner) / alpha);
  return std::max<Index>(1, static_cast<Index>(std::ceil(root)));
}

Index optimized_rank(Index d, Index k, double alpha, Index t) {
  const double raw =
      static_cast<double>(d) * std::exp(-alpha * static_cast<double>(t) * static_cast<double>(t));
  return std::max<Index>(static_cast<Index>(std::ceil(raw)), 2 * k);
}

}  // namespace

void ScheduleParams::validate(Index d) const {
  require(d >= 1, "schedule: dimension not positive");
  require(alpha > 1.0, "schedule: alpha must exceed one");
  require(k >= 1 && 2 * k <= d, "schedule: rank must satisfy 2k <= d");
  require(T >= 1, "schedule: depth not positive");
  require(static_cast<Index>(k_t.size()) == T + 1, "schedule: rank list size mismatch");
  require(static_cast<Index>(nu_t.size()) == T + 1, "schedule: ridge list size mismatch");
  require(k_t[0] == d, "schedule: head rank must equal d");
  for (Index t = 1; t <= T; ++t) {
    require(k_t[static_cast<std::size_t>(t)] >= 2 * k, "schedule: rank fell below 2k");
    require(k_t[static_cast<std::size_t>(t)] <= k_t[static_cast<std::size_t>(t) - 1],
            "schedule: ranks must be non-increasing");
  }
  double prev = 0.0;
  for (double nu : nu_t) {
    require(nu > 0.0, "schedule: ridge not positive");
    require(nu >= prev, "schedule: ridge schedule not monotone");
    prev = nu;
  }
}

ScheduleParams optimized_schedule(Index d, Index k, double alpha,
                                  const std::vector<double>& nu_list) {
  require(d >= 1, "schedule: dimension not positive");
  require(k >= 1, "schedule: rank not positive");
  require(2 * k <= d, "schedule: rank must satisfy 2k <= d");
  require(alpha > 1.0, "schedule: alpha must exceed one");
  ScheduleParams p;
  p.alpha = alpha;
  p.k = k;
  p.T = optimized_depth(d, k, alpha);
  require(static_cast<Index>(nu_list.size()) >= p.T + 1, "schedule: ridge list too short");
  p.k_t.resize(static_cast<std::size_t>(p.T) + 1);
  p.nu_t.resize(static_cast<std::size_t>(p.T) + 1);
  p.k_t[0] = d;
  for (Index t = 1; t <= p.T; ++t)
    p.k_t[static_cast<std::size_t>(t)] = optimized_rank(d, k, alpha, t);
  require(nu_list[0] > 0.0, "schedule: ridge not positive");
  double run = 0.0;
  for (Index t = 0; t <= p.T; ++t) {
    require(nu_list[static_cast<std::size_t>(t)] >= 0.0, "schedule: negative ridge");
    run = std::max(run, nu_list[static_cast<std::size_t>(t)]);
    p.nu_t[static_cast<std::size_t>(t)] = run;
  }
  p.validate(d);
  return p;
}

RegularizedChain build_chain_optimized(const DenseMatrix& a, Index k, double alpha,
                                       const std::vector<double>& nu_list, double delta,
                                       std::uint64_t seed, const WorkPtr& work,
                                       const ChainBuildConfig& cfg) {
  require(a.rows() > 0 && a.cols() > 0, "chain build: empty matrix");
  require(delta > 0.0 && delta < 1.0, "chain build: delta out of range");
  const Index d = static_cast<Index>(a.cols());
  ScheduleParams p = optimized_schedule(d, k, alpha, nu_list);
  RegularizedChain out;
  out.entries.resize(static_cast<std::size_t>(p.T) + 1);
  out.entries[0] = {a, p.nu_t[0]};
  const double dl = delta / static_cast<double>(p.T);
  for (Index t = 1; t <= p.T; ++t) {
    // Embeds at quadruple the scheduled rank; past d the tail is empty.
    const Index rank = std::min(d, 4 * p.k_t[static_cast<std::size_t>(t)]);
    auto emb = regularized_embed(a, rank, cfg.eps_level, dl,
                                 derive_seed(seed, static_cast<std::uint64_t>(t)), work, cfg.c_s,
                                 cfg.c_b);
    out.entries[static_cast<std::size_t>(t)] = {std::move(emb.sa),
                                                p.nu_t[static_cast<std::size_t>(t)]};
  }
  out.validate();
  return out;
}

RegularizedChain prune_chain(const RegularizedChain& chain, Index max_rows) {
  chain.validate();
  require(max_rows >= 1, "prune: row threshold not positive");
  RegularizedChain out;
  out.entries.push_back(chain.entries.front());
  for (std::size_t t = 1; t < chain.entries.size(); ++t) {
    if (chain.entries[t].a.rows() <= max_rows) out.entries.push_back(chain.entries[t]);
  }
  out.validate();
  return out;
}

namespace {

struct CandidateOutcome {
  Vector x;
  double res2 = std::numeric_limits<double>::infinity();
  bool certified = false;
  Index depth = 0;
};

// Solver for the head Gram of a built chain: drop non-compressing levels,
// factor densely at depth zero, otherwise recurse from a base solver for the
// smallest level read at the lifted scale.
SolverHandle chain_head_solver(const RegularizedChain& chain, double eps_chain, double delta,
                               std::uint64_t seed, const WorkPtr& work, Index* depth_out) {
  const Index d = chain.dim();
  RegularizedChain pruned = prune_chain(chain, std::max<Index>(1, (3 * d) / 4));
  if (depth_out) *depth_out = pruned.depth();
  if (pruned.depth() == 0) {
    return base_solver(pruned.entries[0].a, pruned.entries[0].nu, eps_chain, delta,
                       derive_seed(seed, 1), work);
  }
  PreconChain lifted = lift_regularized_chain(pruned, eps_chain, work);
  const double kappa_last = lifted.levels.back().kappa;
  const RegularizedLevel& last = pruned.entries.back();
  SolverHandle base = base_solver(last.a, last.nu, 1.0 / (10.0 * kappa_last), delta,
                                  derive_seed(seed, 2), work);
  SolverHandle bs = scale_target(base, std::pow(4.0, static_cast<double>(pruned.depth())));
  return rpagd(lifted, std::move(bs), eps_chain, {});
}

}  // namespace

Vector regression_solve_warmup(const DenseMatrix& a, const Vector& b, Index k, double epsilon,
                               WarmupMode mode, const SpectrumHints& hints, std::uint64_t seed,
                               WorkPtr work, const WarmupOptions& opts, WarmupReport* report) {
  const Index n = a.rows();
  const Index d = a.cols();
  require(n > 0 && d > 0, "warmup: empty matrix");
  require(b.size() == n, "warmup: right-hand side dimension mismatch");
  require(k >= 1 && k <= d, "warmup: rank out of range");
  require(epsilon > 0.0 && epsilon < 1.0, "warmup: epsilon out of range");
  require(opts.delta > 0.0 && opts.delta < 1.0, "warmup: delta out of range");
  if (!work) work = make_work();

  if (!hints.empty()) {
    require(static_cast<Index>(hints.sigma.size()) == d, "warmup: hint count must equal d");
    for (std::size_t i = 1; i < hints.sigma.size(); ++i)
      require(hints.sigma[i] <= hints.sigma[i - 1], "warmup: hints must be non-increasing");
    if (hints.sigma.back() <= 0.0)
      throw numeric_error(
          "ill-posed instance: estimated smallest singular value is not positive");
  }
  if (mode == WarmupMode::optimized) {
    require(!hints.empty(), "warmup: optimized mode needs spectrum hints");
    require(2 * k <= d, "warmup: optimized mode needs 2k <= d; use the dense path instead");
  }

  // Row reduction to ~d-scale before any chain work; degenerates to the
  // identity when the sized sketch would not shrink n.
  EmbeddingPlan top_plan;
  top_plan.k = d;
  top_plan.epsilon = 0.5;
  top_plan.delta = opts.delta;
  top_plan.c_s = opts.chain.c_s;
  top_plan.c_b = opts.chain.c_b;
  SparseEmbedding s_top = make_sparse_embedding(top_plan, n, derive_seed(seed, 11));
  const DenseMatrix atil = sketch_rows(s_top, a, work);

  OpPtr a_op = make_dense(a, work);
  OpPtr m_outer = make_gram_ridge(a_op, 0.0, work);
  const Vector bn = a_op->apply_adjoint(b);

  // Declared condition numbers beyond this would clamp chain accuracies into
  // the float64 floor and void the solver contracts.
  const double kappa_decl_limit = 0.1 / (10.0 * kEpsilonFloor);

  Index candidate_index = 0;
  WarmupReport rep;

  // One full pipeline pass for a fixed ridge anchor. Chain construction and
  // the outer loop may fail numerically on dishonest candidates; those come
  // back uncertified instead of propagating.
  auto evaluate = [&](double nu0_anchor, double kappa_decl, double eps_chain,
                      bool geometric, double alpha,
                      const std::vector<double>& nus) -> CandidateOutcome {
    CandidateOutcome out;
    if (kappa_decl > kappa_decl_limit) return out;
    const std::uint64_t cseed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(candidate_index));
    ++candidate_index;
    try {
      RegularizedChain chain =
          geometric
              ? build_chain_geometric(atil, k, nu0_anchor, opts.delta, cseed, work, opts.chain)
              : build_chain_optimized(atil, k, alpha, nus, opts.delta, cseed, work, opts.chain);
      SolverHandle head =
          chain_head_solver(chain, eps_chain, opts.delta, derive_seed(cseed, 7), work, &out.depth);
      PagdConfig ocfg;
      ocfg.kappa = kappa_decl;
      ocfg.epsilon = clamp_epsilon(epsilon * epsilon);
      PagdStats st;
      out.x = pagd(*m_outer, scale_target(head, 2.0), ocfg, bn, &st);
      Vector r = a_op->apply(out.x) - b;
      const double res2 = r.squaredNorm();
      out.res2 = std::isfinite(res2) ? res2 : std::numeric_limits<double>::infinity();
      out.certified = st.certified && std::isfinite(res2);
    } catch (const numeric_error&) {
      out = CandidateOutcome{};
    }
    return out;
  };

  const auto finish = [&](const CandidateOutcome& o, double u, double kt) -> Vector {
    if (report) {
      rep.u = u;
      rep.kappa_tilde = kt;
      rep.grid_candidates = candidate_index;
      rep.chain_depth = o.depth;
      rep.certified = true;
      *report = rep;
    }
    return o.x;
  };

  std::vector<double> nus;  // optimized-mode ridge candidates

  if (mode == WarmupMode::optimized) {
    const double s1 = hints.sigma.front();
    const double sd = hints.sigma.back();
    double alpha = opts.alpha;
    if (alpha <= 0.0) {
      alpha = std::log(20.0 * std::log(320.0 * 256.0 * static_cast<double>(d) * s1 * s1 /
                                       (sd * sd)));
      alpha = std::max(alpha, 1.0 + 1e-6);
    }
    require(alpha > 1.0, "warmup: alpha must exceed one");
    const Index T = optimized_depth(d, k, alpha);
    nus.resize(static_cast<std::size_t>(T) + 1);
    nus[0] = sd * sd;
    for (Index t = 1; t <= T; ++t) {
      const Index kt = optimized_rank(d, k, alpha, t);
      nus[static_cast<std::size_t>(t)] = kt < d ? tail_sum(hints.sigma, kt) : 0.0;
    }
    double kappa_decl = 8.0;
    double eps_chain = 1.0 / 160.0;
    CandidateOutcome out = evaluate(nus[0], kappa_decl, eps_chain, false, alpha, nus);
    if (!out.certified) {
      rep.retries = 1;
      out = evaluate(nus[0], 4.0 * kappa_decl, eps_chain / 4.0, false, alpha, nus);
      kappa_decl *= 4.0;
    }
    if (out.certified) return finish(out, nus[0], kappa_decl);
    throw numeric_error("ill-posed instance: no candidate certified in optimized warm-up");
  }

  // Geometric mode. With hints, a single anchored candidate; otherwise (or
  // when the hinted candidate never certifies) a doubling grid over the
  // condition surrogate and the tail-mass anchor.
  if (!hints.empty()) {
    double u = k < d ? tail_sum(hints.sigma, k) : 0.0;
    if (u <= 0.0) u = hints.sigma.back() * hints.sigma.back();  // empty tail
    const double ktil = k < d ? kappa_bar(hints.sigma, k, 2.0) : 1.0;
    double kappa_decl = 64.0 * std::max(1.0, ktil) * std::max(1.0, ktil);
    CandidateOutcome out = evaluate(u, kappa_decl, 1.0 / (20.0 * kappa_decl), true, 0.0, nus);
    if (!out.certified) {
      rep.retries = 1;
      kappa_decl *= 4.0;
      out = evaluate(u, kappa_decl, 1.0 / (20.0 * kappa_decl), true, 0.0, nus);
    }
    if (out.certified) return finish(out, u, ktil);
    rep.used_grid = true;  // fall through to the grid
  }

  work->add_macs(n * d);  // grid anchor: one pass for the squared Frobenius norm
  work->add_overhead(n + d);
  const double frob2 = a.squaredNorm();
  if (!(frob2 > 0.0))
    throw numeric_error("ill-posed instance: zero matrix has no least-squares solution");

  const double kappa_cap =
      opts.kappa_cap > 0.0
          ? opts.kappa_cap
          : std::min(4.0 * static_cast<double>(d) * static_cast<double>(d), 262144.0);
  const std::int64_t grid_start = work->total();
  auto budget_spent = [&]() {
    return opts.grid_work_budget > 0 && work->total() - grid_start >= opts.grid_work_budget;
  };

  CandidateOutcome best_cert, best_any;
  double best_cert_u = 0.0, best_cert_kt = 0.0;
  double best_any_u = 0.0, best_any_kt = 0.0;
  bool stop = false;
  for (double ktil = 2.0; ktil <= kappa_cap && !stop; ktil *= 2.0) {
    const double kappa_decl = 64.0 * ktil * ktil;
    if (kappa_decl > kappa_decl_limit) break;
    const Index tmax = static_cast<Index>(
        std::ceil(std::log2(static_cast<double>(d) * ktil)));
    double u = frob2;
    for (Index t = 1; t <= tmax; ++t) {
      u *= 0.5;
      CandidateOutcome out = evaluate(u, kappa_decl, 1.0 / (20.0 * kappa_decl), true, 0.0, nus);
      if (out.res2 < best_any.res2) {
        best_any = out;
        best_any_u = u;
        best_any_kt = ktil;
      }
      if (out.certified &&
          (!best_cert.certified || out.res2 <= best_cert.res2 * (1.0 + 1e-10))) {
        best_cert = std::move(out);
        best_cert_u = u;
        best_cert_kt = ktil;
      }
      if (budget_spent()) {
        stop = true;
        break;
      }
    }
    if (best_cert.certified) break;  // keep the round's argmin, smaller u wins ties
  }

  if (best_cert.certified) {
    rep.used_grid = true;
    return finish(best_cert, best_cert_u, best_cert_kt);
  }
  if (std::isfinite(best_any.res2)) {
    rep.retries += 1;
    rep.used_grid = true;
    const double kappa_decl = 4.0 * 64.0 * best_any_kt * best_any_kt;
    CandidateOutcome out =
        evaluate(best_any_u, kappa_decl, 1.0 / (20.0 * kappa_decl), true, 0.0, nus);
    if (out.certified) return finish(out, best_any_u, best_any_kt);
  }
  throw numeric_error("ill-posed instance: residual never certified across the grid");
}

}  // namespace skch
