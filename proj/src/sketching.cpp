#include "sketchchain/sketching.hpp"

#include <cmath>
#include <unordered_map>

#include "sketchchain/rng.hpp"

namespace skch {

void EmbeddingPlan::validate() const {
  require(k >= 1, "EmbeddingPlan requires k >= 1");
  require(epsilon > 0.0 && epsilon <= 1.0, "EmbeddingPlan requires epsilon in (0,1]");
  require(delta > 0.0 && delta < 1.0, "EmbeddingPlan requires delta in (0,1)");
  require(c_s > 0.0 && c_b > 0.0, "EmbeddingPlan requires positive constants");
}

Index EmbeddingPlan::sketch_rows(Index n) const {
  validate();
  require(n >= 1, "EmbeddingPlan: n >= 1");
  double s = c_s * (static_cast<double>(k) + log_floor1(1.0 / (delta * epsilon))) /
             (epsilon * epsilon);
  Index si = static_cast<Index>(std::ceil(s));
  return si < n ? si : n;
}

Index EmbeddingPlan::nnz_per_col(Index s) const {
  double l = log_floor1(static_cast<double>(k) / (delta * epsilon));
  double b = c_b * (l * l / epsilon + l * l * l);
  Index bi = static_cast<Index>(std::ceil(b));
  if (bi < 1) bi = 1;
  return bi < s ? bi : s;
}

SparseEmbedding SparseEmbedding::identity(Index n, std::uint64_t seed) {
  SparseEmbedding e;
  e.s_ = n;
  e.n_ = n;
  e.b_ = 0;
  e.seed_ = seed;
  e.identity_ = true;
  return e;
}

SparseEmbedding SparseEmbedding::generate(Index s, Index n, Index b, std::uint64_t seed) {
  require(s >= 1 && n >= 1, "SparseEmbedding: s, n >= 1");
  require(b >= 1 && b <= s, "SparseEmbedding: 1 <= b <= s");
  SparseEmbedding e;
  e.s_ = s;
  e.n_ = n;
  e.b_ = b;
  e.seed_ = seed;
  e.identity_ = false;
  e.idx_.resize(static_cast<std::size_t>(n) * b);
  e.val_.resize(static_cast<std::size_t>(n) * b);
  const double scale = 1.0 / std::sqrt(static_cast<double>(b));

  // Per-column partial Fisher-Yates over [s]: b distinct rows, uniform without
  // replacement. Per-column seeds keep regeneration order-independent.
  std::unordered_map<Index, Index> swaps;
  for (Index j = 0; j < n; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    swaps.clear();
    for (Index i = 0; i < b; ++i) {
      Index t = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(s - i)));
      auto look = [&swaps](Index q) {
        auto it = swaps.find(q);
        return it == swaps.end() ? q : it->second;
      };
      Index row = look(t);
      swaps[t] = look(i);
      e.idx_[static_cast<std::size_t>(j) * b + i] = static_cast<std::int32_t>(row);
      e.val_[static_cast<std::size_t>(j) * b + i] = rng.sign() * scale;
    }
  }
  return e;
}

SparseEmbedding SparseEmbedding::from_record(const Record& r) {
  return r.identity ? identity(r.n, r.seed) : generate(r.s, r.n, r.b, r.seed);
}

void SparseEmbedding::apply_to(const Vector& x, Vector& out) const {
  require(x.size() == n_, "SparseEmbedding apply: dimension mismatch");
  if (identity_) {
    out = x;
    return;
  }
  out = Vector::Zero(s_);
  for (Index j = 0; j < n_; ++j) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    const std::size_t base = static_cast<std::size_t>(j) * b_;
    for (Index t = 0; t < b_; ++t) out[idx_[base + t]] += val_[base + t] * xj;
  }
}

void SparseEmbedding::apply_adjoint_to(const Vector& x, Vector& out) const {
  require(x.size() == s_, "SparseEmbedding apply_adjoint: dimension mismatch");
  if (identity_) {
    out = x;
    return;
  }
  out = Vector::Zero(n_);
  for (Index j = 0; j < n_; ++j) {
    const std::size_t base = static_cast<std::size_t>(j) * b_;
    double acc = 0.0;
    for (Index t = 0; t < b_; ++t) acc += val_[base + t] * x[idx_[base + t]];
    out[j] = acc;
  }
}

SparseEmbedding make_sparse_embedding(const EmbeddingPlan& plan, Index n, std::uint64_t seed) {
  Index s = plan.sketch_rows(n);
  if (s >= n) return SparseEmbedding::identity(n, seed);
  Index b = plan.nnz_per_col(s);
  return SparseEmbedding::generate(s, n, b, seed);
}

void EmbeddingOp::apply_to(const Vector& in, Vector& out) const {
  e_.apply_to(in, out);
  charge(e_.is_identity() ? 0 : e_.nnz_per_col() * e_.cols());
}

void EmbeddingOp::apply_adjoint_to(const Vector& in, Vector& out) const {
  e_.apply_adjoint_to(in, out);
  charge(e_.is_identity() ? 0 : e_.nnz_per_col() * e_.cols());
}

OpPtr make_embedding_op(SparseEmbedding e, WorkPtr work) {
  return std::make_shared<EmbeddingOp>(std::move(e), std::move(work));
}

OpPtr compose_embeddings(const std::vector<SparseEmbedding>& stages, WorkPtr work) {
  require(!stages.empty(), "compose_embeddings requires at least one stage");
  for (std::size_t t = 0; t + 1 < stages.size(); ++t) {
    require(stages[t].rows() == stages[t + 1].cols(),
            "compose_embeddings: adjacent stage dimensions do not chain");
  }
  if (!work) work = make_work();
  std::vector<OpPtr> factors;
  factors.reserve(stages.size());
  // ProductOp applies its last factor first; stages arrive in application order.
  for (auto it = stages.rbegin(); it != stages.rend(); ++it)
    factors.push_back(make_embedding_op(*it, work));
  return make_product(std::move(factors), work);
}

DenseMatrix sketch_rows(const SparseEmbedding& s, const DenseMatrix& a, const WorkPtr& work) {
  require(a.rows() == s.cols(), "sketch_rows: dimension mismatch");
  const Index n = a.rows(), d = a.cols();
  if (work) work->add_overhead(d * (s.rows() + n));
  if (s.is_identity()) return a;
  DenseMatrix out = DenseMatrix::Zero(s.rows(), d);
  const Index b = s.nnz_per_col();
  for (Index j = 0; j < n; ++j) {
    for (Index t = 0; t < b; ++t) {
      out.row(s.row_index(j, t)) += s.value(j, t) * a.row(j);
    }
  }
  if (work) work->add_macs(b * n * d);
  return out;
}

DenseMatrix sketch_cols(const DenseMatrix& a, const SparseEmbedding& pi, const WorkPtr& work) {
  require(a.cols() == pi.cols(), "sketch_cols: dimension mismatch");
  const Index n = a.rows(), d = a.cols();
  if (work) work->add_overhead(n * (pi.rows() + d));
  if (pi.is_identity()) return a;
  DenseMatrix out = DenseMatrix::Zero(n, pi.rows());
  const Index b = pi.nnz_per_col();
  for (Index j = 0; j < d; ++j) {
    for (Index t = 0; t < b; ++t) {
      out.col(pi.row_index(j, t)) += pi.value(j, t) * a.col(j);
    }
  }
  if (work) work->add_macs(b * d * n);
  return out;
}

double tail_sum(const std::vector<double>& sigma, Index k) {
  const Index d = static_cast<Index>(sigma.size());
  require(d >= 1, "tail_sum requires a nonempty spectrum");
  require(k >= 1 && k <= d, "tail_sum requires 1 <= k <= d");
  double acc = 0.0;
  for (Index i = k; i < d; ++i) acc += sigma[i] * sigma[i];
  return acc / static_cast<double>(k);
}

RegularizedEmbedResult regularized_embed(const DenseMatrix& a, Index k, double epsilon,
                                         double delta, std::uint64_t seed, const WorkPtr& work,
                                         double c_s, double c_b) {
  require(k >= 1 && k <= a.cols(), "regularized_embed requires 1 <= k <= d");
  EmbeddingPlan plan;
  plan.k = 2 * k;  // the regularized guarantee at rank k needs OSE moments at 2k
  plan.epsilon = epsilon;
  plan.delta = delta;
  plan.c_s = c_s;
  plan.c_b = c_b;
  SparseEmbedding s = make_sparse_embedding(plan, a.rows(), seed);
  DenseMatrix sa = sketch_rows(s, a, work);
  RegularizedEmbedResult res;
  res.s = std::move(s);
  res.sa = std::move(sa);
  res.nu_target_note =
      "gram + nu I within factor " + std::to_string(1.0 + 6.0 * epsilon) +
      " for nu >= mean squared tail beyond rank " + std::to_string(k);
  return res;
}

}  // namespace skch
