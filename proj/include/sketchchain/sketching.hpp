#pragma once

#include <string>
#include <vector>

#include "sketchchain/operators.hpp"

namespace skch {

// Sizing recipe for a sparse embedding targeting rank k at distortion epsilon.
// Natural logs, floored at 1. When the computed s reaches n the plan
// degenerates to the identity embedding.
struct EmbeddingPlan {
  Index k = 1;
  double epsilon = 0.5;
  double delta = 0.1;
  double c_s = 4.0;
  double c_b = 2.0;

  void validate() const;
  Index sketch_rows(Index n) const;  // s = min(n, ceil(c_s (k + L(1/(de)))/e^2))
  Index nnz_per_col(Index s) const;  // b = min(s, ceil(c_b (L(k/(de))^2/e + L(k/(de))^3)))
};

// s x n matrix with b entries of +-1/sqrt(b) per column, rows sampled without
// replacement. Fully determined by (s, n, b, seed); regeneration is
// bit-identical. Column norms are exactly 1 by construction.
class SparseEmbedding {
public:
  SparseEmbedding() = default;

  static SparseEmbedding identity(Index n, std::uint64_t seed);
  static SparseEmbedding generate(Index s, Index n, Index b, std::uint64_t seed);

  Index rows() const { return s_; }
  Index cols() const { return n_; }
  Index nnz_per_col() const { return b_; }
  std::uint64_t seed() const { return seed_; }
  bool is_identity() const { return identity_; }

  // Raw kernels, no work accounting (EmbeddingOp and the dense kernels charge).
  void apply_to(const Vector& x, Vector& out) const;          // out = S x
  void apply_adjoint_to(const Vector& x, Vector& out) const;  // out = S' x

  // Test access to the generated pattern.
  Index row_index(Index col, Index slot) const { return idx_[col * b_ + slot]; }
  double value(Index col, Index slot) const { return val_[col * b_ + slot]; }

  struct Record {
    Index s = 0, n = 0, b = 0;
    std::uint64_t seed = 0;
    bool identity = false;
  };
  Record record() const { return {s_, n_, b_, seed_, identity_}; }
  static SparseEmbedding from_record(const Record& r);

private:
  Index s_ = 0, n_ = 0, b_ = 0;
  std::uint64_t seed_ = 0;
  bool identity_ = false;
  std::vector<std::int32_t> idx_;
  std::vector<double> val_;
};

SparseEmbedding make_sparse_embedding(const EmbeddingPlan& plan, Index n, std::uint64_t seed);

class EmbeddingOp final : public LinearOperator {
public:
  EmbeddingOp(SparseEmbedding e, WorkPtr work)
      : LinearOperator(std::move(work)), e_(std::move(e)) {}

  Index rows() const override { return e_.rows(); }
  Index cols() const override { return e_.cols(); }
  OpKind kind() const override { return OpKind::embedding; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override;

  const SparseEmbedding& embedding() const { return e_; }

private:
  SparseEmbedding e_;
};

OpPtr make_embedding_op(SparseEmbedding e, WorkPtr work);

// Chained application S_T ... S_1 (list given in application order, stage 0
// first). Never materialized densely. OSE parameters degrade to (eps, 3 delta)
// across a chain, which the chain builders account for.
OpPtr compose_embeddings(const std::vector<SparseEmbedding>& stages, WorkPtr work);

// Dense kernels. sketch_rows computes S A; sketch_cols computes A Pi'.
DenseMatrix sketch_rows(const SparseEmbedding& s, const DenseMatrix& a, const WorkPtr& work);
DenseMatrix sketch_cols(const DenseMatrix& a, const SparseEmbedding& pi, const WorkPtr& work);

// (1/k) sum_{i>k} sigma_i^2 for a non-increasing spectrum; k in [1, d].
double tail_sum(const std::vector<double>& sigma, Index k);

struct RegularizedEmbedResult {
  SparseEmbedding s;
  DenseMatrix sa;
  // The guarantee this sketch was sized for: Gram + nu I stays within factor
  // 1+6*epsilon of the original for nu >= tail mean at rank k.
  std::string nu_target_note;
};

// Sketch sized for rank 2k so the regularized guarantee holds at rank k.
RegularizedEmbedResult regularized_embed(const DenseMatrix& a, Index k, double epsilon,
                                         double delta, std::uint64_t seed, const WorkPtr& work,
                                         double c_s = 4.0, double c_b = 2.0);

}  // namespace skch
