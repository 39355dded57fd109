#pragma once

#include <memory>
#include <vector>

#include "sketchchain/common.hpp"
#include "sketchchain/work.hpp"

namespace skch {

enum class OpKind { dense, embedding, product, gram_ridge, psd_explicit, adjoint, scaled };

// Matrix-free operator. Applications charge the shared work counter:
// mul_adds by the exact multiply-add count of the kernel, apply_overhead by
// rows + cols per application.
class LinearOperator {
public:
  explicit LinearOperator(WorkPtr work) : work_(work ? std::move(work) : make_work()) {}
  virtual ~LinearOperator() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual OpKind kind() const = 0;
  virtual void apply_to(const Vector& in, Vector& out) const = 0;          // out = Op in
  virtual void apply_adjoint_to(const Vector& in, Vector& out) const = 0;  // out = Op' in

  Vector apply(const Vector& in) const;
  Vector apply_adjoint(const Vector& in) const;

  const WorkPtr& work() const { return work_; }

protected:
  void charge(Index macs) const;

private:
  WorkPtr work_;
};

using OpPtr = std::shared_ptr<const LinearOperator>;

class DenseOp final : public LinearOperator {
public:
  DenseOp(DenseMatrix a, WorkPtr work) : LinearOperator(std::move(work)), a_(std::move(a)) {}

  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  OpKind kind() const override { return OpKind::dense; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override;

  const DenseMatrix& matrix() const { return a_; }

private:
  DenseMatrix a_;
};

// A' A + nu I for the wrapped operator A. Square, PSD (PD when nu > 0).
class GramRidgeOp final : public LinearOperator {
public:
  GramRidgeOp(OpPtr a, double nu, WorkPtr work);

  Index rows() const override { return a_->cols(); }
  Index cols() const override { return a_->cols(); }
  OpKind kind() const override { return OpKind::gram_ridge; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override { apply_to(in, out); }

  const OpPtr& inner() const { return a_; }
  double nu() const { return nu_; }

private:
  OpPtr a_;
  double nu_;
};

// Explicit symmetric PSD matrix plus optional ridge.
class PsdExplicitOp final : public LinearOperator {
public:
  PsdExplicitOp(DenseMatrix m, double ridge, WorkPtr work);

  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.rows(); }
  OpKind kind() const override { return OpKind::psd_explicit; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override { apply_to(in, out); }

  const DenseMatrix& matrix() const { return m_; }
  double ridge() const { return ridge_; }

private:
  DenseMatrix m_;
  double ridge_;
};

// Composition factors[0] * factors[1] * ... * factors.back(). Factors charge
// their own application cost; the product charges only its own overhead.
class ProductOp final : public LinearOperator {
public:
  ProductOp(std::vector<OpPtr> factors, WorkPtr work);

  Index rows() const override { return factors_.front()->rows(); }
  Index cols() const override { return factors_.back()->cols(); }
  OpKind kind() const override { return OpKind::product; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override;

private:
  std::vector<OpPtr> factors_;
};

// c times the wrapped operator, c > 0. The wrapped operator charges its own
// application; the rescale charges rows() extra.
class ScaledOp final : public LinearOperator {
public:
  ScaledOp(OpPtr a, double c, WorkPtr work);

  Index rows() const override { return a_->rows(); }
  Index cols() const override { return a_->cols(); }
  OpKind kind() const override { return OpKind::scaled; }
  void apply_to(const Vector& in, Vector& out) const override;
  void apply_adjoint_to(const Vector& in, Vector& out) const override;

  const OpPtr& inner() const { return a_; }
  double scale() const { return c_; }

private:
  OpPtr a_;
  double c_;
};

class AdjointOp final : public LinearOperator {
public:
  AdjointOp(OpPtr a, WorkPtr work) : LinearOperator(std::move(work)), a_(std::move(a)) {}

  Index rows() const override { return a_->cols(); }
  Index cols() const override { return a_->rows(); }
  OpKind kind() const override { return OpKind::adjoint; }
  void apply_to(const Vector& in, Vector& out) const override { a_->apply_adjoint_to(in, out); }
  void apply_adjoint_to(const Vector& in, Vector& out) const override { a_->apply_to(in, out); }

private:
  OpPtr a_;
};

OpPtr make_dense(DenseMatrix a, WorkPtr work);
OpPtr make_gram_ridge(OpPtr a, double nu, WorkPtr work);
OpPtr make_psd_explicit(DenseMatrix m, double ridge, WorkPtr work);
OpPtr make_product(std::vector<OpPtr> factors, WorkPtr work);
OpPtr make_adjoint(OpPtr a, WorkPtr work);
OpPtr make_scaled(OpPtr a, double c, WorkPtr work);

}  // namespace skch
