#include "sketchchain/operators.hpp"

namespace skch {

Vector LinearOperator::apply(const Vector& in) const {
  require(in.size() == cols(), "operator apply: dimension mismatch");
  Vector out;
  apply_to(in, out);
  return out;
}

Vector LinearOperator::apply_adjoint(const Vector& in) const {
  require(in.size() == rows(), "operator apply_adjoint: dimension mismatch");
  Vector out;
  apply_adjoint_to(in, out);
  return out;
}

void LinearOperator::charge(Index macs) const {
  work_->add_macs(macs);
  work_->add_overhead(rows() + cols());
}

void DenseOp::apply_to(const Vector& in, Vector& out) const {
  out.noalias() = a_ * in;
  charge(a_.rows() * a_.cols());
}

void DenseOp::apply_adjoint_to(const Vector& in, Vector& out) const {
  out.noalias() = a_.transpose() * in;
  charge(a_.rows() * a_.cols());
}

GramRidgeOp::GramRidgeOp(OpPtr a, double nu, WorkPtr work)
    : LinearOperator(std::move(work)), a_(std::move(a)), nu_(nu) {
  require(static_cast<bool>(a_), "GramRidgeOp requires an operator");
  require(nu_ >= 0.0, "GramRidgeOp requires nu >= 0");
}

void GramRidgeOp::apply_to(const Vector& in, Vector& out) const {
  Vector mid = a_->apply(in);
  out = a_->apply_adjoint(mid);
  if (nu_ > 0.0) {
    out.noalias() += nu_ * in;
    charge(cols());
  } else {
    charge(0);
  }
}

PsdExplicitOp::PsdExplicitOp(DenseMatrix m, double ridge, WorkPtr work)
    : LinearOperator(std::move(work)), m_(std::move(m)), ridge_(ridge) {
  require(m_.rows() == m_.cols(), "PsdExplicitOp requires a square matrix");
  require(ridge_ >= 0.0, "PsdExplicitOp requires ridge >= 0");
}

void PsdExplicitOp::apply_to(const Vector& in, Vector& out) const {
  out.noalias() = m_ * in;
  Index d = m_.rows();
  if (ridge_ > 0.0) {
    out.noalias() += ridge_ * in;
    charge(d * d + d);
  } else {
    charge(d * d);
  }
}

ProductOp::ProductOp(std::vector<OpPtr> factors, WorkPtr work)
    : LinearOperator(std::move(work)), factors_(std::move(factors)) {
  require(!factors_.empty(), "ProductOp requires at least one factor");
  for (std::size_t i = 0; i + 1 < factors_.size(); ++i) {
    require(factors_[i]->cols() == factors_[i + 1]->rows(),
            "ProductOp factor dimensions do not chain");
  }
}

void ProductOp::apply_to(const Vector& in, Vector& out) const {
  Vector cur = in;
  for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) cur = (*it)->apply(cur);
  out = std::move(cur);
  charge(0);
}

void ProductOp::apply_adjoint_to(const Vector& in, Vector& out) const {
  Vector cur = in;
  for (const auto& f : factors_) cur = f->apply_adjoint(cur);
  out = std::move(cur);
  charge(0);
}

ScaledOp::ScaledOp(OpPtr a, double c, WorkPtr work)
    : LinearOperator(std::move(work)), a_(std::move(a)), c_(c) {
  require(static_cast<bool>(a_), "ScaledOp requires an operator");
  require(c_ > 0.0, "ScaledOp requires a positive scale");
}

void ScaledOp::apply_to(const Vector& in, Vector& out) const {
  a_->apply_to(in, out);
  if (c_ != 1.0) out *= c_;
  charge(c_ != 1.0 ? rows() : 0);
}

void ScaledOp::apply_adjoint_to(const Vector& in, Vector& out) const {
  a_->apply_adjoint_to(in, out);
  if (c_ != 1.0) out *= c_;
  charge(c_ != 1.0 ? cols() : 0);
}

OpPtr make_dense(DenseMatrix a, WorkPtr work) {
  return std::make_shared<DenseOp>(std::move(a), std::move(work));
}

OpPtr make_gram_ridge(OpPtr a, double nu, WorkPtr work) {
  return std::make_shared<GramRidgeOp>(std::move(a), nu, std::move(work));
}

OpPtr make_psd_explicit(DenseMatrix m, double ridge, WorkPtr work) {
  return std::make_shared<PsdExplicitOp>(std::move(m), ridge, std::move(work));
}

OpPtr make_product(std::vector<OpPtr> factors, WorkPtr work) {
  return std::make_shared<ProductOp>(std::move(factors), std::move(work));
}

OpPtr make_adjoint(OpPtr a, WorkPtr work) {
  return std::make_shared<AdjointOp>(std::move(a), std::move(work));
}

OpPtr make_scaled(OpPtr a, double c, WorkPtr work) {
  return std::make_shared<ScaledOp>(std::move(a), c, std::move(work));
}

}  // namespace skch
