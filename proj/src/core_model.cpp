#include "sofari/core_model.hpp"

#include <cmath>
#include <sstream>

namespace sofari {

RegressionData::RegressionData(MatrixXd x, MatrixXd y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.rows())
    throw InvalidArgument("design and response row counts differ");
  if (x_.rows() < 1 || x_.cols() < 1 || y_.cols() < 1)
    throw InvalidArgument("empty design or response");
}

const MatrixXd& RegressionData::gram() const {
  std::call_once(cache_->gram_once, [this] {
    MatrixXd g = MatrixXd::Zero(p(), p());
    g.selfadjointView<Eigen::Lower>().rankUpdate(x_.transpose(), 1.0 / n());
    cache_->gram = g.selfadjointView<Eigen::Lower>();
  });
  return cache_->gram;
}

const MatrixXd& RegressionData::xty() const {
  std::call_once(cache_->xty_once,
                 [this] { cache_->xty = x_.transpose() * y_ / static_cast<double>(n()); });
  return cache_->xty;
}

RegressionData RegressionData::rows(const std::vector<int>& idx) const {
  MatrixXd xs(idx.size(), p()), ys(idx.size(), q());
  for (size_t i = 0; i < idx.size(); ++i) {
    xs.row(i) = x_.row(idx[i]);
    ys.row(i) = y_.row(idx[i]);
  }
  return RegressionData(std::move(xs), std::move(ys));
}

void check_orthonormal(const MatrixXd& v, double tol, const char* what) {
  const MatrixXd g = v.transpose() * v;
  const double dev = (g - MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  if (!(dev <= tol)) {
    std::ostringstream os;
    os << what << " columns not orthonormal (max deviation " << dev << ")";
    throw ConstraintViolation(os.str());
  }
}

void SvdTriple::validate(double orth_tol, double gap_tol) const {
  if (r() < 1) throw ConstraintViolation("rank must be at least 1");
  if (l.cols() != r() || v.cols() != r()) throw ConstraintViolation("factor shapes disagree with rank");
  check_orthonormal(l, orth_tol, "L");
  check_orthonormal(v, orth_tol, "V");
  if (!(d(r() - 1) > 0)) throw ConstraintViolation("singular values must be positive");
  for (int k = 0; k + 1 < r(); ++k)
    if (!(d(k) - d(k + 1) > gap_tol)) throw ConstraintViolation("singular values not strictly decreasing");
}

void canonicalize_signs(SvdTriple& t) {
  for (int k = 0; k < t.r(); ++k) {
    Eigen::Index i;
    t.v.col(k).cwiseAbs().maxCoeff(&i);
    if (t.v(i, k) < 0) {
      t.v.col(k) *= -1.0;
      t.l.col(k) *= -1.0;
    }
  }
}

SvdTriple svd_triple(const MatrixXd& c, int r) {
  if (r < 1 || r > std::min(c.rows(), c.cols())) throw RankTooLarge("requested rank exceeds min(p, q)");
  Eigen::BDCSVD<MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdTriple t{svd.matrixU().leftCols(r), svd.singularValues().head(r), svd.matrixV().leftCols(r)};
  canonicalize_signs(t);
  return t;
}

MatrixXd compose_coefficient(const SvdTriple& t) {
  return t.l * t.d.asDiagonal() * t.v.transpose();
}

NuisanceView make_view(const MatrixXd& u, const MatrixXd& v, int k, Variant variant) {
  const int r = static_cast<int>(u.cols());
  if (k < 0 || k >= r) throw InvalidArgument("layer index out of range");
  NuisanceView nv;
  nv.k = k;
  nv.variant = variant;
  nv.c1_hat = MatrixXd::Zero(u.rows(), v.rows());
  if (variant == Variant::Weak) {
    nv.u_other = u.rightCols(r - k - 1);
    nv.v_other = v.rightCols(r - k);
    if (k > 0) nv.c1_hat = u.leftCols(k) * v.leftCols(k).transpose();
  } else {
    nv.u_other.resize(u.rows(), r - 1);
    for (int i = 0, c = 0; i < r; ++i)
      if (i != k) nv.u_other.col(c++) = u.col(i);
    nv.v_other = v;
  }
  return nv;
}

namespace {
void check_shapes(const RegressionData& data, const MatrixXd& u, const MatrixXd& v) {
  if (u.rows() != data.p() || v.rows() != data.q() || u.cols() != v.cols())
    throw InvalidArgument("factor shapes do not match data");
}
}  // namespace

double loss(const RegressionData& data, const MatrixXd& u, const MatrixXd& v) {
  check_shapes(data, u, v);
  check_orthonormal(v, 1e-8, "V");
  return (data.y() - data.x() * u * v.transpose()).squaredNorm() / (2.0 * data.n());
}

VectorXd grad_u(const RegressionData& data, const MatrixXd& u, const MatrixXd& v, int k) {
  check_shapes(data, u, v);
  check_orthonormal(v, 1e-8, "V");
  return data.gram() * u.col(k) - data.xty() * v.col(k);
}

VectorXd grad_v(const RegressionData& data, const MatrixXd& u, const MatrixXd& v, int k) {
  check_shapes(data, u, v);
  check_orthonormal(v, 1e-8, "V");
  const VectorXd su = data.gram() * u.col(k);
  return v.col(k) * u.col(k).dot(su) - data.xty().transpose() * u.col(k);
}

VectorXd grad_u_peeled(const RegressionData& data, const NuisanceView& view, const MatrixXd& u,
                       const MatrixXd& v, int k) {
  return grad_u(data, u, v, k) + data.gram() * (view.c1_hat * v.col(k));
}

VectorXd grad_v_peeled(const RegressionData& data, const NuisanceView& view, const MatrixXd& u,
                       const MatrixXd& v, int k) {
  return grad_v(data, u, v, k) + view.c1_hat.transpose() * (data.gram() * u.col(k));
}

}  // namespace sofari
