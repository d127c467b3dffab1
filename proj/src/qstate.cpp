#include "ecqt/qstate.hpp"

#include <cmath>
#include <numeric>

namespace ecqt {

Mat sigma(int k) {
  Mat s(2, 2);
  switch (k) {
    case 0:
      s << 1, 0, 0, 1;
      break;
    case 1:
      s << 0, 1, 1, 0;
      break;
    case 2:
      s << 0, Cplx(0, -1), Cplx(0, 1), 0;
      break;
    case 3:
      s << 1, 0, 0, -1;
      break;
    default:
      throw DimensionMismatch("sigma index must be 0..3");
  }
  return s;
}

Mat ident(int d) { return Mat::Identity(d, d); }

Real herm_residual(const Mat& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const Mat& a, Real tol) {
  return a.rows() == a.cols() && herm_residual(a) <= tol;
}

void validate_density(const Mat& rho) {
  if (rho.rows() != rho.cols() || rho.rows() < 1)
    throw InvalidState("density operator must be square");
  if (herm_residual(rho) > kHermTol)
    throw InvalidState("density operator not Hermitian");
  if (std::abs(rho.trace().real() - 1.0) > kTraceTol ||
      std::abs(rho.trace().imag()) > kTraceTol)
    throw InvalidState("density operator trace != 1");
  Eigen::SelfAdjointEigenSolver<Mat> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigFloor)
    throw InvalidState("density operator has negative eigenvalue");
}

void validate_pure(const Vec& psi) {
  if (psi.size() < 1) throw InvalidState("empty state vector");
  if (std::abs(psi.norm() - 1.0) > kNormTol)
    throw InvalidState("state vector norm != 1");
}

Mat projector(const Vec& psi) { return psi * psi.adjoint(); }

Real purity(const Mat& rho) { return (rho * rho).trace().real(); }

bool is_pure(const Mat& rho, Real tol) {
  return std::abs(purity(rho) - 1.0) <= tol;
}

StateHistory::StateHistory(Real t0, Real dt, bool pure)
    : t0_(t0), dt_(dt), pure_(pure) {
  if (dt <= 0) throw InvalidState("history dt must be positive");
}

void StateHistory::append(const Vec& psi) {
  if (!pure_) throw InvalidState("vector append on a mixed history");
  validate_pure(psi);
  if (dim_ == 0)
    dim_ = int(psi.size());
  else if (int(psi.size()) != dim_)
    throw DimensionMismatch("history row dimension changed");
  psis_.push_back(psi);
}

void StateHistory::append(const Mat& rho) {
  if (pure_) throw InvalidState("matrix append on a pure history");
  validate_density(rho);
  if (dim_ == 0)
    dim_ = int(rho.rows());
  else if (int(rho.rows()) != dim_)
    throw DimensionMismatch("history row dimension changed");
  rhos_.push_back(rho);
}

std::size_t StateHistory::index_of(Real t) const {
  const Real x = (t - t0_) / dt_;
  const long long i = std::llround(x);
  const Real snap = t0_ + dt_ * Real(i);
  if (std::abs(t - snap) > kGridTol * std::max(1.0, std::abs(t)))
    throw OffGridTime("time not on the history grid");
  if (i < 0 || std::size_t(i) >= size())
    throw OffGridTime("time outside recorded history");
  return std::size_t(i);
}

bool StateHistory::on_grid(Real t) const {
  const Real x = (t - t0_) / dt_;
  const long long i = std::llround(x);
  const Real snap = t0_ + dt_ * Real(i);
  return std::abs(t - snap) <= kGridTol * std::max(1.0, std::abs(t)) &&
         i >= 0 && std::size_t(i) < size();
}

const Vec& StateHistory::psi_at(Real t) const { return psi_index(index_of(t)); }

const Vec& StateHistory::psi_index(std::size_t i) const {
  if (!pure_) throw PhaseUndefinedForMixed("no state vector in mixed history");
  return psis_.at(i);
}

Mat StateHistory::rho_at(Real t) const { return rho_index(index_of(t)); }

Mat StateHistory::rho_index(std::size_t i) const {
  if (pure_) return projector(psis_.at(i));
  return rhos_.at(i);
}

TwoPoint two_point(const StateHistory& h, Real t1, Real t2) {
  const std::size_t i1 = h.index_of(t1);
  const std::size_t i2 = h.index_of(t2);
  TwoPoint tp;
  if (h.pure()) {
    const Cplx m = h.psi_index(i1).dot(h.psi_index(i2));  // <psi1|psi2>
    tp.m = m;
    tp.w = std::abs(m);
    tp.alpha = std::arg(m);
    tp.has_phase = true;
  } else {
    const Real f = (h.rho_index(i1) * h.rho_index(i2)).trace().real();
    tp.w = std::sqrt(std::max(0.0, f));
    tp.m = Cplx(tp.w, 0.0);
    tp.alpha = 0.0;
    tp.has_phase = false;
  }
  return tp;
}

TwoPoint n_point(const StateHistory& h, const std::vector<Real>& times) {
  if (times.size() < 2) throw OffGridTime("n_point needs at least two times");
  if (!h.pure())
    throw PhaseUndefinedForMixed("chained overlaps need a pure history");
  TwoPoint out;
  out.m = Cplx(1.0, 0.0);
  out.w = 1.0;
  out.alpha = 0.0;
  out.has_phase = true;
  for (std::size_t r = 0; r + 1 < times.size(); ++r) {
    const TwoPoint tp = two_point(h, times[r], times[r + 1]);
    out.m *= tp.m;
    out.w *= tp.w;
    out.alpha += tp.alpha;
  }
  out.alpha = std::remainder(out.alpha, 2.0 * M_PI);
  return out;
}

namespace {

long long stride_after(const std::vector<int>& dims, std::size_t k) {
  long long s = 1;
  for (std::size_t j = k + 1; j < dims.size(); ++j) s *= dims[j];
  return s;
}

}  // namespace

Mat partial_trace_keep(const Mat& rho, const std::vector<int>& dims,
                       const std::vector<int>& keep) {
  long long total = 1;
  for (int d : dims) {
    if (d < 1) throw DimensionMismatch("subsystem dims must be positive");
    total *= d;
  }
  if (rho.rows() != total || rho.cols() != total)
    throw DimensionMismatch("dims do not factor the operator");
  std::vector<char> kept(dims.size(), 0);
  for (int k : keep) {
    if (k < 0 || std::size_t(k) >= dims.size())
      throw DimensionMismatch("keep index out of range");
    kept[k] = 1;
  }
  long long dk = 1, de = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) (kept[i] ? dk : de) *= dims[i];

  std::vector<long long> strides(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    strides[i] = stride_after(dims, i);

  // flat index of (kept multi-index a, env multi-index e)
  auto flat = [&](long long a, long long e) {
    long long idx = 0, ra = a, re = e;
    for (std::size_t i = dims.size(); i-- > 0;) {
      long long digit;
      if (kept[i]) {
        digit = ra % dims[i];
        ra /= dims[i];
      } else {
        digit = re % dims[i];
        re /= dims[i];
      }
      idx += digit * strides[i];
    }
    return idx;
  };

  Mat out = Mat::Zero(dk, dk);
  for (long long a = 0; a < dk; ++a)
    for (long long b = 0; b < dk; ++b) {
      Cplx s = 0.0;
      for (long long e = 0; e < de; ++e) s += rho(flat(a, e), flat(b, e));
      out(a, b) = s;
    }
  return out;
}

Mat partial_trace(const Mat& rho, const std::vector<int>& dims, int keep) {
  return partial_trace_keep(rho, dims, {keep});
}

Mat correlation_operator(const Mat& rho, const std::vector<int>& dims) {
  if (dims.size() != 2)
    throw DimensionMismatch("correlation operator needs a bipartite split");
  const Mat r1 = partial_trace(rho, dims, 0);
  const Mat r2 = partial_trace(rho, dims, 1);
  return rho - kron(r1, r2);
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace ecqt
