#ifndef ECQT_QSTATE_HPP
#define ECQT_QSTATE_HPP

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "ecqt/errors.hpp"

namespace ecqt {

using Real = double;
using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Numeric tolerances shared across the library.
constexpr Real kHermTol = 1e-10;    // max |A - A^dag| entrywise
constexpr Real kTraceTol = 1e-10;   // |Tr rho - 1|
constexpr Real kEigFloor = -1e-10;  // eigenvalue floor for PSD checks
constexpr Real kPurityTol = 1e-8;   // |Tr rho^2 - 1| for purity
constexpr Real kNormTol = 1e-12;    // state-vector norm
constexpr Real kGridTol = 1e-9;     // time-grid snapping

// sigma(0) = identity, sigma(1..3) = Pauli matrices in the computational
// basis with sigma(3) = diag(1, -1).
Mat sigma(int k);
Mat ident(int d);

Real herm_residual(const Mat& a);
bool is_hermitian(const Mat& a, Real tol = kHermTol);

// Throw InvalidState unless rho is Hermitian, unit-trace, PSD within
// tolerances.
void validate_density(const Mat& rho);
void validate_pure(const Vec& psi);

Mat projector(const Vec& psi);
Real purity(const Mat& rho);
bool is_pure(const Mat& rho, Real tol = kPurityTol);

// Autocorrelation m = w e^{i alpha}. For mixed histories only w is defined;
// has_phase is false and alpha reads 0.
struct TwoPoint {
  Cplx m{0.0, 0.0};
  Real w = 0.0;
  Real alpha = 0.0;
  bool has_phase = false;
};

// Uniform-grid store of the full state record from t0 onward. Pure
// histories keep state vectors (phases matter for overlaps); mixed ones
// keep density matrices. Rows are never discarded: terms may reach back
// to the initial state at any later time.
class StateHistory {
 public:
  StateHistory(Real t0, Real dt, bool pure);

  bool pure() const { return pure_; }
  Real t0() const { return t0_; }
  Real dt() const { return dt_; }
  int dim() const { return dim_; }
  std::size_t size() const { return pure_ ? psis_.size() : rhos_.size(); }
  bool empty() const { return size() == 0; }
  Real t_back() const { return t0_ + dt_ * Real(size() - 1); }

  void append(const Vec& psi);  // pure histories
  void append(const Mat& rho);  // mixed histories

  // Exact on-grid lookup; tolerance kGridTol, no interpolation.
  std::size_t index_of(Real t) const;
  bool on_grid(Real t) const;

  const Vec& psi_at(Real t) const;
  const Vec& psi_index(std::size_t i) const;
  Mat rho_at(Real t) const;
  Mat rho_index(std::size_t i) const;

 private:
  Real t0_;
  Real dt_;
  bool pure_;
  int dim_ = 0;
  std::vector<Vec> psis_;
  std::vector<Mat> rhos_;
};

TwoPoint two_point(const StateHistory& h, Real t1, Real t2);
TwoPoint n_point(const StateHistory& h, const std::vector<Real>& times);

// Marginal over all subsystems except dims[keep]; flat indices follow the
// Kronecker convention (subsystem 0 is the slowest index).
Mat partial_trace(const Mat& rho, const std::vector<int>& dims, int keep);

// Order-preserving marginal onto a subset of subsystems.
Mat partial_trace_keep(const Mat& rho, const std::vector<int>& dims,
                       const std::vector<int>& keep);

// chi = rho - rho^(1) (x) rho^(2) for a bipartite split.
Mat correlation_operator(const Mat& rho, const std::vector<int>& dims);

Mat kron(const Mat& a, const Mat& b);

}  // namespace ecqt

#endif
