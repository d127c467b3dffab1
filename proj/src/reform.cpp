#include "ecqt/reform.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/QR>

#include "ecqt/errors.hpp"

namespace ecqt {

QubitECCouplings ec_couplings_one_qubit(const Mat& h, const Mat& rho_t,
                                        const Mat& rho_tma) {
  if (h.rows() != 2 || h.cols() != 2 || rho_t.rows() != 2 || rho_t.cols() != 2 ||
      rho_tma.rows() != 2 || rho_tma.cols() != 2)
    throw NonQubit("closed-form coupling recovery is a one-qubit construction");
  if (!is_hermitian(h, 1e-8))
    throw NonHermitianHamiltonian("target Hamiltonian must be Hermitian");
  validate_density(rho_t);
  validate_density(rho_tma);
  if (!is_pure(rho_t) || !is_pure(rho_tma))
    throw InvalidState("coupling recovery needs pure states");

  Real w2 = (rho_tma * rho_t).trace().real();
  if (w2 >= 1.0 - 1e-8)
    throw DegenerateOverlap("present and delayed states coincide");
  if (w2 <= 1e-12)
    throw DegenerateOverlap("orthogonal states: the quadratic terms vanish");

  Real x = (rho_t * h).trace().real();
  Real y = (rho_tma * h).trace().real();
  Cplx z = (rho_tma * h * rho_t).trace();
  Real g2 = 1.0 - w2;
  Real g4 = g2 * g2;

  QubitECCouplings c;
  c.lambda_t = (x + w2 * y - 2.0 * z.real()) / g4;
  c.lambda_tma = (y + w2 * x - 2.0 * z.real()) / g4;
  c.lambda_R = ((1.0 + 1.0 / w2) * z.real() - (x + y)) / g4;
  c.lambda_I = z.imag() / (w2 * g2);
  return c;
}

TimeIndependentCouplings ec_couplings_time_independent(Real e1, Real e2,
                                                       Real s0, Real a) {
  if (!(e2 > e1)) throw ConfigError("spectrum must satisfy e2 > e1");
  if (!(std::abs(s0) <= 1.0 + 1e-12))
    throw ConfigError("population imbalance must lie in [-1, 1]");
  Real de = e2 - e1;
  TimeIndependentCouplings c;
  if (std::abs(s0) >= 1.0 - 1e-12) {
    // stationary eigenstate: the commutator term is inert, fixed to zero
    c.lambda_bar_R = s0 * de / 2.0;
    c.lambda_I = 0.0;
    return c;
  }
  Real f = 0.5 * (1.0 + s0 * s0 + (1.0 - s0 * s0) * std::cos(a * de));
  Real g2 = 1.0 - f;
  if (f < 1e-12 || g2 < 1e-12)
    throw SingularMemoryDistance("memory distance sits at a fidelity extremum");
  Real dfda = -0.5 * (1.0 - s0 * s0) * de * std::sin(a * de);
  c.lambda_bar_R = s0 * de / (2.0 * f);
  c.lambda_I = dfda / (2.0 * f * g2);
  return c;
}

FidelityPhase fidelity_phase_closed_form(Real e1, Real e2, Real s0, Real a) {
  if (!(e2 > e1)) throw ConfigError("spectrum must satisfy e2 > e1");
  if (!(std::abs(s0) <= 1.0 + 1e-12))
    throw ConfigError("population imbalance must lie in [-1, 1]");
  Real de = e2 - e1;
  Cplx m = 0.5 * (1.0 - s0) * std::exp(Cplx(0.0, -a * e1)) +
           0.5 * (1.0 + s0) * std::exp(Cplx(0.0, -a * e2));
  FidelityPhase out;
  out.f = std::norm(m);
  if (out.f < 1e-24)
    throw SingularMemoryDistance("vanishing overlap: the phase is undefined");
  out.alpha = std::atan2(m.imag(), m.real());
  out.df_da = -0.5 * (1.0 - s0 * s0) * de * std::sin(a * de);
  out.dalpha_da = -((e1 + e2) * out.f + s0 * de) / (2.0 * out.f);
  out.nu = 0.5 * (e1 + e2 + s0 * de);
  return out;
}

namespace {

std::vector<Mat> basis_contributions(const std::vector<MonomialTerm>& basis,
                                     const StateHistory& history, Real t) {
  if (!history.pure())
    throw InvalidState("coupling recovery runs on pure histories");
  if (basis.empty()) throw ConfigError("empty monomial basis");
  HistoryView view = view_of(history, t);
  std::vector<Mat> g;
  g.reserve(basis.size());
  for (const MonomialTerm& b : basis)
    g.push_back(term_contribution(b, view, history.dim()));
  return g;
}

}  // namespace

RMat build_t_matrix(const std::vector<MonomialTerm>& basis,
                    const StateHistory& history, Real t) {
  std::vector<Mat> g = basis_contributions(basis, history, t);
  int n = int(g.size());
  RMat tm(n, n);
  for (int s = 0; s < n; ++s)
    for (int r = s; r < n; ++r) {
      Real v = (g[std::size_t(s)] * g[std::size_t(r)]).trace().real();
      tm(s, r) = v;
      tm(r, s) = v;
    }
  return tm;
}

RVec h_vector_for_target(const Mat& h_target,
                         const std::vector<MonomialTerm>& basis,
                         const StateHistory& history, Real t) {
  if (h_target.rows() != history.dim() || h_target.cols() != history.dim())
    throw DimensionMismatch("target does not match the history dimension");
  if (!is_hermitian(h_target, 1e-8))
    throw NonHermitianHamiltonian("target Hamiltonian must be Hermitian");
  std::vector<Mat> g = basis_contributions(basis, history, t);
  RVec h(long(g.size()));
  for (std::size_t s = 0; s < g.size(); ++s)
    h(long(s)) = (g[s] * h_target).trace().real();
  return h;
}

GramSystem build_gram_system(const Mat& h_target,
                             const std::vector<MonomialTerm>& basis,
                             const StateHistory& history, Real t) {
  GramSystem sys;
  sys.basis = basis;
  sys.t_mat = build_t_matrix(basis, history, t);
  sys.h_vec = h_vector_for_target(h_target, basis, history, t);
  return sys;
}

RVec solve_couplings(const RMat& t_mat, const RVec& h_vec, Real cond_limit) {
  if (t_mat.rows() != t_mat.cols() || t_mat.rows() != h_vec.size())
    throw DimensionMismatch("Gram matrix and projection vector disagree");
  if (t_mat.rows() == 0) throw ConfigError("empty monomial basis");
  Eigen::ColPivHouseholderQR<RMat> qr(t_mat);
  auto diag = qr.matrixQR().diagonal();
  Real biggest = std::abs(diag(0));
  Real smallest = std::abs(diag(diag.size() - 1));
  if (!(smallest > 0.0) || biggest / smallest > cond_limit)
    throw SingularT("Gram matrix is numerically singular");
  return qr.solve(h_vec);
}

RVec solve_couplings(GramSystem& system, Real cond_limit) {
  system.lambda_vec = solve_couplings(system.t_mat, system.h_vec, cond_limit);
  return system.lambda_vec;
}

Real condition_estimate(const RMat& t_mat) {
  if (t_mat.rows() == 0 || t_mat.rows() != t_mat.cols())
    throw DimensionMismatch("Gram matrix must be square and nonempty");
  Eigen::ColPivHouseholderQR<RMat> qr(t_mat);
  auto diag = qr.matrixQR().diagonal();
  Real biggest = std::abs(diag(0));
  Real smallest = std::abs(diag(diag.size() - 1));
  if (!(smallest > 0.0)) return std::numeric_limits<Real>::infinity();
  return biggest / smallest;
}

std::pair<Real, Real> sqt_constraint_residual(const QubitECCouplings& c,
                                              Real w, Real tr_h,
                                              Real tr_h_rho) {
  Real w2 = w * w;
  Real r1 = c.lambda_t + c.lambda_tma + 2.0 * w2 * c.lambda_R - tr_h;
  Real r2 = c.lambda_t + w2 * (c.lambda_tma + 2.0 * c.lambda_R) - tr_h_rho;
  return {r1, r2};
}

}  // namespace ecqt
