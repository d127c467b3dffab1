#ifndef ECQT_REFORM_HPP
#define ECQT_REFORM_HPP

#include <utility>
#include <vector>

#include "ecqt/echam.hpp"

namespace ecqt {

using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Couplings of the two-state quadratic form lambda_t rho_t +
// lambda_tma rho_tma + lambda_R {rho_tma, rho_t} + i lambda_I
// [rho_tma, rho_t] that reproduces a given qubit Hamiltonian.
struct QubitECCouplings {
  Real lambda_t = 0.0;
  Real lambda_tma = 0.0;
  Real lambda_R = 0.0;
  Real lambda_I = 0.0;
};

// Exact inversion for one qubit and pure states; requires w < 1 - 1e-8.
QubitECCouplings ec_couplings_one_qubit(const Mat& h, const Mat& rho_t,
                                        const Mat& rho_tma);

// Closed forms for a time-independent two-level Hamiltonian with spectrum
// (E1, E2) and initial population imbalance s0; only the two combinations
// that move the dynamics are determined.
struct TimeIndependentCouplings {
  Real lambda_bar_R = 0.0;  // lambda_tma + lambda_R
  Real lambda_I = 0.0;
};

TimeIndependentCouplings ec_couplings_time_independent(Real e1, Real e2,
                                                       Real s0, Real a);

struct FidelityPhase {
  Real f = 0.0;         // |<psi_{t-a}|psi_t>|^2
  Real alpha = 0.0;     // overlap phase
  Real df_da = 0.0;
  Real dalpha_da = 0.0;
  Real nu = 0.0;        // mean generator expectation
};

FidelityPhase fidelity_phase_closed_form(Real e1, Real e2, Real s0, Real a);

// Gram system over a monomial basis: h_s = Tr[G_s H], T_sr = Tr[G_s G_r]
// with G_s the unit-coupling Hermitian contribution of basis term s. The
// identity h = T lambda holds exactly for any Hamiltonian assembled from
// the same basis.
struct GramSystem {
  std::vector<MonomialTerm> basis;
  RVec h_vec;
  RMat t_mat;
  RVec lambda_vec;  // filled by solve_couplings
};

RMat build_t_matrix(const std::vector<MonomialTerm>& basis,
                    const StateHistory& history, Real t);
RVec h_vector_for_target(const Mat& h_target,
                         const std::vector<MonomialTerm>& basis,
                         const StateHistory& history, Real t);
GramSystem build_gram_system(const Mat& h_target,
                             const std::vector<MonomialTerm>& basis,
                             const StateHistory& history, Real t);

// Rank-revealing solve of T lambda = h; throws SingularT when the
// estimated condition number exceeds cond_limit.
RVec solve_couplings(const RMat& t_mat, const RVec& h_vec,
                     Real cond_limit = 1e10);
RVec solve_couplings(GramSystem& system, Real cond_limit = 1e10);

Real condition_estimate(const RMat& t_mat);

// Residuals of the two scalar constraints a state-history-independent
// Hamiltonian imposes on constant qubit couplings:
//   r1 = lambda_t + lambda_tma + 2 w^2 lambda_R - trH
//   r2 = lambda_t + w^2 (lambda_tma + 2 lambda_R) - trHrho
std::pair<Real, Real> sqt_constraint_residual(const QubitECCouplings& c,
                                              Real w, Real tr_h,
                                              Real tr_h_rho);

}  // namespace ecqt

#endif
