#ifndef ECQT_CIRCUIT_HPP
#define ECQT_CIRCUIT_HPP

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ecqt/qstate.hpp"

namespace ecqt {

// Gate-level simulator of the interferometric protocol that realizes
// state-history-dependent generators on standard unitary hardware. All
// registers are dense joint density matrices; postselection keeps
// subnormalized branches so success probabilities stay auditable.

// Multi-system register. The trace carries the branch weight: 1 for a
// fresh register, < 1 after postselection.
struct RegisterState {
  std::vector<int> dims;
  Mat dm;

  Real norm() const { return dm.trace().real(); }
};

// Validates shape, Hermiticity, PSD, and trace <= 1.
RegisterState make_register(const std::vector<int>& dims, const Mat& dm);

RegisterState tensor(const RegisterState& a, const RegisterState& b);

// u must be unitary on the register's full space.
RegisterState apply_unitary(const RegisterState& r, const Mat& u);

// Computational-basis projection on one subsystem; dims are unchanged
// and the branch keeps its (reduced) weight. Branch weights over all
// outcomes sum to the input weight.
RegisterState postselect(const RegisterState& r, int subsystem, int outcome);

RegisterState marginal(const RegisterState& r, const std::vector<int>& keep);

// Gates. All exactly unitary.
Mat hadamard();
Mat unbalanced_hadamard(Real delta);  // [[sin d, cos d], [cos d, -sin d]]
Mat phase_shift(Real phi);            // diag(1, e^{i phi}), one-arm shifter
Mat swap_matrix(int d);
// control qubit (slot 0) tensored with the target space
Mat controlled_unitary(const Mat& u, int control_level = 1);
// control qubit at slot 0 of dims; swaps subsystems i and j when the
// control reads 0
Mat controlled_swap_gate(const std::vector<int>& dims, int i, int j);

// Smallest unitary with Tr[U |0><0|] = lam; needs |lam| <= 1.
Mat coupling_unitary(Cplx lam);

// One interferometric coupling: lam = scale * Tr[u gamma]. The scale
// folds into the beam-splitter angle, so couplings outside the unit
// disk stay reachable.
struct ProtocolTerm {
  Mat u;
  Mat gamma;
  Real scale = 1.0;
};

Cplx term_coupling(const ProtocolTerm& t);

struct ProtocolSpec {
  int dim = 2;  // simulator dimension
  std::vector<ProtocolTerm> terms;
  Real delta = 1e-3;  // single-step angle; delta * max|lam| <= 0.1
  int steps = 1;
};

// Interferometer output: control-qubit marginal close to the ray
// |-> - i*delta*lam |+> for small delta. The conjugate flag swaps the
// coupling unitary for its adjoint, conjugating lam.
RegisterState prepare_psi_lambda(const RegisterState& gamma, const Mat& u,
                                 Real delta, bool conjugate = false);

// Controlled-swap pass over (control, rho, rho_p, sigma); the returned
// simulator marginal tracks e^{-i d lam rho rho'} sigma e^{i d lam* rho' rho}
// to second order in delta. The deterministic half weight of the
// balanced split is compensated, so the remaining trace defect is the
// generator's own.
RegisterState dme_halfstep(const RegisterState& psi_ctrl, const Mat& rho,
                           const Mat& rho_p, const Mat& sigma);

// Two half-steps with conjugated control and swapped factors: one full
// step of e^{-i delta H} sigma e^{i delta H}, H = lam rho rho' + lam* rho' rho.
RegisterState monomial_step(const ProtocolTerm& term, const Mat& rho,
                            const Mat& rho_p, const Mat& sigma, Real delta);

// Factor states for a given step and term; the simulator's own current
// state is passed back so present-time factors can use it.
using HistorySupplier =
    std::function<std::pair<Mat, Mat>(int step, int term, const Mat& sigma)>;

struct TrotterResult {
  Mat sigma;
  Real error_bound;
};

// steps * |terms| sequential monomial steps, renormalizing the
// postselected branch after each one. The reported bound is the
// first-order product-formula envelope for total time steps * delta.
TrotterResult trotter_simulate(const ProtocolSpec& p, const Mat& sigma0,
                               const HistorySupplier& supply);

// h = trace_plus * rho_plus - trace_minus * rho_minus with commuting
// PSD parts; an empty side reports zero weight and a zero matrix.
struct SplitHamiltonian {
  Mat rho_plus;
  Mat rho_minus;
  Real trace_plus = 0.0;
  Real trace_minus = 0.0;
};

SplitHamiltonian split_hamiltonian(const Mat& h);

// n swap-generated passes with fresh copies of rho_gen; approximates
// e^{-i t rho_gen} sigma e^{i t rho_gen} (direction +1) or its inverse
// (direction -1) with error O(t^2 / n).
Mat dme_exponentiate(const Mat& rho_gen, const Mat& sigma, Real t, int n,
                     int direction);

// One dt step of e^{-i dt h} rho e^{i dt h} through the two commuting
// split passes.
Mat general_protocol_step(const Mat& h, const Mat& rho, Real dt, int n_plus,
                          int n_minus);

// Finite-sample stand-in for tomographic access: Hermitian noise at the
// 1/sqrt(shots) scale on every entry.
Mat noisy_hamiltonian(const Mat& h, std::uint64_t shots, std::uint64_t seed);

struct ResourceEstimate {
  std::uint64_t systems_per_step = 0;
  std::uint64_t trotter_steps = 0;
  std::uint64_t total_copies = 0;  // saturates at the uint64 ceiling
  std::uint64_t simulator_dimension_exponent = 0;
};

// Scaling laws at unit constants for M monomials over N history points
// with factor degree L, horizon t, and target error epsilon.
ResourceEstimate resource_estimate(int monomials, int history_points,
                                   int factor_degree, Real t, Real epsilon);

}  // namespace ecqt

#endif
