#ifndef ECQT_ECHAM_HPP
#define ECQT_ECHAM_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecqt/qstate.hpp"

namespace ecqt {

// Factor selector restricted to one tensor slot: partial-trace to
// dims[keep], raise to the power, re-embed against identity.
struct SubState {
  std::vector<int> dims;
  int keep = 0;
};

struct MonomialFactor {
  Real a = 0.0;  // memory distance; 0 means the present state
  int power = 1;
  std::optional<SubState> subsystem;
  bool transpose = false;  // apply elementwise transpose after the power
};

enum class Parity { Plus, Minus };

// Product S0 * F1 * S1 * ... * Fn * Sn of delayed states and fixed
// sandwich operators; parity picks M + M^dag or i(M - M^dag).
struct MonomialTerm {
  Parity parity = Parity::Plus;
  std::vector<MonomialFactor> factors;
  std::vector<Mat> sandwiches;  // empty means all-identity; else n+1 entries
};

// Present-time assembly context: the present time plus delayed-state
// access. The integrator's midpoint rule substitutes half-step states
// without materializing a history.
struct HistoryView {
  Real t = 0.0;
  std::function<Mat(Real)> delayed;  // a -> rho_{t-a}
};

struct CouplingSchedule {
  enum class Kind { Constant, Table, Builtin };
  Kind kind = Kind::Constant;

  Real constant = 0.0;

  Real table_t0 = 0.0;
  Real table_dt = 0.0;
  std::vector<Real> table;

  std::string builtin;
  std::map<std::string, Real> params;
  Mat target_h;  // used by the reformulation builtins

  static CouplingSchedule constant_value(Real v);
  static CouplingSchedule table_series(Real t0, Real dt, std::vector<Real> v);
  static CouplingSchedule builtin_fn(std::string name,
                                     std::map<std::string, Real> params,
                                     Mat target = Mat());

  Real value(const HistoryView& view) const;
};

struct TermEntry {
  MonomialTerm term;
  CouplingSchedule coupling;
};

struct ECHamiltonianSpec {
  int dim = 0;
  Mat sqt_part;  // empty means zero
  std::vector<TermEntry> terms;

  Real a_max() const;
  int history_states() const;      // N: distinct memory distances
  int max_monomial_length() const; // L: largest sum of powers in a term
  void validate() const;
};

HistoryView view_of(const StateHistory& history, Real t);

// Full symmetrized/antisymmetrized monomial: (+) gives M + M^dag, (-)
// gives M - M^dag. A single Hermitian factor therefore comes out doubled
// here; assemble applies the bare-form normalization.
Mat eval_monomial(const MonomialTerm& term, const StateHistory& history,
                  Real t);
Mat eval_monomial_raw(const MonomialTerm& term, const HistoryView& view,
                      int dim);

Mat assemble(const ECHamiltonianSpec& spec, const StateHistory& history,
             Real t);
Mat assemble(const ECHamiltonianSpec& spec, const HistoryView& view);

// Hermitian unit-coupling contribution of one term, exactly as assemble
// composes them: single Hermitian-content factors enter bare, longer
// products as M + M^dag, antihermitian ones as i(M - M^dag). The
// coupling-recovery machinery builds its basis from this same function so
// the linear identity between couplings and trace projections is exact.
Mat term_contribution(const MonomialTerm& term, const HistoryView& view,
                      int dim);

// Diagonal-in-basis Hamiltonian weighted by the state's own occupation
// probabilities.
Mat gross_pitaevskii(const Vec& psi, const std::vector<Mat>& projectors);

// |Tr[rho (H - H^dag)]|; vanishes when the generator is an isometry.
Real isometry_residual(const Mat& h, const Mat& rho);

}  // namespace ecqt

#endif
