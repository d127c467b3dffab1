#ifndef ECQT_DEFORM_HPP
#define ECQT_DEFORM_HPP

#include <vector>

#include "ecqt/qstate.hpp"

namespace ecqt {

// Diagonal data of a time-independent Hamiltonian H = sum E_n |n><n|
// plus the initial occupation of its eigenlevels.
struct SpectrumInit {
  std::vector<Real> energies;  // strictly increasing
  std::vector<Real> p0;        // populations, sum 1
  std::vector<Real> phases0;   // optional initial phases (empty = zeros)

  int levels() const { return int(energies.size()); }
  Real s0() const;                 // p0[1] - p0[0] for two levels
  Real edge_gap(Real xi) const;    // gap at the edge selected by sign(xi)
  void validate() const;
};

// Populations of the velocity-deformed flow at time t: exponential
// reweighting with a shared normalizer, attracted to the edge level
// selected by sign(xi).
std::vector<Real> localization_profile(const SpectrumInit& s, Real xi,
                                       Real t);

// (1+xi^2)/(2|xi|) over the selected edge gap; minimized at |xi| = 1.
Real characteristic_time(const SpectrumInit& s, Real xi);

// Small-memory reduction of the quadratic two-state deformation to the
// single-state one: xi1 = a(lambda_tma + lambda_R), xi2I = a lambda_I,
// equivalent single-state parameters (xi1, H) / (1 + xi2I).
struct NearMarkovianMap {
  Real xi1 = 0.0;
  Real xi2i = 0.0;
  Real h_scale = 0.0;  // 1 / (1 + xi2I)
  Real xi_eff() const { return xi1 * h_scale; }
};

NearMarkovianMap near_markovian_map(Real lambda_tma, Real lambda_r,
                                    Real lambda_i, Real a);

// Dominant ground-state fidelity profile in the delayed single-state
// regime with negative coupling of magnitude lambda_abs.
Real deep_nm_fidelity(const SpectrumInit& s, Real lambda_abs, Real a,
                      Real t);

// Finite-landing schedule: lambda pinned at -|xi|, eta from the linear
// population ramp p_{t,1} = p0_1 + (2|xi|/deltaE) t. Diverges at the
// landing time; callers past it must use the renormalized form.
struct CatBSchedule {
  Real eta = 0.0;
  Real lambda = 0.0;
};

CatBSchedule catb_schedule(Real xi, Real delta_e, Real p0_1, Real t);

Real catb_landing(Real xi, Real delta_e, Real p0_1);

// Energy expectation along the landing schedule; plateau value
// (1+xi^2)/deltaE after landing.
Real lyapunov(Real xi, Real delta_e, Real p0_1, Real t);

// Breakdown time of the unscaled schedule branch: the quadratic for
// lambda_t loses real roots at sqrt(1-2|xi|)/(2|xi|); valid for
// 0 < |xi| < 1/2.
Real cata_tmax(Real xi);

}  // namespace ecqt

#endif
