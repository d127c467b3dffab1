#ifndef ECQT_INTEGRATOR_HPP
#define ECQT_INTEGRATOR_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecqt/echam.hpp"
#include "ecqt/qstate.hpp"

namespace ecqt {

enum class UnitarityPolicy { RenormalizeEachStep, MonitorOnly };
enum class ExpMethod { HermitianEigendecomposition };
enum class AssemblyRule { LeftEndpoint, Midpoint };

struct IntegratorConfig {
  Real dt = 1e-3;       // must divide every declared memory distance
  Real horizon = 1.0;   // >= a_max, on the step grid
  UnitarityPolicy unitarity_policy = UnitarityPolicy::MonitorOnly;
  ExpMethod exp_method = ExpMethod::HermitianEigendecomposition;
  int record_stride = 1;
  AssemblyRule assembly = AssemblyRule::LeftEndpoint;
};

// Evolution record. States are recorded at record_stride; the scalar
// series run at full step resolution from series_t0 (the end of the
// prehistory segment) to the horizon inclusive.
struct Trajectory {
  StateHistory history{0.0, 1.0, true};
  Real series_t0 = 0.0;
  Real series_dt = 0.0;
  std::vector<Real> energies;  // Tr[rho_t H_t]
  std::map<Real, std::vector<Real>> fidelity_series;  // a -> (w_{t-a,t})^2
  Real max_purity_drift = 0.0;
  Real max_herm_residual = 0.0;

  Real series_time(std::size_t i) const { return series_t0 + series_dt * Real(i); }
};

// History over [0, a_max] from rho_t = e^{-iKt} rho0 e^{iKt}.
StateHistory prehistory(const Mat& kicker, const Mat& rho0, Real a_max, Real dt);

// Exact unitary conjugation by e^{-iH dt} through the eigendecomposition.
Mat step_unitary(const Mat& h, const Mat& rho, Real dt);

// Delay-aware evolution: prehistory under the kicker, then repeated
// assemble-and-step over [a_max, horizon].
Trajectory evolve(const ECHamiltonianSpec& spec, const Mat& kicker,
                  const Mat& rho0, const IntegratorConfig& cfg);

// Schedules for the resolved time-local flow H = eta (H - e_ref) - lambda
// d(rho)/dt; both schedules see the present state as delayed(0).
struct TimeLocalSchedules {
  CouplingSchedule eta;
  CouplingSchedule lambda;
  Real e_ref = 0.0;
};

// Resolved flow of the derivative-deformed generator: with no schedules,
// |psi'> = (xi - i)/(1 + xi^2) (H - i xi e_t) |psi>, e_t = <psi|H|psi>.
Trajectory evolve_effective_timelocal(
    const Mat& h, Real xi, const std::optional<TimeLocalSchedules>& schedules,
    const Mat& rho0, const IntegratorConfig& cfg);

// Diagnostic per-step fixed-point integration of H - xi d(rho)/dt, for
// cross-validation against the resolved flow.
Trajectory evolve_deformed_fixed_point(const Mat& h, Real xi, const Mat& rho0,
                                       const IntegratorConfig& cfg);

// First time the balanced-pump coupling root goes complex, +inf if the
// run survives to the horizon. h must be diagonal with two distinct
// levels.
Real cata_breakdown(const Mat& h, Real xi, const Mat& rho0,
                    const IntegratorConfig& cfg);

// One row per scalar-series sample: time, state entries where the time is
// on the recorded grid, energy, per-distance fidelities.
void trajectory_save_csv(const Trajectory& traj, const std::string& path);

}  // namespace ecqt

#endif
