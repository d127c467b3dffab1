#include "ecqt/deform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ecqt/errors.hpp"

namespace ecqt {

Real SpectrumInit::s0() const {
  if (levels() != 2)
    throw NonQubit("population imbalance is a two-level quantity");
  return p0[1] - p0[0];
}

Real SpectrumInit::edge_gap(Real xi) const {
  validate();
  if (xi == 0.0) throw ZeroXi("no drift direction without a deformation");
  int d = levels();
  return xi < 0.0 ? energies[1] - energies[0]
                  : energies[std::size_t(d - 1)] - energies[std::size_t(d - 2)];
}

void SpectrumInit::validate() const {
  int d = levels();
  if (d < 2) throw ConfigError("need at least two levels");
  if (int(p0.size()) != d)
    throw ConfigError("populations must match the spectrum size");
  if (!phases0.empty() && int(phases0.size()) != d)
    throw ConfigError("phases must match the spectrum size");
  for (int i = 0; i < d; ++i)
    if (!std::isfinite(energies[std::size_t(i)]))
      throw ConfigError("energies must be finite");
  for (int i = 1; i < d; ++i)
    if (!(energies[std::size_t(i)] >= energies[std::size_t(i - 1)]))
      throw ConfigError("energies must be sorted ascending");
  if (!(energies[1] > energies[0]) ||
      !(energies[std::size_t(d - 1)] > energies[std::size_t(d - 2)]))
    throw ConfigError("edge levels must be nondegenerate");
  Real sum = 0.0;
  for (Real p : p0) {
    if (!std::isfinite(p) || p < 0.0)
      throw InvalidState("populations must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw InvalidState("populations must sum to one");
}

std::vector<Real> localization_profile(const SpectrumInit& s, Real xi, Real t) {
  s.validate();
  int d = s.levels();
  Real rate = 2.0 * xi / (1.0 + xi * xi);
  std::vector<Real> u(static_cast<std::size_t>(d));
  Real umax = -std::numeric_limits<Real>::infinity();
  for (int n = 0; n < d; ++n) {
    std::size_t k = std::size_t(n);
    u[k] = s.p0[k] > 0.0 ? std::log(s.p0[k]) + rate * s.energies[k] * t
                         : -std::numeric_limits<Real>::infinity();
    umax = std::max(umax, u[k]);
  }
  if (!std::isfinite(umax)) throw ZeroPopulation("all populations vanish");
  std::vector<Real> p(static_cast<std::size_t>(d));
  Real z = 0.0;
  for (int n = 0; n < d; ++n) {
    std::size_t k = std::size_t(n);
    p[k] = std::isfinite(u[k]) ? std::exp(u[k] - umax) : 0.0;
    z += p[k];
  }
  for (Real& v : p) v /= z;
  return p;
}

Real characteristic_time(const SpectrumInit& s, Real xi) {
  if (xi == 0.0) throw ZeroXi("no localization without a deformation");
  return (1.0 + xi * xi) / (2.0 * std::abs(xi) * s.edge_gap(xi));
}

NearMarkovianMap near_markovian_map(Real lambda_tma, Real lambda_r,
                                    Real lambda_i, Real a) {
  if (!(a > 0.0)) throw ConfigError("memory distance must be positive");
  NearMarkovianMap m;
  m.xi1 = a * (lambda_tma + lambda_r);
  m.xi2i = a * lambda_i;
  Real den = 1.0 + m.xi2i;
  if (std::abs(den) < 1e-12)
    throw UnitDenominator("second-order memory term cancels the unit operator");
  m.h_scale = 1.0 / den;
  return m;
}

Real deep_nm_fidelity(const SpectrumInit& s, Real lambda_abs, Real a, Real t) {
  s.validate();
  if (!(a > 0.0)) throw ConfigError("memory distance must be positive");
  if (!(lambda_abs >= 0.0))
    throw ConfigError("coupling magnitude must be nonnegative");
  if (!(s.p0[0] > 0.0)) throw ZeroPopulation("ground level starts empty");
  Real sum = 1.0;
  for (int l = 1; l < s.levels(); ++l) {
    std::size_t k = std::size_t(l);
    sum += (s.p0[k] / s.p0[0]) *
           std::exp(-2.0 * a * lambda_abs * (s.energies[k] - s.energies[0]) * t);
  }
  return 1.0 / sum;
}

CatBSchedule catb_schedule(Real xi, Real delta_e, Real p0_1, Real t) {
  if (xi == 0.0) throw ZeroXi("schedules need a nonzero deformation");
  if (!(delta_e > 0.0)) throw ConfigError("level gap must be positive");
  if (!(p0_1 > 0.0)) throw ZeroPopulation("ground level starts empty");
  if (!(t >= 0.0)) throw ConfigError("time must be nonnegative");
  Real tland = catb_landing(xi, delta_e, p0_1);
  if (t >= tland - 1e-12)
    throw PastLanding("ground level is full: the linear ramp has landed");
  Real p = p0_1 + (2.0 * std::abs(xi) / delta_e) * t;
  CatBSchedule out;
  out.eta = (1.0 + xi * xi) / (delta_e * delta_e * p * (1.0 - p));
  out.lambda = -std::abs(xi);
  return out;
}

Real catb_landing(Real xi, Real delta_e, Real p0_1) {
  if (xi == 0.0) throw ZeroXi("schedules need a nonzero deformation");
  if (!(delta_e > 0.0)) throw ConfigError("level gap must be positive");
  return delta_e * (1.0 - p0_1) / (2.0 * std::abs(xi));
}

Real lyapunov(Real xi, Real delta_e, Real p0_1, Real t) {
  if (!(delta_e > 0.0)) throw ConfigError("level gap must be positive");
  if (!(p0_1 > 0.0)) throw ZeroPopulation("ground level starts empty");
  if (!(t >= 0.0)) throw ConfigError("time must be nonnegative");
  Real p = p0_1;
  if (xi != 0.0) {
    Real teff = std::min(t, catb_landing(xi, delta_e, p0_1));
    p = std::min(1.0, p0_1 + (2.0 * std::abs(xi) / delta_e) * teff);
  }
  return (1.0 + xi * xi) / (delta_e * p);
}

Real cata_tmax(Real xi) {
  Real ax = std::abs(xi);
  if (!(ax > 0.0) || !(ax < 0.5))
    throw XiOutOfRange("closed form needs 0 < |xi| < 1/2");
  return std::sqrt(1.0 - 2.0 * ax) / (2.0 * ax);
}

}  // namespace ecqt
