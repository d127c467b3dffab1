#include "ecqt/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

#include "ecqt/errors.hpp"
#include "ecqt/serialize.hpp"

namespace ecqt {

namespace {

constexpr Real kDriftLimit = 1e-6;

long grid_count(Real span, Real dt, const char* what) {
  long n = std::lround(span / dt);
  if (n < 0 || std::abs(Real(n) * dt - span) > kGridTol)
    throw ConfigError(std::string(what) + " must sit on the step grid");
  return n;
}

// e^{-iH dt} through the Hermitian eigendecomposition; exact up to
// roundoff, so unitarity drift reflects accumulation only.
Mat unitary_of(const Mat& h, Real dt) {
  if (herm_residual(h) > 1e-8)
    throw NonHermitianHamiltonian("generator residual exceeds 1e-8");
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Vec ph(h.rows());
  for (int k = 0; k < h.rows(); ++k)
    ph(k) = std::exp(Cplx(0.0, -es.eigenvalues()(k) * dt));
  return Mat(es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint());
}

Vec dominant_eigenvector(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  Vec psi = es.eigenvectors().col(rho.rows() - 1);
  int imax = 0;
  Real best = -1.0;
  for (int i = 0; i < psi.size(); ++i)
    if (std::abs(psi(i)) > best) {
      best = std::abs(psi(i));
      imax = i;
    }
  Cplx c = psi(imax);
  psi *= std::conj(c) / std::abs(c);
  return psi;
}

void apply_stride(Trajectory& traj, StateHistory&& hist, int stride) {
  if (stride == 1) {
    traj.history = std::move(hist);
    return;
  }
  StateHistory rec(hist.t0(), hist.dt() * Real(stride), hist.pure());
  for (std::size_t k = 0; k < hist.size(); k += std::size_t(stride)) {
    if (hist.pure())
      rec.append(hist.psi_index(k));
    else
      rec.append(hist.rho_index(k));
  }
  traj.history = std::move(rec);
}

// Core of the resolved time-local flow. When breakdown is non-null a
// schedule singularity truncates the run and reports its time instead of
// throwing.
Trajectory timelocal_run(const Mat& h, Real xi,
                         const std::optional<TimeLocalSchedules>& schedules,
                         const Mat& rho0, const IntegratorConfig& cfg,
                         Real* breakdown) {
  if (h.rows() != h.cols() || h.rows() != rho0.rows() || rho0.rows() != rho0.cols())
    throw DimensionMismatch("generator and state dimensions disagree");
  if (herm_residual(h) > 1e-8)
    throw NonHermitianHamiltonian("generator residual exceeds 1e-8");
  validate_density(rho0);
  if (!is_pure(rho0)) throw InvalidState("resolved flow needs a pure state");
  if (!(cfg.dt > 0.0)) throw ConfigError("step must be positive");
  if (cfg.record_stride < 1) throw ConfigError("record stride must be at least 1");
  const long n = grid_count(cfg.horizon, cfg.dt, "horizon");
  if (breakdown) *breakdown = std::numeric_limits<Real>::infinity();

  const Real eref = schedules ? schedules->e_ref : 0.0;
  auto coeffs = [&](Real t, const Vec& state) -> std::pair<Real, Real> {
    if (!schedules) return {1.0, xi};
    Mat rho = (state * state.adjoint()) / state.squaredNorm();
    HistoryView view;
    view.t = t;
    view.delayed = [rho](Real a) -> Mat {
      if (std::abs(a) > kGridTol)
        throw OffGridDistance("time-local schedules see only the present state");
      return rho;
    };
    try {
      return {schedules->eta.value(view), schedules->lambda.value(view)};
    } catch (const NonFiniteCoupling& e) {
      throw ScheduleSingularity(e.what());
    }
  };
  auto rhs = [&](Real t, const Vec& state) -> Vec {
    auto [eta, lam] = coeffs(t, state);
    Vec hpsi = h * state - eref * state;
    Real eps = state.dot(hpsi).real() / state.squaredNorm();
    Cplx pref = eta * Cplx(lam, -1.0) / (1.0 + lam * lam);
    return Vec(pref * (hpsi - Cplx(0.0, lam * eps) * state));
  };

  Vec psi = dominant_eigenvector(rho0);
  StateHistory hist(0.0, cfg.dt, true);
  Trajectory traj;
  traj.series_t0 = 0.0;
  traj.series_dt = cfg.dt;

  // the flow is homogeneous of degree one in psi, so norm drift is a pure
  // scalar factor; march unit states and track the factor for the policy
  Real scale = 1.0;
  for (long i = 0;; ++i) {
    const Real t = cfg.dt * Real(i);
    hist.append(psi);
    try {
      auto [eta, lam] = coeffs(t, psi);
      (void)lam;
      Real eps = (psi.dot(h * psi).real() / psi.squaredNorm()) - eref;
      traj.energies.push_back(eta * eps);
      if (i == n) break;
      Vec k1 = rhs(t, psi);
      Vec k2 = rhs(t + 0.5 * cfg.dt, Vec(psi + 0.5 * cfg.dt * k1));
      Vec k3 = rhs(t + 0.5 * cfg.dt, Vec(psi + 0.5 * cfg.dt * k2));
      Vec k4 = rhs(t + cfg.dt, Vec(psi + cfg.dt * k3));
      psi += (cfg.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const ScheduleSingularity&) {
      if (!breakdown) throw;
      *breakdown = t;
      break;
    }
    Real nn = psi.norm();
    Real drift;
    if (cfg.unitarity_policy == UnitarityPolicy::RenormalizeEachStep) {
      drift = std::abs(nn * nn - 1.0);
    } else {
      scale *= nn;
      drift = std::abs(scale * scale - 1.0);
      if (drift > kDriftLimit)
        throw PurityDriftExceeded("norm drift exceeded 1e-6");
    }
    traj.max_purity_drift = std::max(traj.max_purity_drift, drift);
    psi /= nn;
  }
  apply_stride(traj, std::move(hist), cfg.record_stride);
  return traj;
}

}  // namespace

StateHistory prehistory(const Mat& kicker, const Mat& rho0, Real a_max,
                        Real dt) {
  if (!(dt > 0.0)) throw ConfigError("step must be positive");
  if (a_max < 0.0) throw ConfigError("prehistory span must be nonnegative");
  if (kicker.rows() != kicker.cols() || kicker.rows() != rho0.rows() ||
      rho0.rows() != rho0.cols())
    throw DimensionMismatch("kicker and state dimensions disagree");
  if (herm_residual(kicker) > 1e-8)
    throw NonHermitianKicker("kicker must be Hermitian");
  validate_density(rho0);
  const long n = grid_count(a_max, dt, "prehistory span");

  Eigen::SelfAdjointEigenSolver<Mat> es(kicker);
  const Mat v = es.eigenvectors();
  const auto evals = es.eigenvalues();
  const bool pure = is_pure(rho0);
  StateHistory hist(0.0, dt, pure);
  if (pure) {
    Vec coeff = v.adjoint() * dominant_eigenvector(rho0);
    for (long k = 0; k <= n; ++k) {
      const Real t = dt * Real(k);
      Vec rot(coeff.size());
      for (int j = 0; j < coeff.size(); ++j)
        rot(j) = std::exp(Cplx(0.0, -evals(j) * t)) * coeff(j);
      hist.append(Vec(v * rot));
    }
  } else {
    for (long k = 0; k <= n; ++k) {
      const Real t = dt * Real(k);
      Vec ph(evals.size());
      for (int j = 0; j < evals.size(); ++j)
        ph(j) = std::exp(Cplx(0.0, -evals(j) * t));
      Mat u = v * ph.asDiagonal() * v.adjoint();
      hist.append(Mat(u * rho0 * u.adjoint()));
    }
  }
  return hist;
}

Mat step_unitary(const Mat& h, const Mat& rho, Real dt) {
  if (h.rows() != h.cols() || h.rows() != rho.rows() || rho.rows() != rho.cols())
    throw DimensionMismatch("generator and state dimensions disagree");
  validate_density(rho);
  Mat u = unitary_of(h, dt);
  return Mat(u * rho * u.adjoint());
}

Trajectory evolve(const ECHamiltonianSpec& spec, const Mat& kicker,
                  const Mat& rho0, const IntegratorConfig& cfg) {
  spec.validate();
  if (rho0.rows() != spec.dim || rho0.cols() != spec.dim)
    throw DimensionMismatch("initial state does not match the declared dimension");
  if (!(cfg.dt > 0.0)) throw ConfigError("step must be positive");
  if (cfg.record_stride < 1) throw ConfigError("record stride must be at least 1");

  std::vector<Real> distances;
  for (const TermEntry& e : spec.terms)
    for (const MonomialFactor& f : e.term.factors) {
      long k = std::lround(f.a / cfg.dt);
      if (std::abs(Real(k) * cfg.dt - f.a) > kGridTol)
        throw OffGridDistance("step must divide every memory distance");
      bool seen = false;
      for (Real d : distances)
        if (std::abs(d - f.a) <= 1e-12) {
          seen = true;
          break;
        }
      if (!seen) distances.push_back(f.a);
    }
  std::sort(distances.begin(), distances.end());

  const Real amax = spec.a_max();
  if (cfg.horizon < amax - kGridTol)
    throw ConfigError("horizon must reach past the prehistory");
  const long n_total = grid_count(cfg.horizon, cfg.dt, "horizon");
  const long i0 = std::lround(amax / cfg.dt);

  StateHistory hist = prehistory(kicker, rho0, amax, cfg.dt);
  const bool pure = hist.pure();
  const Real purity0 = pure ? 1.0 : purity(rho0);

  Trajectory traj;
  traj.series_t0 = Real(i0) * cfg.dt;
  traj.series_dt = cfg.dt;
  for (Real d : distances) traj.fidelity_series[d] = {};

  Real scale = 1.0;  // accumulated norm/trace factor of the raw march
  for (long i = i0; i <= n_total; ++i) {
    const Real t = cfg.dt * Real(i);
    const Mat rho_t = hist.rho_index(std::size_t(i));
    const Mat h_t = assemble(spec, view_of(hist, t));
    traj.max_herm_residual =
        std::max(traj.max_herm_residual, herm_residual(h_t));
    traj.energies.push_back((rho_t * h_t).trace().real());
    for (Real d : distances)
      traj.fidelity_series[d].push_back(
          (hist.rho_at(t - d) * rho_t).trace().real());
    if (i == n_total) break;

    Mat h_step = h_t;
    if (cfg.assembly == AssemblyRule::Midpoint) {
      Mat half_rho;
      if (pure) {
        Vec psi_half = unitary_of(h_t, 0.5 * cfg.dt) * hist.psi_index(std::size_t(i));
        half_rho = psi_half * psi_half.adjoint();
      } else {
        Mat u = unitary_of(h_t, 0.5 * cfg.dt);
        half_rho = u * rho_t * u.adjoint();
      }
      HistoryView mid;
      mid.t = t + 0.5 * cfg.dt;
      const Real dtv = cfg.dt;
      mid.delayed = [&hist, half_rho, i, dtv](Real a) -> Mat {
        if (!std::isfinite(a) || a < -kGridTol)
          throw OffGridDistance("memory distance must be nonnegative");
        long k = std::lround(a / dtv);
        if (std::abs(Real(k) * dtv - a) > kGridTol)
          throw OffGridDistance("delayed time does not land on the history grid");
        if (k == 0) return half_rho;
        if (i - k < 0)
          throw MemoryUnderflow("delayed state predates the recorded history");
        // half-step delayed state: average of the bracketing grid rows
        return Mat(0.5 * (hist.rho_index(std::size_t(i - k)) +
                          hist.rho_index(std::size_t(i - k + 1))));
      };
      h_step = assemble(spec, mid);
    }

    // Norm roundoff is a pure scalar factor for exactly unitary steps, so
    // the history keeps unit states while the monitor policy tracks the
    // accumulated factor.
    if (pure) {
      Vec nxt = unitary_of(h_step, cfg.dt) * hist.psi_index(std::size_t(i));
      Real nn = nxt.norm();
      Real drift;
      if (cfg.unitarity_policy == UnitarityPolicy::RenormalizeEachStep) {
        drift = std::abs(nn * nn - 1.0);
      } else {
        scale *= nn;
        drift = std::abs(scale * scale - 1.0);
        if (drift > kDriftLimit)
          throw PurityDriftExceeded("norm drift exceeded 1e-6");
      }
      traj.max_purity_drift = std::max(traj.max_purity_drift, drift);
      hist.append(Vec(nxt / nn));
    } else {
      Mat u = unitary_of(h_step, cfg.dt);
      Mat nxt = u * rho_t * u.adjoint();
      Real tr = nxt.trace().real();
      nxt /= tr;
      Real pd = std::abs(purity(nxt) - purity0);
      Real drift;
      if (cfg.unitarity_policy == UnitarityPolicy::RenormalizeEachStep) {
        drift = std::max(std::abs(tr - 1.0), pd);
      } else {
        scale *= tr;
        drift = std::max(std::abs(scale - 1.0), pd);
        if (drift > kDriftLimit)
          throw PurityDriftExceeded("purity drift exceeded 1e-6");
      }
      traj.max_purity_drift = std::max(traj.max_purity_drift, drift);
      hist.append(nxt);
    }
  }
  apply_stride(traj, std::move(hist), cfg.record_stride);
  return traj;
}

Trajectory evolve_effective_timelocal(
    const Mat& h, Real xi, const std::optional<TimeLocalSchedules>& schedules,
    const Mat& rho0, const IntegratorConfig& cfg) {
  return timelocal_run(h, xi, schedules, rho0, cfg, nullptr);
}

Trajectory evolve_deformed_fixed_point(const Mat& h, Real xi, const Mat& rho0,
                                       const IntegratorConfig& cfg) {
  if (h.rows() != h.cols() || h.rows() != rho0.rows() || rho0.rows() != rho0.cols())
    throw DimensionMismatch("generator and state dimensions disagree");
  if (herm_residual(h) > 1e-8)
    throw NonHermitianHamiltonian("generator residual exceeds 1e-8");
  validate_density(rho0);
  if (!(cfg.dt > 0.0)) throw ConfigError("step must be positive");
  if (cfg.record_stride < 1) throw ConfigError("record stride must be at least 1");
  const long n = grid_count(cfg.horizon, cfg.dt, "horizon");
  const int d = int(h.rows());
  const Real purity0 = purity(rho0);

  StateHistory hist(0.0, cfg.dt, false);
  Trajectory traj;
  traj.series_t0 = 0.0;
  traj.series_dt = cfg.dt;

  Mat rho = rho0;
  Mat rdot = Mat::Zero(d, d);
  Real scale = 1.0;
  for (long i = 0;; ++i) {
    hist.append(rho);
    // converge the step-average derivative of the state
    Mat hmat = h - xi * rdot;
    Mat next = rho;
    for (int it = 0; it < 40; ++it) {
      hmat = h - xi * rdot;
      Mat u = unitary_of(hmat, cfg.dt);
      next = u * rho * u.adjoint();
      Mat nrdot = (next - rho) / cfg.dt;
      Real delta = (nrdot - rdot).cwiseAbs().maxCoeff();
      rdot = nrdot;
      if (delta < 1e-12) break;
    }
    // the derivative term traces to zero on-shell (Tr[rho [H_t, rho]] = 0),
    // so the recorded energy avoids the forward-difference bias
    traj.energies.push_back((rho * h).trace().real());
    if (i == n) break;
    Real tr = next.trace().real();
    next /= tr;
    Real pd = std::abs(purity(next) - purity0);
    Real drift;
    if (cfg.unitarity_policy == UnitarityPolicy::RenormalizeEachStep) {
      drift = std::max(std::abs(tr - 1.0), pd);
    } else {
      scale *= tr;
      drift = std::max(std::abs(scale - 1.0), pd);
      if (drift > kDriftLimit)
        throw PurityDriftExceeded("purity drift exceeded 1e-6");
    }
    traj.max_purity_drift = std::max(traj.max_purity_drift, drift);
    rho = next;
  }
  apply_stride(traj, std::move(hist), cfg.record_stride);
  return traj;
}

Real cata_breakdown(const Mat& h, Real xi, const Mat& rho0,
                    const IntegratorConfig& cfg) {
  if (h.rows() != 2 || h.cols() != 2)
    throw NonQubit("pump breakdown diagnostics are two-level");
  if (std::max(std::abs(h(0, 1)), std::abs(h(1, 0))) > 1e-12)
    throw ConfigError("pump diagnostics need a diagonal Hamiltonian");
  const Real e0 = h(0, 0).real();
  const Real e1 = h(1, 1).real();
  const Real de = std::abs(e1 - e0);
  if (!(de > 0.0)) throw ConfigError("level gap must be positive");
  const Real g = e0 <= e1 ? 0.0 : 1.0;

  TimeLocalSchedules s;
  s.eta = CouplingSchedule::constant_value(1.0);
  s.lambda = CouplingSchedule::builtin_fn(
      "cata_lambda", {{"xi", xi}, {"delta_e", de}, {"ground_index", g}});
  Real breakdown = std::numeric_limits<Real>::infinity();
  timelocal_run(h, xi, s, rho0, cfg, &breakdown);
  return breakdown;
}

void trajectory_save_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const StateHistory& hist = traj.history;
  const int d = hist.dim();
  out << "t";
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      out << ",re_" << r << "_" << c << ",im_" << r << "_" << c;
  out << ",energy";
  for (const auto& kv : traj.fidelity_series)
    out << ",fidelity_a=" << format_real(kv.first);
  out << "\n";
  for (std::size_t i = 0; i < traj.energies.size(); ++i) {
    const Real t = traj.series_time(i);
    out << format_real(t);
    if (hist.on_grid(t)) {
      Mat rho = hist.rho_at(t);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          out << "," << format_real(rho(r, c).real()) << ","
              << format_real(rho(r, c).imag());
    } else {
      for (int k = 0; k < 2 * d * d; ++k) out << ",";
    }
    out << "," << format_real(traj.energies[i]);
    for (const auto& kv : traj.fidelity_series)
      out << ","
          << (i < kv.second.size() ? format_real(kv.second[i]) : std::string());
    out << "\n";
  }
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace ecqt
